#include "jrnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace jrnet {

namespace {

const std::set<std::string> kKnownKeys = {
    "seed",
    "filter.ecg.sos_file",
    "filter.eda.cutoff_hz",
    "filter.eda.order",
    "filter.resp.cutoff_hz",
    "filter.resp.order",
    "window.hop_s",
    "window.face_s",
    "window.head_s",
    "window.ecg_s",
    "window.eda_s",
    "window.resp_s",
    "window.min_count",
    "scr.bartlett_s",
    "scr.min_amplitude_us",
    "resp.prominence_fraction",
    "resp.min_spacing_s",
    "embed.m",
    "embed.tau",
    "embed.rate",
    "embed.standardize",
    "net.diversity_segments",
    "model.svm_c",
    "model.svr_c",
    "model.svr_epsilon",
    "model.permutations",
    "baseline.correct",
    "face.ridge_lambda",
    "face.max_iterations",
    "face.tol_px",
    "face.residual_reject_factor",
    "face.gap_fill_max_s",
    "face.model_file",
};

} // namespace

PipelineConfig PipelineConfig::from_config(const Config& raw) {
    for (const std::string& key : raw.keys())
        if (!kKnownKeys.count(key) && key.rfind("study.", 0) != 0)
            throw std::runtime_error("unknown config key: " + key);

    PipelineConfig c;
    c.seed = static_cast<std::uint64_t>(raw.get_int_or("seed", 1234));
    c.ecg_sos_file = raw.get_or("filter.ecg.sos_file", "");
    c.eda_cutoff_hz = raw.get_double_or("filter.eda.cutoff_hz", c.eda_cutoff_hz);
    c.eda_order = static_cast<int>(raw.get_int_or("filter.eda.order", c.eda_order));
    c.resp_cutoff_hz = raw.get_double_or("filter.resp.cutoff_hz", c.resp_cutoff_hz);
    c.resp_order = static_cast<int>(raw.get_int_or("filter.resp.order", c.resp_order));

    c.window_plan.hop_s = raw.get_double_or("window.hop_s", c.window_plan.hop_s);
    auto& ws = c.window_plan.window_s;
    ws[Modality::face] = raw.get_double_or("window.face_s", ws[Modality::face]);
    ws[Modality::head] = raw.get_double_or("window.head_s", ws[Modality::head]);
    ws[Modality::ecg] = raw.get_double_or("window.ecg_s", ws[Modality::ecg]);
    ws[Modality::eda] = raw.get_double_or("window.eda_s", ws[Modality::eda]);
    ws[Modality::resp] = raw.get_double_or("window.resp_s", ws[Modality::resp]);
    c.window_plan.min_windows =
        static_cast<std::size_t>(raw.get_int_or("window.min_count", c.window_plan.min_windows));
    c.window_plan.scr.bartlett_window_s =
        raw.get_double_or("scr.bartlett_s", c.window_plan.scr.bartlett_window_s);
    c.window_plan.scr.min_amplitude_us =
        raw.get_double_or("scr.min_amplitude_us", c.window_plan.scr.min_amplitude_us);
    c.window_plan.resp.prominence_fraction =
        raw.get_double_or("resp.prominence_fraction", c.window_plan.resp.prominence_fraction);
    c.window_plan.resp.min_spacing_s =
        raw.get_double_or("resp.min_spacing_s", c.window_plan.resp.min_spacing_s);

    c.embed_m = static_cast<int>(raw.get_int_or("embed.m", c.embed_m));
    c.embed_tau = static_cast<int>(raw.get_int_or("embed.tau", c.embed_tau));
    c.recurrence_rate_target = raw.get_double_or("embed.rate", c.recurrence_rate_target);
    c.standardize = raw.get_bool_or("embed.standardize", c.standardize);

    c.net.diversity_segments =
        static_cast<int>(raw.get_int_or("net.diversity_segments", c.net.diversity_segments));

    c.svm_c = raw.get_double_or("model.svm_c", c.svm_c);
    c.svr_c = raw.get_double_or("model.svr_c", c.svr_c);
    c.svr_epsilon = raw.get_double_or("model.svr_epsilon", c.svr_epsilon);
    c.permutations = raw.get_int_or("model.permutations", c.permutations);
    c.baseline_correction = raw.get_bool_or("baseline.correct", c.baseline_correction);

    c.fit.ridge_lambda = raw.get_double_or("face.ridge_lambda", c.fit.ridge_lambda);
    c.fit.max_iterations = static_cast<int>(raw.get_int_or("face.max_iterations", c.fit.max_iterations));
    c.fit.tol_px = raw.get_double_or("face.tol_px", c.fit.tol_px);
    c.residual_reject_factor =
        raw.get_double_or("face.residual_reject_factor", c.residual_reject_factor);
    c.gap_fill_max_s = raw.get_double_or("face.gap_fill_max_s", c.gap_fill_max_s);
    c.face_model_file = raw.get_or("face.model_file", "");

    // validation before any compute
    if (c.embed_m < 1) throw std::runtime_error("embed.m must be >= 1");
    if (c.embed_tau < 1) throw std::runtime_error("embed.tau must be >= 1");
    if (c.recurrence_rate_target <= 0 || c.recurrence_rate_target > 1)
        throw std::runtime_error("embed.rate must be in (0, 1]");
    if (c.window_plan.hop_s <= 0) throw std::runtime_error("window.hop_s must be positive");
    if (c.svm_c <= 0 || c.svr_c <= 0) throw std::runtime_error("model C must be positive");
    if (c.svr_epsilon < 0) throw std::runtime_error("model.svr_epsilon must be non-negative");
    if (c.permutations < 1) throw std::runtime_error("model.permutations must be >= 1");
    if (c.net.diversity_segments < 1)
        throw std::runtime_error("net.diversity_segments must be >= 1");
    return c;
}

Config PipelineConfig::to_config() const {
    Config raw;
    raw.set_int("seed", static_cast<long>(seed));
    raw.set("filter.ecg.sos_file", ecg_sos_file);
    raw.set_double("filter.eda.cutoff_hz", eda_cutoff_hz);
    raw.set_int("filter.eda.order", eda_order);
    raw.set_double("filter.resp.cutoff_hz", resp_cutoff_hz);
    raw.set_int("filter.resp.order", resp_order);
    raw.set_double("window.hop_s", window_plan.hop_s);
    raw.set_double("window.face_s", window_plan.window_s.at(Modality::face));
    raw.set_double("window.head_s", window_plan.window_s.at(Modality::head));
    raw.set_double("window.ecg_s", window_plan.window_s.at(Modality::ecg));
    raw.set_double("window.eda_s", window_plan.window_s.at(Modality::eda));
    raw.set_double("window.resp_s", window_plan.window_s.at(Modality::resp));
    raw.set_int("window.min_count", static_cast<long>(window_plan.min_windows));
    raw.set_double("scr.bartlett_s", window_plan.scr.bartlett_window_s);
    raw.set_double("scr.min_amplitude_us", window_plan.scr.min_amplitude_us);
    raw.set_double("resp.prominence_fraction", window_plan.resp.prominence_fraction);
    raw.set_double("resp.min_spacing_s", window_plan.resp.min_spacing_s);
    raw.set_int("embed.m", embed_m);
    raw.set_int("embed.tau", embed_tau);
    raw.set_double("embed.rate", recurrence_rate_target);
    raw.set_bool("embed.standardize", standardize);
    raw.set_int("net.diversity_segments", net.diversity_segments);
    raw.set_double("model.svm_c", svm_c);
    raw.set_double("model.svr_c", svr_c);
    raw.set_double("model.svr_epsilon", svr_epsilon);
    raw.set_int("model.permutations", permutations);
    raw.set_bool("baseline.correct", baseline_correction);
    raw.set_double("face.ridge_lambda", fit.ridge_lambda);
    raw.set_int("face.max_iterations", fit.max_iterations);
    raw.set_double("face.tol_px", fit.tol_px);
    raw.set_double("face.residual_reject_factor", residual_reject_factor);
    raw.set_double("face.gap_fill_max_s", gap_fill_max_s);
    raw.set("face.model_file", face_model_file);
    return raw;
}

BiquadCascade builtin_ecg_bandpass() {
    // elliptic bandpass 5-45 Hz at fs = 1000 Hz (order 4, 0.5 dB ripple,
    // 50 dB stopband); identical to data/elliptic_ecg_5_45_fs1000.sos
    BiquadCascade cascade;
    cascade.sections = {
        {0.0040978700210598214, -0.0033160688193150508, 0.0040978700210598223,
         -1.8092945832236635, 0.83955668565085395},
        {1.0, -1.6922704621809479, 1.0, -1.8538414080138454, 0.93392164383069554},
        {1.0, -1.9999528309086219, 1.0, -1.9513575737889031, 0.95371118856576076},
        {1.0, -1.9997601123453286, 1.0000000000000002, -1.991707467650619, 0.99264949895028587},
    };
    cascade.design_meta.kind = "elliptic-bandpass";
    cascade.design_meta.cutoffs_hz = {5.0, 45.0};
    cascade.design_meta.order = 4;
    cascade.design_meta.sample_rate_hz = 1000.0;
    return cascade;
}

BiquadCascade PipelineConfig::ecg_filter(double sample_rate_hz) const {
    if (!ecg_sos_file.empty()) return load_sos_file(ecg_sos_file);
    if (sample_rate_hz == 1000.0) return builtin_ecg_bandpass();
    // the bundled elliptic coefficients are tied to 1000 Hz; design a
    // Butterworth with the same band for other rates
    return design_butterworth(FilterKind::bandpass, {5.0, 45.0}, 4, sample_rate_hz);
}

BiquadCascade PipelineConfig::eda_filter(double sample_rate_hz) const {
    return design_butterworth(FilterKind::lowpass, {eda_cutoff_hz}, eda_order, sample_rate_hz);
}

BiquadCascade PipelineConfig::resp_filter(double sample_rate_hz) const {
    return design_butterworth(FilterKind::lowpass, {resp_cutoff_hz}, resp_order, sample_rate_hz);
}

ShapeModel PipelineConfig::shape_model() const {
    if (!face_model_file.empty()) return load_shape_model(face_model_file);
    return default_shape_model();
}

// ---------------------------------------------------------------------------
// per-trial processing

LandmarkFitTrace fit_landmark_trace(const SignalTrace& landmarks, const ShapeModel& model,
                                    const PipelineConfig& config) {
    const std::vector<LandmarkFrame> frames = trace_to_landmarks(landmarks);
    const std::size_t n = frames.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    std::vector<std::array<double, 6>> face(n), head(n);
    std::vector<bool> good(n, false);
    LandmarkFitTrace out;
    out.residuals_px.assign(n, nan);

    std::vector<double> fitted_residuals;
    for (std::size_t i = 0; i < n; ++i) {
        if (!frames[i].valid) continue;
        try {
            FitResult fit = fit_camera_and_shape(frames[i].points_2d, model, config.fit);
            HeadPose pose = decompose_pose(fit.camera);
            Eigen::Matrix<double, 6, 1> f = face_features(frontalize(model, fit.alphas));
            Eigen::Matrix<double, 6, 1> h = head_features(pose);
            for (int c = 0; c < 6; ++c) {
                face[i][c] = f(c);
                head[i][c] = h(c);
            }
            out.residuals_px[i] = fit.residual_px;
            fitted_residuals.push_back(fit.residual_px);
            good[i] = true;
        } catch (const std::runtime_error&) {
            // degenerate frame: treated like a detector dropout
        }
    }
    if (fitted_residuals.empty()) throw std::runtime_error("no fittable landmark frames");

    // frames whose residual exceeds reject_factor x median are dropped
    std::nth_element(fitted_residuals.begin(), fitted_residuals.begin() + fitted_residuals.size() / 2,
                     fitted_residuals.end());
    double median = fitted_residuals[fitted_residuals.size() / 2];
    double limit = config.residual_reject_factor * median + 1e-6;
    for (std::size_t i = 0; i < n; ++i)
        if (good[i] && out.residuals_px[i] > limit) {
            good[i] = false;
            ++out.rejected_frames;
        }

    // linear interpolation across short gaps
    const std::size_t max_gap =
        static_cast<std::size_t>(config.gap_fill_max_s * landmarks.sample_rate_hz);
    std::size_t i = 0;
    while (i < n) {
        if (good[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !good[j]) ++j;
        bool has_left = i > 0, has_right = j < n;
        if (has_left && has_right && j - i <= max_gap) {
            for (std::size_t k = i; k < j; ++k) {
                double u = static_cast<double>(k - (i - 1)) / static_cast<double>(j - (i - 1));
                for (int c = 0; c < 6; ++c) {
                    face[k][c] = (1 - u) * face[i - 1][c] + u * face[j][c];
                    head[k][c] = (1 - u) * head[i - 1][c] + u * head[j][c];
                }
                good[k] = true;
            }
        }
        i = j;
    }

    auto build = [&](const std::vector<std::array<double, 6>>& src,
                     const std::array<const char*, 6>& names) {
        SignalTrace t;
        t.sample_rate_hz = landmarks.sample_rate_hz;
        t.start_time_s = landmarks.start_time_s;
        t.channels.assign(6, std::vector<double>(n, nan));
        for (const char* name : names) t.channel_labels.push_back(name);
        for (std::size_t k = 0; k < n; ++k)
            if (good[k])
                for (int c = 0; c < 6; ++c) t.channels[c][k] = src[k][c];
        return t;
    };
    out.face_feats = build(face, kFaceFeatureNames);
    out.head_feats = build(head, kHeadFeatureNames);
    return out;
}

WindowPlan resting_window_plan(const PipelineConfig& config) {
    WindowPlan plan = config.window_plan;
    plan.min_windows = static_cast<std::size_t>((config.embed_m - 1) * config.embed_tau + 3);
    return plan;
}

WindowedTrial process_traces(const std::map<Modality, SignalTrace>& physio,
                             const SignalTrace& landmarks, const ShapeModel& model,
                             const PipelineConfig& config) {
    return process_traces(physio, landmarks, model, config, config.window_plan);
}

WindowedTrial process_traces(const std::map<Modality, SignalTrace>& physio,
                             const SignalTrace& landmarks, const ShapeModel& model,
                             const PipelineConfig& config, const WindowPlan& plan) {
    WindowInputs inputs;
    inputs.ecg = filtfilt(config.ecg_filter(physio.at(Modality::ecg).sample_rate_hz),
                          physio.at(Modality::ecg));
    inputs.eda = filtfilt(config.eda_filter(physio.at(Modality::eda).sample_rate_hz),
                          physio.at(Modality::eda));
    inputs.resp = filtfilt(config.resp_filter(physio.at(Modality::resp).sample_rate_hz),
                           physio.at(Modality::resp));
    LandmarkFitTrace fits = fit_landmark_trace(landmarks, model, config);
    inputs.face_feats = std::move(fits.face_feats);
    inputs.head_feats = std::move(fits.head_feats);
    return windowize(inputs, plan);
}

TrialMetrics metrics_from_windows(const WindowedTrial& windows, const PipelineConfig& config) {
    std::vector<RecurrencePlot> plots;
    TrialMetrics out;
    for (Modality m : kAllModalities) {
        EmbeddedTrajectory traj =
            embed(windows.series.at(m), config.embed_m, config.embed_tau, config.standardize);
        plots.push_back(recurrence_plot(traj, ThresholdSpec::target(config.recurrence_rate_target)));
        out.single[m] = metric_vector(to_network(as_joint(plots.back())), config.net);
    }
    out.fusion = metric_vector(to_network(joint_recurrence_plot(plots)), config.net);
    return out;
}

std::vector<TrialResult> evaluate_session(const Session& session, const PipelineConfig& config) {
    const ShapeModel model = config.shape_model();

    std::vector<const SignalTrace*> ratings;
    for (const TrialRecord& t : session.trials) ratings.push_back(&t.rating_trace);

    std::optional<TrialMetrics> resting; // shared across the session's trials
    std::vector<TrialResult> results;
    for (const TrialRecord& trial : session.trials) {
        TrialResult r;
        r.subject_id = trial.subject_id;
        r.trial_id = trial.stimulus_id;
        r.valence = trial.valence_label;
        r.rating_target = prepare_rating_target(trial.rating_trace, ratings);
        r.metrics = metrics_from_windows(process_traces(trial.traces, trial.landmarks, model, config),
                                         config);
        if (trial.has_resting && !resting)
            resting = metrics_from_windows(
                process_traces(trial.resting, trial.resting_landmarks, model, config,
                               resting_window_plan(config)),
                config);
        r.resting = resting;
        results.push_back(std::move(r));
    }
    return results;
}

std::string to_string(FeatureSet set) {
    switch (set) {
    case FeatureSet::ecg: return "ecg";
    case FeatureSet::eda: return "eda";
    case FeatureSet::resp: return "resp";
    case FeatureSet::face: return "face";
    case FeatureSet::head: return "head";
    case FeatureSet::facial: return "facial";
    case FeatureSet::physio: return "physio";
    case FeatureSet::fusion: return "fusion";
    }
    return "?";
}

namespace {

std::vector<Modality> set_members(FeatureSet set) {
    switch (set) {
    case FeatureSet::ecg: return {Modality::ecg};
    case FeatureSet::eda: return {Modality::eda};
    case FeatureSet::resp: return {Modality::resp};
    case FeatureSet::face: return {Modality::face};
    case FeatureSet::head: return {Modality::head};
    case FeatureSet::facial: return {Modality::face, Modality::head};
    case FeatureSet::physio: return {Modality::ecg, Modality::eda, Modality::resp};
    case FeatureSet::fusion: return {};
    }
    return {};
}

} // namespace

std::vector<LabeledExample> make_examples(const std::vector<TrialResult>& results, FeatureSet set,
                                          bool baseline_correct_flag) {
    std::vector<LabeledExample> examples;
    for (const TrialResult& r : results) {
        LabeledExample ex;
        ex.subject_id = r.subject_id;
        ex.trial_id = r.trial_id;
        ex.label = r.valence;
        ex.target = r.rating_target;

        auto append = [&](const NetworkMetricVector& trial,
                          const NetworkMetricVector* rest) {
            for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i) {
                double v = trial.values[i];
                if (baseline_correct_flag && rest) v -= rest->values[i];
                ex.features.push_back(v);
            }
        };

        if (set == FeatureSet::fusion) {
            append(r.metrics.fusion, r.resting ? &r.resting->fusion : nullptr);
        } else {
            for (Modality m : set_members(set))
                append(r.metrics.single.at(m), r.resting ? &r.resting->single.at(m) : nullptr);
        }

        for (double v : ex.features)
            if (!std::isfinite(v)) throw std::runtime_error("non-finite feature value");
        examples.push_back(std::move(ex));
    }
    return examples;
}

} // namespace jrnet
