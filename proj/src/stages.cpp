#include "jrnet/pipeline.hpp"
#include "jrnet/study.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

// Disk pipeline: each stage reads the previous stage's files, writes its own
// directory, and records a cache marker (stage.meta) keyed by its config
// subset chained with the upstream hash. A stage whose marker matches is
// skipped entirely.

namespace jrnet {

namespace {

namespace fs = std::filesystem;

constexpr const char* kStageFilter = "10_filter";
constexpr const char* kStageFacefit = "20_facefit";
constexpr const char* kStageFeaturize = "30_features";
constexpr const char* kStageRecur = "40_recur";
constexpr const char* kStageMetrics = "50_metrics";
constexpr const char* kStageTrain = "55_train";
constexpr const char* kStageReport = "60_report";

const std::array<FeatureSet, 6> kReportedSingleSets = {FeatureSet::ecg,  FeatureSet::eda,
                                                       FeatureSet::resp, FeatureSet::face,
                                                       FeatureSet::head, FeatureSet::fusion};

std::uint64_t hash_file(const fs::path& path, std::uint64_t h) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
    }
    return h;
}

std::vector<fs::path> session_dirs(const fs::path& data_root) {
    if (fs::exists(data_root / "study.manifest")) return list_study_sessions(data_root);
    if (fs::exists(data_root / "session.manifest")) return {data_root};
    throw std::runtime_error("no study.manifest or session.manifest under " + data_root.string());
}

std::string input_tree_hash(const fs::path& data_root) {
    std::uint64_t h = 14695981039346656037ull;
    for (const fs::path& dir : session_dirs(data_root)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.is_regular_file()) files.push_back(entry.path());
        std::sort(files.begin(), files.end());
        for (const fs::path& f : files) {
            h = fnv1a64(f.filename().string()) ^ h;
            h = hash_file(f, h);
        }
    }
    return to_hex(h);
}

std::string chain_hash(const std::string& upstream, const std::string& subset) {
    return to_hex(fnv1a64(upstream + ":" + subset));
}

bool stage_fresh(const fs::path& stage_dir, const std::string& expected) {
    fs::path meta = stage_dir / "stage.meta";
    if (!fs::exists(meta)) return false;
    try {
        return Config::parse_file(meta).get_or("hash", "") == expected;
    } catch (const std::runtime_error&) {
        return false;
    }
}

void write_stage_meta(const fs::path& stage_dir, const std::string& hash) {
    Config meta;
    meta.set("hash", hash);
    std::ofstream out(stage_dir / "stage.meta");
    out << meta.serialize();
    if (!out) throw std::runtime_error("cannot write stage.meta in " + stage_dir.string());
}

// per-stage config subsets (a hyperparameter sweep must not invalidate the
// expensive upstream stages)
std::string subset_filter(const PipelineConfig& c) {
    Config s;
    s.set("filter.ecg.sos_file", c.ecg_sos_file);
    s.set_double("filter.eda.cutoff_hz", c.eda_cutoff_hz);
    s.set_int("filter.eda.order", c.eda_order);
    s.set_double("filter.resp.cutoff_hz", c.resp_cutoff_hz);
    s.set_int("filter.resp.order", c.resp_order);
    return s.serialize();
}

std::string subset_face(const PipelineConfig& c) {
    Config s;
    s.set_double("face.ridge_lambda", c.fit.ridge_lambda);
    s.set_int("face.max_iterations", c.fit.max_iterations);
    s.set_double("face.tol_px", c.fit.tol_px);
    s.set_double("face.residual_reject_factor", c.residual_reject_factor);
    s.set_double("face.gap_fill_max_s", c.gap_fill_max_s);
    s.set("face.model_file", c.face_model_file);
    return s.serialize();
}

std::string subset_window(const PipelineConfig& c) {
    Config s;
    s.set_double("window.hop_s", c.window_plan.hop_s);
    for (Modality m : kAllModalities)
        s.set_double("window." + to_string(m) + "_s", c.window_plan.window_s.at(m));
    s.set_int("window.min_count", static_cast<long>(c.window_plan.min_windows));
    s.set_double("scr.bartlett_s", c.window_plan.scr.bartlett_window_s);
    s.set_double("scr.min_amplitude_us", c.window_plan.scr.min_amplitude_us);
    s.set_double("resp.prominence_fraction", c.window_plan.resp.prominence_fraction);
    s.set_double("resp.min_spacing_s", c.window_plan.resp.min_spacing_s);
    return s.serialize();
}

std::string subset_embed(const PipelineConfig& c) {
    Config s;
    s.set_int("embed.m", c.embed_m);
    s.set_int("embed.tau", c.embed_tau);
    s.set_double("embed.rate", c.recurrence_rate_target);
    s.set_bool("embed.standardize", c.standardize);
    return s.serialize();
}

std::string subset_net(const PipelineConfig& c) {
    Config s;
    s.set_int("net.diversity_segments", c.net.diversity_segments);
    return s.serialize();
}

std::string subset_infer(const PipelineConfig& c) {
    Config s;
    s.set_double("model.svm_c", c.svm_c);
    s.set_double("model.svr_c", c.svr_c);
    s.set_double("model.svr_epsilon", c.svr_epsilon);
    s.set_int("model.permutations", c.permutations);
    s.set_bool("baseline.correct", c.baseline_correction);
    s.set_int("seed", static_cast<long>(c.seed));
    return s.serialize();
}

struct HashChain {
    std::string input, filter, face, window, embed, net, infer;
};

HashChain make_chain(const PipelineConfig& c, const fs::path& data_root) {
    HashChain h;
    h.input = input_tree_hash(data_root);
    h.filter = chain_hash(h.input, subset_filter(c));
    h.face = chain_hash(h.filter, subset_face(c));
    h.window = chain_hash(h.face, subset_window(c));
    h.embed = chain_hash(h.window, subset_embed(c));
    h.net = chain_hash(h.embed, subset_net(c));
    h.infer = chain_hash(h.net, subset_infer(c));
    return h;
}

// trial units processed by the per-trial stages ("rest" is the shared
// resting recording, run through the identical path)
struct TrialRef {
    std::string subject;
    std::string trial; // stimulus id or "rest"
};

std::vector<TrialRef> trial_refs(const fs::path& data_root) {
    std::vector<TrialRef> refs;
    for (const fs::path& dir : session_dirs(data_root)) {
        Config manifest = Config::parse_file(dir / "session.manifest");
        std::string subject = manifest.get("subject");
        for (const std::string& id : manifest.get_list("trials")) refs.push_back({subject, id});
        if (manifest.has("resting.trace.ecg")) refs.push_back({subject, "rest"});
    }
    return refs;
}

fs::path session_dir_of(const fs::path& data_root, const std::string& subject) {
    if (fs::exists(data_root / "study.manifest")) return data_root / subject;
    return data_root;
}

SignalTrace read_feature_trace(const fs::path& path, double rate, std::size_t channels) {
    std::vector<std::string> labels(channels);
    for (std::size_t i = 0; i < channels; ++i) labels[i] = "f" + std::to_string(i);
    return read_channel_file(path, rate, labels);
}

void write_feature_series(const fs::path& path, const FeatureWindowSeries& fw,
                          const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# config " << config_hash << '\n';
    out << "# modality " << to_string(fw.modality) << '\n';
    out << "# window_s " << format_double(fw.window_s) << '\n';
    out << "# hop_s " << format_double(fw.hop_s) << '\n';
    out << "# columns start_s";
    for (const std::string& n : fw.feature_names) out << ' ' << n;
    out << '\n';
    for (std::size_t i = 0; i < fw.size(); ++i) {
        out << format_double(fw.window_starts_s[i]);
        for (double v : fw.vectors[i]) out << ' ' << format_double(v);
        out << '\n';
    }
}

FeatureWindowSeries read_feature_series(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    FeatureWindowSeries fw;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string key;
            ls >> key;
            if (key == "modality") {
                std::string v;
                ls >> v;
                fw.modality = modality_from_string(v);
            } else if (key == "window_s") {
                ls >> fw.window_s;
            } else if (key == "hop_s") {
                ls >> fw.hop_s;
            } else if (key == "columns") {
                std::string col;
                ls >> col; // start_s
                while (ls >> col) fw.feature_names.push_back(col);
            }
            continue;
        }
        std::istringstream ls(line);
        double start;
        ls >> start;
        std::vector<double> row;
        double v;
        while (ls >> v) row.push_back(v);
        if (row.size() != fw.feature_names.size())
            throw std::runtime_error(path.string() + ": row width mismatch");
        fw.window_starts_s.push_back(start);
        fw.vectors.push_back(std::move(row));
    }
    return fw;
}

} // namespace

// ---------------------------------------------------------------------------

void emit_rp_image(const BinaryMatrix& matrix, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    out << "P5\n" << matrix.n << ' ' << matrix.n << "\n255\n";
    std::vector<unsigned char> row(matrix.n);
    for (std::size_t i = 0; i < matrix.n; ++i) { // row 0 = time 0 at the top
        for (std::size_t j = 0; j < matrix.n; ++j) row[j] = matrix(i, j) ? 0 : 255;
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_rp_sparse(const BinaryMatrix& matrix, const fs::path& path, const Config& meta) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("unwritable path: " + path.string());
    for (const auto& [k, v] : meta.entries()) out << "# " << k << " = " << v << '\n';
    out << "n " << matrix.n << '\n';
    for (std::size_t i = 0; i < matrix.n; ++i)
        for (std::size_t j = i + 1; j < matrix.n; ++j)
            if (matrix(i, j)) out << i << ' ' << j << '\n';
}

BinaryMatrix read_rp_sparse(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::string line;
    BinaryMatrix m;
    bool have_n = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        if (!have_n) {
            std::string tag;
            std::size_t n;
            ls >> tag >> n;
            if (tag != "n") throw std::runtime_error(path.string() + ": expected size header");
            m = BinaryMatrix(n);
            for (std::size_t i = 0; i < n; ++i) m(i, i) = 1;
            have_n = true;
            continue;
        }
        std::size_t i, j;
        ls >> i >> j;
        m(i, j) = 1;
        m(j, i) = 1;
    }
    if (!have_n) throw std::runtime_error(path.string() + ": missing size header");
    return m;
}

// ---------------------------------------------------------------------------
// stages

void stage_filter(const PipelineConfig& config, const fs::path& data_root, const fs::path& out) {
    const fs::path dir = out / kStageFilter;
    const HashChain chain = make_chain(config, data_root);
    if (stage_fresh(dir, chain.filter)) return;
    try {
        const std::string hash = config.hash();
        for (const fs::path& sdir : session_dirs(data_root)) {
            Config manifest = Config::parse_file(sdir / "session.manifest");
            std::string subject = manifest.get("subject");
            fs::create_directories(dir / subject);

            auto filter_one = [&](const std::string& prefix, const std::string& out_stem) {
                for (Modality m : {Modality::ecg, Modality::eda, Modality::resp}) {
                    std::string name = to_string(m);
                    SignalTrace raw =
                        read_channel_file(sdir / manifest.get(prefix + ".trace." + name),
                                          manifest.get_double(prefix + ".rate." + name), {name});
                    BiquadCascade cascade = m == Modality::ecg
                                                ? config.ecg_filter(raw.sample_rate_hz)
                                                : (m == Modality::eda
                                                       ? config.eda_filter(raw.sample_rate_hz)
                                                       : config.resp_filter(raw.sample_rate_hz));
                    write_channel_file(dir / subject / (out_stem + "_" + name + ".txt"),
                                       filtfilt(cascade, raw), {"config " + hash});
                }
            };
            for (const std::string& id : manifest.get_list("trials")) filter_one("trial." + id, id);
            if (manifest.has("resting.trace.ecg")) filter_one("resting", "rest");
        }
        write_stage_meta(dir, chain.filter);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("filter", e.what());
    }
}

void stage_facefit(const PipelineConfig& config, const fs::path& data_root, const fs::path& out) {
    const fs::path dir = out / kStageFacefit;
    const HashChain chain = make_chain(config, data_root);
    if (stage_fresh(dir, chain.face)) return;
    try {
        const std::string hash = config.hash();
        const ShapeModel model = config.shape_model();
        for (const fs::path& sdir : session_dirs(data_root)) {
            Config manifest = Config::parse_file(sdir / "session.manifest");
            std::string subject = manifest.get("subject");
            fs::create_directories(dir / subject);

            auto fit_one = [&](const std::string& prefix, const std::string& out_stem) {
                SignalTrace landmarks = read_channel_file(
                    sdir / manifest.get(prefix + ".trace.landmarks"),
                    manifest.get_double(prefix + ".rate.landmarks"),
                    [] {
                        std::vector<std::string> l;
                        for (int i = 0; i < kNumLandmarks; ++i) {
                            l.push_back("x" + std::to_string(i));
                            l.push_back("y" + std::to_string(i));
                        }
                        return l;
                    }());
                LandmarkFitTrace fits = fit_landmark_trace(landmarks, model, config);
                write_channel_file(dir / subject / (out_stem + "_face.txt"), fits.face_feats,
                                   {"config " + hash});
                write_channel_file(dir / subject / (out_stem + "_head.txt"), fits.head_feats,
                                   {"config " + hash});
            };
            for (const std::string& id : manifest.get_list("trials")) fit_one("trial." + id, id);
            if (manifest.has("resting.trace.landmarks")) fit_one("resting", "rest");
        }
        write_stage_meta(dir, chain.face);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("facefit", e.what());
    }
}

void stage_featurize(const PipelineConfig& config, const fs::path& data_root, const fs::path& out) {
    const fs::path dir = out / kStageFeaturize;
    const HashChain chain = make_chain(config, data_root);
    if (stage_fresh(dir, chain.window)) return;
    try {
        const std::string hash = config.hash();
        for (const TrialRef& ref : trial_refs(data_root)) {
            fs::path sdir = session_dir_of(data_root, ref.subject);
            Config manifest = Config::parse_file(sdir / "session.manifest");
            std::string prefix = ref.trial == "rest" ? "resting" : "trial." + ref.trial;
            fs::create_directories(dir / ref.subject);

            WindowInputs inputs;
            auto filtered = [&](Modality m) {
                std::string name = to_string(m);
                return read_channel_file(out / kStageFilter / ref.subject /
                                             (ref.trial + "_" + name + ".txt"),
                                         manifest.get_double(prefix + ".rate." + name), {name});
            };
            inputs.ecg = filtered(Modality::ecg);
            inputs.eda = filtered(Modality::eda);
            inputs.resp = filtered(Modality::resp);
            double fps = manifest.get_double(prefix + ".rate.landmarks");
            inputs.face_feats = read_feature_trace(
                out / kStageFacefit / ref.subject / (ref.trial + "_face.txt"), fps, 6);
            inputs.head_feats = read_feature_trace(
                out / kStageFacefit / ref.subject / (ref.trial + "_head.txt"), fps, 6);

            WindowedTrial windows = windowize(
                inputs, ref.trial == "rest" ? resting_window_plan(config) : config.window_plan);
            for (Modality m : kAllModalities)
                write_feature_series(dir / ref.subject /
                                         (ref.trial + "_" + to_string(m) + ".fw.txt"),
                                     windows.series.at(m), hash);

            // annotation sidecars
            std::ofstream rp(dir / ref.subject / (ref.trial + "_rpeaks.txt"));
            rp << "# config " << hash << "\n# r_s q_s s_s area_mvs\n";
            for (std::size_t i = 0; i < windows.qrs.r_peaks_s.size(); ++i)
                rp << format_double(windows.qrs.r_peaks_s[i]) << ' '
                   << format_double(windows.qrs.q_points_s[i]) << ' '
                   << format_double(windows.qrs.s_points_s[i]) << ' '
                   << format_double(windows.qrs.qrs_areas[i]) << '\n';
            std::ofstream sc(dir / ref.subject / (ref.trial + "_scrs.txt"));
            sc << "# config " << hash << "\n# start_s peak_s amplitude_us duration_s rise_s\n";
            for (const ScrEvent& ev : windows.scrs)
                sc << format_double(ev.start_s) << ' ' << format_double(ev.peak_s) << ' '
                   << format_double(ev.amplitude) << ' ' << format_double(ev.duration_s) << ' '
                   << format_double(ev.rise_time_s) << '\n';
        }
        write_stage_meta(dir, chain.window);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("featurize", e.what());
    }
}

void stage_recur(const PipelineConfig& config, const fs::path& out) {
    const fs::path dir = out / kStageRecur;
    // the input hash is recorded by the featurize stage marker
    fs::path upstream_meta = out / kStageFeaturize / "stage.meta";
    if (!fs::exists(upstream_meta))
        throw StageError("recur", "missing featurize stage outputs (run featurize first)");
    const std::string upstream = Config::parse_file(upstream_meta).get("hash");
    const std::string expected = chain_hash(upstream, subset_embed(config));
    if (stage_fresh(dir, expected)) return;
    try {
        const std::string hash = config.hash();
        for (const auto& subject_entry : fs::directory_iterator(out / kStageFeaturize)) {
            if (!subject_entry.is_directory()) continue;
            std::string subject = subject_entry.path().filename().string();
            fs::create_directories(dir / subject);

            // collect trial ids from the feature files
            std::set<std::string> trials;
            for (const auto& f : fs::directory_iterator(subject_entry.path())) {
                std::string name = f.path().filename().string();
                auto pos = name.find("_ecg.fw.txt");
                if (pos != std::string::npos) trials.insert(name.substr(0, pos));
            }
            for (const std::string& trial : trials) {
                std::vector<RecurrencePlot> plots;
                for (Modality m : kAllModalities) {
                    FeatureWindowSeries fw = read_feature_series(
                        subject_entry.path() / (trial + "_" + to_string(m) + ".fw.txt"));
                    EmbeddedTrajectory traj =
                        embed(fw, config.embed_m, config.embed_tau, config.standardize);
                    plots.push_back(
                        recurrence_plot(traj, ThresholdSpec::target(config.recurrence_rate_target)));

                    Config meta;
                    meta.set("config", hash);
                    meta.set("modality", to_string(m));
                    meta.set_int("m", config.embed_m);
                    meta.set_int("tau", config.embed_tau);
                    meta.set_double("epsilon", plots.back().epsilon);
                    meta.set_double("rate_target", config.recurrence_rate_target);
                    meta.set_double("rate_achieved", plots.back().achieved_rate);
                    fs::path stem = dir / subject / (trial + "_" + to_string(m));
                    write_rp_sparse(plots.back().matrix, stem.string() + ".rp.txt", meta);
                    emit_rp_image(plots.back().matrix, stem.string() + ".rp.pgm");
                }
                JointRecurrencePlot jrp = joint_recurrence_plot(plots);
                Config meta;
                meta.set("config", hash);
                meta.set("modality", "joint");
                meta.set_int("m", config.embed_m);
                meta.set_int("tau", config.embed_tau);
                meta.set_double("rate_achieved", recurrence_rate(jrp.matrix));
                fs::path stem = dir / subject / (trial + "_joint");
                write_rp_sparse(jrp.matrix, stem.string() + ".rp.txt", meta);
                emit_rp_image(jrp.matrix, stem.string() + ".rp.pgm");
            }
        }
        write_stage_meta(dir, expected);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("recur", e.what());
    }
}

namespace {

struct MetricRow {
    std::string subject, trial, kind;
    std::string valence = "-";
    double rating_target = 0.0;
    NetworkMetricVector metrics;
};

void write_metric_rows(const fs::path& path, const std::vector<MetricRow>& rows,
                       const std::string& hash) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "# config " << hash << '\n';
    out << "# columns subject trial kind valence rating_target";
    for (const char* n : kNetworkMetricNames) out << ' ' << n;
    out << '\n';
    for (const MetricRow& r : rows) {
        out << r.subject << ' ' << r.trial << ' ' << r.kind << ' ' << r.valence << ' '
            << format_double(r.rating_target);
        for (double v : r.metrics.values) out << ' ' << format_double(v);
        out << '\n';
    }
}

std::vector<MetricRow> read_metric_rows(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<MetricRow> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        MetricRow r;
        ls >> r.subject >> r.trial >> r.kind >> r.valence >> r.rating_target;
        for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i) ls >> r.metrics.values[i];
        if (!ls) throw std::runtime_error(path.string() + ": malformed metric row");
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace

void stage_metrics(const PipelineConfig& config, const fs::path& data_root, const fs::path& out) {
    const fs::path dir = out / kStageMetrics;
    const HashChain chain = make_chain(config, data_root);
    if (stage_fresh(dir, chain.net)) return;
    try {
        const std::string hash = config.hash();
        fs::create_directories(dir);

        std::map<std::string, std::vector<MetricRow>> per_set; // set name -> rows
        for (const fs::path& sdir : session_dirs(data_root)) {
            Config manifest = Config::parse_file(sdir / "session.manifest");
            std::string subject = manifest.get("subject");

            // rating targets need the subject's full session of ratings
            std::vector<SignalTrace> ratings;
            std::vector<std::string> trial_ids = manifest.get_list("trials");
            for (const std::string& id : trial_ids)
                ratings.push_back(read_channel_file(sdir / manifest.get("trial." + id + ".trace.rating"),
                                                    manifest.get_double("trial." + id + ".rate.rating"),
                                                    {"rating"}));
            std::vector<const SignalTrace*> rating_ptrs;
            for (const SignalTrace& r : ratings) rating_ptrs.push_back(&r);

            std::vector<std::string> units = trial_ids;
            if (manifest.has("resting.trace.ecg")) units.push_back("rest");

            for (std::size_t u = 0; u < units.size(); ++u) {
                const std::string& trial = units[u];
                std::map<std::string, BinaryMatrix> adj;
                for (Modality m : kAllModalities)
                    adj[to_string(m)] = read_rp_sparse(out / kStageRecur / subject /
                                                       (trial + "_" + to_string(m) + ".rp.txt"));
                adj["fusion"] = read_rp_sparse(out / kStageRecur / subject / (trial + "_joint.rp.txt"));

                MetricRow base;
                base.subject = subject;
                base.trial = trial;
                base.kind = trial == "rest" ? "rest" : "trial";
                if (trial != "rest") {
                    base.valence = manifest.get("trial." + trial + ".valence");
                    base.rating_target = prepare_rating_target(ratings[u], rating_ptrs);
                }
                for (auto& [set, matrix] : adj) {
                    for (std::size_t i = 0; i < matrix.n; ++i) matrix(i, i) = 0; // to network
                    MetricRow row = base;
                    row.metrics = metric_vector(matrix, config.net);
                    per_set[set].push_back(std::move(row));
                }
            }
        }
        for (const auto& [set, rows] : per_set)
            write_metric_rows(dir / ("metrics_" + set + ".txt"), rows, hash);
        write_stage_meta(dir, chain.net);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("metrics", e.what());
    }
}

namespace {

std::vector<LabeledExample> examples_from_rows(const std::vector<MetricRow>& rows,
                                               bool baseline_correct_flag) {
    std::map<std::string, const MetricRow*> resting;
    for (const MetricRow& r : rows)
        if (r.kind == "rest") resting[r.subject] = &r;

    std::vector<LabeledExample> examples;
    for (const MetricRow& r : rows) {
        if (r.kind != "trial") continue;
        LabeledExample ex;
        ex.subject_id = r.subject;
        ex.trial_id = r.trial;
        ex.label = valence_from_string(r.valence);
        ex.target = r.rating_target;
        const MetricRow* rest = nullptr;
        if (baseline_correct_flag) {
            auto it = resting.find(r.subject);
            if (it != resting.end()) rest = it->second;
        }
        for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i)
            ex.features.push_back(r.metrics.values[i] - (rest ? rest->metrics.values[i] : 0.0));
        examples.push_back(std::move(ex));
    }
    return examples;
}

std::vector<LabeledExample> concat_examples(const std::vector<std::vector<LabeledExample>>& parts) {
    std::vector<LabeledExample> out = parts.at(0);
    for (std::size_t p = 1; p < parts.size(); ++p) {
        if (parts[p].size() != out.size()) throw std::runtime_error("feature set size mismatch");
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i].features.insert(out[i].features.end(), parts[p][i].features.begin(),
                                   parts[p][i].features.end());
    }
    return out;
}

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", 100.0 * v);
    return buf;
}

std::string num(double v, const char* fmt = "%.2f") {
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v);
    return buf;
}

void write_row(std::ofstream& txt, std::ofstream& tsv, const std::string& name,
               const std::vector<std::string>& cells) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-8s", name.c_str());
    txt << buf;
    tsv << name;
    for (const std::string& c : cells) {
        std::snprintf(buf, sizeof buf, "%10s", c.c_str());
        txt << buf;
        tsv << '\t' << c;
    }
    txt << '\n';
    tsv << '\n';
}

} // namespace

void stage_train(const PipelineConfig& config, const fs::path& out) {
    const fs::path dir = out / kStageTrain;
    fs::path upstream_meta = out / kStageMetrics / "stage.meta";
    if (!fs::exists(upstream_meta))
        throw StageError("train", "missing metrics stage outputs (run metrics first)");
    const std::string upstream = Config::parse_file(upstream_meta).get("hash");
    const std::string expected = chain_hash(upstream, subset_infer(config) + "train");
    if (stage_fresh(dir, expected)) return;
    try {
        fs::create_directories(dir);
        auto rows = read_metric_rows(out / kStageMetrics / "metrics_fusion.txt");
        auto examples = examples_from_rows(rows, config.baseline_correction);

        FeatureScaler scaler = FeatureScaler::fit(examples);
        std::vector<LabeledExample> standardized = examples;
        for (auto& ex : standardized) ex.features = scaler.apply(ex.features);
        SvmModel svm = train_svm(standardized, config.svm_c, config.seed);
        SvrModel svr = train_svr(standardized, config.svr_c, config.svr_epsilon, config.seed);

        std::ofstream mf(dir / "models.txt");
        mf << "# config " << config.hash() << "\n";
        mf << "# fusion models fitted on the full dataset (no cross-validation)\n";
        mf << "svm_bias " << format_double(svm.bias) << '\n';
        mf << "svm_weights";
        for (double w : svm.weights) mf << ' ' << format_double(w);
        mf << "\nsvr_bias " << format_double(svr.bias) << '\n';
        mf << "svr_weights";
        for (double w : svr.weights) mf << ' ' << format_double(w);
        mf << '\n';
        write_stage_meta(dir, expected);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("train", e.what());
    }
}

void stage_report(const PipelineConfig& config, const fs::path& out) {
    const fs::path dir = out / kStageReport;
    fs::path upstream_meta = out / kStageMetrics / "stage.meta";
    if (!fs::exists(upstream_meta))
        throw StageError("report", "missing metrics stage outputs (run metrics first)");
    const std::string upstream = Config::parse_file(upstream_meta).get("hash");
    const std::string expected = chain_hash(upstream, subset_infer(config));
    if (stage_fresh(dir, expected)) return;
    try {
        fs::create_directories(dir);
        const std::string hash = config.hash();

        std::map<std::string, std::vector<LabeledExample>> sets;
        for (FeatureSet s : kReportedSingleSets) {
            auto rows = read_metric_rows(out / kStageMetrics / ("metrics_" + to_string(s) + ".txt"));
            sets[to_string(s)] = examples_from_rows(rows, config.baseline_correction);
        }
        sets["facial"] = concat_examples({sets["face"], sets["head"]});
        sets["physio"] = concat_examples({sets["ecg"], sets["eda"], sets["resp"]});

        CvOptions cv;
        cv.svm_c = config.svm_c;
        cv.svr_c = config.svr_c;
        cv.svr_epsilon = config.svr_epsilon;
        cv.permutations = config.permutations;
        cv.seed = config.seed;

        const std::vector<std::string> class_rows = {"ecg", "eda", "resp", "face", "head", "fusion"};
        const std::vector<std::string> reg_rows = {"ecg",  "eda",    "resp",   "face",
                                                   "head", "facial", "physio", "fusion"};

        std::ofstream txt(dir / "classification.txt");
        std::ofstream tsv(dir / "classification.tsv");
        txt << "# config " << hash << '\n';
        txt << "Stimulus content prediction (leave-one-subject-out)\n";
        tsv << "# config " << hash << '\n';
        write_row(txt, tsv, "Modality", {"Accuracy", "p-value", "F1", "Precision", "Recall"});
        for (const std::string& name : class_rows) {
            CvReport r = loso_cv(sets[name], Task::classify, cv);
            write_row(txt, tsv, name,
                      {pct(r.pooled_class.accuracy), num(r.p_value), pct(r.pooled_class.f1),
                       pct(r.pooled_class.precision), pct(r.pooled_class.recall)});
        }
        CvReport rnd_c = random_baselines(sets["fusion"], Task::classify, cv);
        write_row(txt, tsv, "Random",
                  {pct(rnd_c.pooled_class.accuracy), num(rnd_c.p_value), pct(rnd_c.pooled_class.f1),
                   pct(rnd_c.pooled_class.precision), pct(rnd_c.pooled_class.recall)});

        std::ofstream rtxt(dir / "regression.txt");
        std::ofstream rtsv(dir / "regression.tsv");
        rtxt << "# config " << hash << '\n';
        rtxt << "Self-rating prediction (leave-one-subject-out)\n";
        rtsv << "# config " << hash << '\n';
        write_row(rtxt, rtsv, "Modality", {"RMSE", "MAE"});
        for (const std::string& name : reg_rows) {
            CvReport r = loso_cv(sets[name], Task::regress, cv);
            write_row(rtxt, rtsv, name, {num(r.pooled_reg.rmse), num(r.pooled_reg.mae)});
        }
        CvReport rnd_r = random_baselines(sets["fusion"], Task::regress, cv);
        write_row(rtxt, rtsv, "Random", {num(rnd_r.pooled_reg.rmse), num(rnd_r.pooled_reg.mae)});

        write_stage_meta(dir, expected);
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError("report", e.what());
    }
}

fs::path run_pipeline(const PipelineConfig& config, const fs::path& data_root,
                      const fs::path& out_dir) {
    fs::create_directories(out_dir);
    {
        std::ofstream snap(out_dir / "00_config.txt");
        snap << "# hash " << config.hash() << '\n' << config.to_config().serialize();
        if (!snap) throw StageError("ingest", "cannot write config snapshot");
    }
    // data is validated up front so broken inputs fail in the ingest stage
    try {
        for (const fs::path& sdir : session_dirs(data_root)) load_session(sdir);
    } catch (const std::exception& e) {
        throw StageError("ingest", e.what());
    }
    stage_filter(config, data_root, out_dir);
    stage_facefit(config, data_root, out_dir);
    stage_featurize(config, data_root, out_dir);
    stage_recur(config, out_dir);
    stage_metrics(config, data_root, out_dir);
    stage_train(config, out_dir);
    stage_report(config, out_dir);
    return out_dir;
}

} // namespace jrnet
