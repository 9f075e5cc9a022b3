#include "jrnet/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace jrnet {

namespace {

const std::array<Modality, 3> kPhysioModalities = {Modality::ecg, Modality::eda, Modality::resp};

std::vector<std::string> landmark_labels() {
    std::vector<std::string> labels;
    labels.reserve(2 * kNumLandmarks);
    for (int i = 0; i < kNumLandmarks; ++i) {
        labels.push_back("lm" + std::to_string(i) + "_x");
        labels.push_back("lm" + std::to_string(i) + "_y");
    }
    return labels;
}

} // namespace

double TrialRecord::common_duration_s() const {
    double dur = std::numeric_limits<double>::infinity();
    for (const auto& [m, t] : traces) dur = std::min(dur, t.duration_s());
    dur = std::min(dur, landmarks.duration_s());
    dur = std::min(dur, rating_trace.duration_s());
    return dur;
}

void TrialRecord::validate(double min_duration_s) const {
    for (const auto& [m, t] : traces) t.validate();
    landmarks.validate();
    rating_trace.validate();
    for (Modality m : kPhysioModalities)
        if (!traces.count(m))
            throw std::runtime_error("trial " + stimulus_id + ": missing " + to_string(m) + " trace");
    for (double v : rating_trace.channel(0))
        if (v < kRatingMin || v > kRatingMax)
            throw std::runtime_error("trial " + stimulus_id + ": rating out of range [0, 50]");
    if (common_duration_s() < min_duration_s)
        throw std::runtime_error("trial " + stimulus_id + ": trace shorter than largest window (" +
                                 std::to_string(static_cast<int>(min_duration_s)) + " s)");
}

Session load_session(const std::filesystem::path& dir) {
    return load_session(dir, Config::parse_file(dir / "session.manifest"));
}

Session load_session(const std::filesystem::path& dir, const Config& manifest) {
    Session session;
    session.subject_id = manifest.get("subject");

    auto read_modality = [&](const std::string& prefix, Modality m) {
        std::string file = manifest.get(prefix + ".trace." + to_string(m));
        double rate = manifest.get_double(prefix + ".rate." + to_string(m));
        bool time_col = manifest.get_bool_or(prefix + ".time_column." + to_string(m), false);
        return read_channel_file(dir / file, rate, {to_string(m)}, time_col);
    };

    for (const std::string& trial_id : manifest.get_list("trials")) {
        const std::string p = "trial." + trial_id;
        TrialRecord trial;
        trial.subject_id = session.subject_id;
        trial.stimulus_id = trial_id;
        trial.valence_label = valence_from_string(manifest.get(p + ".valence"));
        for (Modality m : kPhysioModalities) trial.traces[m] = read_modality(p, m);
        trial.landmarks = read_channel_file(dir / manifest.get(p + ".trace.landmarks"),
                                            manifest.get_double(p + ".rate.landmarks"),
                                            landmark_labels());
        trial.rating_trace = read_channel_file(dir / manifest.get(p + ".trace.rating"),
                                               manifest.get_double(p + ".rate.rating"), {"rating"});

        if (manifest.has("resting.trace.ecg")) {
            for (Modality m : kPhysioModalities) trial.resting[m] = read_modality("resting", m);
            trial.resting_landmarks =
                read_channel_file(dir / manifest.get("resting.trace.landmarks"),
                                  manifest.get_double("resting.rate.landmarks"), landmark_labels());
            trial.has_resting = true;
        }
        trial.validate(kLargestWindowS);
        session.trials.push_back(std::move(trial));
    }

    // trial ids unique
    std::vector<std::string> ids;
    for (const auto& t : session.trials) ids.push_back(t.stimulus_id);
    std::sort(ids.begin(), ids.end());
    if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::runtime_error("duplicate trial ids in session " + session.subject_id);
    return session;
}

void write_session(const std::filesystem::path& dir, const Session& session) {
    std::filesystem::create_directories(dir);
    Config manifest;
    manifest.set("subject", session.subject_id);
    std::string trial_list;
    for (const auto& trial : session.trials) {
        if (!trial_list.empty()) trial_list += ' ';
        trial_list += trial.stimulus_id;
    }
    manifest.set("trials", trial_list);

    auto write_modality = [&](const std::string& prefix, const std::string& name,
                              const SignalTrace& trace, const std::string& file) {
        write_channel_file(dir / file, trace);
        manifest.set(prefix + ".trace." + name, file);
        manifest.set_double(prefix + ".rate." + name, trace.sample_rate_hz);
    };

    bool wrote_resting = false;
    for (const auto& trial : session.trials) {
        const std::string p = "trial." + trial.stimulus_id;
        manifest.set(p + ".valence", to_string(trial.valence_label));
        for (const auto& [m, trace] : trial.traces)
            write_modality(p, to_string(m), trace, trial.stimulus_id + "_" + to_string(m) + ".txt");
        write_modality(p, "landmarks", trial.landmarks, trial.stimulus_id + "_landmarks.txt");
        write_modality(p, "rating", trial.rating_trace, trial.stimulus_id + "_rating.txt");
        if (trial.has_resting && !wrote_resting) {
            for (const auto& [m, trace] : trial.resting)
                write_modality("resting", to_string(m), trace, "resting_" + to_string(m) + ".txt");
            write_modality("resting", "landmarks", trial.resting_landmarks, "resting_landmarks.txt");
            wrote_resting = true;
        }
    }

    std::ofstream out(dir / "session.manifest");
    out << manifest.serialize();
    if (!out) throw std::runtime_error("cannot write manifest in " + dir.string());
}

std::vector<LandmarkFrame> trace_to_landmarks(const SignalTrace& trace) {
    if (trace.num_channels() != 2 * kNumLandmarks)
        throw std::runtime_error("landmark trace must have 136 channels");
    std::vector<LandmarkFrame> frames(trace.num_samples());
    for (std::size_t n = 0; n < trace.num_samples(); ++n) {
        LandmarkFrame& f = frames[n];
        f.timestamp_s = trace.time_at(n);
        f.valid = true;
        for (int i = 0; i < kNumLandmarks; ++i) {
            double x = trace.channels[2 * i][n];
            double y = trace.channels[2 * i + 1][n];
            if (std::isnan(x) || std::isnan(y)) f.valid = false;
            f.points_2d(i, 0) = x;
            f.points_2d(i, 1) = y;
        }
    }
    return frames;
}

SignalTrace landmarks_to_trace(const std::vector<LandmarkFrame>& frames, double fps) {
    SignalTrace trace;
    trace.sample_rate_hz = fps;
    trace.channel_labels = landmark_labels();
    trace.channels.assign(2 * kNumLandmarks, std::vector<double>(frames.size()));
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t n = 0; n < frames.size(); ++n)
        for (int i = 0; i < kNumLandmarks; ++i) {
            trace.channels[2 * i][n] = frames[n].valid ? frames[n].points_2d(i, 0) : nan;
            trace.channels[2 * i + 1][n] = frames[n].valid ? frames[n].points_2d(i, 1) : nan;
        }
    return trace;
}

// ---------------------------------------------------------------------------
// synthetic ECG

namespace {

struct EcgWave {
    double amplitude, center_s, width_s;
};

// P-QRS-T morphology as Gaussian bumps relative to the R peak.
constexpr EcgWave kEcgTemplate[5] = {
    {0.15, -0.18, 0.030},  // P
    {-0.12, -0.030, 0.010},// Q
    {1.10, 0.0, 0.007},    // R
    {-0.20, 0.030, 0.010}, // S
    {0.30, 0.22, 0.055},   // T
};

} // namespace

SynthEcg synth_ecg(double duration_s, double mean_hr_bpm, double hrv_sd_ms, double noise_snr_db,
                   std::uint64_t seed, double sample_rate_hz) {
    if (duration_s <= 0) throw std::runtime_error("duration must be positive");
    if (mean_hr_bpm < 30 || mean_hr_bpm > 220)
        throw std::runtime_error("mean heart rate must be in [30, 220] bpm");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const double mean_rr_s = 60.0 / mean_hr_bpm;
    const double sd_s = hrv_sd_ms / 1000.0;
    const double dt = 1.0 / sample_rate_hz;

    // R peaks snapped to the sample grid so ground truth is exact
    std::vector<double> peaks;
    double t = 0.5;
    while (t < duration_s - 0.4) {
        peaks.push_back(std::round(t * sample_rate_hz) * dt);
        double rr = mean_rr_s;
        if (sd_s > 0) {
            double dev;
            do {
                dev = normal(rng) * sd_s;
            } while (std::abs(dev) > 3.0 * sd_s); // truncate at 3 sigma
            rr += dev;
        }
        rr = std::max(rr, 0.3);
        t += rr;
    }

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    std::vector<double> x(n, 0.0);
    for (double peak : peaks) {
        for (const EcgWave& w : kEcgTemplate) {
            double c = peak + w.center_s;
            std::size_t lo = static_cast<std::size_t>(std::max(0.0, (c - 5 * w.width_s) * sample_rate_hz));
            std::size_t hi = static_cast<std::size_t>(
                std::min<double>(n, (c + 5 * w.width_s) * sample_rate_hz + 1));
            for (std::size_t i = lo; i < hi; ++i) {
                double d = i * dt - c;
                x[i] += w.amplitude * std::exp(-d * d / (2 * w.width_s * w.width_s));
            }
        }
    }

    if (std::isfinite(noise_snr_db)) {
        double power = 0.0;
        for (double v : x) power += v * v;
        power /= static_cast<double>(n);
        double noise_sd = std::sqrt(power / std::pow(10.0, noise_snr_db / 10.0));
        for (double& v : x) v += noise_sd * normal(rng);
    }

    SynthEcg out;
    out.trace = make_trace(std::move(x), sample_rate_hz, "ecg");
    out.r_peaks_s = std::move(peaks);
    return out;
}

// ---------------------------------------------------------------------------
// synthetic EDA

SynthEda synth_eda(double duration_s, const std::vector<double>& scr_times,
                   const std::vector<double>& scr_amplitudes, double tonic_level,
                   std::uint64_t seed, double sample_rate_hz, double rise_s, double decay_tau_s,
                   double drift_amplitude, double noise_sd) {
    if (duration_s <= 0) throw std::runtime_error("duration must be positive");
    if (scr_times.size() != scr_amplitudes.size())
        throw std::runtime_error("scr time/amplitude list length mismatch");
    for (std::size_t i = 0; i < scr_times.size(); ++i) {
        if (i > 0 && scr_times[i] <= scr_times[i - 1])
            throw std::runtime_error("scr times must be strictly increasing");
        if (scr_times[i] < 0 || scr_times[i] >= duration_s)
            throw std::runtime_error("scr time outside duration");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    std::vector<double> x(n);

    const double drift_freq = 0.01; // Hz, slow tonic wander
    for (std::size_t i = 0; i < n; ++i) {
        double t = i / sample_rate_hz;
        x[i] = tonic_level + drift_amplitude * std::sin(2 * std::numbers::pi * drift_freq * t);
        if (noise_sd > 0) x[i] += noise_sd * normal(rng);
    }

    SynthEda out;
    for (std::size_t k = 0; k < scr_times.size(); ++k) {
        double t0 = scr_times[k], amp = scr_amplitudes[k];
        for (std::size_t i = static_cast<std::size_t>(t0 * sample_rate_hz); i < n; ++i) {
            double dt = i / sample_rate_hz - t0;
            double v;
            if (dt < rise_s) {
                double u = dt / rise_s;
                v = u * u * (3.0 - 2.0 * u); // smoothstep rise
            } else {
                v = std::exp(-(dt - rise_s) / decay_tau_s);
            }
            x[i] += amp * v;
            if (v < 1e-6 && dt > rise_s) break;
        }
        SynthScr ev;
        ev.onset_s = t0;
        ev.peak_s = t0 + rise_s;
        ev.amplitude_us = amp;
        ev.duration_s = rise_s + decay_tau_s * std::numbers::ln2;
        out.events.push_back(ev);
    }

    out.trace = make_trace(std::move(x), sample_rate_hz, "eda");
    return out;
}

SignalTrace synth_resp(double duration_s, double rate_hz, double amplitude, double rise_fraction,
                       double noise_sd, std::uint64_t seed, double sample_rate_hz) {
    if (duration_s <= 0) throw std::runtime_error("duration must be positive");
    if (rise_fraction <= 0 || rise_fraction >= 1)
        throw std::runtime_error("rise fraction must be in (0, 1)");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * sample_rate_hz));
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = i / sample_rate_hz;
        double phase = std::fmod(t * rate_hz, 1.0); // cycle position, peak at rise_fraction
        double v = phase < rise_fraction ? phase / rise_fraction
                                         : 1.0 - (phase - rise_fraction) / (1.0 - rise_fraction);
        x[i] = amplitude * v;
        if (noise_sd > 0) x[i] += noise_sd * normal(rng);
    }
    return make_trace(std::move(x), sample_rate_hz, "resp");
}

// ---------------------------------------------------------------------------
// synthetic landmarks

double Wave::value(double t) const {
    if (t < t_start || t > t_end) return 0.0;
    switch (kind) {
    case WaveKind::constant: return amplitude;
    case WaveKind::ramp: {
        double span = t_end - t_start;
        return span > 0 ? amplitude * (t - t_start) / span : amplitude;
    }
    case WaveKind::sine:
        return amplitude * std::sin(2 * std::numbers::pi * freq_hz * (t - t_start) + phase);
    case WaveKind::pulses: {
        double period = 1.0 / freq_hz;
        double pos = std::fmod(t - t_start + phase * period, period);
        if (pos < 0) pos += period;
        if (pos >= width_s) return 0.0;
        double u = pos / width_s; // raised-cosine bump
        return amplitude * 0.5 * (1.0 - std::cos(2 * std::numbers::pi * u));
    }
    }
    return 0.0;
}

Eigen::VectorXd LandmarkProgram::alphas_at(double t, int num_components) const {
    Eigen::VectorXd a = Eigen::VectorXd::Zero(num_components);
    for (const auto& [k, wave] : alpha_waves) {
        if (k < 0 || k >= num_components) throw std::runtime_error("alpha wave index out of range");
        a(k) += wave.value(t);
    }
    return a;
}

HeadPose LandmarkProgram::pose_at(double t) const {
    HeadPose pose;
    pose.scale = base_scale_px;
    pose.translation << center_px.x(), center_px.y(), 0.0;
    for (const auto& [ch, wave] : pose_waves) {
        double v = wave.value(t);
        switch (ch) {
        case PoseChannel::roll: pose.roll += v; break;
        case PoseChannel::pitch: pose.pitch += v; break;
        case PoseChannel::yaw: pose.yaw += v; break;
        case PoseChannel::tx: pose.translation.x() += v; break;
        case PoseChannel::ty: pose.translation.y() += v; break;
        case PoseChannel::scale: pose.scale *= (1.0 + v); break;
        }
    }
    pose.translation.z() = 1.0 / pose.scale;
    return pose;
}

SynthLandmarks synth_landmarks(double duration_s, double fps, const LandmarkProgram& program,
                               const ShapeModel& model, std::uint64_t seed) {
    if (fps <= 0) throw std::runtime_error("fps must be positive");
    if (duration_s <= 0) throw std::runtime_error("duration must be positive");

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * fps));
    SynthLandmarks out;
    out.frames.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        double t = i / fps;
        Eigen::VectorXd alphas = program.alphas_at(t, model.num_components());
        HeadPose pose = program.pose_at(t);
        Points3d shape = synthesize_shape(model, alphas);

        LandmarkFrame frame;
        frame.timestamp_s = t;
        frame.points_2d = project(compose_camera(pose), shape);
        if (program.noise_px > 0)
            for (int r = 0; r < kNumLandmarks; ++r) {
                frame.points_2d(r, 0) += program.noise_px * normal(rng);
                frame.points_2d(r, 1) += program.noise_px * normal(rng);
            }
        out.frames.push_back(frame);
        out.true_poses.push_back(pose);
        out.true_face_features.push_back(face_features(frontalize(model, alphas)));
    }
    return out;
}

} // namespace jrnet
