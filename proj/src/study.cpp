#include "jrnet/study.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace jrnet {

namespace {

struct SubjectProfile {
    double hr_bpm, hrv_sd_ms, scr_rate, tonic_us, resp_rate_hz, resp_rise, mouth_rate,
        mouth_amp_sd, landmark_noise_px, rating_pos, rating_neg, head_motion;
    // stable per-subject confounds, present at rest and during trials alike
    double eda_wander_amp, eda_wander_period_s, brow_amp, smile_amp, mouth_base;
    double idle_amp[3], idle_period_s[3];
    double eda_noise;
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

SubjectProfile draw_profile(const StudyParams& p, std::mt19937_64& rng) {
    SubjectProfile s;
    s.hr_bpm = uniform(rng, p.hr_base_lo, p.hr_base_hi);
    s.hrv_sd_ms = uniform(rng, p.hrv_sd_lo, p.hrv_sd_hi);
    s.scr_rate = uniform(rng, p.scr_rate_lo, p.scr_rate_hi);
    s.tonic_us = uniform(rng, p.tonic_lo, p.tonic_hi);
    s.resp_rate_hz = uniform(rng, p.resp_rate_lo, p.resp_rate_hi);
    s.resp_rise = uniform(rng, 0.42, 0.58);
    s.mouth_rate = uniform(rng, p.mouth_rate_lo, p.mouth_rate_hi);
    s.mouth_amp_sd = uniform(rng, 0.5, 1.0);
    s.landmark_noise_px = uniform(rng, p.landmark_noise_lo, p.landmark_noise_hi);
    s.rating_pos = uniform(rng, 30.0, 42.0);
    s.rating_neg = uniform(rng, 8.0, 20.0);
    s.head_motion = uniform(rng, 0.8, 1.3);
    s.eda_wander_amp = uniform(rng, 0.10, 0.30);
    s.eda_wander_period_s = uniform(rng, 35.0, 70.0);
    s.brow_amp = uniform(rng, 0.04, 0.12);
    s.smile_amp = uniform(rng, 0.03, 0.08);
    s.mouth_base = uniform(rng, 0.55, 1.15);
    for (int k = 0; k < 3; ++k) {
        s.idle_amp[k] = uniform(rng, 0.05, 0.20);
        s.idle_period_s[k] = uniform(rng, 18.0, 50.0);
    }
    s.eda_noise = uniform(rng, 0.020, 0.045);
    return s;
}

// stable electrodermal level wander, a subject trait shared by resting and
// stimulus recordings
void apply_eda_wander(SignalTrace& eda, const SubjectProfile& s, std::mt19937_64& rng) {
    double phase = uniform(rng, 0.0, 6.28318);
    auto& x = eda.channels[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        double t = i / eda.sample_rate_hz;
        x[i] += s.eda_wander_amp *
                std::sin(2 * std::numbers::pi * t / s.eda_wander_period_s + phase);
    }
}

std::vector<double> poisson_times(double rate_per_s, double t_lo, double t_hi,
                                  std::mt19937_64& rng) {
    std::vector<double> times;
    std::exponential_distribution<double> gap(rate_per_s);
    double t = t_lo + gap(rng);
    while (t < t_hi) {
        times.push_back(t);
        t += gap(rng);
    }
    return times;
}

// Stimulus-locked arousal schedule: one event per period of the given rate,
// jittered by +-10% of the period. Doubling the rate halves the period.
std::vector<double> arousal_schedule(double rate_per_s, double t_lo, double t_hi,
                                     std::mt19937_64& rng) {
    std::vector<double> times;
    const double period = 1.0 / rate_per_s;
    double t = t_lo + uniform(rng, 0.0, period);
    while (t < t_hi) {
        times.push_back(t + uniform(rng, -0.1 * period, 0.1 * period));
        t += period;
    }
    std::sort(times.begin(), times.end());
    return times;
}

void quantize(SignalTrace& trace, double step) {
    if (step <= 0) return;
    for (auto& ch : trace.channels)
        for (double& v : ch)
            if (!std::isnan(v)) v = std::round(v / step) * step;
}

// slow breathing-depth wander plus a brief breath suppression after each
// arousal moment
void apply_breath_envelope(SignalTrace& resp, const std::vector<double>& arousal_times,
                           std::mt19937_64& rng) {
    double phase = uniform(rng, 0.0, 6.28318);
    double freq = uniform(rng, 0.008, 0.016);
    auto& x = resp.channels[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
        double t = i / resp.sample_rate_hz;
        double env = 1.0 + 0.25 * std::sin(2 * std::numbers::pi * freq * t + phase);
        for (double tk : arousal_times) {
            double d = t - tk;
            if (d >= 0.0 && d < 3.0)
                env *= 1.0 - 0.6 * 0.5 * (1.0 - std::cos(2 * std::numbers::pi * d / 3.0));
        }
        x[i] *= env;
    }
}

LandmarkProgram face_program(const StudyParams& p, const SubjectProfile& s, double duration_s,
                             const std::vector<double>& arousal_times, double mouth_amp_scale,
                             std::mt19937_64& rng) {
    LandmarkProgram prog;
    prog.base_scale_px = 100.0;
    prog.center_px = {320.0, 240.0};
    prog.noise_px = s.landmark_noise_px;

    // gentle continuous head sway, kept below the arousal-locked motion
    auto sine = [&](double amp, double freq) {
        Wave w;
        w.kind = WaveKind::sine;
        w.amplitude = amp * s.head_motion;
        w.freq_hz = freq;
        w.phase = uniform(rng, 0.0, 6.28318);
        return w;
    };
    prog.pose_waves.push_back({PoseChannel::yaw, sine(0.02, 0.05)});
    prog.pose_waves.push_back({PoseChannel::pitch, sine(0.012, 0.07)});
    prog.pose_waves.push_back({PoseChannel::roll, sine(0.01, 0.04)});
    prog.pose_waves.push_back({PoseChannel::tx, sine(2.0, 0.03)});
    prog.pose_waves.push_back({PoseChannel::ty, sine(1.5, 0.045)});
    prog.pose_waves.push_back({PoseChannel::scale, sine(0.01, 0.02)});

    // ongoing brow / smile drift with subject-specific amplitude
    Wave brow;
    brow.kind = WaveKind::sine;
    brow.amplitude = s.brow_amp;
    brow.freq_hz = 0.06;
    brow.phase = uniform(rng, 0.0, 6.28318);
    prog.alpha_waves.push_back({0, brow});
    Wave smile;
    smile.kind = WaveKind::sine;
    smile.amplitude = s.smile_amp;
    smile.freq_hz = 0.035;
    smile.phase = uniform(rng, 0.0, 6.28318);
    prog.alpha_waves.push_back({3, smile});
    const int idle_modes[3] = {0, 1, 3};
    for (int k = 0; k < 3; ++k) {
        Wave idle;
        idle.kind = WaveKind::sine;
        idle.amplitude = s.idle_amp[k];
        idle.freq_hz = 1.0 / s.idle_period_s[k];
        idle.phase = uniform(rng, 0.0, 6.28318);
        prog.alpha_waves.push_back({idle_modes[k], idle});
    }

    // arousal-locked responses: a mouth-open burst (amplitude spread scaled
    // by the condition) and a small startle nod
    std::normal_distribution<double> amp_noise(0.0, 1.0);
    for (double t0 : arousal_times) {
        double t = std::min(t0 + uniform(rng, 0.0, 0.6), duration_s - 3.0);
        double amp = std::max(0.3, s.mouth_base + 0.12 * s.mouth_amp_sd * amp_noise(rng) * mouth_amp_scale);
        double width = uniform(rng, 1.6, 2.0);
        Wave bump;
        bump.kind = WaveKind::pulses;
        bump.amplitude = amp;
        bump.freq_hz = 1.0 / width;
        bump.width_s = width;
        bump.t_start = t;
        bump.t_end = t + width;
        prog.alpha_waves.push_back({2, bump});

        Wave nod;
        nod.kind = WaveKind::pulses;
        nod.amplitude = uniform(rng, 0.14, 0.18) * s.head_motion;
        double nod_width = uniform(rng, 1.0, 2.0);
        nod.freq_hz = 1.0 / nod_width;
        nod.width_s = nod_width;
        nod.t_start = t;
        nod.t_end = t + nod_width;
        prog.pose_waves.push_back({PoseChannel::pitch, nod});

        Wave recoil = nod;
        recoil.amplitude = -uniform(rng, 0.015, 0.025);
        prog.pose_waves.push_back({PoseChannel::scale, recoil});
    }
    return prog;
}

SignalTrace make_rating(const StudyParams& p, const SubjectProfile& s, Valence v, double duration_s,
                        std::mt19937_64& rng) {
    const double rate = 25.0;
    const std::size_t n = static_cast<std::size_t>(std::llround(duration_s * rate));
    std::vector<double> x(n);
    double base = v == Valence::positive ? s.rating_pos : s.rating_neg;
    double phase = uniform(rng, 0.0, 6.28318);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double t = i / rate;
        x[i] = base + 4.0 * std::sin(2 * 3.14159265358979 * 0.02 * t + phase) + noise(rng);
        x[i] = std::clamp(x[i], 0.0, 50.0);
    }
    return make_trace(std::move(x), rate, "rating");
}

struct TrialBuild {
    TrialRecord trial;
    std::vector<double> truth_rpeaks;
    std::vector<SynthScr> truth_scrs;
    std::vector<HeadPose> truth_poses;
    std::vector<Eigen::Matrix<double, 6, 1>> truth_face;
};

TrialBuild build_trial(const StudyParams& p, const SubjectProfile& s, const ShapeModel& model,
                       const std::string& subject_id, const std::string& trial_id, Valence valence,
                       std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const bool neg = valence == Valence::negative;
    const double T = p.trial_duration_s;

    TrialBuild out;
    out.trial.subject_id = subject_id;
    out.trial.stimulus_id = trial_id;
    out.trial.valence_label = valence;

    double hr = s.hr_bpm + (neg ? p.hr_delta_bpm : 0.0);
    SynthEcg ecg = synth_ecg(T, hr, s.hrv_sd_ms, p.ecg_snr_db, rng(), p.physio_rate_hz);
    out.trial.traces[Modality::ecg] = ecg.trace;
    out.truth_rpeaks = ecg.r_peaks_s;

    // shared stimulus-locked arousal moments drive both the electrodermal
    // response and the facial reaction; their rate doubles in the negative
    // condition
    double arousal_rate = s.scr_rate * (neg ? p.scr_rate_factor : 1.0);
    std::vector<double> arousal_times = arousal_schedule(arousal_rate, 2.0, T - 8.0, rng);
    // enforce a minimum gap so constructed events stay resolvable
    std::vector<double> kept;
    for (double t : arousal_times)
        if (kept.empty() || t - kept.back() > 1.5) kept.push_back(t);
    std::vector<double> amps;
    for (std::size_t i = 0; i < kept.size(); ++i) amps.push_back(uniform(rng, 0.45, 0.65));
    SynthEda eda = synth_eda(T, kept, amps, s.tonic_us, rng(), p.physio_rate_hz, 1.0, 4.0, 0.01,
                             s.eda_noise);
    out.trial.traces[Modality::eda] = eda.trace;
    out.truth_scrs = eda.events;

    out.trial.traces[Modality::resp] =
        synth_resp(T, s.resp_rate_hz, 1.0, s.resp_rise, 0.04, rng(), p.physio_rate_hz);
    apply_breath_envelope(out.trial.traces[Modality::resp], kept, rng);

    double mouth_amp_scale = neg ? std::sqrt(p.mouth_var_factor) : 1.0;
    LandmarkProgram prog = face_program(p, s, T, kept, mouth_amp_scale, rng);
    SynthLandmarks lms = synth_landmarks(T, p.fps, prog, model, rng());
    out.trial.landmarks = landmarks_to_trace(lms.frames, p.fps);
    out.truth_poses = std::move(lms.true_poses);
    out.truth_face = std::move(lms.true_face_features);

    out.trial.rating_trace = make_rating(p, s, valence, T, rng);

    quantize(out.trial.traces[Modality::ecg], p.physio_quantum);
    quantize(out.trial.traces[Modality::eda], p.physio_quantum);
    quantize(out.trial.traces[Modality::resp], p.physio_quantum);
    quantize(out.trial.landmarks, p.landmark_quantum);
    quantize(out.trial.rating_trace, p.rating_quantum);
    return out;
}

void build_resting(const StudyParams& p, const SubjectProfile& s, const ShapeModel& model,
                   TrialRecord& trial, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const double T = p.resting_duration_s;

    trial.resting[Modality::ecg] =
        synth_ecg(T, s.hr_bpm, s.hrv_sd_ms, p.ecg_snr_db, rng(), p.physio_rate_hz).trace;
    std::vector<double> scr_times = arousal_schedule(s.scr_rate, 2.0, T - 8.0, rng);
    std::vector<double> kept;
    for (double t : scr_times)
        if (kept.empty() || t - kept.back() > 1.5) kept.push_back(t);
    std::vector<double> amps;
    for (std::size_t i = 0; i < kept.size(); ++i) amps.push_back(uniform(rng, 0.45, 0.65));
    trial.resting[Modality::eda] =
        synth_eda(T, kept, amps, s.tonic_us, rng(), p.physio_rate_hz, 1.0, 4.0, 0.01, s.eda_noise).trace;
    trial.resting[Modality::resp] =
        synth_resp(T, s.resp_rate_hz, 1.0, s.resp_rise, 0.04, rng(), p.physio_rate_hz);
    apply_breath_envelope(trial.resting[Modality::resp], kept, rng);
    LandmarkProgram prog = face_program(p, s, T, kept, 1.0, rng);
    trial.resting_landmarks = landmarks_to_trace(synth_landmarks(T, p.fps, prog, model, rng()).frames, p.fps);
    trial.has_resting = true;

    quantize(trial.resting[Modality::ecg], p.physio_quantum);
    quantize(trial.resting[Modality::eda], p.physio_quantum);
    quantize(trial.resting[Modality::resp], p.physio_quantum);
    quantize(trial.resting_landmarks, p.landmark_quantum);
}

std::string subject_name(int index) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "S%02d", index + 1);
    return buf;
}

} // namespace

Session generate_study_session(const StudyParams& params, int subject_index, std::uint64_t seed) {
    const ShapeModel model = default_shape_model();
    std::mt19937_64 subject_rng(seed * 1000003ull + subject_index);
    SubjectProfile profile = draw_profile(params, subject_rng);

    Session session;
    session.subject_id = subject_name(subject_index);

    std::uint64_t resting_seed = subject_rng();
    for (int t = 0; t < params.trials_per_subject; ++t) {
        Valence v = t % 2 == 0 ? Valence::positive : Valence::negative;
        std::string id = (v == Valence::positive ? "pos" : "neg") + std::to_string(t / 2 + 1);
        TrialBuild built = build_trial(params, profile, model, session.subject_id, id, v,
                                       subject_rng());
        build_resting(params, profile, model, built.trial, resting_seed);
        built.trial.validate(kLargestWindowS);
        session.trials.push_back(std::move(built.trial));
    }
    return session;
}

std::vector<Session> generate_study(const StudyParams& params, std::uint64_t seed) {
    std::vector<Session> sessions;
    for (int i = 0; i < params.subjects; ++i)
        sessions.push_back(generate_study_session(params, i, seed));
    return sessions;
}

void write_study(const std::filesystem::path& data_root, const StudyParams& params,
                 std::uint64_t seed) {
    std::filesystem::create_directories(data_root);
    const ShapeModel model = default_shape_model();

    Config manifest;
    std::string subjects;
    for (int i = 0; i < params.subjects; ++i) {
        std::mt19937_64 subject_rng(seed * 1000003ull + i);
        SubjectProfile profile = draw_profile(params, subject_rng);
        Session session;
        session.subject_id = subject_name(i);
        if (!subjects.empty()) subjects += ' ';
        subjects += session.subject_id;

        std::uint64_t resting_seed = subject_rng();
        std::vector<TrialBuild> builds;
        for (int t = 0; t < params.trials_per_subject; ++t) {
            Valence v = t % 2 == 0 ? Valence::positive : Valence::negative;
            std::string id = (v == Valence::positive ? "pos" : "neg") + std::to_string(t / 2 + 1);
            TrialBuild built = build_trial(params, profile, model, session.subject_id, id, v,
                                           subject_rng());
            build_resting(params, profile, model, built.trial, resting_seed);
            built.trial.validate(kLargestWindowS);
            session.trials.push_back(built.trial);
            builds.push_back(std::move(built));
        }

        const std::filesystem::path dir = data_root / session.subject_id;
        write_session(dir, session);

        // ground-truth sidecars
        for (const TrialBuild& b : builds) {
            std::ofstream rp(dir / (b.trial.stimulus_id + "_truth_rpeaks.txt"));
            for (double t : b.truth_rpeaks) rp << format_double(t) << '\n';
            std::ofstream sc(dir / (b.trial.stimulus_id + "_truth_scrs.txt"));
            sc << "# onset_s peak_s amplitude_us duration_s\n";
            for (const SynthScr& e : b.truth_scrs)
                sc << format_double(e.onset_s) << ' ' << format_double(e.peak_s) << ' '
                   << format_double(e.amplitude_us) << ' ' << format_double(e.duration_s) << '\n';
            std::ofstream ps(dir / (b.trial.stimulus_id + "_truth_pose.txt"));
            ps << "# t_s tx ty tz roll pitch yaw\n";
            for (std::size_t f = 0; f < b.truth_poses.size(); ++f) {
                const HeadPose& hp = b.truth_poses[f];
                ps << format_double(f / params.fps) << ' ' << format_double(hp.translation.x())
                   << ' ' << format_double(hp.translation.y()) << ' '
                   << format_double(hp.translation.z()) << ' ' << format_double(hp.roll) << ' '
                   << format_double(hp.pitch) << ' ' << format_double(hp.yaw) << '\n';
            }
        }
    }
    manifest.set("subjects", subjects);
    std::ofstream out(data_root / "study.manifest");
    out << manifest.serialize();
    if (!out) throw std::runtime_error("cannot write study manifest");
}

std::vector<std::filesystem::path> list_study_sessions(const std::filesystem::path& data_root) {
    Config manifest = Config::parse_file(data_root / "study.manifest");
    std::vector<std::filesystem::path> dirs;
    for (const std::string& s : manifest.get_list("subjects")) dirs.push_back(data_root / s);
    return dirs;
}

StudyParams study_params_from_config(const Config& raw) {
    StudyParams p;
    p.subjects = static_cast<int>(raw.get_int_or("study.subjects", p.subjects));
    p.trials_per_subject =
        static_cast<int>(raw.get_int_or("study.trials_per_subject", p.trials_per_subject));
    p.trial_duration_s = raw.get_double_or("study.trial_duration_s", p.trial_duration_s);
    p.resting_duration_s = raw.get_double_or("study.resting_duration_s", p.resting_duration_s);
    p.physio_rate_hz = raw.get_double_or("study.physio_rate_hz", p.physio_rate_hz);
    p.fps = raw.get_double_or("study.fps", p.fps);
    p.hr_delta_bpm = raw.get_double_or("study.hr_delta_bpm", p.hr_delta_bpm);
    p.scr_rate_factor = raw.get_double_or("study.scr_rate_factor", p.scr_rate_factor);
    p.mouth_var_factor = raw.get_double_or("study.mouth_var_factor", p.mouth_var_factor);
    p.ecg_snr_db = raw.get_double_or("study.ecg_snr_db", p.ecg_snr_db);
    return p;
}

} // namespace jrnet
