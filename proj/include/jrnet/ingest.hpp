#pragma once

#include "jrnet/config.hpp"
#include "jrnet/face.hpp"
#include "jrnet/signal.hpp"
#include "jrnet/types.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jrnet {

/// One subject x one stimulus presentation.
struct TrialRecord {
    std::string subject_id;
    std::string stimulus_id;
    Valence valence_label = Valence::positive;
    std::map<Modality, SignalTrace> traces; // ecg, eda, resp share Modality keys; landmarks separate
    SignalTrace landmarks;                  // 136 channels (68 x/y pairs), NaN rows mark invalid frames
    SignalTrace rating_trace;               // dial units in [0, 50]
    std::map<Modality, SignalTrace> resting;
    SignalTrace resting_landmarks;
    bool has_resting = false;

    /// Length of the interval covered by every trial trace.
    double common_duration_s() const;
    void validate(double min_duration_s) const;
};

struct Session {
    std::string subject_id;
    std::vector<TrialRecord> trials;
};

inline constexpr double kRatingMin = 0.0;
inline constexpr double kRatingMax = 50.0;
inline constexpr double kLargestWindowS = 30.0;

/// Reads a session directory: a "session.manifest" key-value file plus one
/// delimited numeric text file per channel group. Rates are declared in the
/// manifest; no resampling happens here.
Session load_session(const std::filesystem::path& dir, const Config& manifest);
Session load_session(const std::filesystem::path& dir);

/// Writes manifest + channel files so that load_session reproduces every
/// sample bit-exactly.
void write_session(const std::filesystem::path& dir, const Session& session);

std::vector<LandmarkFrame> trace_to_landmarks(const SignalTrace& trace);
SignalTrace landmarks_to_trace(const std::vector<LandmarkFrame>& frames, double fps);

// ---------------------------------------------------------------------------
// Synthetic generators (the private recording hardware is replaced by these;
// each returns its exact ground truth for use as a test oracle).

struct SynthEcg {
    SignalTrace trace;
    std::vector<double> r_peaks_s;
};

/// Templated P-QRS-T complexes at R-R intervals drawn from a truncated
/// normal(60000/mean_hr_bpm, hrv_sd_ms); white noise at noise_snr_db
/// (infinity = clean). R peaks land exactly on sample instants.
SynthEcg synth_ecg(double duration_s, double mean_hr_bpm, double hrv_sd_ms, double noise_snr_db,
                   std::uint64_t seed, double sample_rate_hz = 1000.0);

struct SynthScr {
    double onset_s = 0.0;
    double peak_s = 0.0;      // onset + rise time
    double amplitude_us = 0.0;
    double duration_s = 0.0;  // onset to half-recovery
};

struct SynthEda {
    SignalTrace trace;
    std::vector<SynthScr> events;
};

/// Tonic drift plus superposed SCR bumps (smoothstep rise, exponential
/// decay with half-recovery at rise_s + decay_tau_s * ln 2).
SynthEda synth_eda(double duration_s, const std::vector<double>& scr_times,
                   const std::vector<double>& scr_amplitudes, double tonic_level,
                   std::uint64_t seed, double sample_rate_hz = 1000.0, double rise_s = 1.0,
                   double decay_tau_s = 4.0, double drift_amplitude = 0.02,
                   double noise_sd = 0.0);

/// Sinusoidal breathing with optional rise-fraction asymmetry and noise.
SignalTrace synth_resp(double duration_s, double rate_hz, double amplitude, double rise_fraction,
                       double noise_sd, std::uint64_t seed, double sample_rate_hz = 1000.0);

enum class WaveKind { constant, ramp, sine, pulses };

/// One scheduled component of a generator program; waves on the same
/// channel add up.
struct Wave {
    WaveKind kind = WaveKind::constant;
    double amplitude = 0.0;
    double freq_hz = 0.0;   // sine/pulses
    double phase = 0.0;     // radians (sine), pulse offset in periods (pulses)
    double width_s = 0.0;   // pulse width
    double t_start = 0.0;
    double t_end = 1e300;

    double value(double t) const;
};

enum class PoseChannel { roll, pitch, yaw, tx, ty, scale };

struct LandmarkProgram {
    std::vector<std::pair<int, Wave>> alpha_waves;          // shape-coefficient schedules
    std::vector<std::pair<PoseChannel, Wave>> pose_waves;   // rigid-motion schedules
    double base_scale_px = 100.0;                           // pixels per model unit
    Eigen::Vector2d center_px = {320.0, 240.0};
    double noise_px = 0.0;

    Eigen::VectorXd alphas_at(double t, int num_components) const;
    HeadPose pose_at(double t) const;
};

struct SynthLandmarks {
    std::vector<LandmarkFrame> frames;
    std::vector<HeadPose> true_poses;
    std::vector<Eigen::Matrix<double, 6, 1>> true_face_features; // frontal-render features
};

SynthLandmarks synth_landmarks(double duration_s, double fps, const LandmarkProgram& program,
                               const ShapeModel& model, std::uint64_t seed);

} // namespace jrnet
