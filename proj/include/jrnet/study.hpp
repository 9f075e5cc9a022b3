#pragma once

#include "jrnet/ingest.hpp"
#include "jrnet/pipeline.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace jrnet {

/// Synthetic multi-subject study standing in for a recorded dataset.
/// Each subject gets idiosyncratic generator parameters (resting offset);
/// the negative condition shifts heart rate, doubles the SCR rate and
/// scales mouth-movement variance.
struct StudyParams {
    int subjects = 12;
    int trials_per_subject = 4; // alternating positive/negative
    double trial_duration_s = 180.0;
    double resting_duration_s = 150.0;
    double physio_rate_hz = 250.0;
    double fps = 25.0;

    // condition effects (applied in the negative condition)
    double hr_delta_bpm = 10.0;
    double scr_rate_factor = 2.0;
    double mouth_var_factor = 1.5;

    // subject parameter ranges (uniform draws per subject)
    double hr_base_lo = 60.0, hr_base_hi = 78.0;
    double hrv_sd_lo = 5.0, hrv_sd_hi = 15.0;
    double scr_rate_lo = 0.045, scr_rate_hi = 0.055; // events per second
    double tonic_lo = 2.0, tonic_hi = 8.0;
    double resp_rate_lo = 0.20, resp_rate_hi = 0.30;
    double mouth_rate_lo = 0.05, mouth_rate_hi = 0.10; // events per second
    double landmark_noise_lo = 0.15, landmark_noise_hi = 0.60; // px

    double ecg_snr_db = 20.0;

    // storage quantization steps (an ADC-style grid keeps files compact)
    double physio_quantum = 1e-6;
    double landmark_quantum = 1e-4;
    double rating_quantum = 1e-3;
};

/// In-memory study (used directly by tests); deterministic given seed.
std::vector<Session> generate_study(const StudyParams& params, std::uint64_t seed);

Session generate_study_session(const StudyParams& params, int subject_index, std::uint64_t seed);

/// Writes the study as one session directory per subject plus ground-truth
/// sidecar files and a top-level study.manifest.
void write_study(const std::filesystem::path& data_root, const StudyParams& params,
                 std::uint64_t seed);

/// Session directories listed by a study.manifest.
std::vector<std::filesystem::path> list_study_sessions(const std::filesystem::path& data_root);

StudyParams study_params_from_config(const Config& raw);

} // namespace jrnet
