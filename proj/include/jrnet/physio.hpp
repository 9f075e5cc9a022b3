#pragma once

#include "jrnet/signal.hpp"
#include "jrnet/types.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace jrnet {

struct QrsAnnotation {
    std::vector<double> r_peaks_s;
    std::vector<double> q_points_s;
    std::vector<double> s_points_s;
    std::vector<double> qrs_areas; // integral of |signal| from Q to S, mV*s
};

struct ScrEvent {
    double start_s = 0.0;
    double peak_s = 0.0;
    double amplitude = 0.0;  // microsiemens above the start value
    double duration_s = 0.0; // start to half-recovery
    double rise_time_s = 0.0;
};

/// Aligned sliding-window feature vectors for one modality.
struct FeatureWindowSeries {
    Modality modality = Modality::ecg;
    double window_s = 0.0;
    double hop_s = 0.0;
    std::vector<std::vector<double>> vectors; // N x d
    std::vector<std::string> feature_names;
    std::vector<double> window_starts_s;

    std::size_t size() const { return vectors.size(); }
    std::size_t dim() const { return feature_names.size(); }
};

struct QrsOptions {
    double integration_window_s = 0.150;
    double refractory_s = 0.200;
    double t_wave_window_s = 0.360;
    double learning_s = 2.0;
    double search_back_factor = 1.66;
};

/// QRS detection: derivative -> squaring -> moving-window integration ->
/// adaptive dual thresholds with search-back. Input is expected to be
/// bandpass filtered already. R peaks are refined on the input signal;
/// Q/S are the nearest local minima within 60 ms of each R.
QrsAnnotation detect_qrs(const SignalTrace& ecg, const QrsOptions& options = {});

/// The eight interval/area statistics plus mean heart rate and beat count.
/// Requires >= 3 R peaks inside the window.
std::vector<double> ecg_features(const QrsAnnotation& ann, const SignalTrace& ecg, double win_start_s,
                                 double win_end_s);
extern const std::vector<std::string> kEcgFeatureNames;

struct ScrOptions {
    double bartlett_window_s = 1.0;
    double min_amplitude_us = 0.01;
};

/// SCR onsets/peaks from consecutive +/- zero crossings of the Bartlett-
/// smoothed first difference of the (low-passed) EDA signal. Rise phases
/// closer than the Bartlett window merge into one event.
std::vector<ScrEvent> detect_scr(const SignalTrace& eda, const ScrOptions& options = {});

/// [mean, count, mean duration, mean amplitude, mean rise time]; the three
/// event means are 0 for windows without SCRs. Events belong to the window
/// containing their start time.
std::vector<double> eda_features(const SignalTrace& eda, const std::vector<ScrEvent>& events,
                                 double win_start_s, double win_end_s);
extern const std::vector<std::string> kEdaFeatureNames;

struct RespOptions {
    double prominence_fraction = 0.10; // of window range
    double min_spacing_s = 1.0;
};

/// [mean peak-to-peak ms, mean peak height, % rising, % falling]; throws
/// "insufficient peaks" below two peaks.
std::vector<double> resp_features(const SignalTrace& resp, double win_start_s, double win_end_s,
                                  const RespOptions& options = {});
extern const std::vector<std::string> kRespFeatureNames;

/// Local maxima with prominence and spacing constraints (indices).
std::vector<std::size_t> find_peaks(const std::vector<double>& x, double min_prominence,
                                    std::size_t min_spacing);

struct WindowPlan {
    double hop_s = 2.5;
    std::map<Modality, double> window_s = {{Modality::face, 5.0},
                                           {Modality::head, 5.0},
                                           {Modality::ecg, 5.0},
                                           {Modality::eda, 20.0},
                                           {Modality::resp, 30.0}};
    std::size_t min_windows = 10;
    QrsOptions qrs;
    ScrOptions scr;
    RespOptions resp;

    double largest_window_s() const;
};

/// Inputs to the windowing engine: filtered physiological traces plus
/// per-frame face/head feature traces (NaN marks frames to drop).
struct WindowInputs {
    SignalTrace ecg, eda, resp;   // filtered
    SignalTrace face_feats;       // 6 channels @ landmark fps
    SignalTrace head_feats;       // 6 channels @ landmark fps
};

struct WindowedTrial {
    std::map<Modality, FeatureWindowSeries> series;
    QrsAnnotation qrs;
    std::vector<ScrEvent> scrs;
    std::size_t dropped_windows = 0;
};

/// Cuts aligned windows (shared start times, shared count) across all five
/// modalities and extracts per-window features. A window invalid in any
/// modality is removed from all of them. Throws "trial too short" when
/// fewer than plan.min_windows remain.
WindowedTrial windowize(const WindowInputs& inputs, const WindowPlan& plan);

} // namespace jrnet
