#pragma once

#include "jrnet/signal.hpp"

#include <complex>
#include <filesystem>
#include <string>
#include <vector>

namespace jrnet {

/// One direct-form second-order section, a0 normalized to 1.
struct BiquadSection {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0;
    double a1 = 0.0, a2 = 0.0;

    /// Poles strictly inside the unit circle (z^2 + a1 z + a2).
    bool stable() const;
};

enum class FilterKind { lowpass, bandpass };

struct FilterDesignMeta {
    std::string kind;
    std::vector<double> cutoffs_hz;
    int order = 0;
    double sample_rate_hz = 0.0;
};

struct BiquadCascade {
    std::vector<BiquadSection> sections;
    FilterDesignMeta design_meta;

    int total_order() const { return 2 * static_cast<int>(sections.size()); }

    /// Complex frequency response at frequency f (Hz).
    std::complex<double> response(double freq_hz, double sample_rate_hz) const;
    double magnitude_db(double freq_hz, double sample_rate_hz) const;
};

/// Bilinear-transform Butterworth design. For bandpass, cutoffs_hz holds
/// {low, high}; the resulting cascade has `order` sections (2*order poles).
BiquadCascade design_butterworth(FilterKind kind, const std::vector<double>& cutoffs_hz, int order,
                                 double sample_rate_hz);

/// SOS coefficient text file: one section per line, "b0 b1 b2 a1 a2".
BiquadCascade load_sos_file(const std::filesystem::path& path);
void save_sos_file(const std::filesystem::path& path, const BiquadCascade& cascade);

/// Zero-phase forward-backward filtering. Edges are handled by odd
/// reflection padding of 3x the total filter order, with per-section
/// steady-state initial conditions. Output length equals input length.
std::vector<double> filtfilt(const BiquadCascade& cascade, const std::vector<double>& x);
SignalTrace filtfilt(const BiquadCascade& cascade, const SignalTrace& trace);

} // namespace jrnet
