#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace jrnet {

/// Uniformly sampled multi-channel time series. Channel-major storage:
/// channels[c][n] is channel c at sample n.
struct SignalTrace {
    std::vector<std::vector<double>> channels;
    double sample_rate_hz = 0.0;
    std::vector<std::string> channel_labels;
    double start_time_s = 0.0;

    std::size_t num_channels() const { return channels.size(); }
    std::size_t num_samples() const { return channels.empty() ? 0 : channels[0].size(); }
    double duration_s() const { return num_samples() / sample_rate_hz; }
    double end_time_s() const { return start_time_s + duration_s(); }

    double time_at(std::size_t n) const { return start_time_s + n / sample_rate_hz; }
    /// Sample index of the first sample at or after time t (clamped).
    std::size_t index_at(double t) const;

    const std::vector<double>& channel(std::size_t c) const { return channels.at(c); }

    /// Throws if rate is non-positive or channels have unequal lengths.
    void validate() const;
};

SignalTrace make_trace(std::vector<double> samples, double rate_hz, std::string label,
                       double start_time_s = 0.0);

/// Channel file format: '#' comment lines, then one row per sample,
/// whitespace-delimited columns (one per channel), %.17g precision.
/// With expect_time_column, column 0 holds timestamps; they must be uniform
/// to within 1e-6 relative jitter and are dropped after validation.
SignalTrace read_channel_file(const std::filesystem::path& path, double declared_rate_hz,
                              std::vector<std::string> labels, bool expect_time_column = false);

void write_channel_file(const std::filesystem::path& path, const SignalTrace& trace,
                        const std::vector<std::string>& header_comments = {});

} // namespace jrnet
