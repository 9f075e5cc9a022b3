#include "jrnet/signal.hpp"

#include "jrnet/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace jrnet {

std::size_t SignalTrace::index_at(double t) const {
    double idx = std::ceil((t - start_time_s) * sample_rate_hz - 1e-9);
    if (idx < 0) return 0;
    if (idx >= static_cast<double>(num_samples())) return num_samples();
    return static_cast<std::size_t>(idx);
}

void SignalTrace::validate() const {
    if (sample_rate_hz <= 0) throw std::runtime_error("sample_rate_hz must be positive");
    if (channels.size() != channel_labels.size())
        throw std::runtime_error("channel count does not match channel_labels");
    for (const auto& ch : channels)
        if (ch.size() != channels[0].size())
            throw std::runtime_error("channels have unequal lengths");
}

SignalTrace make_trace(std::vector<double> samples, double rate_hz, std::string label,
                       double start_time_s) {
    SignalTrace t;
    t.channels.push_back(std::move(samples));
    t.sample_rate_hz = rate_hz;
    t.channel_labels.push_back(std::move(label));
    t.start_time_s = start_time_s;
    t.validate();
    return t;
}

SignalTrace read_channel_file(const std::filesystem::path& path, double declared_rate_hz,
                              std::vector<std::string> labels, bool expect_time_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("missing channel file: " + path.string());

    const std::size_t ncols = labels.size() + (expect_time_column ? 1 : 0);
    std::vector<std::vector<double>> cols(labels.size());
    std::vector<double> times;

    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        const char* p = line.c_str();
        std::size_t col = 0;
        while (true) {
            char* end = nullptr;
            double v = std::strtod(p, &end);
            if (end == p) break;
            if (col >= ncols)
                throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                         ": too many columns");
            if (expect_time_column && col == 0)
                times.push_back(v);
            else
                cols[col - (expect_time_column ? 1 : 0)].push_back(v);
            ++col;
            p = end;
        }
        if (col == 0) continue;
        if (col != ncols)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": expected " + std::to_string(ncols) + " columns, got " +
                                     std::to_string(col));
    }

    SignalTrace trace;
    trace.channels = std::move(cols);
    trace.sample_rate_hz = declared_rate_hz;
    trace.channel_labels = std::move(labels);

    if (expect_time_column && times.size() >= 2) {
        const double dt = 1.0 / declared_rate_hz;
        for (std::size_t i = 1; i < times.size(); ++i) {
            double step = times[i] - times[i - 1];
            if (std::abs(step - dt) > 1e-6 * dt)
                throw std::runtime_error(path.string() + ": non-uniform timestamps at row " +
                                         std::to_string(i));
        }
        trace.start_time_s = times.front();
    }

    trace.validate();
    return trace;
}

void write_channel_file(const std::filesystem::path& path, const SignalTrace& trace,
                        const std::vector<std::string>& header_comments) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write channel file: " + path.string());
    for (const std::string& c : header_comments) out << "# " << c << '\n';
    const std::size_t n = trace.num_samples();
    const std::size_t c = trace.num_channels();
    std::string line;
    for (std::size_t i = 0; i < n; ++i) {
        line.clear();
        for (std::size_t j = 0; j < c; ++j) {
            if (j) line += ' ';
            line += format_double(trace.channels[j][i]);
        }
        line += '\n';
        out << line;
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

} // namespace jrnet
