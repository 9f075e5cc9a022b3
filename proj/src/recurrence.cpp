#include "jrnet/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace jrnet {

EmbeddedTrajectory embed(const FeatureWindowSeries& series, int m, int tau, bool standardize) {
    return embed_rows(series.vectors, m, tau, standardize, series.modality);
}

EmbeddedTrajectory embed_rows(const std::vector<std::vector<double>>& rows, int m, int tau,
                              bool standardize, Modality source) {
    if (m < 1 || tau < 1) throw std::runtime_error("embedding needs m >= 1 and tau >= 1");
    const std::ptrdiff_t length = static_cast<std::ptrdiff_t>(rows.size());
    const std::ptrdiff_t count = length - static_cast<std::ptrdiff_t>(m - 1) * tau;
    if (count < 2) throw std::runtime_error("series too short for embedding");
    const std::size_t d = rows.empty() ? 0 : rows[0].size();

    // per-feature z-standardization over the whole series
    std::vector<std::vector<double>> work = rows;
    if (standardize && d > 0) {
        for (std::size_t c = 0; c < d; ++c) {
            double mean = 0.0;
            for (const auto& r : work) mean += r[c];
            mean /= work.size();
            double var = 0.0;
            for (const auto& r : work) var += (r[c] - mean) * (r[c] - mean);
            double sd = std::sqrt(var / work.size());
            if (sd < 1e-300) sd = 1.0; // constant features pass through at 0
            for (auto& r : work) r[c] = (r[c] - mean) / sd;
        }
    }

    EmbeddedTrajectory traj;
    traj.embedding_dim = m;
    traj.delay = tau;
    traj.source_modality = source;
    traj.states.reserve(count);
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        std::vector<double> state;
        state.reserve(m * d);
        for (int k = 0; k < m; ++k) {
            const auto& r = work[i + static_cast<std::ptrdiff_t>(k) * tau];
            state.insert(state.end(), r.begin(), r.end());
        }
        traj.states.push_back(std::move(state));
    }
    return traj;
}

namespace {

double l1_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}

} // namespace

RecurrencePlot recurrence_plot(const EmbeddedTrajectory& traj, const ThresholdSpec& spec) {
    const std::size_t n = traj.size();
    if (n < 2) throw std::runtime_error("recurrence plot needs at least 2 states");

    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double d = l1_distance(traj.states[i], traj.states[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }

    double eps = spec.epsilon;
    if (spec.mode == ThresholdSpec::Mode::target_rate) {
        if (spec.rate <= 0.0 || spec.rate > 1.0) throw std::runtime_error("target rate must be in (0, 1]");
        std::vector<double> offdiag;
        offdiag.reserve(n * (n - 1) / 2);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) offdiag.push_back(dist[i * n + j]);
        std::size_t k = static_cast<std::size_t>(std::llround(spec.rate * offdiag.size()));
        k = std::clamp<std::size_t>(k, 1, offdiag.size());
        std::nth_element(offdiag.begin(), offdiag.begin() + (k - 1), offdiag.end());
        eps = offdiag[k - 1];
    }

    RecurrencePlot rp;
    rp.modality = traj.source_modality;
    rp.epsilon = eps;
    rp.matrix = BinaryMatrix(n);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            bool rec = dist[i * n + j] <= eps;
            rp.matrix(i, j) = rec ? 1 : 0;
            if (rec && i != j) ++hits;
        }
    rp.achieved_rate = n > 1 ? static_cast<double>(hits) / (n * (n - 1)) : 0.0;
    rp.degenerate = rp.achieved_rate >= 1.0 && eps <= 0.0;
    return rp;
}

JointRecurrencePlot joint_recurrence_plot(const std::vector<RecurrencePlot>& plots) {
    if (plots.size() < 2) throw std::runtime_error("joint recurrence plot needs >= 2 members");
    const std::size_t n = plots[0].size();
    for (const RecurrencePlot& p : plots)
        if (p.size() != n) throw std::runtime_error("recurrence plot size mismatch");

    JointRecurrencePlot jrp;
    jrp.matrix = BinaryMatrix(n, 1);
    for (const RecurrencePlot& p : plots) {
        jrp.member_modalities.push_back(p.modality);
        for (std::size_t i = 0; i < n * n; ++i) jrp.matrix.data[i] &= p.matrix.data[i];
    }
    return jrp;
}

JointRecurrencePlot as_joint(const RecurrencePlot& plot) {
    JointRecurrencePlot jrp;
    jrp.matrix = plot.matrix;
    jrp.member_modalities = {plot.modality};
    return jrp;
}

RecurrenceNetwork to_network(const JointRecurrencePlot& jrp) {
    RecurrenceNetwork net;
    net.adjacency = jrp.matrix;
    net.member_modalities = jrp.member_modalities;
    for (std::size_t i = 0; i < net.adjacency.n; ++i) net.adjacency(i, i) = 0;
    return net;
}

double recurrence_rate(const BinaryMatrix& m) {
    if (m.n < 2) return 0.0;
    std::size_t hits = 0;
    for (std::size_t i = 0; i < m.n; ++i)
        for (std::size_t j = 0; j < m.n; ++j)
            if (i != j && m(i, j)) ++hits;
    return static_cast<double>(hits) / (m.n * (m.n - 1));
}

} // namespace jrnet
