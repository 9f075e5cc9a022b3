#pragma once

#include "jrnet/physio.hpp"
#include "jrnet/types.hpp"

#include <cstdint>
#include <vector>

namespace jrnet {

/// Dense square binary matrix (row-major bytes).
struct BinaryMatrix {
    std::size_t n = 0;
    std::vector<std::uint8_t> data;

    BinaryMatrix() = default;
    explicit BinaryMatrix(std::size_t size, std::uint8_t fill = 0) : n(size), data(size * size, fill) {}

    std::uint8_t operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    std::uint8_t& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }

    bool operator==(const BinaryMatrix&) const = default;
};

/// Phase-space trajectory from time-delay embedding of a window-feature
/// series. States concatenate the d-dimensional window vectors at steps
/// i, i+tau, ..., i+(m-1)tau.
struct EmbeddedTrajectory {
    std::vector<std::vector<double>> states; // N x (m*d)
    int embedding_dim = 1;                   // m
    int delay = 1;                           // tau, in window steps
    Modality source_modality = Modality::ecg;

    std::size_t size() const { return states.size(); }
    std::size_t state_dim() const { return states.empty() ? 0 : states[0].size(); }
};

EmbeddedTrajectory embed(const FeatureWindowSeries& series, int m, int tau, bool standardize);
/// Embedding of a raw state sequence (rows = time steps).
EmbeddedTrajectory embed_rows(const std::vector<std::vector<double>>& rows, int m, int tau,
                              bool standardize, Modality source);

struct ThresholdSpec {
    enum class Mode { fixed_epsilon, target_rate } mode = Mode::target_rate;
    double epsilon = 0.0;
    double rate = 0.10;

    static ThresholdSpec fixed(double eps) { return {Mode::fixed_epsilon, eps, 0.0}; }
    static ThresholdSpec target(double rate) { return {Mode::target_rate, 0.0, rate}; }
};

struct RecurrencePlot {
    BinaryMatrix matrix;
    double epsilon = 0.0;
    double achieved_rate = 0.0; // off-diagonal recurrence rate
    Modality modality = Modality::ecg;
    bool degenerate = false; // all states identical under a zero threshold

    std::size_t size() const { return matrix.n; }
};

/// L1-distance recurrence plot. With a target rate, epsilon is the
/// rate-quantile of the off-diagonal pairwise distances. A distance equal
/// to epsilon counts as recurrent.
RecurrencePlot recurrence_plot(const EmbeddedTrajectory& traj, const ThresholdSpec& spec);

struct JointRecurrencePlot {
    BinaryMatrix matrix;
    std::vector<Modality> member_modalities;

    std::size_t size() const { return matrix.n; }
};

/// Entrywise AND across member plots.
JointRecurrencePlot joint_recurrence_plot(const std::vector<RecurrencePlot>& plots);
/// A single plot viewed as its own joint plot (single-modality networks).
JointRecurrencePlot as_joint(const RecurrencePlot& plot);

struct RecurrenceNetwork {
    BinaryMatrix adjacency; // zero diagonal, symmetric
    std::vector<Modality> member_modalities;

    std::size_t size() const { return adjacency.n; }
};

/// Adjacency = joint plot with the self-loop diagonal removed.
RecurrenceNetwork to_network(const JointRecurrencePlot& jrp);

double recurrence_rate(const BinaryMatrix& m); // off-diagonal fraction

} // namespace jrnet
