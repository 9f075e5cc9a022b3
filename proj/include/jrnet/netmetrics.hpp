#pragma once

#include "jrnet/recurrence.hpp"

#include <array>
#include <string>
#include <vector>

namespace jrnet {

/// Per-node metric columns, in order.
struct NodeMetrics {
    std::vector<double> strength;
    std::vector<double> local_efficiency;
    std::vector<double> betweenness;
    std::vector<double> clustering;
    std::vector<double> diversity;
};

/// Fixed 14-dimensional summary of a recurrence network:
/// [transitivity, global_efficiency, strength_correlation,
///  strength mean/sd, local_efficiency mean/sd, betweenness mean/sd,
///  clustering mean/sd, diversity mean/sd, edge_betweenness mean].
struct NetworkMetricVector {
    static constexpr std::size_t kDim = 14;
    std::array<double, kDim> values{};

    double operator[](std::size_t i) const { return values[i]; }
};

extern const std::array<const char*, NetworkMetricVector::kDim> kNetworkMetricNames;

/// 3 * triangles / connected triples; 0 when the graph has no triples.
double transitivity(const BinaryMatrix& adjacency);

/// Mean over ordered pairs of 1/d(i, j) with 1/inf = 0 (BFS distances).
double global_efficiency(const BinaryMatrix& adjacency);

struct NodeMetricsOptions {
    int diversity_segments = 4;
};

NodeMetrics node_metrics(const BinaryMatrix& adjacency, const NodeMetricsOptions& options = {});

/// Mean shortest-path betweenness over existing edges; 0 for empty graphs.
double edge_betweenness_mean(const BinaryMatrix& adjacency);

/// Pearson correlation of in- vs out-strength; 1 on symmetric graphs with
/// non-constant degrees, 0 by convention when either vector is constant.
double strength_correlation(const BinaryMatrix& adjacency);

NetworkMetricVector metric_vector(const BinaryMatrix& adjacency,
                                  const NodeMetricsOptions& options = {});
NetworkMetricVector metric_vector(const RecurrenceNetwork& network,
                                  const NodeMetricsOptions& options = {});

} // namespace jrnet
