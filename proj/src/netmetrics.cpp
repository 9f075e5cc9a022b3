#include "jrnet/netmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <stdexcept>

namespace jrnet {

const std::array<const char*, NetworkMetricVector::kDim> kNetworkMetricNames = {
    "transitivity",      "global_efficiency", "strength_correlation", "strength_mean",
    "strength_sd",       "local_eff_mean",    "local_eff_sd",         "betweenness_mean",
    "betweenness_sd",    "clustering_mean",   "clustering_sd",        "diversity_mean",
    "diversity_sd",      "edge_betweenness_mean"};

namespace {

std::vector<std::vector<std::size_t>> neighbor_lists(const BinaryMatrix& a) {
    std::vector<std::vector<std::size_t>> nbrs(a.n);
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t j = 0; j < a.n; ++j)
            if (i != j && a(i, j)) nbrs[i].push_back(j);
    return nbrs;
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double population_sd(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    double m = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - m) * (x - m);
    return std::sqrt(acc / v.size());
}

// Efficiency of an explicit adjacency (used for neighborhood subgraphs).
double efficiency_of(const std::vector<std::vector<std::size_t>>& nbrs) {
    const std::size_t n = nbrs.size();
    if (n < 2) return 0.0;
    double acc = 0.0;
    std::vector<int> dist(n);
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < n; ++s) {
        std::fill(dist.begin(), dist.end(), -1);
        dist[s] = 0;
        queue.assign(1, s);
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : nbrs[u])
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
        }
        for (std::size_t t = 0; t < n; ++t)
            if (t != s && dist[t] > 0) acc += 1.0 / dist[t];
    }
    return acc / (static_cast<double>(n) * (n - 1));
}

// Brandes accumulation of node and edge betweenness (undirected: pair
// counts are halved at the end).
struct Betweenness {
    std::vector<double> node;
    std::vector<double> edge_sum; // over existing edges, same indexing as adjacency
    double edge_mean = 0.0;
};

Betweenness brandes(const BinaryMatrix& a) {
    const std::size_t n = a.n;
    auto nbrs = neighbor_lists(a);
    Betweenness bw;
    bw.node.assign(n, 0.0);
    std::vector<double> edge(n * n, 0.0);

    std::vector<std::vector<std::size_t>> preds(n);
    std::vector<double> sigma(n), delta(n);
    std::vector<int> dist(n);
    std::vector<std::size_t> order;
    std::deque<std::size_t> queue;

    for (std::size_t s = 0; s < n; ++s) {
        for (auto& p : preds) p.clear();
        std::fill(sigma.begin(), sigma.end(), 0.0);
        std::fill(dist.begin(), dist.end(), -1);
        order.clear();
        sigma[s] = 1.0;
        dist[s] = 0;
        queue.assign(1, s);
        while (!queue.empty()) {
            std::size_t u = queue.front();
            queue.pop_front();
            order.push_back(u);
            for (std::size_t v : nbrs[u]) {
                if (dist[v] < 0) {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if (dist[v] == dist[u] + 1) {
                    sigma[v] += sigma[u];
                    preds[v].push_back(u);
                }
            }
        }
        std::fill(delta.begin(), delta.end(), 0.0);
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            std::size_t v = *it;
            for (std::size_t u : preds[v]) {
                double c = sigma[u] / sigma[v] * (1.0 + delta[v]);
                edge[u * n + v] += c;
                delta[u] += c;
            }
            if (v != s) bw.node[v] += delta[v];
        }
    }

    for (std::size_t i = 0; i < n; ++i) bw.node[i] /= 2.0;
    double acc = 0.0;
    std::size_t edges = 0;
    bw.edge_sum.assign(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (a(i, j)) {
                double v = (edge[i * n + j] + edge[j * n + i]) / 2.0;
                bw.edge_sum[i * n + j] = bw.edge_sum[j * n + i] = v;
                acc += v;
                ++edges;
            }
    bw.edge_mean = edges ? acc / edges : 0.0;
    return bw;
}

} // namespace

double transitivity(const BinaryMatrix& a) {
    if (a.n < 3) throw std::runtime_error("transitivity needs at least 3 nodes");
    auto nbrs = neighbor_lists(a);
    double closed = 0.0, triples = 0.0;
    for (std::size_t i = 0; i < a.n; ++i) {
        double k = static_cast<double>(nbrs[i].size());
        triples += k * (k - 1) / 2.0;
        for (std::size_t u : nbrs[i])
            for (std::size_t v : nbrs[i])
                if (u < v && a(u, v)) closed += 1.0;
    }
    // every triangle is counted once per corner, i.e. 3 times
    return triples > 0 ? closed / triples : 0.0;
}

double global_efficiency(const BinaryMatrix& a) {
    if (a.n < 2) throw std::runtime_error("global efficiency needs at least 2 nodes");
    return efficiency_of(neighbor_lists(a));
}

NodeMetrics node_metrics(const BinaryMatrix& a, const NodeMetricsOptions& opt) {
    const std::size_t n = a.n;
    if (n < 2) throw std::runtime_error("node metrics need at least 2 nodes");
    auto nbrs = neighbor_lists(a);

    NodeMetrics nm;
    nm.strength.assign(n, 0.0);
    nm.local_efficiency.assign(n, 0.0);
    nm.clustering.assign(n, 0.0);
    nm.diversity.assign(n, 0.0);

    const int q = std::max(1, opt.diversity_segments);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& nb = nbrs[i];
        const double k = static_cast<double>(nb.size());
        nm.strength[i] = k;

        if (nb.size() >= 2) {
            // clustering: edges among neighbors / possible pairs
            double links = 0.0;
            for (std::size_t x = 0; x < nb.size(); ++x)
                for (std::size_t y = x + 1; y < nb.size(); ++y)
                    if (a(nb[x], nb[y])) links += 1.0;
            nm.clustering[i] = links / (k * (k - 1) / 2.0);

            // local efficiency: efficiency of the neighborhood subgraph
            std::vector<std::vector<std::size_t>> sub(nb.size());
            for (std::size_t x = 0; x < nb.size(); ++x)
                for (std::size_t y = 0; y < nb.size(); ++y)
                    if (x != y && a(nb[x], nb[y])) sub[x].push_back(y);
            nm.local_efficiency[i] = efficiency_of(sub);
        }

        if (!nb.empty()) {
            // diversity: entropy of the neighbor distribution over q equal
            // time segments of node indices, normalized by log q
            std::vector<double> counts(q, 0.0);
            for (std::size_t v : nb) {
                std::size_t seg = v * static_cast<std::size_t>(q) / n;
                counts[std::min<std::size_t>(seg, q - 1)] += 1.0;
            }
            double h = 0.0;
            for (double c : counts)
                if (c > 0) {
                    double p = c / k;
                    h -= p * std::log(p);
                }
            nm.diversity[i] = q > 1 ? h / std::log(static_cast<double>(q)) : 0.0;
        }
    }

    nm.betweenness = brandes(a).node;
    return nm;
}

double edge_betweenness_mean(const BinaryMatrix& a) {
    return brandes(a).edge_mean;
}

double strength_correlation(const BinaryMatrix& a) {
    const std::size_t n = a.n;
    if (n < 2) throw std::runtime_error("strength correlation needs at least 2 nodes");
    std::vector<double> in(n, 0.0), out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && a(i, j)) {
                out[i] += 1.0;
                in[j] += 1.0;
            }
    double mi = mean_of(in), mo = mean_of(out);
    double cov = 0.0, vi = 0.0, vo = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (in[i] - mi) * (out[i] - mo);
        vi += (in[i] - mi) * (in[i] - mi);
        vo += (out[i] - mo) * (out[i] - mo);
    }
    if (vi < 1e-300 || vo < 1e-300) return 0.0; // constant strengths: degenerate
    return cov / std::sqrt(vi * vo);
}

NetworkMetricVector metric_vector(const BinaryMatrix& a, const NodeMetricsOptions& opt) {
    if (a.n < 3) throw std::runtime_error("metric vector needs at least 3 nodes");
    NodeMetrics nm = node_metrics(a, opt);
    NetworkMetricVector mv;
    mv.values[0] = transitivity(a);
    mv.values[1] = global_efficiency(a);
    mv.values[2] = strength_correlation(a);
    mv.values[3] = mean_of(nm.strength);
    mv.values[4] = population_sd(nm.strength);
    mv.values[5] = mean_of(nm.local_efficiency);
    mv.values[6] = population_sd(nm.local_efficiency);
    mv.values[7] = mean_of(nm.betweenness);
    mv.values[8] = population_sd(nm.betweenness);
    mv.values[9] = mean_of(nm.clustering);
    mv.values[10] = population_sd(nm.clustering);
    mv.values[11] = mean_of(nm.diversity);
    mv.values[12] = population_sd(nm.diversity);
    mv.values[13] = edge_betweenness_mean(a);
    return mv;
}

NetworkMetricVector metric_vector(const RecurrenceNetwork& network, const NodeMetricsOptions& opt) {
    return metric_vector(network.adjacency, opt);
}

} // namespace jrnet
