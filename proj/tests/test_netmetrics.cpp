#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/netmetrics.hpp"
#include "oracles.hpp"

#include <random>

using namespace jrnet;

namespace {

BinaryMatrix complete_graph(std::size_t n) {
    BinaryMatrix a(n, 1);
    for (std::size_t i = 0; i < n; ++i) a(i, i) = 0;
    return a;
}

BinaryMatrix star_graph(std::size_t leaves) {
    BinaryMatrix a(leaves + 1);
    for (std::size_t i = 1; i <= leaves; ++i) {
        a(0, i) = 1;
        a(i, 0) = 1;
    }
    return a;
}

BinaryMatrix path_graph(std::size_t n) {
    BinaryMatrix a(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        a(i, i + 1) = 1;
        a(i + 1, i) = 1;
    }
    return a;
}

BinaryMatrix random_graph(std::size_t n, double p, std::mt19937_64& rng) {
    BinaryMatrix a(n);
    std::uniform_real_distribution<double> u;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (u(rng) < p) {
                a(i, j) = 1;
                a(j, i) = 1;
            }
    return a;
}

BinaryMatrix graph_from_mask(std::size_t n, unsigned mask) {
    BinaryMatrix a(n);
    std::size_t bit = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j, ++bit)
            if (mask & (1u << bit)) {
                a(i, j) = 1;
                a(j, i) = 1;
            }
    return a;
}

} // namespace

TEST_CASE("transitivity: complete graph 1, star 0") {
    CHECK(transitivity(complete_graph(4)) == doctest::Approx(1.0));
    CHECK(transitivity(star_graph(3)) == doctest::Approx(0.0));
    CHECK_THROWS(transitivity(complete_graph(2)));
}

TEST_CASE("transitivity matches exhaustive triangle counting on random graphs") {
    std::mt19937_64 rng(1);
    for (int rep = 0; rep < 50; ++rep) {
        BinaryMatrix a = random_graph(6, 0.5, rng);
        CHECK(transitivity(a) == doctest::Approx(oracle::transitivity(a)).epsilon(1e-13));
    }
}

TEST_CASE("global efficiency: complete 1, empty 0, path vs oracle") {
    CHECK(global_efficiency(complete_graph(5)) == doctest::Approx(1.0));
    CHECK(global_efficiency(BinaryMatrix(5)) == doctest::Approx(0.0));
    BinaryMatrix p4 = path_graph(4);
    CHECK(global_efficiency(p4) == doctest::Approx(oracle::global_efficiency(p4)).epsilon(1e-13));
    // hand value: ordered pairs of 1/d for P4
    double hand = 2.0 * (3.0 * 1.0 + 2.0 * 0.5 + 1.0 / 3.0) / 12.0;
    CHECK(global_efficiency(p4) == doctest::Approx(hand).epsilon(1e-13));
}

TEST_CASE("node metrics on K5: strength 4, clustering 1, betweenness 0") {
    NodeMetrics nm = node_metrics(complete_graph(5));
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(nm.strength[i] == doctest::Approx(4.0));
        CHECK(nm.clustering[i] == doctest::Approx(1.0));
        CHECK(nm.local_efficiency[i] == doctest::Approx(1.0));
        CHECK(nm.betweenness[i] == doctest::Approx(0.0));
    }
}

TEST_CASE("star hub betweenness counts all leaf pairs") {
    NodeMetrics nm = node_metrics(star_graph(4));
    CHECK(nm.betweenness[0] == doctest::Approx(6.0)); // C(4,2) leaf pairs
    for (std::size_t i = 1; i <= 4; ++i) CHECK(nm.betweenness[i] == doctest::Approx(0.0));
}

TEST_CASE("isolated node scores zero on all five local metrics") {
    BinaryMatrix a(4);
    a(0, 1) = a(1, 0) = 1; // node 2, 3 isolated (3 fully so)
    NodeMetrics nm = node_metrics(a);
    CHECK(nm.strength[3] == 0.0);
    CHECK(nm.clustering[3] == 0.0);
    CHECK(nm.local_efficiency[3] == 0.0);
    CHECK(nm.betweenness[3] == 0.0);
    CHECK(nm.diversity[3] == 0.0);
}

TEST_CASE("edge betweenness: single edge and K3 symmetry") {
    BinaryMatrix single(2);
    single(0, 1) = single(1, 0) = 1;
    CHECK(edge_betweenness_mean(single) == doctest::Approx(oracle::betweenness(single).edge_mean));
    CHECK(edge_betweenness_mean(single) == doctest::Approx(1.0));

    BinaryMatrix k3 = complete_graph(3);
    auto ob = oracle::betweenness(k3);
    CHECK(edge_betweenness_mean(k3) == doctest::Approx(ob.edge_mean).epsilon(1e-13));

    // two disjoint edges: within-component pairs only
    BinaryMatrix two(4);
    two(0, 1) = two(1, 0) = 1;
    two(2, 3) = two(3, 2) = 1;
    CHECK(edge_betweenness_mean(two) == doctest::Approx(oracle::betweenness(two).edge_mean));
    CHECK(edge_betweenness_mean(BinaryMatrix(4)) == 0.0);
}

TEST_CASE("strength correlation: 1 for varied degrees, 0 for regular graphs") {
    CHECK(strength_correlation(star_graph(4)) == doctest::Approx(1.0));
    CHECK(strength_correlation(complete_graph(5)) == 0.0); // constant degrees
    CHECK(strength_correlation(BinaryMatrix(4)) == 0.0);
}

TEST_CASE("metric vector on K6 matches the definitions") {
    NetworkMetricVector mv = metric_vector(complete_graph(6));
    CHECK(mv[0] == doctest::Approx(1.0));  // transitivity
    CHECK(mv[1] == doctest::Approx(1.0));  // global efficiency
    CHECK(mv[2] == 0.0);                   // strength correlation (regular)
    CHECK(mv[3] == doctest::Approx(5.0));  // strength mean
    CHECK(mv[4] == doctest::Approx(0.0));  // strength sd
    CHECK(mv[5] == doctest::Approx(1.0));  // local efficiency mean
    CHECK(mv[6] == doctest::Approx(0.0));
    CHECK(mv[7] == doctest::Approx(0.0));  // betweenness mean
    CHECK(mv[9] == doctest::Approx(1.0));  // clustering mean
    CHECK(mv[13] == doctest::Approx(1.0)); // edge betweenness mean (endpoint pair only)
}

TEST_CASE("metric vector on the empty graph is all zeros") {
    NetworkMetricVector mv = metric_vector(BinaryMatrix(6));
    for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i) CHECK(mv[i] == 0.0);
}

TEST_CASE("every metric equals the brute-force oracle on random graphs") {
    std::mt19937_64 rng(99);
    NodeMetricsOptions opt;
    for (int rep = 0; rep < 120; ++rep) {
        std::size_t n = 3 + rep % 6; // 3..8 nodes
        BinaryMatrix a = random_graph(n, 0.15 + 0.1 * (rep % 8), rng);
        auto expect = oracle::metric_vector(a, opt.diversity_segments);
        NetworkMetricVector got = metric_vector(a, opt);
        for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i)
            CHECK(got[i] == doctest::Approx(expect[i]).epsilon(1e-12));
    }
}

TEST_CASE("exhaustive oracle equivalence on every 4-node graph") {
    NodeMetricsOptions opt;
    for (unsigned mask = 0; mask < (1u << 6); ++mask) {
        BinaryMatrix a = graph_from_mask(4, mask);
        auto expect = oracle::metric_vector(a, opt.diversity_segments);
        NetworkMetricVector got = metric_vector(a, opt);
        for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i)
            CHECK(std::abs(got[i] - expect[i]) <= 1e-12);
    }
}

TEST_CASE("permutation invariance of the metric vector") {
    std::mt19937_64 rng(7);
    BinaryMatrix a = random_graph(8, 0.4, rng);
    // conjugate by a permutation: diversity is the one segment-dependent
    // metric; use a segment-preserving permutation (within-quarter swaps)
    std::vector<std::size_t> perm = {1, 0, 3, 2, 5, 4, 7, 6};
    BinaryMatrix b(8);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t j = 0; j < 8; ++j) b(perm[i], perm[j]) = a(i, j);
    NetworkMetricVector ma = metric_vector(a), mb = metric_vector(b);
    for (std::size_t i = 0; i < NetworkMetricVector::kDim; ++i)
        CHECK(ma[i] == doctest::Approx(mb[i]).epsilon(1e-12));
}

TEST_CASE("bounded metrics stay in range on many random graphs") {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 300; ++rep) {
        std::size_t n = 3 + rep % 48;
        BinaryMatrix a = random_graph(n, 0.05 + 0.9 * (rep % 10) / 10.0, rng);
        NetworkMetricVector mv = metric_vector(a);
        for (std::size_t i : {0ul, 1ul, 5ul, 9ul, 11ul}) {
            CHECK(mv[i] >= 0.0);
            CHECK(mv[i] <= 1.0 + 1e-12);
        }
        CHECK(mv[7] >= 0.0);  // betweenness mean
        CHECK(mv[13] >= 0.0); // edge betweenness mean
        CHECK(mv[2] >= -1.0);
        CHECK(mv[2] <= 1.0);
    }
}
