#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/recurrence.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace jrnet;

namespace {

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist;
    std::vector<std::vector<double>> rows(n, std::vector<double>(d));
    for (auto& r : rows)
        for (auto& v : r) v = dist(rng);
    return rows;
}

double l1(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return acc;
}

} // namespace

TEST_CASE("embed: counts and dimensions") {
    auto traj = embed_rows(random_rows(100, 1, 1), 3, 1, false, Modality::ecg);
    CHECK(traj.size() == 98);
    CHECK(traj.state_dim() == 3);

    auto identity = embed_rows(random_rows(50, 4, 2), 1, 1, false, Modality::eda);
    CHECK(identity.size() == 50);
    CHECK(identity.state_dim() == 4);

    CHECK_THROWS_WITH(embed_rows(random_rows(5, 1, 3), 3, 3, false, Modality::ecg),
                      doctest::Contains("too short"));
    CHECK_THROWS(embed_rows(random_rows(50, 1, 3), 0, 1, false, Modality::ecg));
}

TEST_CASE("embed: states are lagged concatenations of the input rows") {
    auto rows = random_rows(20, 2, 4);
    auto traj = embed_rows(rows, 2, 3, false, Modality::resp);
    REQUIRE(traj.size() == 20 - 3);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(traj.states[i][0] == rows[i][0]);
        CHECK(traj.states[i][1] == rows[i][1]);
        CHECK(traj.states[i][2] == rows[i + 3][0]);
        CHECK(traj.states[i][3] == rows[i + 3][1]);
    }
}

TEST_CASE("embed: standardization zeroes the mean and fixes the spread") {
    auto rows = random_rows(200, 3, 5);
    for (auto& r : rows) r[1] = r[1] * 50.0 + 400.0; // one wild-scaled feature
    auto traj = embed_rows(rows, 1, 1, true, Modality::face);
    for (std::size_t c = 0; c < 3; ++c) {
        double mean = 0.0, var = 0.0;
        for (const auto& s : traj.states) mean += s[c];
        mean /= traj.size();
        for (const auto& s : traj.states) var += (s[c] - mean) * (s[c] - mean);
        var /= traj.size();
        CHECK(std::abs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("recurrence plot: diagonal ones, Heaviside boundary at zero") {
    auto traj = embed_rows(random_rows(40, 2, 6), 2, 1, true, Modality::ecg);
    RecurrencePlot rp = recurrence_plot(traj, ThresholdSpec::target(0.1));
    for (std::size_t i = 0; i < rp.size(); ++i) CHECK(rp.matrix(i, i) == 1);

    // two states at distance 1 with eps = 0.5: off-diagonal zeros
    std::vector<std::vector<double>> rows = {{0.0}, {1.0}};
    auto two = embed_rows(rows, 1, 1, false, Modality::eda);
    RecurrencePlot fixed = recurrence_plot(two, ThresholdSpec::fixed(0.5));
    CHECK(fixed.matrix(0, 1) == 0);
    CHECK(fixed.matrix(1, 0) == 0);

    // eps equal to the distance counts as recurrent
    RecurrencePlot edge = recurrence_plot(two, ThresholdSpec::fixed(1.0));
    CHECK(edge.matrix(0, 1) == 1);
}

TEST_CASE("recurrence plot: identical states under zero threshold flag degenerate") {
    std::vector<std::vector<double>> rows(8, std::vector<double>{3.0, 3.0});
    auto traj = embed_rows(rows, 1, 1, false, Modality::eda);
    RecurrencePlot rp = recurrence_plot(traj, ThresholdSpec::fixed(0.0));
    CHECK(rp.degenerate);
    for (std::size_t i = 0; i < rp.size(); ++i)
        for (std::size_t j = 0; j < rp.size(); ++j) CHECK(rp.matrix(i, j) == 1);
}

TEST_CASE("target rate threshold achieves close to the requested rate") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto traj = embed_rows(random_rows(50, 3, 100 + seed), 1, 1, true, Modality::ecg);
        RecurrencePlot rp = recurrence_plot(traj, ThresholdSpec::target(0.10));
        CHECK(rp.achieved_rate >= 0.08);
        CHECK(rp.achieved_rate <= 0.12);

        // exact count check against brute-force distances
        std::size_t hits = 0;
        for (std::size_t i = 0; i < traj.size(); ++i)
            for (std::size_t j = 0; j < traj.size(); ++j)
                if (i != j && l1(traj.states[i], traj.states[j]) <= rp.epsilon) ++hits;
        CHECK(rp.achieved_rate ==
              doctest::Approx(static_cast<double>(hits) / (50.0 * 49.0)).epsilon(1e-12));
    }
}

TEST_CASE("monotonicity in epsilon") {
    auto traj = embed_rows(random_rows(30, 2, 9), 2, 2, true, Modality::resp);
    RecurrencePlot small = recurrence_plot(traj, ThresholdSpec::fixed(0.5));
    RecurrencePlot big = recurrence_plot(traj, ThresholdSpec::fixed(1.5));
    for (std::size_t i = 0; i < small.size(); ++i)
        for (std::size_t j = 0; j < small.size(); ++j)
            CHECK(small.matrix(i, j) <= big.matrix(i, j));
}

TEST_CASE("symmetry of RP, JRP and the network adjacency") {
    std::vector<RecurrencePlot> plots;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto traj = embed_rows(random_rows(25, 2, 30 + seed), 2, 1, true, Modality::ecg);
        plots.push_back(recurrence_plot(traj, ThresholdSpec::target(0.2)));
    }
    JointRecurrencePlot jrp = joint_recurrence_plot(plots);
    RecurrenceNetwork net = to_network(jrp);
    for (std::size_t i = 0; i < jrp.size(); ++i)
        for (std::size_t j = 0; j < jrp.size(); ++j) {
            CHECK(plots[0].matrix(i, j) == plots[0].matrix(j, i));
            CHECK(jrp.matrix(i, j) == jrp.matrix(j, i));
            CHECK(net.adjacency(i, j) == net.adjacency(j, i));
        }
    for (std::size_t i = 0; i < net.size(); ++i) CHECK(net.adjacency(i, i) == 0);
}

TEST_CASE("joint plot identities: idempotent AND, all-ones identity") {
    auto traj = embed_rows(random_rows(20, 2, 11), 1, 1, true, Modality::eda);
    RecurrencePlot rp = recurrence_plot(traj, ThresholdSpec::target(0.15));

    JointRecurrencePlot self = joint_recurrence_plot({rp, rp});
    CHECK(self.matrix == rp.matrix);

    RecurrencePlot ones = rp;
    std::fill(ones.matrix.data.begin(), ones.matrix.data.end(), 1);
    CHECK(joint_recurrence_plot({rp, ones}).matrix == rp.matrix);
}

TEST_CASE("joint plot equals the entrywise product of members") {
    std::vector<RecurrencePlot> plots;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto traj = embed_rows(random_rows(22, 1, 60 + seed), 3, 1, true, Modality::resp);
        plots.push_back(recurrence_plot(traj, ThresholdSpec::target(0.3)));
    }
    JointRecurrencePlot jrp = joint_recurrence_plot(plots);
    for (std::size_t i = 0; i < jrp.size(); ++i)
        for (std::size_t j = 0; j < jrp.size(); ++j) {
            int expect = plots[0].matrix(i, j) & plots[1].matrix(i, j) & plots[2].matrix(i, j);
            CHECK(jrp.matrix(i, j) == expect);
        }
    // joint recurrence is at most the sparsest member
    double min_rate = 1.0;
    for (const auto& p : plots) min_rate = std::min(min_rate, recurrence_rate(p.matrix));
    CHECK(recurrence_rate(jrp.matrix) <= min_rate + 1e-12);
}

TEST_CASE("size mismatch and tiny inputs are rejected") {
    auto a = recurrence_plot(embed_rows(random_rows(20, 1, 1), 1, 1, true, Modality::ecg),
                             ThresholdSpec::target(0.2));
    auto b = recurrence_plot(embed_rows(random_rows(21, 1, 2), 1, 1, true, Modality::eda),
                             ThresholdSpec::target(0.2));
    CHECK_THROWS_WITH(joint_recurrence_plot({a, b}), doctest::Contains("size mismatch"));
    CHECK_THROWS(joint_recurrence_plot({a}));
}

TEST_CASE("network from all-ones and identity-only joint plots") {
    JointRecurrencePlot ones;
    ones.matrix = BinaryMatrix(6, 1);
    RecurrenceNetwork complete = to_network(ones);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j)
            CHECK(complete.adjacency(i, j) == (i == j ? 0 : 1));

    JointRecurrencePlot eye;
    eye.matrix = BinaryMatrix(6, 0);
    for (std::size_t i = 0; i < 6; ++i) eye.matrix(i, i) = 1;
    RecurrenceNetwork empty = to_network(eye);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) CHECK(empty.adjacency(i, j) == 0);
}

TEST_CASE("permutation equivariance: relabeling time permutes the adjacency") {
    const std::size_t n = 18;
    auto rows_a = random_rows(n, 2, 77);
    auto rows_b = random_rows(n, 2, 78);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(5);
    std::shuffle(perm.begin(), perm.end(), rng);

    auto apply = [&](const std::vector<std::vector<double>>& rows) {
        std::vector<std::vector<double>> out(n);
        for (std::size_t i = 0; i < n; ++i) out[i] = rows[perm[i]];
        return out;
    };

    auto net_of = [&](const std::vector<std::vector<double>>& ra,
                      const std::vector<std::vector<double>>& rb) {
        auto pa = recurrence_plot(embed_rows(ra, 1, 1, true, Modality::ecg),
                                  ThresholdSpec::target(0.2));
        auto pb = recurrence_plot(embed_rows(rb, 1, 1, true, Modality::eda),
                                  ThresholdSpec::target(0.2));
        return to_network(joint_recurrence_plot({pa, pb}));
    };

    RecurrenceNetwork base = net_of(rows_a, rows_b);
    RecurrenceNetwork permuted = net_of(apply(rows_a), apply(rows_b));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            CHECK(permuted.adjacency(i, j) == base.adjacency(perm[i], perm[j]));
}
