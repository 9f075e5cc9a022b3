#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/filters.hpp"
#include "jrnet/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

using namespace jrnet;
namespace fs = std::filesystem;

namespace {

std::vector<double> sine(double freq_hz, double fs, std::size_t n, double amp = 1.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i)
        x[i] = amp * std::sin(2 * std::numbers::pi * freq_hz * i / fs);
    return x;
}

double rms(const std::vector<double>& x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / x.size());
}

fs::path temp_file(const char* name) {
    fs::path dir = fs::temp_directory_path() / "jrnet_test_filters";
    fs::create_directories(dir);
    return dir / name;
}

} // namespace

TEST_CASE("lowpass 20 Hz order 4 hits -3 dB at the cutoff") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {20.0}, 4, 1000.0);
    CHECK(c.magnitude_db(20.0, 1000.0) == doctest::Approx(-3.0103).epsilon(0.033));
    CHECK(std::abs(c.magnitude_db(20.0, 1000.0) + 3.0) < 0.1);
}

TEST_CASE("lowpass DC gain is exactly 1") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {1.0}, 2, 1000.0);
    CHECK(std::abs(c.response(0.0, 1000.0)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("butterworth magnitude is monotone in the passband") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {20.0}, 4, 1000.0);
    double prev = std::abs(c.response(0.0, 1000.0));
    for (double f = 0.5; f <= 20.0; f += 0.5) {
        double mag = std::abs(c.response(f, 1000.0));
        CHECK(mag <= prev + 1e-12);
        prev = mag;
    }
}

TEST_CASE("bandpass 5-45 order 4: deep DC rejection, flat mid-band") {
    BiquadCascade c = design_butterworth(FilterKind::bandpass, {5.0, 45.0}, 4, 1000.0);
    CHECK(c.magnitude_db(0.001, 1000.0) < -40.0);
    CHECK(c.magnitude_db(15.0, 1000.0) > -1.0);
    CHECK(std::abs(c.magnitude_db(5.0, 1000.0) + 3.0) < 0.1);
    CHECK(std::abs(c.magnitude_db(45.0, 1000.0) + 3.0) < 0.1);
}

TEST_CASE("design rejects bad parameters") {
    CHECK_THROWS(design_butterworth(FilterKind::lowpass, {600.0}, 4, 1000.0)); // >= Nyquist
    CHECK_THROWS(design_butterworth(FilterKind::bandpass, {45.0, 5.0}, 4, 1000.0));
    CHECK_THROWS(design_butterworth(FilterKind::lowpass, {10.0}, 0, 1000.0));
    CHECK_THROWS(design_butterworth(FilterKind::lowpass, {10.0}, 13, 1000.0));
}

TEST_CASE("shipped elliptic SOS file loads and meets its band spec") {
    fs::path sos = fs::path(JRNET_SOURCE_DIR) / "data" / "elliptic_ecg_5_45_fs1000.sos";
    BiquadCascade c = load_sos_file(sos);
    REQUIRE(c.sections.size() == 4);
    CHECK(c.magnitude_db(1.0, 1000.0) < -30.0);
    for (double f = 10.0; f <= 40.0; f += 0.5) CHECK(c.magnitude_db(f, 1000.0) > -1.0);
    // matches the compiled-in copy
    BiquadCascade builtin = builtin_ecg_bandpass();
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(c.sections[i].b0 == builtin.sections[i].b0);
        CHECK(c.sections[i].a2 == builtin.sections[i].a2);
    }
}

TEST_CASE("unstable and malformed SOS rows are rejected") {
    fs::path p = temp_file("unstable.sos");
    std::ofstream(p) << "1 0 0 -2.5 1.6\n";
    CHECK_THROWS_WITH(load_sos_file(p), doctest::Contains("unstable section"));

    fs::path q = temp_file("malformed.sos");
    std::ofstream(q) << "1 0 0 0.5\n";
    CHECK_THROWS_WITH(load_sos_file(q), doctest::Contains("malformed"));

    fs::path e = temp_file("empty.sos");
    std::ofstream(e) << "";
    CHECK_THROWS_WITH(load_sos_file(e), doctest::Contains("empty"));
}

TEST_CASE("filtfilt: zeros map to zeros, DC passes exactly") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {20.0}, 4, 1000.0);
    std::vector<double> zeros(1000, 0.0);
    for (double v : filtfilt(c, zeros)) CHECK(v == 0.0);

    std::vector<double> dc(1000, 2.5);
    for (double v : filtfilt(c, dc)) CHECK(v == doctest::Approx(2.5).epsilon(1e-9));
}

TEST_CASE("filtfilt attenuates a 50 Hz tone below 5% through the 20 Hz lowpass") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {20.0}, 4, 1000.0);
    std::vector<double> x = sine(50.0, 1000.0, 4000);
    std::vector<double> y = filtfilt(c, x);
    // ignore the edge fifth on each side when comparing steady-state power
    std::vector<double> mid(y.begin() + 800, y.end() - 800);
    std::vector<double> mid_in(x.begin() + 800, x.end() - 800);
    CHECK(rms(mid) < 0.05 * rms(mid_in));
}

TEST_CASE("filtfilt is linear") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {30.0}, 4, 500.0);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> dist;
    std::vector<double> x(800), y(800);
    for (auto& v : x) v = dist(rng);
    for (auto& v : y) v = dist(rng);
    const double a = 1.7, b = -0.4;
    std::vector<double> combo(800);
    for (std::size_t i = 0; i < 800; ++i) combo[i] = a * x[i] + b * y[i];

    auto fx = filtfilt(c, x), fy = filtfilt(c, y), fc = filtfilt(c, combo);
    double scale = rms(fc) + 1e-30;
    for (std::size_t i = 0; i < 800; ++i)
        CHECK(std::abs(fc[i] - (a * fx[i] + b * fy[i])) / scale < 1e-9);
}

TEST_CASE("filtfilt is zero-phase: band-limited pulse stays centered") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {15.0}, 4, 500.0);
    std::vector<double> x(1001, 0.0);
    // gaussian pulse centered at 500
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = (static_cast<double>(i) - 500.0) / 30.0;
        x[i] = std::exp(-0.5 * d * d);
    }
    std::vector<double> y = filtfilt(c, x);
    // cross-correlation peak at zero lag
    auto xcorr = [&](int lag) {
        double acc = 0.0;
        for (std::size_t i = 100; i + 100 < x.size(); ++i)
            acc += x[i] * y[static_cast<std::size_t>(static_cast<int>(i) + lag)];
        return acc;
    };
    double best = xcorr(0);
    for (int lag = -20; lag <= 20; ++lag) CHECK(xcorr(lag) <= best + 1e-12);
}

TEST_CASE("filtfilt rejects too-short traces") {
    BiquadCascade c = design_butterworth(FilterKind::lowpass, {20.0}, 4, 1000.0);
    std::vector<double> x(3 * c.total_order(), 1.0);
    CHECK_THROWS_WITH(filtfilt(c, x), doctest::Contains("too short"));
}
