#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "jrnet/ingest.hpp"
#include "jrnet/physio.hpp"
#include "jrnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

using namespace jrnet;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

SignalTrace filtered_ecg(const SignalTrace& raw) {
    return filtfilt(builtin_ecg_bandpass(), raw);
}

// match detected peaks to ground truth within a tolerance (one-to-one)
struct MatchStats {
    std::size_t hits = 0, misses = 0, extras = 0;
};

MatchStats match_peaks(const std::vector<double>& truth, const std::vector<double>& detected,
                       double tol_s) {
    MatchStats s;
    std::vector<bool> used(detected.size(), false);
    for (double t : truth) {
        bool found = false;
        for (std::size_t i = 0; i < detected.size(); ++i) {
            if (!used[i] && std::abs(detected[i] - t) <= tol_s) {
                used[i] = true;
                found = true;
                break;
            }
        }
        if (found)
            ++s.hits;
        else
            ++s.misses;
    }
    for (bool u : used)
        if (!u) {
        }
    s.extras = detected.size() - s.hits;
    return s;
}

} // namespace

TEST_CASE("qrs: clean 60 bpm signal yields 60 peaks within one sample") {
    SynthEcg gen = synth_ecg(60.0, 60.0, 0.0, kInf, 1);
    QrsAnnotation ann = detect_qrs(filtered_ecg(gen.trace));
    REQUIRE(ann.r_peaks_s.size() == 60);
    for (std::size_t i = 0; i < 60; ++i)
        CHECK(std::abs(ann.r_peaks_s[i] - gen.r_peaks_s[i]) <= 1.0 / 1000.0 + 1e-12);
    // q < r < s for every complex
    for (std::size_t i = 0; i < ann.r_peaks_s.size(); ++i) {
        CHECK(ann.q_points_s[i] < ann.r_peaks_s[i]);
        CHECK(ann.s_points_s[i] > ann.r_peaks_s[i]);
        CHECK(ann.qrs_areas[i] > 0.0);
    }
}

TEST_CASE("qrs: noisy trace keeps sensitivity and precision above 0.95") {
    SynthEcg gen = synth_ecg(300.0, 75.0, 40.0, 10.0, 5);
    QrsAnnotation ann = detect_qrs(filtered_ecg(gen.trace));
    MatchStats m = match_peaks(gen.r_peaks_s, ann.r_peaks_s, 0.050);
    double sensitivity = static_cast<double>(m.hits) / gen.r_peaks_s.size();
    double ppv = static_cast<double>(m.hits) / ann.r_peaks_s.size();
    CHECK(sensitivity >= 0.95);
    CHECK(ppv >= 0.95);
}

TEST_CASE("qrs: flatline raises no-QRS error") {
    SignalTrace flat = make_trace(std::vector<double>(8000, 0.0), 1000.0, "ecg");
    CHECK_THROWS_WITH(detect_qrs(flat), doctest::Contains("no QRS found"));
}

TEST_CASE("ecg_features: constant RR gives zero spread") {
    QrsAnnotation ann;
    for (int i = 0; i < 4; ++i) {
        ann.r_peaks_s.push_back(1.0 + i * 1.0); // RR = [1000, 1000, 1000] ms
        ann.q_points_s.push_back(ann.r_peaks_s.back() - 0.02);
        ann.s_points_s.push_back(ann.r_peaks_s.back() + 0.02);
        ann.qrs_areas.push_back(0.01);
    }
    SignalTrace dummy = make_trace(std::vector<double>(10000, 0.0), 1000.0, "ecg");
    auto f = ecg_features(ann, dummy, 0.0, 10.0);
    REQUIRE(f.size() == 10);
    CHECK(f[0] == doctest::Approx(1000.0)); // mean RR
    CHECK(f[1] == doctest::Approx(0.0));    // sd RR
    CHECK(f[2] == doctest::Approx(0.0));    // sd of successive diffs
    CHECK(f[3] == doctest::Approx(0.0));    // rmssd
    CHECK(f[4] == 0.0);                     // shorten > 50 ms
    CHECK(f[5] == 0.0);                     // lengthen > 50 ms
    CHECK(f[8] == doctest::Approx(60.0));   // mean HR
    CHECK(f[9] == 4.0);                     // beats
}

TEST_CASE("ecg_features: asymmetric 50 ms counts follow the interval order") {
    QrsAnnotation ann;
    double t = 1.0;
    // RR sequence 800 then 900 ms
    for (double rr : {0.0, 0.8, 0.9}) {
        t += rr;
        ann.r_peaks_s.push_back(t);
        ann.q_points_s.push_back(t - 0.02);
        ann.s_points_s.push_back(t + 0.02);
        ann.qrs_areas.push_back(0.01);
    }
    SignalTrace dummy = make_trace(std::vector<double>(10000, 0.0), 1000.0, "ecg");
    auto f = ecg_features(ann, dummy, 0.0, 10.0);
    CHECK(f[0] == doctest::Approx(850.0));
    CHECK(f[4] == 0.0); // first exceeds second
    CHECK(f[5] == 1.0); // second exceeds first by 100 ms
}

TEST_CASE("ecg_features: synthetic 75 bpm recovers the programmed mean RR") {
    SynthEcg gen = synth_ecg(120.0, 75.0, 40.0, kInf, 3);
    QrsAnnotation ann = detect_qrs(filtered_ecg(gen.trace));
    auto f = ecg_features(ann, gen.trace, 0.0, 120.0);
    CHECK(std::abs(f[0] - 800.0) < 15.0);
}

TEST_CASE("ecg_features needs three peaks in the window") {
    QrsAnnotation ann;
    ann.r_peaks_s = {1.0, 2.0};
    ann.q_points_s = {0.98, 1.98};
    ann.s_points_s = {1.02, 2.02};
    ann.qrs_areas = {0.01, 0.01};
    SignalTrace dummy = make_trace(std::vector<double>(5000, 0.0), 1000.0, "ecg");
    CHECK_THROWS_WITH(ecg_features(ann, dummy, 0.0, 5.0), doctest::Contains("fewer than 3"));
}

TEST_CASE("scr: constant trace has no events") {
    SignalTrace flat = make_trace(std::vector<double>(30000, 2.0), 1000.0, "eda");
    CHECK(detect_scr(flat).empty());
}

TEST_CASE("scr: three well-separated events are found near their onsets") {
    SynthEda gen = synth_eda(60.0, {10.0, 25.0, 40.0}, {0.5, 0.5, 0.5}, 2.0, 7, 1000.0, 1.0, 4.0,
                             0.0, 0.0);
    auto events = detect_scr(gen.trace);
    REQUIRE(events.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(events[i].start_s - gen.events[i].onset_s) <= 0.5);
        CHECK(events[i].amplitude == doctest::Approx(0.5).epsilon(0.08));
        CHECK(events[i].rise_time_s > 0.0);
        CHECK(events[i].rise_time_s < events[i].duration_s);
    }
}

TEST_CASE("scr: amplitude below the 0.01 uS floor is discarded") {
    SynthEda gen = synth_eda(30.0, {10.0}, {0.005}, 2.0, 7, 1000.0, 1.0, 4.0, 0.0, 0.0);
    CHECK(detect_scr(gen.trace).empty());
}

TEST_CASE("scr: onsets closer than the Bartlett window merge into one event") {
    SynthEda gen = synth_eda(30.0, {10.0, 10.5}, {0.4, 0.4}, 2.0, 7, 1000.0, 1.0, 4.0, 0.0, 0.0);
    auto events = detect_scr(gen.trace);
    CHECK(events.size() == 1);
    // the merged event spans both rises
    CHECK(events[0].amplitude > 0.4);
}

TEST_CASE("eda_features: no events reports mean and zeros") {
    SignalTrace flat = make_trace(std::vector<double>(30000, 2.0), 1000.0, "eda");
    auto f = eda_features(flat, {}, 0.0, 20.0);
    REQUIRE(f.size() == 5);
    CHECK(f[0] == doctest::Approx(2.0));
    CHECK(f[1] == 0.0);
    CHECK(f[2] == 0.0);
    CHECK(f[3] == 0.0);
    CHECK(f[4] == 0.0);
}

TEST_CASE("eda_features: events counted by start time, means from construction") {
    std::vector<ScrEvent> events;
    for (double t : {5.0, 12.0}) {
        ScrEvent e;
        e.start_s = t;
        e.peak_s = t + 1.0;
        e.amplitude = 0.5;
        e.rise_time_s = 1.0;
        e.duration_s = 4.0;
        events.push_back(e);
    }
    SignalTrace flat = make_trace(std::vector<double>(30000, 3.0), 1000.0, "eda");
    auto f = eda_features(flat, events, 0.0, 20.0);
    CHECK(f[1] == 2.0);
    CHECK(f[2] == doctest::Approx(4.0));
    CHECK(f[3] == doctest::Approx(0.5));
    CHECK(f[4] == doctest::Approx(1.0));

    // boundary convention: start inside the window counts, outside does not
    auto g = eda_features(flat, events, 11.0, 25.0);
    CHECK(g[1] == 1.0);
    auto h = eda_features(flat, events, 12.0, 25.0);
    CHECK(h[1] == 1.0); // start at window start is inside
    auto i = eda_features(flat, events, 12.5, 25.0);
    CHECK(i[1] == 0.0);
}

TEST_CASE("resp_features: pure 0.25 Hz sinusoid") {
    std::vector<double> x;
    const double fs = 100.0;
    for (int i = 0; i < 3200; ++i)
        x.push_back(std::sin(2 * std::numbers::pi * 0.25 * i / fs));
    SignalTrace resp = make_trace(std::move(x), fs, "resp");
    auto f = resp_features(resp, 0.0, 32.0);
    REQUIRE(f.size() == 4);
    CHECK(f[0] == doctest::Approx(4000.0).epsilon(0.01)); // peak-to-peak ms
    CHECK(f[1] == doctest::Approx(1.0).epsilon(0.01));    // peak height
    CHECK(f[2] == doctest::Approx(50.0).epsilon(0.04));   // % inhalation
    CHECK(f[3] == doctest::Approx(50.0).epsilon(0.04));   // % exhalation
}

TEST_CASE("resp_features: 75% rising sawtooth") {
    SignalTrace resp = synth_resp(40.0, 0.25, 1.0, 0.75, 0.0, 1, 100.0);
    auto f = resp_features(resp, 0.0, 40.0);
    CHECK(std::abs(f[2] - 75.0) < 2.0);
    CHECK(std::abs(f[3] - 25.0) < 2.0);
}

TEST_CASE("resp_features: constant trace has insufficient peaks") {
    SignalTrace flat = make_trace(std::vector<double>(4000, 1.0), 100.0, "resp");
    CHECK_THROWS_WITH(resp_features(flat, 0.0, 40.0), doctest::Contains("insufficient peaks"));
}

TEST_CASE("find_peaks honors prominence and spacing") {
    std::vector<double> x(300, 0.0);
    auto bump = [&](std::size_t c, double a) {
        for (std::size_t i = c - 10; i <= c + 10; ++i)
            x[i] += a * (1.0 - std::abs(static_cast<double>(i) - c) / 10.0);
    };
    bump(50, 1.0);
    bump(65, 0.9); // within spacing of the taller one
    bump(150, 0.3);
    bump(250, 1.0);
    auto peaks = find_peaks(x, 0.5, 30);
    REQUIRE(peaks.size() == 2);
    CHECK(peaks[0] == 50);
    CHECK(peaks[1] == 250);
}

namespace {

WindowInputs study_like_inputs(double duration_s, std::uint64_t seed) {
    const PipelineConfig config;
    WindowInputs in;
    in.ecg = filtfilt(builtin_ecg_bandpass(), synth_ecg(duration_s, 72, 30, 20, seed).trace);
    std::vector<double> scr_times, scr_amps;
    for (double t = 7.0; t < duration_s - 8.0; t += 11.0) {
        scr_times.push_back(t);
        scr_amps.push_back(0.5);
    }
    in.eda = filtfilt(config.eda_filter(1000.0),
                      synth_eda(duration_s, scr_times, scr_amps, 3.0, seed + 1).trace);
    in.resp = filtfilt(config.resp_filter(1000.0),
                       synth_resp(duration_s, 0.25, 1.0, 0.5, 0.02, seed + 2));

    // simple deterministic face/head feature traces at 25 fps
    const std::size_t frames = static_cast<std::size_t>(duration_s * 25.0);
    auto mk = [&](double base) {
        SignalTrace t;
        t.sample_rate_hz = 25.0;
        t.channels.assign(6, {});
        for (int c = 0; c < 6; ++c) {
            t.channel_labels.push_back("f" + std::to_string(c));
            for (std::size_t i = 0; i < frames; ++i)
                t.channels[c].push_back(base + 0.1 * c + 0.01 * std::sin(0.2 * i + c));
        }
        return t;
    };
    in.face_feats = mk(0.3);
    in.head_feats = mk(-0.2);
    return in;
}

} // namespace

TEST_CASE("windowize: all five modalities share starts and counts") {
    WindowPlan plan;
    plan.hop_s = 2.5;
    WindowedTrial out = windowize(study_like_inputs(90.0, 21), plan);

    const auto& face = out.series.at(Modality::face);
    REQUIRE(face.size() > 10);
    for (Modality m : kAllModalities) {
        const auto& s = out.series.at(m);
        CHECK(s.size() == face.size());
        CHECK(s.window_starts_s == face.window_starts_s);
    }
    CHECK(out.series.at(Modality::face).dim() == 6);
    CHECK(out.series.at(Modality::head).dim() == 6);
    CHECK(out.series.at(Modality::ecg).dim() == 10);
    CHECK(out.series.at(Modality::eda).dim() == 5);
    CHECK(out.series.at(Modality::resp).dim() == 4);
}

TEST_CASE("windowize: count follows floor((T - Wmax)/hop) + 1") {
    WindowPlan plan;
    plan.hop_s = 2.43;
    double duration = 273.0;
    WindowedTrial out = windowize(study_like_inputs(duration, 22), plan);
    std::size_t expected =
        static_cast<std::size_t>(std::floor((duration - 30.0) / plan.hop_s)) + 1;
    CHECK(out.series.at(Modality::ecg).size() + out.dropped_windows == expected);
    // derived per-modality overlap for the 5 s windows
    double overlap = 1.0 - plan.hop_s / 5.0;
    CHECK(overlap == doctest::Approx(1.0 - 2.43 / 5.0));
}

TEST_CASE("windowize: trial shorter than the largest window fails") {
    WindowPlan plan;
    CHECK_THROWS_WITH(windowize(study_like_inputs(20.0, 23), plan),
                      doctest::Contains("trial too short"));
}

TEST_CASE("windowize: an invalid modality window drops that index everywhere") {
    WindowInputs in = study_like_inputs(90.0, 24);
    // poke a NaN hole into the face features around t = 40 s
    for (int c = 0; c < 6; ++c)
        for (std::size_t i = 1000; i < 1010; ++i)
            in.face_feats.channels[c][i] = std::numeric_limits<double>::quiet_NaN();

    WindowPlan plan;
    WindowedTrial out = windowize(in, plan);
    CHECK(out.dropped_windows > 0);
    for (Modality m : kAllModalities)
        CHECK(out.series.at(m).size() == out.series.at(Modality::face).size());
    // no window start within the hole's reach survives
    for (double s : out.series.at(Modality::face).window_starts_s)
        CHECK((s + plan.window_s.at(Modality::face) <= 40.0 || s >= 40.4));
}

TEST_CASE("windowize: time-shift moves events, interior features unchanged") {
    WindowInputs base = study_like_inputs(90.0, 25);
    WindowPlan plan;
    plan.hop_s = 2.5;
    WindowedTrial a = windowize(base, plan);

    WindowInputs shifted = base;
    const double shift = 2 * plan.hop_s;
    shifted.ecg.start_time_s += shift;
    shifted.eda.start_time_s += shift;
    shifted.resp.start_time_s += shift;
    shifted.face_feats.start_time_s += shift;
    shifted.head_feats.start_time_s += shift;
    WindowedTrial b = windowize(shifted, plan);

    REQUIRE(a.series.at(Modality::eda).size() == b.series.at(Modality::eda).size());
    for (std::size_t i = 0; i < a.series.at(Modality::eda).size(); ++i) {
        CHECK(b.series.at(Modality::eda).window_starts_s[i] ==
              doctest::Approx(a.series.at(Modality::eda).window_starts_s[i] + shift).epsilon(1e-12));
        for (std::size_t c = 0; c < 5; ++c)
            CHECK(b.series.at(Modality::eda).vectors[i][c] ==
                  doctest::Approx(a.series.at(Modality::eda).vectors[i][c]).epsilon(1e-9));
    }
    // detected event times shift by the same amount
    REQUIRE(a.scrs.size() == b.scrs.size());
    for (std::size_t i = 0; i < a.scrs.size(); ++i)
        CHECK(b.scrs[i].start_s == doctest::Approx(a.scrs[i].start_s + shift).epsilon(1e-9));
}

TEST_CASE("physio invariants on a noisy study-like trial") {
    WindowedTrial out = windowize(study_like_inputs(120.0, 26), WindowPlan{});
    for (const auto& v : out.series.at(Modality::ecg).vectors) {
        CHECK(v[1] >= 0.0); // sd rr
        CHECK(v[3] >= 0.0); // rmssd
    }
    for (const ScrEvent& e : out.scrs) {
        CHECK(e.rise_time_s > 0.0);
        CHECK(e.rise_time_s < e.duration_s + 1e-12);
        CHECK(e.amplitude > 0.0);
    }
}
