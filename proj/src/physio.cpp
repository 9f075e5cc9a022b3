#include "jrnet/physio.hpp"

#include "jrnet/face.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace jrnet {

const std::vector<std::string> kEcgFeatureNames = {
    "rr_mean_ms", "rr_sd_ms", "rr_sdsd_ms", "rr_rmssd_ms", "rr_shorten_gt50ms",
    "rr_lengthen_gt50ms", "qrs_area_mean", "qrs_area_sd", "hr_mean_bpm", "beat_count"};
const std::vector<std::string> kEdaFeatureNames = {
    "eda_mean_us", "scr_count", "scr_duration_mean_s", "scr_amplitude_mean_us", "scr_rise_mean_s"};
const std::vector<std::string> kRespFeatureNames = {"resp_pp_ms", "resp_peak_height",
                                                    "resp_pct_inhale", "resp_pct_exhale"};

namespace {

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

} // namespace

// ---------------------------------------------------------------------------
// QRS detection

QrsAnnotation detect_qrs(const SignalTrace& ecg, const QrsOptions& opt) {
    const std::vector<double>& x = ecg.channel(0);
    const double fs = ecg.sample_rate_hz;
    const std::size_t n = x.size();
    if (n < static_cast<std::size_t>(5.0 * fs))
        throw std::runtime_error("ecg shorter than the 5 s threshold learning phase");

    double mean = mean_of(x);
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    if (var / n < 1e-20) throw std::runtime_error("no QRS found");

    // five-point derivative, squaring, moving-window integration
    std::vector<double> der(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        auto at = [&](std::ptrdiff_t j) {
            return x[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, n - 1))];
        };
        std::ptrdiff_t s = static_cast<std::ptrdiff_t>(i);
        der[i] = (2.0 * at(s) + at(s - 1) - at(s - 3) - 2.0 * at(s - 4)) / 8.0 * fs;
    }
    std::vector<double> mwi(n, 0.0);
    const std::size_t w = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(opt.integration_window_s * fs)));
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += der[i] * der[i];
        if (i >= w) acc -= der[i - w] * der[i - w];
        mwi[i] = acc / w;
    }

    // candidate peaks on the integrated signal
    struct Candidate {
        std::size_t idx;
        double value;
        double slope; // max |derivative| nearby, for T-wave discrimination
    };
    std::vector<Candidate> cands;
    const std::size_t slope_win = static_cast<std::size_t>(0.075 * fs);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1]) {
            std::size_t lo = i > slope_win ? i - slope_win : 0;
            std::size_t hi = std::min(n, i + slope_win + 1);
            double s = 0.0;
            for (std::size_t j = lo; j < hi; ++j) s = std::max(s, std::abs(der[j]));
            cands.push_back({i, mwi[i], s});
        }
    }
    if (cands.empty()) throw std::runtime_error("no QRS found");

    // threshold learning from the first seconds
    const std::size_t learn = std::min(n, static_cast<std::size_t>(opt.learning_s * fs));
    double learn_max = 0.0, learn_mean = 0.0;
    for (std::size_t i = 0; i < learn; ++i) {
        learn_max = std::max(learn_max, mwi[i]);
        learn_mean += mwi[i];
    }
    learn_mean /= std::max<std::size_t>(1, learn);
    double spk = 0.25 * learn_max;
    double npk = 0.5 * learn_mean;

    const std::size_t refractory = static_cast<std::size_t>(opt.refractory_s * fs);
    const std::size_t twave_win = static_cast<std::size_t>(opt.t_wave_window_s * fs);

    std::vector<std::size_t> qrs_mwi;       // accepted candidate indices into cands
    std::vector<double> recent_rr;          // last 8 accepted R-R intervals, samples
    double last_qrs_idx = -1e18;
    double last_qrs_slope = 0.0;

    auto rr_average = [&]() {
        if (recent_rr.empty()) return 0.0;
        return std::accumulate(recent_rr.end() - std::min<std::size_t>(8, recent_rr.size()),
                               recent_rr.end(), 0.0) /
               std::min<std::size_t>(8, recent_rr.size());
    };
    auto accept = [&](std::size_t ci, bool search_back) {
        const Candidate& c = cands[ci];
        spk = search_back ? 0.25 * c.value + 0.75 * spk : 0.125 * c.value + 0.875 * spk;
        if (last_qrs_idx >= 0) {
            double rr = c.idx - last_qrs_idx;
            recent_rr.push_back(rr);
            if (recent_rr.size() > 8) recent_rr.erase(recent_rr.begin());
        }
        last_qrs_idx = static_cast<double>(c.idx);
        last_qrs_slope = c.slope;
        qrs_mwi.push_back(ci);
    };

    for (std::size_t ci = 0; ci < cands.size(); ++ci) {
        const Candidate& c = cands[ci];
        double thr1 = npk + 0.25 * (spk - npk);
        double thr2 = 0.5 * thr1;

        // search-back when more than 1.66 average intervals have passed
        double rr_avg = rr_average();
        if (rr_avg > 0 && c.idx - last_qrs_idx > opt.search_back_factor * rr_avg) {
            std::size_t best = cands.size();
            for (std::size_t cj = ci; cj-- > 0;) {
                if (static_cast<double>(cands[cj].idx) <= last_qrs_idx + refractory) break;
                if (!qrs_mwi.empty() && cj <= qrs_mwi.back()) break;
                if (cands[cj].value >= thr2 &&
                    (best == cands.size() || cands[cj].value > cands[best].value))
                    best = cj;
            }
            if (best < cands.size() && cands[best].idx < c.idx) accept(best, true);
        }

        thr1 = npk + 0.25 * (spk - npk);
        if (c.value >= thr1 && static_cast<double>(c.idx) > last_qrs_idx + refractory) {
            // T-wave discrimination: close to the previous beat with a much
            // weaker slope means this is a T wave, not a QRS
            bool t_wave = static_cast<double>(c.idx) < last_qrs_idx + twave_win &&
                          c.slope < 0.5 * last_qrs_slope;
            if (t_wave)
                npk = 0.125 * c.value + 0.875 * npk;
            else
                accept(ci, false);
        } else {
            npk = 0.125 * c.value + 0.875 * npk;
        }
    }
    if (qrs_mwi.empty()) throw std::runtime_error("no QRS found");

    // refine R on the input signal; MWI peaks lag the R wave
    const std::size_t back = static_cast<std::size_t>(0.200 * fs);
    const std::size_t fwd = static_cast<std::size_t>(0.050 * fs);
    const std::size_t qs_win = static_cast<std::size_t>(0.060 * fs);

    QrsAnnotation ann;
    for (std::size_t ci : qrs_mwi) {
        std::size_t i = cands[ci].idx;
        std::size_t lo = i > back ? i - back : 0;
        std::size_t hi = std::min(n, i + fwd + 1);
        std::size_t r = lo;
        for (std::size_t j = lo; j < hi; ++j)
            if (std::abs(x[j]) > std::abs(x[r])) r = j;

        if (!ann.r_peaks_s.empty()) {
            double prev = (ann.r_peaks_s.back() - ecg.start_time_s) * fs;
            if (r <= prev + refractory) continue;
        }

        double sign = x[r] >= 0 ? 1.0 : -1.0;
        std::size_t q = r > qs_win ? r - qs_win : 0;
        for (std::size_t j = q; j < r; ++j)
            if (sign * x[j] < sign * x[q]) q = j;
        std::size_t s_end = std::min(n - 1, r + qs_win);
        std::size_t s = r < s_end ? r + 1 : r;
        for (std::size_t j = s; j <= s_end; ++j)
            if (sign * x[j] < sign * x[s]) s = j;

        double area = 0.0;
        for (std::size_t j = q; j < s; ++j) area += 0.5 * (std::abs(x[j]) + std::abs(x[j + 1]));
        area /= fs;

        ann.r_peaks_s.push_back(ecg.time_at(r));
        ann.q_points_s.push_back(ecg.time_at(q));
        ann.s_points_s.push_back(ecg.time_at(s));
        ann.qrs_areas.push_back(area);
    }
    if (ann.r_peaks_s.empty()) throw std::runtime_error("no QRS found");
    return ann;
}

std::vector<double> ecg_features(const QrsAnnotation& ann, const SignalTrace&, double win_start_s,
                                 double win_end_s) {
    std::vector<double> rr_ms, areas;
    std::vector<double> peaks;
    for (std::size_t i = 0; i < ann.r_peaks_s.size(); ++i) {
        double t = ann.r_peaks_s[i];
        if (t >= win_start_s && t < win_end_s) {
            peaks.push_back(t);
            areas.push_back(ann.qrs_areas[i]);
        }
    }
    if (peaks.size() < 3)
        throw std::runtime_error("window invalid: fewer than 3 R peaks");
    for (std::size_t i = 1; i < peaks.size(); ++i) rr_ms.push_back((peaks[i] - peaks[i - 1]) * 1000.0);

    std::vector<double> diffs;
    for (std::size_t i = 1; i < rr_ms.size(); ++i) diffs.push_back(rr_ms[i] - rr_ms[i - 1]);
    double shorten = 0.0, lengthen = 0.0, sq = 0.0;
    for (double d : diffs) {
        if (-d > 50.0) shorten += 1.0;
        if (d > 50.0) lengthen += 1.0;
        sq += d * d;
    }
    double rmssd = diffs.empty() ? 0.0 : std::sqrt(sq / diffs.size());
    double hr_mean = 0.0;
    for (double rr : rr_ms) hr_mean += 60000.0 / rr;
    hr_mean /= rr_ms.size();

    return {mean_of(rr_ms), population_sd(rr_ms), population_sd(diffs), rmssd,
            shorten, lengthen, mean_of(areas), population_sd(areas),
            hr_mean, static_cast<double>(peaks.size())};
}

// ---------------------------------------------------------------------------
// SCR detection

std::vector<ScrEvent> detect_scr(const SignalTrace& eda, const ScrOptions& opt) {
    const std::vector<double>& x = eda.channel(0);
    const double fs = eda.sample_rate_hz;
    const std::size_t n = x.size();
    if (n < 3) return {};

    // first difference, Bartlett smoothed
    std::vector<double> d(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) d[i] = x[i + 1] - x[i];

    std::size_t len = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(opt.bartlett_window_s * fs)));
    if (len % 2 == 0) ++len;
    const std::size_t half = len / 2;
    std::vector<double> bart(len);
    for (std::size_t j = 0; j < len; ++j)
        bart[j] = 1.0 - std::abs(static_cast<double>(j) - static_cast<double>(half)) / half;

    std::vector<double> sd(d.size(), 0.0);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double acc = 0.0, wsum = 0.0;
        std::size_t lo = i > half ? i - half : 0;
        std::size_t hi = std::min(d.size(), i + half + 1);
        for (std::size_t j = lo; j < hi; ++j) {
            double wgt = bart[j - i + half];
            acc += wgt * d[j];
            wsum += wgt;
        }
        sd[i] = acc / wsum;
    }

    std::vector<ScrEvent> events;
    std::size_t i = 1;
    while (i < sd.size()) {
        if (!(sd[i - 1] <= 0.0 && sd[i] > 0.0)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        std::size_t j = i + 1;
        while (j < sd.size() && sd[j] > 0.0) ++j;
        if (j >= sd.size()) break; // rise runs off the end: no paired crossing

        // peak: maximum of the signal around the +/- crossing
        std::size_t p_lo = start;
        std::size_t p_hi = std::min(n - 1, j + half);
        std::size_t peak = p_lo;
        for (std::size_t k = p_lo; k <= p_hi; ++k)
            if (x[k] > x[peak]) peak = k;

        double amplitude = x[peak] - x[start];
        double rise_s = (peak - start) / fs;
        if (amplitude >= opt.min_amplitude_us && rise_s > 0) {
            // duration: onset to half-recovery (or end of data)
            double half_level = x[start] + 0.5 * amplitude;
            std::size_t rec = peak;
            while (rec + 1 < n && x[rec] > half_level) ++rec;
            ScrEvent ev;
            ev.start_s = eda.time_at(start);
            ev.peak_s = eda.time_at(peak);
            ev.amplitude = amplitude;
            ev.rise_time_s = rise_s;
            ev.duration_s = (rec - start) / fs;
            events.push_back(ev);
        }
        i = j + 1;
    }
    return events;
}

std::vector<double> eda_features(const SignalTrace& eda, const std::vector<ScrEvent>& events,
                                 double win_start_s, double win_end_s) {
    const std::vector<double>& x = eda.channel(0);
    std::size_t lo = eda.index_at(win_start_s);
    std::size_t hi = std::min(eda.index_at(win_end_s), x.size());
    if (lo >= hi) throw std::runtime_error("window outside eda trace");
    double mean = std::accumulate(x.begin() + lo, x.begin() + hi, 0.0) / (hi - lo);

    std::vector<double> durs, amps, rises;
    for (const ScrEvent& ev : events)
        if (ev.start_s >= win_start_s && ev.start_s < win_end_s) {
            durs.push_back(ev.duration_s);
            amps.push_back(ev.amplitude);
            rises.push_back(ev.rise_time_s);
        }
    // windows without SCRs report 0 for the event statistics
    return {mean, static_cast<double>(durs.size()), mean_of(durs), mean_of(amps), mean_of(rises)};
}

// ---------------------------------------------------------------------------
// respiration

std::vector<std::size_t> find_peaks(const std::vector<double>& x, double min_prominence,
                                    std::size_t min_spacing) {
    std::vector<std::size_t> cands;
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        if (x[i] > x[i - 1] && x[i] >= x[i + 1]) cands.push_back(i);

    std::vector<std::size_t> prominent;
    for (std::size_t i : cands) {
        double lmin = x[i], rmin = x[i];
        for (std::size_t j = i; j-- > 0;) {
            if (x[j] > x[i]) break;
            lmin = std::min(lmin, x[j]);
        }
        for (std::size_t j = i + 1; j < x.size(); ++j) {
            if (x[j] > x[i]) break;
            rmin = std::min(rmin, x[j]);
        }
        if (x[i] - std::max(lmin, rmin) >= min_prominence) prominent.push_back(i);
    }

    // greedy spacing, tallest first
    std::sort(prominent.begin(), prominent.end(),
              [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
    std::vector<std::size_t> kept;
    for (std::size_t i : prominent) {
        bool ok = true;
        for (std::size_t k : kept)
            if ((i > k ? i - k : k - i) < min_spacing) {
                ok = false;
                break;
            }
        if (ok) kept.push_back(i);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<double> resp_features(const SignalTrace& resp, double win_start_s, double win_end_s,
                                  const RespOptions& opt) {
    const std::vector<double>& x = resp.channel(0);
    std::size_t lo = resp.index_at(win_start_s);
    std::size_t hi = std::min(resp.index_at(win_end_s), x.size());
    if (lo >= hi) throw std::runtime_error("window outside resp trace");
    std::vector<double> win(x.begin() + lo, x.begin() + hi);

    auto [mn, mx] = std::minmax_element(win.begin(), win.end());
    double prominence = opt.prominence_fraction * (*mx - *mn);
    std::size_t spacing = static_cast<std::size_t>(opt.min_spacing_s * resp.sample_rate_hz);
    std::vector<std::size_t> peaks = find_peaks(win, prominence, spacing);
    if (peaks.size() < 2) throw std::runtime_error("insufficient peaks");

    double pp = 0.0, height = 0.0;
    for (std::size_t i = 1; i < peaks.size(); ++i)
        pp += (peaks[i] - peaks[i - 1]) / resp.sample_rate_hz * 1000.0;
    pp /= peaks.size() - 1;
    for (std::size_t p : peaks) height += win[p];
    height /= peaks.size();

    double inhale = 0.0, exhale = 0.0;
    for (std::size_t c = 0; c + 1 < peaks.size(); ++c) {
        std::size_t a = peaks[c], b = peaks[c + 1];
        double rise = 0.0, fall = 0.0, total = 0.0;
        for (std::size_t j = a; j < b; ++j) {
            double dv = win[j + 1] - win[j];
            if (dv > 0) rise += 1.0;
            if (dv < 0) fall += 1.0;
            total += 1.0;
        }
        inhale += 100.0 * rise / total;
        exhale += 100.0 * fall / total;
    }
    inhale /= peaks.size() - 1;
    exhale /= peaks.size() - 1;

    return {pp, height, inhale, exhale};
}

// ---------------------------------------------------------------------------
// windowing engine

double WindowPlan::largest_window_s() const {
    double w = 0.0;
    for (const auto& [m, v] : window_s) w = std::max(w, v);
    return w;
}

WindowedTrial windowize(const WindowInputs& inputs, const WindowPlan& plan) {
    const double w_max = plan.largest_window_s();

    double t0 = std::max({inputs.ecg.start_time_s, inputs.eda.start_time_s,
                          inputs.resp.start_time_s, inputs.face_feats.start_time_s,
                          inputs.head_feats.start_time_s});
    double t_end = std::min({inputs.ecg.end_time_s(), inputs.eda.end_time_s(),
                             inputs.resp.end_time_s(), inputs.face_feats.end_time_s(),
                             inputs.head_feats.end_time_s()});
    const double span = t_end - t0;
    if (span < w_max) throw std::runtime_error("trial too short");

    const std::size_t count = static_cast<std::size_t>(std::floor((span - w_max) / plan.hop_s)) + 1;

    WindowedTrial out;
    bool have_qrs = true;
    try {
        out.qrs = detect_qrs(inputs.ecg, plan.qrs);
    } catch (const std::runtime_error&) {
        have_qrs = false;
    }
    out.scrs = detect_scr(inputs.eda, plan.scr);

    auto frame_mean = [&](const SignalTrace& feats, double s, double e,
                          std::vector<double>& result) {
        std::size_t lo = feats.index_at(s);
        std::size_t hi = std::min(feats.index_at(e), feats.num_samples());
        if (lo >= hi) return false;
        result.assign(feats.num_channels(), 0.0);
        for (std::size_t c = 0; c < feats.num_channels(); ++c) {
            double acc = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
                double v = feats.channels[c][j];
                if (std::isnan(v)) return false;
                acc += v;
            }
            result[c] = acc / (hi - lo);
        }
        return true;
    };

    struct Row {
        double start;
        std::map<Modality, std::vector<double>> features;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < count; ++i) {
        double s = t0 + static_cast<double>(i) * plan.hop_s;
        Row row;
        row.start = s;
        bool valid = true;

        double e_ecg = s + plan.window_s.at(Modality::ecg);
        if (have_qrs) {
            std::size_t beats = 0;
            for (double t : out.qrs.r_peaks_s)
                if (t >= s && t < e_ecg) ++beats;
            if (beats >= 3)
                row.features[Modality::ecg] = ecg_features(out.qrs, inputs.ecg, s, e_ecg);
            else
                valid = false;
        } else {
            valid = false;
        }

        if (valid)
            row.features[Modality::eda] =
                eda_features(inputs.eda, out.scrs, s, s + plan.window_s.at(Modality::eda));

        if (valid) {
            try {
                row.features[Modality::resp] =
                    resp_features(inputs.resp, s, s + plan.window_s.at(Modality::resp), plan.resp);
            } catch (const std::runtime_error&) {
                valid = false;
            }
        }

        if (valid) {
            std::vector<double> face, head;
            double e_face = s + plan.window_s.at(Modality::face);
            double e_head = s + plan.window_s.at(Modality::head);
            if (frame_mean(inputs.face_feats, s, e_face, face) &&
                frame_mean(inputs.head_feats, s, e_head, head)) {
                row.features[Modality::face] = std::move(face);
                row.features[Modality::head] = std::move(head);
            } else {
                valid = false;
            }
        }

        if (valid)
            rows.push_back(std::move(row));
        else
            ++out.dropped_windows;
    }

    if (rows.size() < plan.min_windows) throw std::runtime_error("trial too short");

    auto series_for = [&](Modality m, std::vector<std::string> names) {
        FeatureWindowSeries fw;
        fw.modality = m;
        fw.window_s = plan.window_s.at(m);
        fw.hop_s = plan.hop_s;
        fw.feature_names = std::move(names);
        for (const Row& row : rows) {
            fw.window_starts_s.push_back(row.start);
            fw.vectors.push_back(row.features.at(m));
        }
        return fw;
    };

    std::vector<std::string> face_names(kFaceFeatureNames.begin(), kFaceFeatureNames.end());
    std::vector<std::string> head_names(kHeadFeatureNames.begin(), kHeadFeatureNames.end());
    out.series[Modality::face] = series_for(Modality::face, face_names);
    out.series[Modality::head] = series_for(Modality::head, head_names);
    out.series[Modality::ecg] = series_for(Modality::ecg, kEcgFeatureNames);
    out.series[Modality::eda] = series_for(Modality::eda, kEdaFeatureNames);
    out.series[Modality::resp] = series_for(Modality::resp, kRespFeatureNames);
    return out;
}

} // namespace jrnet
