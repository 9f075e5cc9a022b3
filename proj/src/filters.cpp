#include "jrnet/filters.hpp"

#include "jrnet/config.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace jrnet {

namespace {

using cplx = std::complex<double>;

struct Zpk {
    std::vector<cplx> zeros;
    std::vector<cplx> poles;
    double gain = 1.0;
};

// Analog Butterworth prototype: poles evenly spaced on the left unit
// semicircle, no finite zeros, unit gain.
Zpk butter_prototype(int order) {
    Zpk zpk;
    for (int k = 1; k <= order; ++k) {
        double theta = std::numbers::pi * (2.0 * k + order - 1.0) / (2.0 * order);
        zpk.poles.emplace_back(std::cos(theta), std::sin(theta));
    }
    return zpk;
}

Zpk lp_to_lp(const Zpk& proto, double w0) {
    Zpk out;
    for (const cplx& p : proto.poles) out.poles.push_back(p * w0);
    for (const cplx& z : proto.zeros) out.zeros.push_back(z * w0);
    int degree = static_cast<int>(proto.poles.size() - proto.zeros.size());
    out.gain = proto.gain * std::pow(w0, degree);
    return out;
}

Zpk lp_to_bp(const Zpk& proto, double w0, double bw) {
    Zpk out;
    auto transform = [&](const cplx& s) {
        cplx half = s * bw / 2.0;
        cplx root = std::sqrt(half * half - w0 * w0);
        return std::make_pair(half + root, half - root);
    };
    for (const cplx& p : proto.poles) {
        auto [a, b] = transform(p);
        out.poles.push_back(a);
        out.poles.push_back(b);
    }
    for (const cplx& z : proto.zeros) {
        auto [a, b] = transform(z);
        out.zeros.push_back(a);
        out.zeros.push_back(b);
    }
    // n - m zeros move to s = 0.
    int degree = static_cast<int>(proto.poles.size() - proto.zeros.size());
    for (int i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
    out.gain = proto.gain * std::pow(bw, degree);
    return out;
}

// Bilinear transform s = 2 fs (z-1)/(z+1); excess zeros land at z = -1.
Zpk bilinear(const Zpk& analog, double fs) {
    const double fs2 = 2.0 * fs;
    Zpk out;
    cplx num(1.0, 0.0), den(1.0, 0.0);
    for (const cplx& z : analog.zeros) {
        out.zeros.push_back((fs2 + z) / (fs2 - z));
        num *= (fs2 - z);
    }
    for (const cplx& p : analog.poles) {
        out.poles.push_back((fs2 + p) / (fs2 - p));
        den *= (fs2 - p);
    }
    int degree = static_cast<int>(analog.poles.size() - analog.zeros.size());
    for (int i = 0; i < degree; ++i) out.zeros.emplace_back(-1.0, 0.0);
    out.gain = analog.gain * (num / den).real();
    return out;
}

// Pair conjugate roots into quadratics (1 + c1 z^-1 + c2 z^-2). Roots are
// expected in conjugate pairs (plus possibly one real root for odd counts).
std::vector<std::array<double, 2>> pair_into_quadratics(std::vector<cplx> roots) {
    std::vector<std::array<double, 2>> quads;
    std::vector<cplx> reals;
    std::vector<cplx> complexes;
    for (const cplx& r : roots) {
        if (std::abs(r.imag()) < 1e-12)
            reals.push_back(r);
        else
            complexes.push_back(r);
    }
    // conjugate pairs: take roots with positive imag, pair with conjugate
    std::sort(complexes.begin(), complexes.end(),
              [](const cplx& a, const cplx& b) { return std::abs(a) > std::abs(b); });
    for (const cplx& r : complexes) {
        if (r.imag() <= 0) continue;
        quads.push_back({-2.0 * r.real(), std::norm(r)});
    }
    std::sort(reals.begin(), reals.end(),
              [](const cplx& a, const cplx& b) { return a.real() < b.real(); });
    for (std::size_t i = 0; i + 1 < reals.size(); i += 2)
        quads.push_back({-(reals[i].real() + reals[i + 1].real()), reals[i].real() * reals[i + 1].real()});
    if (reals.size() % 2 == 1) quads.push_back({-reals.back().real(), 0.0});
    return quads;
}

BiquadCascade zpk_to_sos(const Zpk& zpk) {
    auto num = pair_into_quadratics(zpk.zeros);
    auto den = pair_into_quadratics(zpk.poles);
    while (num.size() < den.size()) num.push_back({0.0, 0.0}); // (1, 0, 0) numerator
    if (num.size() != den.size()) throw std::runtime_error("sos pairing mismatch");

    BiquadCascade cascade;
    for (std::size_t i = 0; i < den.size(); ++i) {
        BiquadSection s;
        s.b0 = 1.0;
        s.b1 = num[i][0];
        s.b2 = num[i][1];
        s.a1 = den[i][0];
        s.a2 = den[i][1];
        cascade.sections.push_back(s);
    }
    // overall gain on the first section
    if (!cascade.sections.empty()) {
        cascade.sections[0].b0 *= zpk.gain;
        cascade.sections[0].b1 *= zpk.gain;
        cascade.sections[0].b2 *= zpk.gain;
    }
    return cascade;
}

double prewarp(double freq_hz, double fs) {
    return 2.0 * fs * std::tan(std::numbers::pi * freq_hz / fs);
}

// One forward pass of a cascade over x, direct form II transposed, with
// steady-state initial conditions for the first sample.
void sos_filter_inplace(const std::vector<BiquadSection>& sections, std::vector<double>& x) {
    double level = x.empty() ? 0.0 : x.front();
    for (const BiquadSection& s : sections) {
        const double dc_den = 1.0 + s.a1 + s.a2;
        const double dc_gain = dc_den != 0.0 ? (s.b0 + s.b1 + s.b2) / dc_den : 0.0;
        const double y0 = dc_gain * level;
        double z1 = y0 - s.b0 * level;
        double z2 = s.b2 * level - s.a2 * y0;
        for (double& v : x) {
            double in = v;
            double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
        level = y0;
    }
}

} // namespace

bool BiquadSection::stable() const {
    // Schur-Cohn triangle for z^2 + a1 z + a2
    return std::abs(a2) < 1.0 && std::abs(a1) < 1.0 + a2;
}

std::complex<double> BiquadCascade::response(double freq_hz, double sample_rate_hz) const {
    const double w = 2.0 * std::numbers::pi * freq_hz / sample_rate_hz;
    const cplx zinv = std::exp(cplx(0.0, -w));
    cplx h(1.0, 0.0);
    for (const BiquadSection& s : sections) {
        cplx num = s.b0 + s.b1 * zinv + s.b2 * zinv * zinv;
        cplx den = 1.0 + s.a1 * zinv + s.a2 * zinv * zinv;
        h *= num / den;
    }
    return h;
}

double BiquadCascade::magnitude_db(double freq_hz, double sample_rate_hz) const {
    return 20.0 * std::log10(std::abs(response(freq_hz, sample_rate_hz)));
}

BiquadCascade design_butterworth(FilterKind kind, const std::vector<double>& cutoffs_hz, int order,
                                 double sample_rate_hz) {
    if (order < 1 || order > 12) throw std::runtime_error("filter order must be in [1, 12]");
    if (sample_rate_hz <= 0) throw std::runtime_error("sample rate must be positive");
    const double nyquist = sample_rate_hz / 2.0;
    for (double f : cutoffs_hz)
        if (f <= 0 || f >= nyquist) throw std::runtime_error("cutoff must lie in (0, Nyquist)");

    Zpk proto = butter_prototype(order);
    Zpk analog;
    if (kind == FilterKind::lowpass) {
        if (cutoffs_hz.size() != 1) throw std::runtime_error("lowpass takes one cutoff");
        analog = lp_to_lp(proto, prewarp(cutoffs_hz[0], sample_rate_hz));
    } else {
        if (cutoffs_hz.size() != 2) throw std::runtime_error("bandpass takes two cutoffs");
        if (cutoffs_hz[0] >= cutoffs_hz[1])
            throw std::runtime_error("bandpass low cutoff must be below high cutoff");
        double w1 = prewarp(cutoffs_hz[0], sample_rate_hz);
        double w2 = prewarp(cutoffs_hz[1], sample_rate_hz);
        analog = lp_to_bp(proto, std::sqrt(w1 * w2), w2 - w1);
    }

    BiquadCascade cascade = zpk_to_sos(bilinear(analog, sample_rate_hz));
    cascade.design_meta.kind = kind == FilterKind::lowpass ? "butterworth-lowpass" : "butterworth-bandpass";
    cascade.design_meta.cutoffs_hz = cutoffs_hz;
    cascade.design_meta.order = order;
    cascade.design_meta.sample_rate_hz = sample_rate_hz;

    for (const BiquadSection& s : cascade.sections)
        if (!s.stable()) throw std::runtime_error("designed filter has an unstable section");
    return cascade;
}

BiquadCascade load_sos_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open SOS file: " + path.string());
    BiquadCascade cascade;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        double c[5];
        int got = 0;
        while (got < 5 && (ls >> c[got])) ++got;
        if (got == 0) continue;
        if (got != 5)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": malformed row, expected 5 coefficients");
        double extra;
        if (ls >> extra)
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": malformed row, expected 5 coefficients");
        BiquadSection s{c[0], c[1], c[2], c[3], c[4]};
        if (!s.stable())
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) +
                                     ": unstable section");
        cascade.sections.push_back(s);
    }
    if (cascade.sections.empty()) throw std::runtime_error(path.string() + ": empty SOS file");
    cascade.design_meta.kind = "imported";
    return cascade;
}

void save_sos_file(const std::filesystem::path& path, const BiquadCascade& cascade) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write SOS file: " + path.string());
    for (const BiquadSection& s : cascade.sections)
        out << format_double(s.b0) << ' ' << format_double(s.b1) << ' ' << format_double(s.b2)
            << ' ' << format_double(s.a1) << ' ' << format_double(s.a2) << '\n';
}

std::vector<double> filtfilt(const BiquadCascade& cascade, const std::vector<double>& x) {
    const std::size_t pad = 3 * static_cast<std::size_t>(cascade.total_order());
    if (x.size() <= pad)
        throw std::runtime_error("trace too short for zero-phase filtering (need > " +
                                 std::to_string(pad) + " samples)");

    // odd reflection about both endpoints
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (std::size_t i = 2; i <= pad + 1; ++i) ext.push_back(2.0 * x.back() - x[x.size() - i]);

    sos_filter_inplace(cascade.sections, ext);
    std::reverse(ext.begin(), ext.end());
    sos_filter_inplace(cascade.sections, ext);
    std::reverse(ext.begin(), ext.end());

    return std::vector<double>(ext.begin() + pad, ext.begin() + pad + x.size());
}

SignalTrace filtfilt(const BiquadCascade& cascade, const SignalTrace& trace) {
    SignalTrace out = trace;
    for (auto& ch : out.channels) ch = filtfilt(cascade, ch);
    return out;
}

} // namespace jrnet
