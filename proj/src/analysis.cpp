#include "moneylife/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <numeric>

#include "fft.hpp"
#include "moneylife/errors.hpp"
#include "moneylife/rng.hpp"

namespace moneylife {

FitResult linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw AnalysisError("linear_fit: size mismatch");
    const std::size_t n = x.size();
    if (n < 3) throw AnalysisError("linear_fit: need at least 3 points, got " + std::to_string(n));
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (sxx <= 0.0) throw AnalysisError("linear_fit: abscissae are all equal");
    FitResult fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
    fit.n_points = n;
    return fit;
}

FitResult loglog_fit(std::span<const double> s, std::span<const double> f) {
    if (s.size() != f.size()) throw AnalysisError("loglog_fit: size mismatch");
    std::vector<double> ls(s.size()), lf(f.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (!(s[i] > 0.0) || !(f[i] > 0.0)) {
            throw AnalysisError("loglog_fit: non-positive value at index " + std::to_string(i));
        }
        ls[i] = std::log(s[i]);
        lf[i] = std::log(f[i]);
    }
    return linear_fit(ls, lf);
}

std::string_view method_name(Method method) {
    return method == Method::Mfdfa ? "MFDFA" : "WTMM";
}

double SingularitySpectrum::width() const { return spectrum_width(*this); }

double SingularitySpectrum::alpha_at_max_f() const {
    if (points.empty()) return std::numeric_limits<double>::quiet_NaN();
    return std::max_element(points.begin(), points.end(),
                            [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.f < b.f; })
        ->alpha;
}

double SingularitySpectrum::max_f() const {
    if (points.empty()) return std::numeric_limits<double>::quiet_NaN();
    double best = -std::numeric_limits<double>::infinity();
    for (const SpectrumPoint& p : points) best = std::max(best, p.f);
    return best;
}

double spectrum_width(const SingularitySpectrum& spectrum) {
    if (spectrum.points.size() < 2) return 0.0;
    const auto [lo, hi] = std::minmax_element(
        spectrum.points.begin(), spectrum.points.end(),
        [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.alpha < b.alpha; });
    return hi->alpha - lo->alpha;
}

std::vector<double> shuffle(std::span<const double> x, std::uint64_t seed) {
    std::vector<double> out(x.begin(), x.end());
    Rng rng(seed);
    for (std::size_t i = out.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(out[i - 1], out[j]);
    }
    return out;
}

std::vector<double> gen_binomial_cascade(unsigned levels, double p) {
    if (levels < 1 || levels > 26) throw ConfigError("cascade levels must lie in [1, 26]");
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("cascade weight p must lie in (0, 1)");
    std::vector<double> cells{1.0};
    for (unsigned level = 0; level < levels; ++level) {
        std::vector<double> next(cells.size() * 2);
        for (std::size_t i = 0; i < cells.size(); ++i) {
            next[2 * i] = cells[i] * p;
            next[2 * i + 1] = cells[i] * (1.0 - p);
        }
        cells = std::move(next);
    }
    return cells;
}

double cascade_hurst(double q, double p) {
    if (q == 0.0) {
        // Limit q -> 0 of the expression below.
        return -(std::log(p) + std::log(1.0 - p)) / (2.0 * std::numbers::ln2);
    }
    return 1.0 / q - std::log(std::pow(p, q) + std::pow(1.0 - p, q)) / (q * std::numbers::ln2);
}

double cascade_tau(double q, double p) {
    return -std::log2(std::pow(p, q) + std::pow(1.0 - p, q));
}

namespace {

double fgn_autocovariance(std::size_t k, double hurst) {
    const double two_h = 2.0 * hurst;
    const double kk = static_cast<double>(k);
    return 0.5 * (std::pow(kk + 1.0, two_h) - 2.0 * std::pow(kk, two_h) +
                  std::pow(std::abs(kk - 1.0), two_h));
}

} // namespace

std::vector<double> gen_fgn(std::size_t length, double hurst, std::uint64_t seed) {
    if (!(hurst > 0.0 && hurst < 1.0)) throw ConfigError("Hurst exponent must lie in (0, 1)");
    if (length == 0) return {};
    std::size_t half = 1;
    while (half < length) half <<= 1;
    const std::size_t m = 2 * half;

    // First row of the circulant embedding and its (real) eigenvalues.
    std::vector<double> row(m);
    for (std::size_t k = 0; k <= half; ++k) row[k] = fgn_autocovariance(k, hurst);
    for (std::size_t k = half + 1; k < m; ++k) row[k] = row[m - k];
    const std::vector<std::complex<double>> eigen = detail::real_forward(row);

    Rng rng(seed);
    auto normal = [&rng]() {
        const double u1 = 1.0 - rng.uniform();
        const double u2 = rng.uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    };

    std::vector<std::complex<double>> w(half + 1);
    const double md = static_cast<double>(m);
    for (std::size_t k = 0; k <= half; ++k) {
        const double lambda = std::max(eigen[k].real(), 0.0);
        if (k == 0 || k == half) {
            w[k] = {std::sqrt(lambda / md) * normal(), 0.0};
        } else {
            const double sd = std::sqrt(lambda / (2.0 * md));
            const double re = normal();
            const double im = normal();
            w[k] = {sd * re, sd * im};
        }
    }
    std::vector<double> out = detail::real_inverse(w, m);
    out.resize(length);
    return out;
}

double autocorrelation(std::span<const double> x, std::size_t lag) {
    const std::size_t n = x.size();
    if (lag >= n) throw AnalysisError("autocorrelation: lag exceeds length");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        den += d * d;
        if (i + lag < n) num += d * (x[i + lag] - mean);
    }
    return den > 0.0 ? num / den : 0.0;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    std::vector<double> out;
    if (count == 0) return out;
    if (count == 1) return {lo};
    const double llo = std::log(lo);
    const double step = (std::log(hi) - llo) / static_cast<double>(count - 1);
    for (std::size_t i = 0; i < count; ++i) out.push_back(std::exp(llo + step * static_cast<double>(i)));
    out.back() = hi;
    return out;
}

std::vector<std::size_t> log_spaced_integers(double lo, double hi, std::size_t count) {
    std::vector<std::size_t> out;
    for (double v : log_spaced(lo, hi, count)) {
        const auto s = static_cast<std::size_t>(std::llround(v));
        if (out.empty() || s > out.back()) out.push_back(s);
    }
    return out;
}

std::vector<double> q_range(double lo, double hi, double step) {
    std::vector<double> out;
    const auto count = static_cast<std::size_t>(std::llround((hi - lo) / step)) + 1;
    for (std::size_t i = 0; i < count; ++i) {
        double q = lo + step * static_cast<double>(i);
        if (std::abs(q) < 1e-12) q = 0.0;
        out.push_back(q);
    }
    return out;
}

} // namespace moneylife
