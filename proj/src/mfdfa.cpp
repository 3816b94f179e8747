#include "moneylife/mfdfa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "moneylife/errors.hpp"
#include "moneylife/kernels.hpp"

namespace moneylife {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Residual energy at or below this fraction of the window energy is rounding
// noise of an exact polynomial fit.
constexpr double kZeroVarianceRatio = 1e-20;

// Orthonormal basis of polynomials up to `order` sampled on `n` equispaced
// points, rows of length n. Two passes of modified Gram-Schmidt on centered
// and scaled monomials.
std::vector<double> polynomial_basis(std::size_t n, unsigned order) {
    const std::size_t rows = order + 1;
    std::vector<double> basis(rows * n);
    const double center = 0.5 * static_cast<double>(n - 1);
    const double scale = n > 1 ? center : 1.0;
    for (std::size_t k = 0; k < rows; ++k) {
        double* row = basis.data() + k * n;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = (static_cast<double>(i) - center) / scale;
            row[i] = std::pow(t, static_cast<double>(k));
        }
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t j = 0; j < k; ++j) {
                const double* prev = basis.data() + j * n;
                double proj = 0.0;
                for (std::size_t i = 0; i < n; ++i) proj += row[i] * prev[i];
                for (std::size_t i = 0; i < n; ++i) row[i] -= proj * prev[i];
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += row[i] * row[i];
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) row[i] /= norm;
    }
    return basis;
}

} // namespace

std::vector<double> default_q_grid() { return q_range(-4.0, 4.0, 0.25); }

std::vector<std::size_t> default_mfdfa_scales(std::size_t length, unsigned poly_order) {
    const double lo = std::max<double>(16.0, poly_order + 2.0);
    const double hi = std::floor(static_cast<double>(length) / 4.0);
    if (hi < lo) return {};
    return log_spaced_integers(lo, hi, 20);
}

std::vector<double> profile(std::span<const double> x) {
    if (x.empty()) throw DegenerateInputError("profile: empty series");
    const double first = x.front();
    if (std::all_of(x.begin(), x.end(), [first](double v) { return v == first; })) {
        throw DegenerateInputError("profile: constant series");
    }
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    std::vector<double> y(x.size());
    double running = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        running += x[i] - mean;
        y[i] = running;
    }
    return y;
}

SegmentVariances segment_variance(std::span<const double> y, std::size_t scale, unsigned poly_order) {
    if (poly_order + 1 > kernels::kMaxBasis) throw ConfigError("polynomial order too large");
    if (scale < poly_order + 2) throw ConfigError("scale must exceed polynomial order + 1");
    const std::size_t windows = y.size() / scale;
    SegmentVariances out;
    out.scale = scale;
    if (windows == 0) return out;

    const std::vector<double> basis = polynomial_basis(scale, poly_order);
    const kernels::KernelTable& k = kernels::active();
    out.f2.reserve(2 * windows);
    out.excluded.reserve(2 * windows);

    auto process = [&](std::size_t offset) {
        const kernels::DetrendSums sums = k.detrend(y.data() + offset, basis.data(), scale, poly_order + 1);
        const bool zero = sums.residual <= kZeroVarianceRatio * sums.energy;
        out.f2.push_back(zero ? 0.0 : sums.residual / static_cast<double>(scale));
        out.excluded.push_back(zero);
        out.excluded_count += zero ? 1 : 0;
    };
    for (std::size_t v = 0; v < windows; ++v) process(v * scale);
    for (std::size_t v = 0; v < windows; ++v) process(y.size() - (v + 1) * scale);
    return out;
}

std::optional<double> fluctuation_function(const SegmentVariances& variances, double q) {
    // Work in logs: ln F_q = (1/q) ln mean exp((q/2) ln F^2).
    std::vector<double> logs;
    logs.reserve(variances.retained_count());
    for (std::size_t i = 0; i < variances.f2.size(); ++i) {
        if (!variances.excluded[i]) logs.push_back(std::log(variances.f2[i]));
    }
    if (logs.empty()) return std::nullopt;
    const double n = static_cast<double>(logs.size());
    if (q == 0.0) {
        return std::exp(0.5 * std::accumulate(logs.begin(), logs.end(), 0.0) / n);
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (double l : logs) peak = std::max(peak, 0.5 * q * l);
    double acc = 0.0;
    for (double l : logs) acc += std::exp(0.5 * q * l - peak);
    return std::exp((peak + std::log(acc / n)) / q);
}

FluctuationSet fluctuation_set(std::span<const double> x, const MfdfaConfig& config) {
    FluctuationSet set;
    set.q = config.q_grid.empty() ? default_q_grid() : config.q_grid;
    set.scales = config.scales.empty() ? default_mfdfa_scales(x.size(), config.poly_order) : config.scales;
    if (set.scales.empty()) throw AnalysisError("MFDFA: series too short for any scale");
    if (!std::is_sorted(set.scales.begin(), set.scales.end())) throw ConfigError("MFDFA scales must increase");
    if (set.scales.back() > x.size() / 4) throw ConfigError("MFDFA scales must not exceed length / 4");
    const std::vector<double> y = profile(x);

    set.values.assign(set.q.size(), std::vector<double>(set.scales.size(), kNaN));
    for (std::size_t is = 0; is < set.scales.size(); ++is) {
        const SegmentVariances var = segment_variance(y, set.scales[is], config.poly_order);
        set.segment_count.push_back(var.segment_count());
        set.excluded_segments.push_back(var.excluded_count);
        if (var.retained_count() < std::max<std::size_t>(config.min_retained_windows, 1)) continue;
        for (std::size_t iq = 0; iq < set.q.size(); ++iq) {
            set.values[iq][is] = fluctuation_function(var, set.q[iq]).value_or(kNaN);
        }
    }
    return set;
}

namespace {

std::size_t closest_index(const std::vector<double>& grid, double q) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (std::abs(grid[i] - q) < std::abs(grid[best] - q)) best = i;
    }
    return best;
}

} // namespace

double GeneralizedHurst::at(double query) const {
    return q.empty() ? kNaN : h[closest_index(q, query)];
}

double GeneralizedHurst::r2_at(double query) const {
    return q.empty() ? kNaN : r2[closest_index(q, query)];
}

GeneralizedHurst generalized_hurst(const FluctuationSet& fluct,
                                   std::optional<std::pair<double, double>> fit_range) {
    GeneralizedHurst out;
    out.q = fluct.q;
    const double lo = fit_range ? fit_range->first : static_cast<double>(fluct.scales.front());
    const double hi = fit_range ? fit_range->second : static_cast<double>(fluct.scales.back());
    out.fit_range = {lo, hi};

    for (std::size_t iq = 0; iq < fluct.q.size(); ++iq) {
        std::vector<double> s, f;
        for (std::size_t is = 0; is < fluct.scales.size(); ++is) {
            const double scale = static_cast<double>(fluct.scales[is]);
            const double value = fluct.values[iq][is];
            if (scale >= lo && scale <= hi && std::isfinite(value) && value > 0.0) {
                s.push_back(scale);
                f.push_back(value);
            }
        }
        out.n_scales.push_back(s.size());
        if (s.size() < 6) {
            if (fluct.q[iq] == 2.0) {
                throw AnalysisError("MFDFA: fewer than 6 usable scales for q = 2 in the fit range");
            }
            out.h.push_back(kNaN);
            out.r2.push_back(kNaN);
            out.warnings.push_back("q=" + std::to_string(fluct.q[iq]) + ": fewer than 6 usable scales");
            continue;
        }
        const FitResult fit = loglog_fit(s, f);
        out.h.push_back(fit.slope);
        out.r2.push_back(fit.r2);
        if (fluct.q[iq] == 2.0 && fit.r2 < 0.95) {
            out.warnings.push_back("poor scaling for q=2: r^2 = " + std::to_string(fit.r2));
        }
    }
    return out;
}

namespace {

// Central difference on a possibly non-uniform grid, one-sided at the ends.
double derivative(std::span<const double> x, std::span<const double> y, std::size_t i) {
    const std::size_t n = x.size();
    if (n < 2) return kNaN;
    const std::size_t a = i == 0 ? 0 : i - 1;
    const std::size_t b = i + 1 == n ? i : i + 1;
    return (y[b] - y[a]) / (x[b] - x[a]);
}

} // namespace

SingularitySpectrum spectrum_from_h(const GeneralizedHurst& hurst) {
    SingularitySpectrum spectrum;
    spectrum.method = Method::Mfdfa;
    for (std::size_t i = 0; i < hurst.q.size(); ++i) {
        const double q = hurst.q[i];
        const double h = hurst.h[i];
        const double dh = derivative(hurst.q, hurst.h, i);
        const double alpha = h + q * dh;
        const double f = q * (alpha - h) + 1.0;
        if (!std::isfinite(alpha) || !std::isfinite(f)) {
            spectrum.warnings.push_back("q=" + std::to_string(q) + ": non-finite derivative, dropped");
            continue;
        }
        if (f > 1.0 + 1e-6) {
            spectrum.warnings.push_back("q=" + std::to_string(q) + ": f > 1 (h increasing), dropped");
            continue;
        }
        spectrum.points.push_back({q, alpha, f});
    }
    std::sort(spectrum.points.begin(), spectrum.points.end(),
              [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.alpha < b.alpha; });
    return spectrum;
}

MfdfaResult run_mfdfa(std::span<const double> x, const MfdfaConfig& config) {
    if (x.size() < 16) throw DegenerateInputError("MFDFA needs at least 16 samples");
    MfdfaResult result;
    result.fluctuation = fluctuation_set(x, config);
    result.hurst = generalized_hurst(result.fluctuation, config.fit_range);
    result.spectrum = spectrum_from_h(result.hurst);
    result.spectrum.warnings.insert(result.spectrum.warnings.begin(), result.hurst.warnings.begin(),
                                    result.hurst.warnings.end());
    return result;
}

} // namespace moneylife
