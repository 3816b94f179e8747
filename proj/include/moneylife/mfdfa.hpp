#pragma once

// Multifractal detrended fluctuation analysis.
//
//   profile -> 2 M_s windows per scale (from both ends) -> order-m polynomial
//   detrending -> F^2(v, s) -> q-th order fluctuation function F_q(s) ->
//   h(q) from log-log slopes -> (alpha, f(alpha)).

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moneylife/analysis.hpp"

namespace moneylife {

struct MfdfaConfig {
    unsigned poly_order = 2;
    // Empty means default_q_grid().
    std::vector<double> q_grid;
    // Empty means default_mfdfa_scales(length, poly_order).
    std::vector<std::size_t> scales;
    // Inclusive [lo, hi]; unset means the whole scale grid.
    std::optional<std::pair<double, double>> fit_range;
    // Scales with fewer retained windows are dropped for every q.
    std::size_t min_retained_windows = 4;
};

// -4 .. 4 in steps of 0.25, q = 0 included.
std::vector<double> default_q_grid();

// 20 log-spaced integers from max(16, m + 2) to length / 4.
std::vector<std::size_t> default_mfdfa_scales(std::size_t length, unsigned poly_order);

// Cumulative sum of the mean-subtracted series. Throws DegenerateInputError for
// empty or constant input.
std::vector<double> profile(std::span<const double> x);

struct SegmentVariances {
    std::size_t scale = 0;
    // One entry per window: M_s from the start followed by M_s from the end.
    std::vector<double> f2;
    std::vector<bool> excluded;
    std::size_t excluded_count = 0;

    std::size_t segment_count() const { return f2.size(); }
    std::size_t retained_count() const { return f2.size() - excluded_count; }
};

// Windows whose residual energy vanishes relative to the window's own energy
// are flagged excluded; they would otherwise dominate negative moments.
SegmentVariances segment_variance(std::span<const double> profile, std::size_t scale,
                                  unsigned poly_order);

// F_q(s); q == 0 uses the logarithmic average. nullopt when no window is
// retained.
std::optional<double> fluctuation_function(const SegmentVariances& variances, double q);

struct FluctuationSet {
    std::vector<double> q;
    std::vector<std::size_t> scales;
    // values[iq][is]; NaN where the scale was dropped.
    std::vector<std::vector<double>> values;
    std::vector<std::size_t> segment_count;
    std::vector<std::size_t> excluded_segments;
};

FluctuationSet fluctuation_set(std::span<const double> x, const MfdfaConfig& config);

struct GeneralizedHurst {
    std::vector<double> q;
    std::vector<double> h;   // NaN where the fit was impossible
    std::vector<double> r2;
    std::vector<std::size_t> n_scales;
    std::pair<double, double> fit_range{0.0, 0.0};
    std::vector<std::string> warnings;

    // h at the grid point closest to q.
    double at(double q) const;
    double r2_at(double q) const;
};

// Slopes of ln F_q(s) vs ln s over the fit range. Needs six scales for q = 2,
// otherwise throws AnalysisError. A q = 2 fit with r^2 < 0.95 adds a warning.
GeneralizedHurst generalized_hurst(const FluctuationSet& fluct,
                                   std::optional<std::pair<double, double>> fit_range = std::nullopt);

// alpha = h + q h'(q), f = q (alpha - h) + 1 with central differences in q
// (one-sided at the ends). Points with non-finite values or f > 1 + 1e-6 are
// dropped with a warning.
SingularitySpectrum spectrum_from_h(const GeneralizedHurst& hurst);

struct MfdfaResult {
    FluctuationSet fluctuation;
    GeneralizedHurst hurst;
    SingularitySpectrum spectrum;
};

// Full pipeline. Requires at least 16 samples.
MfdfaResult run_mfdfa(std::span<const double> x, const MfdfaConfig& config = {});

} // namespace moneylife
