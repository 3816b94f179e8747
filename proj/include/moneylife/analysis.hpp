#pragma once

// Shared numerics for both multifractal estimators: log-log regression,
// singularity spectra, shuffled surrogates and synthetic oracle series.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace moneylife {

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n_points = 0;
};

// Ordinary least squares of y on x. Needs n >= 3 and non-constant x.
FitResult linear_fit(std::span<const double> x, std::span<const double> y);

// Least squares on (ln s, ln F). Throws AnalysisError for non-positive input or
// fewer than three points.
FitResult loglog_fit(std::span<const double> s, std::span<const double> f);

enum class Method { Mfdfa, Wtmm };
std::string_view method_name(Method method);

struct SpectrumPoint {
    double q = 0.0;
    double alpha = 0.0;
    double f = 0.0;
};

struct SingularitySpectrum {
    Method method = Method::Mfdfa;
    // Ascending in alpha.
    std::vector<SpectrumPoint> points;
    std::vector<std::string> warnings;

    double width() const;
    double alpha_at_max_f() const;
    double max_f() const;
};

// max alpha - min alpha; zero for fewer than two points.
double spectrum_width(const SingularitySpectrum& spectrum);

// Uniform random permutation (Fisher-Yates driven by Rng).
std::vector<double> shuffle(std::span<const double> x, std::uint64_t seed);

// Deterministic binomial multiplicative cascade with 2^levels cells: each cell
// splits into a left child weighted p and a right child weighted 1-p.
std::vector<double> gen_binomial_cascade(unsigned levels, double p);

// Exact analytic exponents of the cascade above.
double cascade_hurst(double q, double p);  // 1/q - ln(p^q + (1-p)^q) / (q ln 2)
double cascade_tau(double q, double p);    // -log2(p^q + (1-p)^q)

// Fractional Gaussian noise with unit variance via circulant embedding
// (Davies-Harte). Exact in distribution up to floating point.
std::vector<double> gen_fgn(std::size_t length, double hurst, std::uint64_t seed);

// Sample autocorrelation at the given lag.
double autocorrelation(std::span<const double> x, std::size_t lag);

// ceil(log-spaced) integer grid with duplicates removed.
std::vector<std::size_t> log_spaced_integers(double lo, double hi, std::size_t count);
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

// q from lo to hi in steps of `step` (q = 0 included when on the grid).
std::vector<double> q_range(double lo, double hi, double step);

} // namespace moneylife
