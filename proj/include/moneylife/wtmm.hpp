#pragma once

// Wavelet transform modulus maxima.
//
// The series is integrated (mean-subtracted cumulative sum) before the
// transform, so exponents sit on the same scale as MFDFA: uncorrelated noise
// gives alpha = 0.5. The kernel is the third derivative of a Gaussian, blind
// to polynomial trends up to second order.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moneylife/analysis.hpp"

namespace moneylife {

struct WtmmConfig {
    // Empty means default_q_grid().
    std::vector<double> q_grid;
    // Empty means default_wtmm_scales(length).
    std::vector<double> scales;
    // Max position drift when linking maxima, in samples per unit of scale.
    double link_window = 1.0;
    // Positions closer than edge_margin_factor * s to either end are ignored.
    double edge_margin_factor = 3.0;
    // Inclusive [lo, hi]; unset means the central two thirds (in log scale).
    std::optional<std::pair<double, double>> fit_range;
    std::size_t min_lines = 10;
    // Analyze the profile of the series rather than the series itself.
    bool integrate = true;
    // Wrap the series around instead of truncating the kernel at its ends.
    // Every position is then valid and the edge margin is not applied.
    bool periodic = false;
};

// 30 log-spaced scales from 4 to length / 16.
std::vector<double> default_wtmm_scales(std::size_t length);

// Central two thirds of the scale grid in log space.
std::pair<double, double> default_wtmm_fit_range(std::span<const double> scales);

// psi(x) = (3x - x^3) exp(-x^2 / 2)
double wavelet_kernel(double x);

// Kernel support in units of scale; contributions beyond are dropped.
inline constexpr double kKernelCutoff = 8.0;

struct WaveletField {
    std::vector<double> scales;
    std::size_t length = 0;
    // values[is][n] = T(n, s)
    std::vector<std::vector<double>> values;
    // Half-open range of positions not affected by the series edges.
    std::vector<std::pair<std::size_t, std::size_t>> valid;
    std::vector<std::string> warnings;
};

// T(n, s) = (1/s) sum_i psi((i - n)/s) x(i). Small kernels are evaluated
// directly through the SIMD dot kernel, large ones by FFT convolution.
// Scales with no edge-free positions are dropped with a warning.
WaveletField cwt(std::span<const double> x, std::span<const double> scales,
                 double edge_margin_factor = 3.0, bool periodic = false);

enum class CwtPath { Auto, Direct, Fft };
std::vector<double> cwt_row(std::span<const double> x, double scale, CwtPath path = CwtPath::Auto,
                            bool periodic = false);

// Local maxima of |row| in [begin, end): |T(n)| > |T(n-1)| and |T(n)| >= |T(n+1)|.
// Neighbours outside [begin, end) are not considered, so the range ends can
// never be maxima.
std::vector<std::size_t> find_maxima(std::span<const double> row, std::size_t begin, std::size_t end);

struct MaximaLine {
    std::vector<std::size_t> scale_index;  // strictly increasing
    std::vector<std::size_t> position;
    std::vector<double> modulus;
    std::vector<double> supremum;  // running max of modulus from the smallest scale

    std::size_t birth() const { return scale_index.front(); }
    std::size_t death() const { return scale_index.back(); }
    bool alive_at(std::size_t is) const { return is >= birth() && is <= death(); }
    double supremum_at(std::size_t is) const { return supremum[is - birth()]; }
    double modulus_at(std::size_t is) const { return modulus[is - birth()]; }
};

// Links maxima scale by scale: a maximum at s_{j+1} continues the line ending
// at the nearest maximum of s_j if that is within link_window * s_{j+1}
// samples and not claimed by a closer maximum; otherwise it starts a line.
std::vector<MaximaLine> chain_maxima(const WaveletField& field,
                                     const std::vector<std::vector<std::size_t>>& maxima,
                                     double link_window);

struct PartitionFunction {
    std::vector<double> q;
    std::vector<double> scales;          // scales in the fit range that were kept
    std::vector<std::size_t> line_count; // lines contributing at each kept scale
    std::vector<std::vector<double>> log_z;  // log_z[iq][is] = ln Z(q, s)
    std::vector<double> tau;
    std::vector<double> r2;
    std::vector<std::string> warnings;

    double tau_at(double q) const;
};

// Z(q, s) = sum over lines alive at s of (sup_{s' <= s} |T|)^q, or the plain
// modulus when use_supremum is false. Only lines born below the first fit
// scale count, so every counted line has some history under its supremum
// (a line born exactly there can be a lone near-zero maximum that swamps
// negative q). Scales with fewer than min_lines lines are dropped; fewer than 6
// remaining scales throws AnalysisError.
PartitionFunction partition_function(const std::vector<MaximaLine>& lines, std::span<const double> scales,
                                     std::span<const double> q_grid, std::pair<double, double> fit_range,
                                     std::size_t min_lines = 10, bool use_supremum = true);

// alpha = tau'(q), f = q alpha - tau. Points breaking monotonicity of alpha
// (non-concave tau) or with f > 1 + 1e-6 are dropped with a warning.
SingularitySpectrum spectrum_from_tau(const PartitionFunction& partition);

struct WtmmResult {
    WaveletField field;
    std::vector<MaximaLine> lines;
    PartitionFunction partition;
    SingularitySpectrum spectrum;
};

WtmmResult run_wtmm(std::span<const double> x, const WtmmConfig& config = {});

} // namespace moneylife
