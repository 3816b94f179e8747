#include "moneylife/wtmm.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numeric>
#include <tuple>

#include "fft.hpp"
#include "moneylife/errors.hpp"
#include "moneylife/kernels.hpp"
#include "moneylife/mfdfa.hpp"

namespace moneylife {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Kernels up to this many taps are evaluated directly.
constexpr std::size_t kDirectTaps = 257;

std::size_t half_width(double scale) {
    return static_cast<std::size_t>(std::floor(kKernelCutoff * scale));
}

// k(u) = psi(u / s) / s for u in [-W, W], stored at index u + W.
std::vector<double> sampled_kernel(double scale) {
    const std::size_t w = half_width(scale);
    std::vector<double> k(2 * w + 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
        const double u = static_cast<double>(i) - static_cast<double>(w);
        k[i] = wavelet_kernel(u / scale) / scale;
    }
    return k;
}

std::vector<double> direct_row(std::span<const double> x, double scale, bool periodic) {
    const std::vector<double> k = sampled_kernel(scale);
    const std::size_t w = half_width(scale);
    const std::size_t len = x.size();
    const kernels::KernelTable& kt = kernels::active();
    std::vector<double> row(len);
    if (periodic) {
        // x[-w .. len + w) with wrap-around, so every window is complete.
        std::vector<double> ext(len + 2 * w);
        for (std::size_t i = 0; i < ext.size(); ++i) ext[i] = x[(i + len * (w / len + 1) - w) % len];
        for (std::size_t n = 0; n < len; ++n) row[n] = kt.dot(ext.data() + n, k.data(), k.size());
        return row;
    }
    for (std::size_t n = 0; n < len; ++n) {
        const std::size_t lo = n >= w ? n - w : 0;
        const std::size_t hi = std::min(len - 1, n + w);
        row[n] = kt.dot(x.data() + lo, k.data() + (lo + w - n), hi - lo + 1);
    }
    return row;
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// Convolution through one transform of the signal, reused for every scale
// that fits the padding. Periodic mode convolves circularly at the series
// length.
class FftConvolver {
public:
    FftConvolver(std::span<const double> x, std::size_t max_half_width, bool periodic)
        : length_(x.size()),
          size_(periodic ? x.size() : next_pow2(x.size() + 2 * max_half_width + 1)) {
        std::vector<double> padded(size_, 0.0);
        std::copy(x.begin(), x.end(), padded.begin());
        spectrum_ = detail::real_forward(padded);
    }

    std::vector<double> row(double scale) const {
        const std::size_t w = half_width(scale);
        // g(v) = k(-v) placed at v mod size, so (g * x)(n) = sum_i k(i - n) x(i).
        std::vector<double> g(size_, 0.0);
        const std::vector<double> k = sampled_kernel(scale);
        for (std::size_t i = 0; i < k.size(); ++i) {
            const auto u = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(w);
            const auto p = static_cast<std::ptrdiff_t>(size_);
            g[static_cast<std::size_t>(((-u % p) + p) % p)] += k[i];
        }
        std::vector<std::complex<double>> product = detail::real_forward(g);
        for (std::size_t j = 0; j < product.size(); ++j) product[j] *= spectrum_[j];
        std::vector<double> out = detail::real_inverse(product, size_);
        out.resize(length_);
        const double norm = 1.0 / static_cast<double>(size_);
        for (double& v : out) v *= norm;
        return out;
    }

private:
    std::size_t length_;
    std::size_t size_;
    std::vector<std::complex<double>> spectrum_;
};

} // namespace

double wavelet_kernel(double x) { return (3.0 * x - x * x * x) * std::exp(-0.5 * x * x); }

std::vector<double> default_wtmm_scales(std::size_t length) {
    const double hi = static_cast<double>(length) / 16.0;
    if (hi <= 4.0) return {};
    return log_spaced(4.0, hi, 30);
}

std::pair<double, double> default_wtmm_fit_range(std::span<const double> scales) {
    if (scales.empty()) return {0.0, 0.0};
    const double llo = std::log(scales.front());
    const double lhi = std::log(scales.back());
    const double sixth = (lhi - llo) / 6.0;
    return {std::exp(llo + sixth) * (1.0 - 1e-12), std::exp(lhi - sixth) * (1.0 + 1e-12)};
}

std::vector<double> cwt_row(std::span<const double> x, double scale, CwtPath path, bool periodic) {
    if (!(scale > 0.0)) throw ConfigError("wavelet scale must be positive");
    if (x.empty()) return {};
    const bool direct = path == CwtPath::Direct ||
                        (path == CwtPath::Auto && 2 * half_width(scale) + 1 <= kDirectTaps);
    if (direct) return direct_row(x, scale, periodic);
    return FftConvolver(x, half_width(scale), periodic).row(scale);
}

WaveletField cwt(std::span<const double> x, std::span<const double> scales, double edge_margin_factor,
                 bool periodic) {
    if (!std::is_sorted(scales.begin(), scales.end())) throw ConfigError("wavelet scales must increase");
    WaveletField field;
    field.length = x.size();
    const double len = static_cast<double>(x.size());

    std::vector<double> kept;
    for (double s : scales) {
        if (s > len / (2.0 * edge_margin_factor) || !(s > 0.0)) {
            field.warnings.push_back("scale " + std::to_string(s) + " dropped: no edge-free positions");
            continue;
        }
        kept.push_back(s);
    }
    if (!kept.empty() && x.size() < static_cast<std::size_t>(std::ceil(20.0 * kept.front()))) {
        field.warnings.push_back("series shorter than 20 x smallest scale");
    }

    std::optional<FftConvolver> fft;
    for (double s : kept) {
        std::vector<double> row;
        if (2 * half_width(s) + 1 <= kDirectTaps) {
            row = direct_row(x, s, periodic);
        } else {
            if (!fft) fft.emplace(x, half_width(kept.back()), periodic);
            row = fft->row(s);
        }
        const auto margin = periodic ? 0 : static_cast<std::size_t>(std::ceil(edge_margin_factor * s));
        field.scales.push_back(s);
        field.values.push_back(std::move(row));
        field.valid.emplace_back(margin, x.size() > margin ? x.size() - margin : margin);
    }
    return field;
}

std::vector<std::size_t> find_maxima(std::span<const double> row, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> out;
    end = std::min(end, row.size());
    if (end < begin + 3) return out;
    for (std::size_t n = begin + 1; n + 1 < end; ++n) {
        const double here = std::abs(row[n]);
        if (here > std::abs(row[n - 1]) && here >= std::abs(row[n + 1])) out.push_back(n);
    }
    return out;
}

std::vector<MaximaLine> chain_maxima(const WaveletField& field,
                                     const std::vector<std::vector<std::size_t>>& maxima,
                                     double link_window) {
    std::vector<MaximaLine> lines;
    // Line index owning each maximum of the previous scale.
    std::vector<std::size_t> previous_owner;
    for (std::size_t is = 0; is < maxima.size(); ++is) {
        const std::vector<std::size_t>& here = maxima[is];
        const std::vector<double>& row = field.values[is];
        std::vector<std::size_t> owner(here.size(), SIZE_MAX);

        if (is > 0 && !maxima[is - 1].empty()) {
            const std::vector<std::size_t>& prev = maxima[is - 1];
            const double window = link_window * field.scales[is];
            // (distance, index here, index in prev); nearest predecessor only.
            std::vector<std::tuple<double, std::size_t, std::size_t>> claims;
            for (std::size_t i = 0; i < here.size(); ++i) {
                const auto it = std::lower_bound(prev.begin(), prev.end(), here[i]);
                std::size_t best = SIZE_MAX;
                double best_d = std::numeric_limits<double>::infinity();
                for (auto cand : {it, it == prev.begin() ? prev.end() : std::prev(it)}) {
                    if (cand == prev.end()) continue;
                    const double d = std::abs(static_cast<double>(*cand) - static_cast<double>(here[i]));
                    if (d < best_d) {
                        best_d = d;
                        best = static_cast<std::size_t>(cand - prev.begin());
                    }
                }
                if (best != SIZE_MAX && best_d <= window) claims.emplace_back(best_d, i, best);
            }
            std::sort(claims.begin(), claims.end());
            std::vector<bool> taken(prev.size(), false);
            for (const auto& [d, i, j] : claims) {
                if (taken[j] || previous_owner[j] == SIZE_MAX) continue;
                taken[j] = true;
                owner[i] = previous_owner[j];
            }
        }

        for (std::size_t i = 0; i < here.size(); ++i) {
            const double modulus = std::abs(row[here[i]]);
            if (owner[i] == SIZE_MAX) {
                owner[i] = lines.size();
                lines.push_back(MaximaLine{{is}, {here[i]}, {modulus}, {modulus}});
                continue;
            }
            MaximaLine& line = lines[owner[i]];
            line.scale_index.push_back(is);
            line.position.push_back(here[i]);
            line.modulus.push_back(modulus);
            line.supremum.push_back(std::max(line.supremum.back(), modulus));
        }
        previous_owner = std::move(owner);
    }
    return lines;
}

double PartitionFunction::tau_at(double query) const {
    if (q.empty()) return kNaN;
    std::size_t best = 0;
    for (std::size_t i = 1; i < q.size(); ++i) {
        if (std::abs(q[i] - query) < std::abs(q[best] - query)) best = i;
    }
    return tau[best];
}

PartitionFunction partition_function(const std::vector<MaximaLine>& lines, std::span<const double> scales,
                                     std::span<const double> q_grid, std::pair<double, double> fit_range,
                                     std::size_t min_lines, bool use_supremum) {
    PartitionFunction out;
    out.q.assign(q_grid.begin(), q_grid.end());
    out.log_z.assign(q_grid.size(), {});

    std::size_t first_fit = scales.size();
    for (std::size_t is = 0; is < scales.size(); ++is) {
        if (scales[is] >= fit_range.first) {
            first_fit = is;
            break;
        }
    }

    std::vector<double> values;
    for (std::size_t is = first_fit; is < scales.size() && scales[is] <= fit_range.second; ++is) {
        values.clear();
        for (const MaximaLine& line : lines) {
            if ((first_fit > 0 ? line.birth() >= first_fit : line.birth() > 0) || !line.alive_at(is)) continue;
            const double v = use_supremum ? line.supremum_at(is) : line.modulus_at(is);
            if (v > 0.0) values.push_back(std::log(v));
        }
        if (values.size() < min_lines) {
            out.warnings.push_back("scale " + std::to_string(scales[is]) + " dropped: only " +
                                   std::to_string(values.size()) + " lines");
            continue;
        }
        out.scales.push_back(scales[is]);
        out.line_count.push_back(values.size());
        for (std::size_t iq = 0; iq < q_grid.size(); ++iq) {
            const double q = q_grid[iq];
            double peak = -std::numeric_limits<double>::infinity();
            for (double l : values) peak = std::max(peak, q * l);
            double acc = 0.0;
            for (double l : values) acc += std::exp(q * l - peak);
            out.log_z[iq].push_back(peak + std::log(acc));
        }
    }
    if (out.scales.size() < 6) {
        throw AnalysisError("WTMM: only " + std::to_string(out.scales.size()) +
                            " scales with enough maxima lines in the fit range");
    }

    std::vector<double> log_s;
    for (double s : out.scales) log_s.push_back(std::log(s));
    for (std::size_t iq = 0; iq < q_grid.size(); ++iq) {
        const FitResult fit = linear_fit(log_s, out.log_z[iq]);
        out.tau.push_back(fit.slope);
        out.r2.push_back(fit.r2);
    }
    return out;
}

SingularitySpectrum spectrum_from_tau(const PartitionFunction& partition) {
    SingularitySpectrum spectrum;
    spectrum.method = Method::Wtmm;
    const std::size_t n = partition.q.size();
    std::vector<SpectrumPoint> raw;
    for (std::size_t i = 0; i < n; ++i) {
        if (n < 2) break;
        const std::size_t a = i == 0 ? 0 : i - 1;
        const std::size_t b = i + 1 == n ? i : i + 1;
        const double alpha = (partition.tau[b] - partition.tau[a]) / (partition.q[b] - partition.q[a]);
        const double q = partition.q[i];
        raw.push_back({q, alpha, q * alpha - partition.tau[i]});
    }

    // Longest run (not necessarily contiguous) with alpha non-increasing in q.
    std::vector<std::size_t> best_len(raw.size(), 1), parent(raw.size(), SIZE_MAX);
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (raw[j].alpha >= raw[i].alpha && best_len[j] + 1 > best_len[i]) {
                best_len[i] = best_len[j] + 1;
                parent[i] = j;
            }
        }
    }
    std::vector<bool> keep(raw.size(), false);
    if (!raw.empty()) {
        std::size_t end = static_cast<std::size_t>(
            std::max_element(best_len.begin(), best_len.end()) - best_len.begin());
        for (std::size_t i = end; i != SIZE_MAX; i = parent[i]) keep[i] = true;
    }

    for (std::size_t i = 0; i < raw.size(); ++i) {
        const SpectrumPoint& p = raw[i];
        if (!keep[i]) {
            spectrum.warnings.push_back("q=" + std::to_string(p.q) + ": tau not concave here, dropped");
        } else if (!std::isfinite(p.alpha) || !std::isfinite(p.f)) {
            spectrum.warnings.push_back("q=" + std::to_string(p.q) + ": non-finite, dropped");
        } else if (p.f > 1.0 + 1e-6) {
            spectrum.warnings.push_back("q=" + std::to_string(p.q) + ": f > 1, dropped");
        } else {
            spectrum.points.push_back(p);
        }
    }
    std::sort(spectrum.points.begin(), spectrum.points.end(),
              [](const SpectrumPoint& a, const SpectrumPoint& b) { return a.alpha < b.alpha; });
    return spectrum;
}

WtmmResult run_wtmm(std::span<const double> x, const WtmmConfig& config) {
    if (config.link_window <= 0.0) throw ConfigError("link_window must be positive");
    if (config.edge_margin_factor < 3.0) throw ConfigError("edge_margin_factor must be at least 3");

    const std::vector<double> signal = config.integrate ? profile(x) : std::vector<double>(x.begin(), x.end());
    const std::vector<double> scales = config.scales.empty() ? default_wtmm_scales(x.size()) : config.scales;
    if (scales.empty()) throw AnalysisError("WTMM: series too short for the default scale grid");
    const std::vector<double> q_grid = config.q_grid.empty() ? default_q_grid() : config.q_grid;

    WtmmResult result;
    result.field = cwt(signal, scales, config.edge_margin_factor, config.periodic);
    std::vector<std::vector<std::size_t>> maxima;
    for (std::size_t is = 0; is < result.field.scales.size(); ++is) {
        const auto [begin, end] = result.field.valid[is];
        maxima.push_back(find_maxima(result.field.values[is], begin, end));
    }
    result.lines = chain_maxima(result.field, maxima, config.link_window);
    const auto fit_range = config.fit_range.value_or(default_wtmm_fit_range(result.field.scales));
    result.partition = partition_function(result.lines, result.field.scales, q_grid, fit_range, config.min_lines);
    result.spectrum = spectrum_from_tau(result.partition);
    result.spectrum.warnings.insert(result.spectrum.warnings.begin(), result.partition.warnings.begin(),
                                    result.partition.warnings.end());
    return result;
}

} // namespace moneylife
