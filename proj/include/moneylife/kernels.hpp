#pragma once

// Data-parallel inner loops of the estimators, with a portable scalar
// reference and an AVX2/FMA variant picked at runtime. The scalar versions are
// the definition; vector versions must agree with them to rounding.

#include <cstddef>
#include <string_view>

namespace moneylife::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view name(Isa isa);

// Residual energy of a window after removing its projection on an orthonormal
// basis, plus the raw energy of the window (used for the zero-variance test).
struct DetrendSums {
    double residual = 0.0;
    double energy = 0.0;
};

struct KernelTable {
    Isa isa = Isa::Scalar;
    // sum_i a[i] * b[i]
    double (*dot)(const double* a, const double* b, std::size_t n) = nullptr;
    // y has n samples; basis holds n_basis orthonormal rows of n samples each.
    DetrendSums (*detrend)(const double* y, const double* basis, std::size_t n,
                           std::size_t n_basis) = nullptr;
};

bool supported(Isa isa);

// Throws std::invalid_argument when the ISA is not available on this CPU or
// was not compiled in.
const KernelTable& table(Isa isa);

// Best supported table, unless MONEYLIFE_ISA=scalar is set in the
// environment. Resolved once.
const KernelTable& active();

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
DetrendSums detrend(const double* y, const double* basis, std::size_t n, std::size_t n_basis);
} // namespace scalar

#if defined(MONEYLIFE_HAVE_AVX2)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
DetrendSums detrend(const double* y, const double* basis, std::size_t n, std::size_t n_basis);
} // namespace avx2
#endif

// Largest supported basis size for detrend (polynomial order + 1).
inline constexpr std::size_t kMaxBasis = 8;

} // namespace moneylife::kernels
