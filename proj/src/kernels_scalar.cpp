#include "moneylife/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>
#include <string>

namespace moneylife::kernels {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

DetrendSums detrend(const double* y, const double* basis, std::size_t n, std::size_t n_basis) {
    double coef[kMaxBasis] = {};
    for (std::size_t k = 0; k < n_basis; ++k) coef[k] = dot(y, basis + k * n, n);
    DetrendSums sums;
    for (std::size_t i = 0; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t k = 0; k < n_basis; ++k) fit += coef[k] * basis[k * n + i];
        const double r = y[i] - fit;
        sums.residual += r * r;
        sums.energy += y[i] * y[i];
    }
    return sums;
}

} // namespace scalar

std::string_view name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool supported(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(MONEYLIFE_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) {
    static const KernelTable scalar_table{Isa::Scalar, &scalar::dot, &scalar::detrend};
#if defined(MONEYLIFE_HAVE_AVX2)
    static const KernelTable avx2_table{Isa::Avx2, &avx2::dot, &avx2::detrend};
#endif
    if (!supported(isa)) {
        throw std::invalid_argument("kernel ISA not available: " + std::string(name(isa)));
    }
#if defined(MONEYLIFE_HAVE_AVX2)
    if (isa == Isa::Avx2) return avx2_table;
#endif
    return scalar_table;
}

const KernelTable& active() {
    static const KernelTable& chosen = [] () -> const KernelTable& {
        const char* forced = std::getenv("MONEYLIFE_ISA");
        if (forced != nullptr && std::strcmp(forced, "scalar") == 0) return table(Isa::Scalar);
        if (supported(Isa::Avx2)) return table(Isa::Avx2);
        return table(Isa::Scalar);
    }();
    return chosen;
}

} // namespace moneylife::kernels
