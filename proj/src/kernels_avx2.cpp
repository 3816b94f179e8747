// Compiled with -mavx2 -mfma; only reached through the dispatch table after a
// CPU feature check.

#include "moneylife/kernels.hpp"

#include <immintrin.h>

namespace moneylife::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d pair = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(pair, _mm_unpackhi_pd(pair, pair)));
}

} // namespace

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    if (i + 4 <= n) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        i += 4;
    }
    double sum = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

DetrendSums detrend(const double* y, const double* basis, std::size_t n, std::size_t n_basis) {
    double coef[kMaxBasis] = {};
    for (std::size_t k = 0; k < n_basis; ++k) coef[k] = dot(y, basis + k * n, n);

    __m256d c[kMaxBasis];
    for (std::size_t k = 0; k < n_basis; ++k) c[k] = _mm256_set1_pd(coef[k]);

    __m256d res = _mm256_setzero_pd();
    __m256d energy = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d yv = _mm256_loadu_pd(y + i);
        __m256d fit = _mm256_setzero_pd();
        for (std::size_t k = 0; k < n_basis; ++k) {
            fit = _mm256_fmadd_pd(c[k], _mm256_loadu_pd(basis + k * n + i), fit);
        }
        const __m256d r = _mm256_sub_pd(yv, fit);
        res = _mm256_fmadd_pd(r, r, res);
        energy = _mm256_fmadd_pd(yv, yv, energy);
    }
    DetrendSums sums{hsum(res), hsum(energy)};
    for (; i < n; ++i) {
        double fit = 0.0;
        for (std::size_t k = 0; k < n_basis; ++k) fit += coef[k] * basis[k * n + i];
        const double r = y[i] - fit;
        sums.residual += r * r;
        sums.energy += y[i] * y[i];
    }
    return sums;
}

} // namespace moneylife::kernels::avx2
