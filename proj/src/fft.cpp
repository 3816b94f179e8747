#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <memory>
#include <mutex>
#include <stdexcept>

namespace moneylife::detail {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct PlanDeleter {
    void operator()(fftw_plan_s* plan) const {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
};
using Plan = std::unique_ptr<fftw_plan_s, PlanDeleter>;

struct FftwFree {
    void operator()(void* p) const { fftw_free(p); }
};
template <class T>
using Buffer = std::unique_ptr<T[], FftwFree>;

template <class T>
Buffer<T> allocate(std::size_t n) {
    auto* p = static_cast<T*>(fftw_malloc(sizeof(T) * std::max<std::size_t>(n, 1)));
    if (p == nullptr) throw std::bad_alloc();
    return Buffer<T>(p);
}

} // namespace

std::vector<std::complex<double>> real_forward(std::span<const double> x) {
    const std::size_t n = x.size();
    auto in = allocate<double>(n);
    auto out = allocate<fftw_complex>(n / 2 + 1);
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    std::copy(x.begin(), x.end(), in.get());
    fftw_execute(plan.get());
    std::vector<std::complex<double>> result(n / 2 + 1);
    for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out[k][0], out[k][1]};
    return result;
}

std::vector<double> real_inverse(std::span<const std::complex<double>> half, std::size_t n) {
    if (half.size() != n / 2 + 1) throw std::invalid_argument("real_inverse: spectrum size mismatch");
    auto in = allocate<fftw_complex>(half.size());
    auto out = allocate<double>(n);
    Plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan.reset(fftw_plan_dft_c2r_1d(static_cast<int>(n), in.get(), out.get(), FFTW_ESTIMATE));
    }
    for (std::size_t k = 0; k < half.size(); ++k) {
        in[k][0] = half[k].real();
        in[k][1] = half[k].imag();
    }
    fftw_execute(plan.get());
    return {out.get(), out.get() + n};
}

} // namespace moneylife::detail
