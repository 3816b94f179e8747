#pragma once

// Thin RAII layer over FFTW's real-to-complex transforms. Planning is
// serialized because the FFTW planner is not thread safe; execution is not.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace moneylife::detail {

// Forward transform of a real sequence; returns n/2 + 1 bins.
std::vector<std::complex<double>> real_forward(std::span<const double> x);

// Unnormalized inverse of a Hermitian half-spectrum into n real samples.
std::vector<double> real_inverse(std::span<const std::complex<double>> half, std::size_t n);

} // namespace moneylife::detail
