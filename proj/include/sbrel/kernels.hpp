#pragma once
// Reduction kernels used by the diagnostics and reliability code.
//
// Every kernel has a scalar reference implementation. On x86-64 an AVX2
// variant is compiled into a separate translation unit and picked at
// runtime when the CPU supports it. The dispatch can be pinned with the
// SBREL_SIMD environment variable ("scalar" or "avx2") or set_backend().

#include <cstddef>
#include <span>
#include <string_view>

namespace sbrel::kernels {

enum class Backend { Scalar, Avx2 };

/// Sum of all elements.
double sum(std::span<const double> x);

/// Sum of (x_i - center)^2.
double centered_sum_squares(std::span<const double> x, double center);

/// Sum over i of x[i] * x[i + lag], for i + lag < x.size().
/// Callers pass an already-centered sequence to get autocovariances.
double lagged_cross(std::span<const double> x, std::size_t lag);

/// Number of elements strictly below threshold.
std::size_t count_below(std::span<const double> x, double threshold);

Backend active_backend();
bool backend_available(Backend b);
/// Throws std::invalid_argument if the backend is not available on this CPU.
void set_backend(Backend b);
std::string_view backend_name(Backend b);

namespace scalar {
double sum(std::span<const double> x);
double centered_sum_squares(std::span<const double> x, double center);
double lagged_cross(std::span<const double> x, std::size_t lag);
std::size_t count_below(std::span<const double> x, double threshold);
}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
// Only call these when backend_available(Backend::Avx2) is true.
double sum(std::span<const double> x);
double centered_sum_squares(std::span<const double> x, double center);
double lagged_cross(std::span<const double> x, std::size_t lag);
std::size_t count_below(std::span<const double> x, double threshold);
}  // namespace avx2
#endif

}  // namespace sbrel::kernels
