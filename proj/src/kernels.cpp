#include "sbrel/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace sbrel::kernels {

namespace scalar {

double sum(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s;
}

double centered_sum_squares(std::span<const double> x, double center) {
  double s = 0.0;
  for (double v : x) {
    const double d = v - center;
    s += d * d;
  }
  return s;
}

double lagged_cross(std::span<const double> x, std::size_t lag) {
  if (lag >= x.size()) return 0.0;
  const std::size_t n = x.size() - lag;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i + lag];
  return s;
}

std::size_t count_below(std::span<const double> x, double threshold) {
  std::size_t c = 0;
  for (double v : x) c += (v < threshold) ? 1 : 0;
  return c;
}

}  // namespace scalar

namespace {

bool cpu_has_avx2() {
#if defined(SBREL_HAVE_AVX2)
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const bool avx2 = cpu_has_avx2();
  if (const char* env = std::getenv("SBREL_SIMD")) {
    const std::string v(env);
    if (v == "scalar") return Backend::Scalar;
    if (v == "avx2" && avx2) return Backend::Avx2;
  }
  return avx2 ? Backend::Avx2 : Backend::Scalar;
}

std::atomic<Backend>& backend_slot() {
  static std::atomic<Backend> slot{initial_backend()};
  return slot;
}

}  // namespace

Backend active_backend() { return backend_slot().load(std::memory_order_relaxed); }

bool backend_available(Backend b) {
  return b == Backend::Scalar || cpu_has_avx2();
}

void set_backend(Backend b) {
  if (!backend_available(b))
    throw std::invalid_argument("SIMD backend not available on this CPU: " +
                                std::string(backend_name(b)));
  backend_slot().store(b, std::memory_order_relaxed);
}

std::string_view backend_name(Backend b) {
  return b == Backend::Avx2 ? "avx2" : "scalar";
}

#if defined(SBREL_HAVE_AVX2)
#define SBREL_DISPATCH(fn, ...) \
  (active_backend() == Backend::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define SBREL_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

double sum(std::span<const double> x) { return SBREL_DISPATCH(sum, x); }

double centered_sum_squares(std::span<const double> x, double center) {
  return SBREL_DISPATCH(centered_sum_squares, x, center);
}

double lagged_cross(std::span<const double> x, std::size_t lag) {
  return SBREL_DISPATCH(lagged_cross, x, lag);
}

std::size_t count_below(std::span<const double> x, double threshold) {
  return SBREL_DISPATCH(count_below, x, threshold);
}

#undef SBREL_DISPATCH

}  // namespace sbrel::kernels
