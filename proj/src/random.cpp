#include "sbrel/random.hpp"

#include <cmath>

#include "sbrel/model.hpp"

namespace sbrel {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t x = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double draw_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

bool draw_bernoulli(Rng& rng, double p) {
  if (p <= 0.0) return false;
  if (p >= 1.0) return true;
  return draw_uniform(rng) < p;
}

double draw_gamma(Rng& rng, double shape, double rate) {
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double draw_beta(Rng& rng, double a, double b) {
  const double x = draw_gamma(rng, a, 1.0);
  const double y = draw_gamma(rng, b, 1.0);
  return x / (x + y);
}

std::int64_t draw_poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  return std::poisson_distribution<std::int64_t>(mean)(rng);
}

std::int64_t draw_negative_binomial(Rng& rng, double mean, double dispersion,
                                    std::optional<std::int64_t> cap) {
  constexpr int kMaxRejections = 1'000'000;
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const double rate = draw_gamma(rng, dispersion, dispersion / mean);
    const std::int64_t s = draw_poisson(rng, rate);
    if (!cap || s <= *cap) return s;
  }
  throw Error("size cap rejects almost all prior mass");
}

}  // namespace sbrel
