#pragma once
// Seeded random streams and the handful of distributions the sampler needs.

#include <cstdint>
#include <optional>
#include <random>

namespace sbrel {

using Rng = std::mt19937_64;

/// Seed for stream `stream` derived from `base` with a splitmix64 mix, so
/// consecutive chain indices get well-separated generator states.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

double draw_uniform(Rng& rng);
bool draw_bernoulli(Rng& rng, double p);
double draw_gamma(Rng& rng, double shape, double rate);
double draw_beta(Rng& rng, double a, double b);
std::int64_t draw_poisson(Rng& rng, double mean);

/// Negative binomial with the given mean and dispersion, drawn as a
/// gamma-Poisson mixture. With a cap, draws are rejected until <= cap.
std::int64_t draw_negative_binomial(Rng& rng, double mean, double dispersion,
                                    std::optional<std::int64_t> cap = std::nullopt);

}  // namespace sbrel
