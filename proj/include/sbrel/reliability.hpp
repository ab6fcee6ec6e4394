#pragma once
// Remaining eventual size of undetected real bugs and the release
// reliability Pr(R < epsilon) estimated from posterior draws.

#include <span>
#include <utility>
#include <vector>

#include "sbrel/model.hpp"

namespace sbrel {

struct ChainSet;

/// Sum of S_i z_i minus the sizes of detected bugs, i.e. the total size of
/// real candidates that were never detected.
double remaining_size(const AugmentedState& state, const BugAssignment& assignment);

/// Fraction of draws with R strictly below epsilon.
double reliability_at(std::span<const double> remaining, double epsilon);

/// Pooled over every chain of the set (parameter "R").
double reliability_at(const ChainSet& draws, double epsilon);

std::vector<double> reliability_per_chain(const ChainSet& draws, double epsilon);

struct ReliabilityPoint {
  double epsilon = 0.0;
  double probability = 0.0;
  std::vector<double> per_chain;
};

/// Epsilons must be strictly increasing.
std::vector<ReliabilityPoint> reliability_curve(const ChainSet& draws,
                                                std::span<const double> epsilons);

}  // namespace sbrel
