#include "sbrel/reliability.hpp"

#include <algorithm>

#include "sbrel/kernels.hpp"
#include "sbrel/sampler.hpp"

namespace sbrel {

double remaining_size(const AugmentedState& state, const BugAssignment& assignment) {
  double all = 0.0;
  double detected = 0.0;
  for (std::size_t i = 0; i < state.candidates(); ++i) {
    const double s = static_cast<double>(state.size[i]);
    if (state.z[i]) all += s;
    if (!assignment.undetected(i)) detected += s;
  }
  return all - detected;
}

double reliability_at(std::span<const double> remaining, double epsilon) {
  if (remaining.empty()) throw Error("no draws to estimate reliability from");
  if (!(epsilon >= 0.0)) throw Error("epsilon must be non-negative");
  return static_cast<double>(kernels::count_below(remaining, epsilon)) /
         static_cast<double>(remaining.size());
}

double reliability_at(const ChainSet& draws, double epsilon) {
  if (!(epsilon >= 0.0)) throw Error("epsilon must be non-negative");
  std::size_t below = 0;
  std::size_t total = 0;
  for (auto series : draws.per_chain("R")) {
    below += kernels::count_below(series, epsilon);
    total += series.size();
  }
  if (total == 0) throw Error("no draws to estimate reliability from");
  return static_cast<double>(below) / static_cast<double>(total);
}

std::vector<double> reliability_per_chain(const ChainSet& draws, double epsilon) {
  std::vector<double> out;
  for (auto series : draws.per_chain("R")) out.push_back(reliability_at(series, epsilon));
  return out;
}

std::vector<ReliabilityPoint> reliability_curve(const ChainSet& draws,
                                                std::span<const double> epsilons) {
  if (epsilons.empty()) throw Error("empty epsilon grid");
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] > epsilons[i - 1])) throw Error("epsilon grid must be strictly increasing");
  std::vector<ReliabilityPoint> out;
  out.reserve(epsilons.size());
  for (double e : epsilons)
    out.push_back({e, reliability_at(draws, e), reliability_per_chain(draws, e)});
  return out;
}

}  // namespace sbrel
