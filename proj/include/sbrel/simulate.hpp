#pragma once
// Synthetic testing campaigns drawn from the model itself, with the ground
// truth kept alongside for parameter-recovery checks.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbrel/model.hpp"
#include "sbrel/random.hpp"
#include "sbrel/sampler.hpp"

namespace sbrel {

enum class TestCaseLayout {
  PerCell,   // every (mission, phase) cell draws its own count
  PerPhase,  // one count per phase, shared by all missions
};

std::string to_string(TestCaseLayout layout);
TestCaseLayout parse_test_case_layout(const std::string& s);

struct SimulationSpec {
  std::size_t missions = 30;
  std::size_t phases = 8;
  std::int64_t true_bugs = 100;
  std::int64_t t_min = 0;  // test-case counts are uniform on [t_min, t_max]
  std::int64_t t_max = 50;
  TestCaseLayout layout = TestCaseLayout::PerCell;

  void validate(const ModelConfig& model) const;
};

/// Candidates 0..true_bugs-1 are the real bugs; the rest are not real.
struct GroundTruth {
  std::vector<std::uint8_t> real;
  std::vector<std::int64_t> size;
  std::vector<double> lambda;
  std::vector<std::optional<Cell>> detection;

  std::int64_t real_count() const;
  std::int64_t detected_count() const;
  /// Total size of real bugs that were never detected.
  double remaining_size() const;
};

struct SimulatedCampaign {
  TestCampaign campaign;
  GroundTruth truth;
};

SimulatedCampaign generate_campaign(const ModelConfig& model, const SimulationSpec& spec, Rng& rng);

struct CandidateRecovery {
  std::size_t candidate = 0;  // 1-based slot in the fitted assignment
  std::optional<std::int64_t> true_size;
  std::optional<double> true_lambda;
  double size_mean = 0.0;
  double lambda_mean = 0.0;
};

struct RecoveryRow {
  double nu = 0.0;
  std::uint64_t seed = 0;
  std::int64_t true_bugs = 0;
  std::int64_t detected = 0;
  double true_psi = 0.0;  // true_bugs / M
  double n_mean = 0.0;
  double psi_mean = 0.0;
  double n_rhat = 1.0;
  double psi_rhat = 1.0;
  double remaining_true = 0.0;
  double remaining_mean = 0.0;
  std::vector<CandidateRecovery> candidates;
};

struct StudyOptions {
  ModelConfig model;
  SimulationSpec simulation;
  SamplerConfig sampler;
};

/// For every nu and seed: simulate a campaign, fit it, and compare posterior
/// means against the generating values.
std::vector<RecoveryRow> replicate_study(const std::vector<double>& nu_values,
                                         const std::vector<std::uint64_t>& seeds,
                                         const StudyOptions& options);

}  // namespace sbrel
