#pragma once
// Domain types and densities for the size-biased bug detection model.
//
// A campaign is J missions x K phases of testing. Each of M candidate bugs
// is real with probability psi; a real bug of eventual size S is detected
// with probability alpha(S) = 1 - exp(-S^nu / max T), and if detected it
// lands in cell (j, k) with probability proportional to 1 - exp(-T_jk).

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbrel {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix indexed by (mission, phase), both 0-based.
template <class T>
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> values;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), values(r * c, fill) {}

  T& operator()(std::size_t j, std::size_t k) { return values[j * cols + k]; }
  const T& operator()(std::size_t j, std::size_t k) const { return values[j * cols + k]; }

  friend bool operator==(const Matrix&, const Matrix&) = default;
};

using CountMatrix = Matrix<std::int64_t>;
using ProbMatrix = Matrix<double>;

/// Observed testing data: test-case counts and detected-bug counts per cell.
struct TestCampaign {
  std::size_t missions = 0;  // J
  std::size_t phases = 0;    // K
  CountMatrix test_cases;    // T
  CountMatrix bugs;          // y

  /// Builds and validates a campaign; throws Error on shape or sign problems.
  static TestCampaign make(CountMatrix test_cases, CountMatrix bugs);

  std::int64_t detected() const;        // n = sum of y
  std::int64_t max_test_cases() const;  // max over all cells of T
  void validate() const;

  friend bool operator==(const TestCampaign&, const TestCampaign&) = default;
};

enum class Normalization {
  /// Cell probabilities p_jk = 1 - exp(-T_jk) rescaled to sum to one.
  Proportional,
};

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

struct ModelConfig {
  std::int64_t max_bugs = 400;  // M
  double nu = 1.5;
  double gamma_shape = 50.0;  // a_s
  double gamma_rate = 0.5;    // b_s
  double dispersion = 50.0;   // negative-binomial r
  Normalization normalization = Normalization::Proportional;
  /// Optional upper bound on bug sizes; the size prior becomes a truncated
  /// negative binomial. Unset in normal use.
  std::optional<std::int64_t> size_cap;

  void validate() const;
  /// Also checks M >= n for the campaign.
  void validate_for(const TestCampaign& campaign) const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct Cell {
  std::size_t mission = 0;
  std::size_t phase = 0;
  friend bool operator==(const Cell&, const Cell&) = default;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

/// Detection record for every candidate: the cell of its single detection,
/// or nothing if the candidate was never detected (u_i = 1).
struct BugAssignment {
  std::vector<std::optional<Cell>> slots;

  std::size_t size() const { return slots.size(); }
  bool undetected(std::size_t i) const { return !slots[i].has_value(); }
  std::size_t detected_count() const;
  /// Per-cell detection counts; throws Error if a slot falls outside JxK.
  CountMatrix reconstruct_counts(std::size_t missions, std::size_t phases) const;
};

/// One MCMC state over M candidates.
struct AugmentedState {
  std::vector<std::uint8_t> z;
  std::vector<std::int64_t> size;  // S
  std::vector<double> lambda;
  double psi = 0.5;

  std::size_t candidates() const { return z.size(); }
  std::int64_t real_count() const;  // N
};

double phase_detection_prob(double test_cases);

ProbMatrix cell_probabilities(const CountMatrix& test_cases,
                              Normalization policy = Normalization::Proportional);

/// alpha = 1 - exp(-s^nu / t_max).
double detection_prob(double size, double nu, double t_max);

/// log(alpha), accurate when alpha is tiny or close to one.
double log_detection_prob(double size, double nu, double t_max);

/// log(1 - alpha) = -s^nu / t_max.
double log_nondetection_prob(double size, double nu, double t_max);

/// Log-likelihood of one candidate's detection record given its size.
/// Throws Error for a detected candidate that is not real.
double bug_log_likelihood(const std::optional<Cell>& entry, bool real, std::int64_t size,
                          const ProbMatrix& cells, double nu, double t_max);

/// Negative binomial with mean `mean` and dispersion r (variance mean + mean^2 / r).
double nb_log_pmf(std::int64_t s, double mean, double r);

/// log P(S <= cap) under the negative binomial above.
double nb_log_cdf(std::int64_t cap, double mean, double r);

/// Gamma density with shape/rate parameterization; -inf outside the support.
double gamma_log_pdf(double x, double shape, double rate);

}  // namespace sbrel
