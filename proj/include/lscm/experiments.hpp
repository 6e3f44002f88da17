#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lscm/estimators.hpp"
#include "lscm/gp_sim.hpp"
#include "lscm/resampling.hpp"

namespace lscm {

/// Empirical error probability of the basis estimator on Example-3.3 data over an (n, m) grid.
struct ConsistencyStudySpec {
  /// Perfect squares; each n is simulated on a sqrt(n) x sqrt(n) grid.
  std::vector<std::size_t> n_values{25, 100, 225, 400, 625};
  std::vector<std::size_t> m_values{25, 50, 100, 200, 500};
  std::size_t replicates = 100;
  /// Error radius; infinity means "no threshold".
  double delta = 0.2;
  std::array<double, 2> beta{1.0, 2.0};
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct ConsistencyCell {
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t replicates = 0;
  std::size_t failures = 0;
  double error_probability = 0.0;
  double mean_error = 0.0;
};

/**
 * For each (n, m) simulates `replicates` datasets, fits the (1, x) basis
 * estimator and records the fraction with |beta_hat - beta|_2 > delta.
 * Replicate r of cell c uses seed derive_seed(derive_seed(seed, "cell", c), "replicate", r).
 */
[[nodiscard]] std::vector<ConsistencyCell> run_consistency_study(const ConsistencyStudySpec& spec);

struct LevelStudySpec {
  /// Must use a null recipe.
  LscmSpec null_spec;
  double alpha = 0.05;
  std::size_t B = 199;
  std::size_t replicates = 500;
  PermutationScheme scheme;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
};

struct LevelStudyResult {
  std::size_t replicates = 0;
  std::size_t rejections = 0;
  double rejection_rate = 0.0;
  /// Exact (Clopper-Pearson) 95% interval for the rejection probability.
  double ci_low = 0.0;
  double ci_high = 1.0;
  /// Replicates whose observed statistic strictly exceeds every resample.
  std::size_t strict_dominance = 0;
  std::vector<double> p_values;
  /// 1 + #{resampled < observed}, in 1..B+1.
  std::vector<std::size_t> ranks;
};

/**
 * Simulates R null datasets and runs a permutation test on each with
 * statistic f(1) - f(0) (binary recipes) or the basis slope (continuous).
 */
[[nodiscard]] LevelStudyResult run_level_study(const LevelStudySpec& spec);

/// Exact binomial (Clopper-Pearson) interval at the given confidence.
[[nodiscard]] std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t trials,
                                                        double confidence = 0.95);

struct InterventionRow {
  double x = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double analytic = 0.0;
  /// |mc_mean - analytic| > 3 mc_se.
  bool flagged = false;
};

/// Compares Monte Carlo means of Y under do(X = x) with the analytic average effect.
[[nodiscard]] std::vector<InterventionRow> run_intervention_check(const LscmSpec& spec,
                                                                  const std::vector<double>& x_values,
                                                                  std::size_t draws, std::uint64_t seed);

/// Tab-separated tables with a header row.
[[nodiscard]] std::string format_table(const std::vector<ConsistencyCell>& cells);
[[nodiscard]] std::string format_table(const LevelStudyResult& result, double alpha);
[[nodiscard]] std::string format_table(const std::vector<InterventionRow>& rows);

}  // namespace lscm
