#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lscm/datacube.hpp"
#include "lscm/provenance.hpp"
#include "lscm/rng.hpp"

namespace lscm {

/**
 * @brief A null-preserving resampling law for the response array.
 *
 * Only the response is permuted; treatments and covariates stay in place.
 */
struct PermutationScheme {
  enum class Kind { time_full, time_block, spatial_block, stratified_by_quantile, fully_random };

  Kind kind = Kind::time_full;
  /// time_block: contiguous block length (last block may be shorter).
  std::size_t block_length = 3;
  /// spatial_block: side of the square block in grid cells. No default.
  std::size_t block_cells = 0;
  /// stratified_by_quantile: number of equidistant quantile strata.
  std::size_t n_bins = 100;
  /// stratified_by_quantile: covariate column; empty means the first.
  std::string covariate;

  /// Canonical text form, e.g. "time_block:3", "spatial_block:4", "stratified_by_quantile:100:w1".
  [[nodiscard]] std::string describe() const;
  /// Inverse of describe(). Throws ConfigError.
  [[nodiscard]] static PermutationScheme parse(const std::string& text);

  bool operator==(const PermutationScheme&) const = default;
};

/**
 * @brief Draws response permutations for one cube and scheme.
 *
 * Validates the scheme against the cube and precomputes the layout (blocks,
 * strata) once. A draw is a vector `source` over flat cells (loc * m + t):
 * the permuted response at cell c is the original response at source[c].
 */
class PermutationSampler {
 public:
  PermutationSampler(const DataCube& cube, PermutationScheme scheme);

  [[nodiscard]] const PermutationScheme& scheme() const noexcept { return scheme_; }
  [[nodiscard]] std::vector<std::size_t> draw(Engine& eng) const;
  [[nodiscard]] std::vector<std::size_t> draw(std::uint64_t seed) const;

 private:
  PermutationScheme scheme_;
  std::size_t n_;
  std::size_t m_;
  /// time_block: [start, end) of each block.
  std::vector<std::pair<std::size_t, std::size_t>> time_blocks_;
  /// spatial_block: full blocks, each listing locations in block-offset order.
  std::vector<std::vector<std::size_t>> full_blocks_;
  std::vector<std::size_t> loose_locations_;
  /// stratified_by_quantile: cells per stratum.
  std::vector<std::vector<std::size_t>> strata_;
};

/// Cube with response[c] = cube.response()[source[c]] (missingness moves with the value).
[[nodiscard]] DataCube permute_response(const DataCube& cube, std::span<const std::size_t> source);

/// One draw of the scheme, determined by draw_seed.
[[nodiscard]] DataCube apply_permutation(const DataCube& cube, const PermutationScheme& scheme,
                                         std::uint64_t draw_seed);

/// Real-valued test statistic on a cube.
struct NamedStatistic {
  std::string name;
  std::function<double(const DataCube&)> fn;
};

struct TestResult {
  std::string statistic_name;
  double statistic_observed = 0.0;
  std::vector<double> statistics_resampled;
  std::size_t B = 0;
  double p_one_sided = 1.0;
  double p_two_sided = 1.0;
  PermutationScheme scheme;
  std::uint64_t seed = 0;
  std::size_t ties_count = 0;
  /// "sampled" or "exhaustive".
  std::string mode = "sampled";
  Provenance provenance;

  bool operator==(const TestResult&) const = default;
};

struct TestOptions {
  std::size_t B = 999;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  /// Evaluate every permutation of the time index instead of B random draws
  /// (time_full only). p-values become #{T(sigma_k) >= T} / m!.
  bool exhaustive = false;
  std::size_t enumeration_cap = 5040;
};

/// (1 + #{b : resampled[b] >= observed}) / (1 + B).
[[nodiscard]] double resampling_p_value(double observed, std::span<const double> resampled);

/// min(1, 2 min(p_T, p_{-T})).
[[nodiscard]] double two_sided_p_value(double p_statistic, double p_negated);

/**
 * @brief Permutation test of the no-effect null.
 *
 * All B draw seeds are derived from options.seed before evaluation begins,
 * so the result does not depend on options.threads. Ties with the observed
 * statistic count toward the ">=" set.
 */
[[nodiscard]] TestResult run_test(const DataCube& cube, const NamedStatistic& statistic,
                                  const PermutationScheme& scheme, const TestOptions& options);

/**
 * @brief Exact p-value over all m! permutations of the time index, identity
 * included: #{k : T(sigma_k) >= T} / m!.
 *
 * @throws ConfigError when m! exceeds `cap`.
 */
[[nodiscard]] double enumerate_exact(const DataCube& cube, const NamedStatistic& statistic, std::size_t cap = 5040);

}  // namespace lscm
