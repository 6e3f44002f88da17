#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lscm/datacube.hpp"
#include "lscm/provenance.hpp"

namespace lscm {

/**
 * @brief Known regression basis phi = (phi_1, ..., phi_p) on R^input_dim.
 *
 * The intercept phi_1 = 1 is always present: the constructor prepends it to
 * the user-supplied functions.
 */
class BasisSpec {
 public:
  using Function = std::function<double(std::span<const double>)>;

  /// `id` names the basis for serialization; ids understood by basis_from_id
  /// can be rebuilt after reading a result document.
  BasisSpec(std::string id, std::size_t input_dim, std::vector<std::string> names, std::vector<Function> functions);

  [[nodiscard]] const std::string& id() const noexcept { return id_; }
  [[nodiscard]] std::size_t size() const noexcept { return functions_.size() + 1; }
  [[nodiscard]] std::size_t input_dim() const noexcept { return input_dim_; }
  /// Includes "1" for the intercept.
  [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

  /// Writes phi(x) into out (length size()).
  void evaluate(std::span<const double> x, std::span<double> out) const;
  [[nodiscard]] std::vector<double> evaluate(std::span<const double> x) const;

 private:
  std::string id_;
  std::size_t input_dim_;
  std::vector<std::string> names_;
  std::vector<Function> functions_;
};

/// (1, x, x^2, ..., x^degree) on scalar treatments. id "poly:<degree>".
[[nodiscard]] BasisSpec polynomial_basis(std::size_t degree);

/// (1, x, ..., x^degree, w_1, ..., w_q) on (x, w) in R^{1+q}. id "poly_additive:<degree>:<q>".
[[nodiscard]] BasisSpec additive_basis(std::size_t degree, std::size_t covariates);

/// Rebuild a built-in basis from its id; throws ConfigError for unknown ids.
[[nodiscard]] BasisSpec basis_from_id(const std::string& id);

enum class FitStatus { ok, excluded, rank_deficient };

[[nodiscard]] std::string to_string(FitStatus s);
[[nodiscard]] FitStatus fit_status_from_string(const std::string& s);

struct LocationFit {
  std::string location_id;
  /// Basis coefficients, or per-regime means (x = 0, x = 1) for binary estimators.
  std::vector<double> coefficients;
  /// Observations used; one entry per regime for binary estimators.
  std::vector<std::size_t> counts;
  /// Smallest singular value of the column-scaled design (0 if not computed).
  double min_singular_value = 0.0;
  FitStatus status = FitStatus::ok;
  std::string reason;

  bool operator==(const LocationFit&) const = default;
};

/// Threshold on the smallest singular value of the column-scaled design.
inline constexpr double kRankTolerance = 1e-8;

/**
 * @brief Per-location OLS of y on phi(x) via Householder QR of the
 * column-scaled design.
 *
 * `x` holds one row of basis input per observation (row-major, rows of
 * basis.input_dim()). Fewer than p observations yield status excluded with
 * reason "insufficient data"; a smallest scaled singular value below
 * kRankTolerance yields rank_deficient.
 */
[[nodiscard]] LocationFit fit_location_ols(std::span<const double> x, std::span<const double> y,
                                           const BasisSpec& basis, std::string location_id = {});

/// Scalar-treatment overload. Pairs with either side missing are dropped.
[[nodiscard]] LocationFit fit_location_ols(std::span<const std::optional<double>> x,
                                           std::span<const std::optional<double>> y, const BasisSpec& basis,
                                           std::string location_id = {});

/**
 * @brief Estimated average causal effect x -> f_AVE(x).
 *
 * Either a coefficient vector in a known basis (evaluate(x) = phi(x)' beta)
 * or a value table over treatment levels.
 */
class EffectEstimate {
 public:
  enum class Kind { basis_coefficients, value_table };

  std::string estimator;
  Kind kind = Kind::value_table;
  std::string basis_id;
  std::vector<std::string> basis_names;
  /// Mean of the per-location coefficient vectors over status=ok fits.
  std::vector<double> coefficients;
  std::vector<double> levels;
  std::vector<double> values;
  std::vector<LocationFit> fits;
  std::size_t n_total = 0;
  std::size_t n_used = 0;
  std::size_t lag = 0;
  /// Quantile strata (model2 only).
  std::size_t bins_used = 0;
  std::size_t bins_dropped = 0;
  Provenance provenance;

  /// f_AVE(x) for a scalar treatment.
  [[nodiscard]] double evaluate(double x) const;
  [[nodiscard]] double evaluate(std::span<const double> x) const;
  /// f_AVE(1) - f_AVE(0).
  [[nodiscard]] double contrast() const { return evaluate(1.0) - evaluate(0.0); }

  /// Install an evaluator used for points outside the value table.
  void set_evaluator(std::function<double(std::span<const double>)> fn);

  /// Compares every serialized field.
  bool operator==(const EffectEstimate& other) const;

 private:
  std::shared_ptr<const std::function<double(std::span<const double>)>> evaluator_;
};

[[nodiscard]] std::string to_string(EffectEstimate::Kind k);

struct EstimateOptions {
  /// Y^t is paired with treatments X^{t-lag-window+1}, ..., X^{t-lag}.
  std::size_t lag = 0;
  std::size_t window = 1;
  /// Record per-location fits in the result.
  bool keep_fits = true;
  std::size_t threads = 1;
};

/**
 * @brief Per-location basis OLS aggregated over space.
 *
 * beta = mean of per-location coefficients over status=ok fits, summed in
 * sorted location-id order.
 *
 * @throws EstimationError "no usable locations" if every fit is excluded.
 */
[[nodiscard]] EffectEstimate estimate_ace(const DataCube& cube, const BasisSpec& basis,
                                          const EstimateOptions& options = {});

/**
 * @brief Binary-treatment estimator with exclusion of locations that do not
 * observe both regimes.
 *
 * With lag k the response at t is paired with the treatment at t - k; the
 * first k time steps are dropped.
 */
[[nodiscard]] EffectEstimate estimate_ace_binary(const DataCube& cube, std::size_t lag = 0,
                                                 const EstimateOptions& options = {});

/**
 * @brief Observed-confounder extension: per-location regression of Y on a
 * basis over (X, W), averaged over the pooled empirical distribution of W.
 *
 * The value table is filled at `levels` (default {0, 1}).
 */
[[nodiscard]] EffectEstimate estimate_ace_observed_confounder(const DataCube& cube, const BasisSpec& basis,
                                                              std::vector<double> levels = {0.0, 1.0},
                                                              const EstimateOptions& options = {});

/// Pooled regime means of Y across all cells (no confounder adjustment).
[[nodiscard]] EffectEstimate estimate_model1(const DataCube& cube);

/**
 * @brief Adjustment for one observed confounder by stratifying on its
 * pooled quantiles.
 *
 * Within each stratum and regime the mean of Y is taken; f(x) is the
 * unweighted mean over strata containing both regimes. Strata lacking a
 * regime are dropped and counted in bins_dropped.
 */
[[nodiscard]] EffectEstimate estimate_model2(const DataCube& cube, std::size_t n_bins = 100,
                                             std::size_t covariate = 0);

/// Slope of a single pooled OLS of Y on (1, X) across all cells.
[[nodiscard]] double pooled_ols_slope(const DataCube& cube);

/**
 * @brief Edges of n_bins equidistant quantiles (linear interpolation between
 * order statistics), n_bins + 1 values from min to max.
 */
[[nodiscard]] std::vector<double> quantile_edges(std::vector<double> values, std::size_t n_bins);

/// Stratum of w: the smallest j with w <= edges[j + 1] (the first stratum includes the minimum).
[[nodiscard]] std::size_t quantile_bin(std::span<const double> edges, double w);

/// Which estimator a named statistic wraps.
enum class EstimatorKind { lscm_basis, lscm_binary, model1, model2, observed_confounder };

[[nodiscard]] std::string to_string(EstimatorKind k);
[[nodiscard]] EstimatorKind estimator_from_string(const std::string& name);

struct EstimatorConfig {
  EstimatorKind kind = EstimatorKind::lscm_binary;
  std::size_t degree = 1;
  std::size_t lag = 0;
  std::size_t bins = 100;
  /// Covariate column for model2 / observed_confounder; empty means the first.
  std::string covariate;
  std::size_t threads = 1;
};

/// Run the configured estimator.
[[nodiscard]] EffectEstimate run_estimator(const DataCube& cube, const EstimatorConfig& config);

/**
 * @brief Plug-in test statistic for the configured estimator:
 * f(1) - f(0), or the linear coefficient for lscm_basis.
 */
[[nodiscard]] double plug_in_statistic(const DataCube& cube, const EstimatorConfig& config);

}  // namespace lscm
