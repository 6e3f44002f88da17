#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lscm/datacube.hpp"

namespace lscm {

/// Isotropic exponential covariance C(u) = exp(-|u|_2 / (2 * scale)).
/// scale = 1 gives u -> exp(-|u|/2).
struct CovarianceModel {
  enum class Kind { exponential };
  Kind kind = Kind::exponential;
  double scale = 1.0;

  [[nodiscard]] double operator()(double distance) const;
  [[nodiscard]] double operator()(const Location& a, const Location& b) const;
};

/// Dense covariance matrix with entries C(s_i - s_j), no jitter.
[[nodiscard]] Eigen::MatrixXd covariance_matrix(const CovarianceModel& cov, std::span<const Location> locations);

/**
 * @brief Cholesky-backed sampler of a mean-zero stationary Gaussian field on a
 * fixed set of locations.
 *
 * The factorization is computed once with diagonal jitter starting at 1e-10
 * and escalating by x10 up to 1e-6. Every draw is generated from its own
 * seed, so draws can be produced in any order.
 */
class GaussianFieldSampler {
 public:
  GaussianFieldSampler(const CovarianceModel& cov, std::span<const Location> locations);

  [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(factor_.rows()); }
  [[nodiscard]] double jitter() const noexcept { return jitter_; }
  [[nodiscard]] const Eigen::MatrixXd& factor() const noexcept { return factor_; }

  /// One field realization determined entirely by `seed`.
  [[nodiscard]] Eigen::VectorXd draw(std::uint64_t seed) const;

 private:
  Eigen::MatrixXd factor_;
  double jitter_ = 0.0;
};

/// k independent draws; draw i uses the substream derive_seed(seed, "gp", i).
[[nodiscard]] std::vector<Eigen::VectorXd> sample_gp(const CovarianceModel& cov, std::span<const Location> locations,
                                                     std::size_t k, std::uint64_t seed);

/**
 * Regular grid. Locations are enumerated with the second coordinate running
 * fastest: s_{ny*i + j} = origin + spacing * (i, j), i < nx, j < ny.
 */
struct GridSampling {
  std::size_t nx = 25;
  std::size_t ny = 25;
  double spacing = 1.0;
  double origin1 = 1.0;
  double origin2 = 1.0;

  [[nodiscard]] std::size_t size() const noexcept { return nx * ny; }
  [[nodiscard]] std::vector<Location> locations() const;
};

/// Square grid with the given number of locations (must be a perfect square).
[[nodiscard]] GridSampling square_grid(std::size_t n);

/// Structural forms the simulator knows.
enum class Recipe {
  /// H = (zeta, 1 + zeta/2 + sqrt(3)/2 psi);
  /// X = exp(-|s|^2/1000) + (0.2 + 0.1 sin(2 pi t/100)) Hbar Htilde + 0.5 xi;
  /// Y = (1.5 + Hbar Htilde) X + Hbar^2 + |Htilde| eps. Average effect 1 + 2x.
  heterogeneous_linear,
  /// Same H and X, Y = Hbar^2 + |Htilde| eps. Average effect constant 1.
  null_continuous,
  /// Binary X = 1{0.5 Hbar + xi > 0}, Y = Hbar + Hbar^2 + |Htilde| eps.
  null_binary,
  /// Binary X as above, Y = effect * X + Hbar + Hbar^2 + |Htilde| eps. Average effect 1 + effect * x.
  effect_binary,
};

[[nodiscard]] std::string to_string(Recipe r);
[[nodiscard]] Recipe recipe_from_string(const std::string& name);
[[nodiscard]] bool is_binary(Recipe r) noexcept;

struct LscmSpec {
  GridSampling grid;
  std::size_t m = 100;
  Recipe recipe = Recipe::heterogeneous_linear;
  /// Only used by Recipe::effect_binary.
  double binary_effect = 1.0;
  CovarianceModel covariance;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Latent quantities behind a simulated cube. Never passed to estimators.
struct HiddenRecord {
  std::vector<double> zeta;
  std::vector<double> psi;
  /// n x m, row-major by location.
  std::vector<double> hbar;
  std::vector<double> htilde;
};

struct Simulation {
  DataCube cube;
  HiddenRecord hidden;
};

/**
 * @brief Simulate an observational dataset.
 *
 * zeta and psi are drawn once (substreams "zeta", "psi"); xi^t and eps^t are
 * fresh per time step (substreams ("xi", t) and ("eps", t)), so extending m
 * leaves earlier time steps unchanged.
 */
[[nodiscard]] Simulation simulate_lscm(const LscmSpec& spec);

/// Same as simulate_lscm but reuses an existing factorization of the spec's grid.
[[nodiscard]] Simulation simulate_lscm(const LscmSpec& spec, const GaussianFieldSampler& sampler);

/// Y = f(x, H, eps) for one location's latent values.
[[nodiscard]] double structural_response(const LscmSpec& spec, double x, double zeta, double psi, double eps);

/// Analytic average causal effect x -> E f(x, H, eps) for the spec's recipe.
[[nodiscard]] double analytic_average_effect(const LscmSpec& spec, double x);

/**
 * @brief Monte Carlo sample of Y under do(X = x).
 *
 * Each draw samples fresh latent values and noise at a single location (the
 * fields are stationary with unit variance, so the marginal law does not
 * depend on the location) and evaluates the structural equation for Y.
 */
[[nodiscard]] std::vector<double> simulate_intervention(const LscmSpec& spec, double x, std::size_t draws,
                                                        std::uint64_t seed);

}  // namespace lscm
