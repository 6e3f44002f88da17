#include "lscm/gp_sim.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>
#include <sstream>

#include "lscm/errors.hpp"
#include "lscm/rng.hpp"

namespace lscm {

double CovarianceModel::operator()(double distance) const { return std::exp(-0.5 * distance / scale); }

double CovarianceModel::operator()(const Location& a, const Location& b) const {
  return (*this)(std::hypot(a.s1 - b.s1, a.s2 - b.s2));
}

Eigen::MatrixXd covariance_matrix(const CovarianceModel& cov, std::span<const Location> locations) {
  const auto n = static_cast<Eigen::Index>(locations.size());
  Eigen::MatrixXd sigma(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    sigma(i, i) = cov(0.0);
    for (Eigen::Index j = 0; j < i; ++j) {
      const double c = cov(locations[static_cast<std::size_t>(i)], locations[static_cast<std::size_t>(j)]);
      sigma(i, j) = c;
      sigma(j, i) = c;
    }
  }
  return sigma;
}

GaussianFieldSampler::GaussianFieldSampler(const CovarianceModel& cov, std::span<const Location> locations) {
  if (!(cov.scale > 0.0) || !std::isfinite(cov.scale)) throw ConfigError("covariance scale must be positive");
  if (locations.empty()) throw ConfigError("Gaussian field needs at least one location");
  std::set<std::pair<double, double>> seen;
  for (const auto& l : locations) {
    if (!seen.emplace(l.s1, l.s2).second) throw ConfigError("duplicate sampling location '" + l.id + "'");
  }

  const Eigen::MatrixXd sigma = covariance_matrix(cov, locations);
  const auto n = sigma.rows();
  for (double jitter = 1e-10; jitter <= 1e-6 * 1.0000001; jitter *= 10.0) {
    Eigen::MatrixXd a = sigma;
    a.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      factor_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }

  Eigen::MatrixXd a = sigma;
  a.diagonal().array() += 1e-6;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  const double pivot = n > 0 ? ldlt.vectorD().minCoeff() : 0.0;
  std::ostringstream msg;
  msg << "Cholesky factorization failed with jitter up to 1e-6; smallest pivot " << pivot;
  throw NumericalError(msg.str());
}

Eigen::VectorXd GaussianFieldSampler::draw(std::uint64_t seed) const {
  Engine eng = make_engine(seed);
  NormalSampler normal;
  Eigen::VectorXd z(factor_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = normal(eng);
  return factor_.triangularView<Eigen::Lower>() * z;
}

std::vector<Eigen::VectorXd> sample_gp(const CovarianceModel& cov, std::span<const Location> locations,
                                       std::size_t k, std::uint64_t seed) {
  const GaussianFieldSampler sampler(cov, locations);
  std::vector<Eigen::VectorXd> draws;
  draws.reserve(k);
  for (std::size_t i = 0; i < k; ++i) draws.push_back(sampler.draw(derive_seed(seed, "gp", i)));
  return draws;
}

std::vector<Location> GridSampling::locations() const {
  std::vector<Location> locs;
  locs.reserve(size());
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      char id[32];
      std::snprintf(id, sizeof(id), "s%06zu", i * ny + j + 1);
      locs.push_back({id, origin1 + spacing * static_cast<double>(i), origin2 + spacing * static_cast<double>(j)});
    }
  }
  return locs;
}

GridSampling square_grid(std::size_t n) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side == 0 || side * side != n) throw ConfigError("grid size " + std::to_string(n) + " is not a perfect square");
  GridSampling g;
  g.nx = side;
  g.ny = side;
  return g;
}

std::string to_string(Recipe r) {
  switch (r) {
    case Recipe::heterogeneous_linear: return "heterogeneous_linear";
    case Recipe::null_continuous: return "null_continuous";
    case Recipe::null_binary: return "null_binary";
    case Recipe::effect_binary: return "effect_binary";
  }
  return "unknown";
}

Recipe recipe_from_string(const std::string& name) {
  for (Recipe r : {Recipe::heterogeneous_linear, Recipe::null_continuous, Recipe::null_binary, Recipe::effect_binary}) {
    if (to_string(r) == name) return r;
  }
  throw ConfigError("unknown recipe '" + name + "'");
}

bool is_binary(Recipe r) noexcept { return r == Recipe::null_binary || r == Recipe::effect_binary; }

void LscmSpec::validate() const {
  if (grid.nx == 0 || grid.ny == 0) throw ConfigError("grid dimensions must be positive");
  if (!(grid.spacing > 0.0)) throw ConfigError("grid spacing must be positive");
  if (m == 0) throw ConfigError("number of time steps must be positive");
  if (!(covariance.scale > 0.0)) throw ConfigError("covariance scale must be positive");
}

namespace {

struct Latent {
  double hbar;
  double htilde;
};

Latent latent(double zeta, double psi) { return {zeta, 1.0 + 0.5 * zeta + std::sqrt(3.0) / 2.0 * psi}; }

double treatment(const LscmSpec& spec, const Location& s, std::size_t t, const Latent& h, double xi) {
  if (is_binary(spec.recipe)) return 0.5 * h.hbar + xi > 0.0 ? 1.0 : 0.0;
  const double trend = std::exp(-(s.s1 * s.s1 + s.s2 * s.s2) / 1000.0);
  const double coef = 0.2 + 0.1 * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / 100.0);
  return trend + coef * h.hbar * h.htilde + 0.5 * xi;
}

double response(const LscmSpec& spec, double x, const Latent& h, double eps) {
  const double noise = std::abs(h.htilde) * eps;
  switch (spec.recipe) {
    case Recipe::heterogeneous_linear: return (1.5 + h.hbar * h.htilde) * x + h.hbar * h.hbar + noise;
    case Recipe::null_continuous: return h.hbar * h.hbar + noise;
    case Recipe::null_binary: return h.hbar + h.hbar * h.hbar + noise;
    case Recipe::effect_binary: return spec.binary_effect * x + h.hbar + h.hbar * h.hbar + noise;
  }
  return 0.0;
}

}  // namespace

double structural_response(const LscmSpec& spec, double x, double zeta, double psi, double eps) {
  return response(spec, x, latent(zeta, psi), eps);
}

double analytic_average_effect(const LscmSpec& spec, double x) {
  // E[Hbar^2] = 1, E[Hbar Htilde] = 1/2, E[Hbar] = 0.
  switch (spec.recipe) {
    case Recipe::heterogeneous_linear: return 1.0 + 2.0 * x;
    case Recipe::null_continuous: return 1.0;
    case Recipe::null_binary: return 1.0;
    case Recipe::effect_binary: return 1.0 + spec.binary_effect * x;
  }
  return 0.0;
}

Simulation simulate_lscm(const LscmSpec& spec) {
  spec.validate();
  const auto locations = spec.grid.locations();
  const GaussianFieldSampler sampler(spec.covariance, locations);
  return simulate_lscm(spec, sampler);
}

Simulation simulate_lscm(const LscmSpec& spec, const GaussianFieldSampler& sampler) {
  spec.validate();
  auto locations = spec.grid.locations();
  const std::size_t n = locations.size();
  const std::size_t m = spec.m;
  if (sampler.size() != n) throw ConfigError("sampler does not match the spec's grid");

  HiddenRecord hidden;
  const Eigen::VectorXd zeta = sampler.draw(derive_seed(spec.seed, "zeta"));
  const Eigen::VectorXd psi = sampler.draw(derive_seed(spec.seed, "psi"));
  hidden.zeta.assign(zeta.begin(), zeta.end());
  hidden.psi.assign(psi.begin(), psi.end());
  hidden.hbar.resize(n * m);
  hidden.htilde.resize(n * m);

  Field y(n, m);
  Field x(n, m);
  for (std::size_t t = 0; t < m; ++t) {
    const Eigen::VectorXd xi = sampler.draw(derive_seed(spec.seed, "xi", t + 1));
    const Eigen::VectorXd eps = sampler.draw(derive_seed(spec.seed, "eps", t + 1));
    for (std::size_t s = 0; s < n; ++s) {
      const auto i = static_cast<Eigen::Index>(s);
      const Latent h = latent(zeta[i], psi[i]);
      hidden.hbar[s * m + t] = h.hbar;
      hidden.htilde[s * m + t] = h.htilde;
      const double xv = treatment(spec, locations[s], t + 1, h, xi[i]);
      x.set(s, t, xv);
      y.set(s, t, response(spec, xv, h, eps[i]));
    }
  }

  VariableNames names;
  names.treatments = {"x1"};
  DataCube cube(std::move(locations), m, std::move(y), {std::move(x)}, {}, std::move(names), 1);
  return {std::move(cube), std::move(hidden)};
}

std::vector<double> simulate_intervention(const LscmSpec& spec, double x, std::size_t draws, std::uint64_t seed) {
  spec.validate();
  // Marginal of a single field value: the 1x1 covariance is C(0).
  const std::vector<Location> single{{"s", spec.grid.origin1, spec.grid.origin2}};
  const GaussianFieldSampler sampler(spec.covariance, single);
  const double sd = sampler.factor()(0, 0);

  Engine eng = make_engine(derive_seed(seed, "intervention"));
  NormalSampler normal;
  std::vector<double> out;
  out.reserve(draws);
  for (std::size_t k = 0; k < draws; ++k) {
    const double zeta = sd * normal(eng);
    const double psi = sd * normal(eng);
    const double eps = sd * normal(eng);
    out.push_back(structural_response(spec, x, zeta, psi, eps));
  }
  return out;
}

}  // namespace lscm
