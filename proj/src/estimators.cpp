#include "lscm/estimators.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <sstream>

#include "lscm/errors.hpp"
#include "lscm/parallel.hpp"

namespace lscm {

// ---------------------------------------------------------------------------
// Bases

BasisSpec::BasisSpec(std::string id, std::size_t input_dim, std::vector<std::string> names,
                     std::vector<Function> functions)
    : id_(std::move(id)), input_dim_(input_dim), functions_(std::move(functions)) {
  if (input_dim_ == 0) throw ConfigError("basis input dimension must be positive");
  if (names.size() != functions_.size()) throw ConfigError("basis needs one name per function");
  names_.reserve(names.size() + 1);
  names_.emplace_back("1");
  for (auto& nm : names) names_.push_back(std::move(nm));
}

void BasisSpec::evaluate(std::span<const double> x, std::span<double> out) const {
  out[0] = 1.0;
  for (std::size_t j = 0; j < functions_.size(); ++j) out[j + 1] = functions_[j](x);
}

std::vector<double> BasisSpec::evaluate(std::span<const double> x) const {
  std::vector<double> out(size());
  evaluate(x, out);
  return out;
}

BasisSpec polynomial_basis(std::size_t degree) {
  std::vector<std::string> names;
  std::vector<BasisSpec::Function> fns;
  for (std::size_t k = 1; k <= degree; ++k) {
    names.push_back(k == 1 ? "x" : "x^" + std::to_string(k));
    fns.emplace_back([k](std::span<const double> x) { return std::pow(x[0], static_cast<double>(k)); });
  }
  return BasisSpec("poly:" + std::to_string(degree), 1, std::move(names), std::move(fns));
}

BasisSpec additive_basis(std::size_t degree, std::size_t covariates) {
  std::vector<std::string> names;
  std::vector<BasisSpec::Function> fns;
  for (std::size_t k = 1; k <= degree; ++k) {
    names.push_back(k == 1 ? "x" : "x^" + std::to_string(k));
    fns.emplace_back([k](std::span<const double> x) { return std::pow(x[0], static_cast<double>(k)); });
  }
  for (std::size_t j = 0; j < covariates; ++j) {
    names.push_back("w" + std::to_string(j + 1));
    fns.emplace_back([j](std::span<const double> x) { return x[1 + j]; });
  }
  return BasisSpec("poly_additive:" + std::to_string(degree) + ":" + std::to_string(covariates), 1 + covariates,
                   std::move(names), std::move(fns));
}

BasisSpec basis_from_id(const std::string& id) {
  std::istringstream in(id);
  std::string kind;
  std::getline(in, kind, ':');
  std::vector<std::size_t> args;
  for (std::string part; std::getline(in, part, ':');) {
    try {
      args.push_back(static_cast<std::size_t>(std::stoul(part)));
    } catch (const std::exception&) {
      throw ConfigError("malformed basis id '" + id + "'");
    }
  }
  if (kind == "poly" && args.size() == 1) return polynomial_basis(args[0]);
  if (kind == "poly_additive" && args.size() == 2) return additive_basis(args[0], args[1]);
  throw ConfigError("unknown basis id '" + id + "'");
}

// ---------------------------------------------------------------------------
// Fit status

std::string to_string(FitStatus s) {
  switch (s) {
    case FitStatus::ok: return "ok";
    case FitStatus::excluded: return "excluded";
    case FitStatus::rank_deficient: return "rank_deficient";
  }
  return "unknown";
}

FitStatus fit_status_from_string(const std::string& s) {
  for (FitStatus f : {FitStatus::ok, FitStatus::excluded, FitStatus::rank_deficient}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown fit status '" + s + "'");
}

// ---------------------------------------------------------------------------
// Per-location OLS

LocationFit fit_location_ols(std::span<const double> x, std::span<const double> y, const BasisSpec& basis,
                             std::string location_id) {
  const std::size_t dim = basis.input_dim();
  const std::size_t p = basis.size();
  if (x.size() != y.size() * dim) throw ConfigError("treatment rows do not match the response length");

  LocationFit fit;
  fit.location_id = std::move(location_id);
  const std::size_t rows = y.size();
  fit.counts = {rows};
  if (rows < p) {
    fit.status = FitStatus::excluded;
    fit.reason = "insufficient data";
    return fit;
  }

  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
  std::vector<double> row(p);
  for (std::size_t r = 0; r < rows; ++r) {
    basis.evaluate(x.subspan(r * dim, dim), row);
    for (std::size_t j = 0; j < p; ++j) design(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = row[j];
  }
  const Eigen::Map<const Eigen::VectorXd> response(y.data(), static_cast<Eigen::Index>(rows));

  const Eigen::VectorXd scale = design.colwise().norm().transpose();
  if ((scale.array() == 0.0).any() || !scale.allFinite()) {
    fit.status = FitStatus::rank_deficient;
    fit.reason = "degenerate design column";
    return fit;
  }
  design = design * scale.cwiseInverse().asDiagonal();

  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(static_cast<Eigen::Index>(p)).triangularView<Eigen::Upper>();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
  fit.min_singular_value = svd.singularValues().minCoeff();
  if (!(fit.min_singular_value >= kRankTolerance)) {
    fit.status = FitStatus::rank_deficient;
    fit.reason = "smallest scaled singular value below tolerance";
    return fit;
  }

  const Eigen::VectorXd qty = (qr.householderQ().transpose() * response).head(static_cast<Eigen::Index>(p));
  const Eigen::VectorXd scaled = r.triangularView<Eigen::Upper>().solve(qty);
  const Eigen::VectorXd coef = scaled.cwiseQuotient(scale);
  if (!coef.allFinite()) {
    fit.status = FitStatus::rank_deficient;
    fit.reason = "non-finite coefficients";
    return fit;
  }
  fit.coefficients.assign(coef.begin(), coef.end());
  return fit;
}

LocationFit fit_location_ols(std::span<const std::optional<double>> x, std::span<const std::optional<double>> y,
                             const BasisSpec& basis, std::string location_id) {
  if (basis.input_dim() != 1) throw ConfigError("scalar overload needs a basis on R");
  if (x.size() != y.size()) throw ConfigError("treatment and response series differ in length");
  std::vector<double> xs;
  std::vector<double> ys;
  for (std::size_t t = 0; t < x.size(); ++t) {
    if (x[t] && y[t]) {
      xs.push_back(*x[t]);
      ys.push_back(*y[t]);
    }
  }
  return fit_location_ols(xs, ys, basis, std::move(location_id));
}

// ---------------------------------------------------------------------------
// EffectEstimate

std::string to_string(EffectEstimate::Kind k) {
  return k == EffectEstimate::Kind::basis_coefficients ? "basis_coefficients" : "value_table";
}

double EffectEstimate::evaluate(double x) const { return evaluate(std::span<const double>(&x, 1)); }

double EffectEstimate::evaluate(std::span<const double> x) const {
  if (kind == Kind::value_table && x.size() == 1) {
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (levels[k] == x[0]) return values[k];
    }
  }
  if (evaluator_) return (*evaluator_)(x);
  if (kind == Kind::basis_coefficients) {
    const BasisSpec basis = basis_from_id(basis_id);
    if (basis.size() != coefficients.size() || basis.input_dim() != x.size()) {
      throw EstimationError("basis '" + basis_id + "' does not match the stored coefficients");
    }
    const auto phi = basis.evaluate(x);
    double acc = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) acc += phi[j] * coefficients[j];
    return acc;
  }
  throw EstimationError("estimate has no value at the requested treatment level");
}

void EffectEstimate::set_evaluator(std::function<double(std::span<const double>)> fn) {
  evaluator_ = std::make_shared<const std::function<double(std::span<const double>)>>(std::move(fn));
}

bool EffectEstimate::operator==(const EffectEstimate& o) const {
  return estimator == o.estimator && kind == o.kind && basis_id == o.basis_id && basis_names == o.basis_names &&
         coefficients == o.coefficients && levels == o.levels && values == o.values && fits == o.fits &&
         n_total == o.n_total && n_used == o.n_used && lag == o.lag && bins_used == o.bins_used &&
         bins_dropped == o.bins_dropped && provenance == o.provenance;
}

// ---------------------------------------------------------------------------
// Spatial aggregation

namespace {

/// Regressor rows for one location under a lag/window pairing.
void collect_pairs(const DataCube& cube, std::size_t loc, const EstimateOptions& opt, std::vector<double>& x,
                   std::vector<double>& y) {
  x.clear();
  y.clear();
  const std::size_t shift = opt.lag + opt.window - 1;
  const std::size_t d = cube.d();
  for (std::size_t t = shift; t < cube.m(); ++t) {
    if (!cube.response().observed(loc, t)) continue;
    bool complete = true;
    for (std::size_t w = 0; w < opt.window && complete; ++w) {
      const std::size_t tt = t - shift + w;
      for (std::size_t j = 0; j < d; ++j) complete = complete && cube.treatment(j).observed(loc, tt);
    }
    if (!complete) continue;
    for (std::size_t w = 0; w < opt.window; ++w) {
      const std::size_t tt = t - shift + w;
      for (std::size_t j = 0; j < d; ++j) x.push_back(cube.treatment(j).value(loc, tt));
    }
    y.push_back(cube.response().value(loc, t));
  }
}

void require_binary(const DataCube& cube) {
  if (cube.d() != 1) throw EstimationError("binary estimators need exactly one treatment variable");
  const Field& x = cube.treatment();
  for (std::size_t c = 0; c < x.values().size(); ++c) {
    if (x.mask()[c] && x.values()[c] != 0.0 && x.values()[c] != 1.0) {
      throw EstimationError("treatment is not binary: found value " + std::to_string(x.values()[c]));
    }
  }
}

}  // namespace

EffectEstimate estimate_ace(const DataCube& cube, const BasisSpec& basis, const EstimateOptions& options) {
  if (options.window == 0) throw ConfigError("lag window must be at least 1");
  if (basis.input_dim() != cube.d() * options.window) {
    throw ConfigError("basis input dimension " + std::to_string(basis.input_dim()) + " does not match " +
                      std::to_string(cube.d() * options.window) + " lagged treatment values");
  }
  if (options.lag + options.window - 1 >= cube.m()) throw ConfigError("lag must be smaller than m");

  const std::size_t n = cube.n();
  std::vector<LocationFit> fits(n);
  parallel_for(n, options.threads, [&](std::size_t k) {
    const std::size_t loc = cube.sorted_order()[k];
    std::vector<double> x;
    std::vector<double> y;
    collect_pairs(cube, loc, options, x, y);
    fits[k] = fit_location_ols(x, y, basis, cube.location(loc).id);
  });

  const std::size_t p = basis.size();
  std::vector<double> beta(p, 0.0);
  std::size_t used = 0;
  for (const auto& f : fits) {
    if (f.status != FitStatus::ok) continue;
    for (std::size_t j = 0; j < p; ++j) beta[j] += f.coefficients[j];
    ++used;
  }
  if (used == 0) throw EstimationError("no usable locations");
  for (auto& b : beta) b /= static_cast<double>(used);

  EffectEstimate est;
  est.estimator = "lscm-basis";
  est.kind = EffectEstimate::Kind::basis_coefficients;
  est.basis_id = basis.id();
  est.basis_names = basis.names();
  est.coefficients = beta;
  est.n_total = n;
  est.n_used = used;
  est.lag = options.lag;
  if (options.keep_fits) est.fits = std::move(fits);
  est.set_evaluator([basis, beta](std::span<const double> x) {
    const auto phi = basis.evaluate(x);
    double acc = 0.0;
    for (std::size_t j = 0; j < phi.size(); ++j) acc += phi[j] * beta[j];
    return acc;
  });
  return est;
}

EffectEstimate estimate_ace_binary(const DataCube& cube, std::size_t lag, const EstimateOptions& options) {
  require_binary(cube);
  if (lag >= cube.m()) throw ConfigError("lag must be smaller than m");

  const Field& x = cube.treatment();
  const Field& y = cube.response();
  const std::size_t n = cube.n();
  std::vector<LocationFit> fits;
  if (options.keep_fits) fits.reserve(n);

  double total[2] = {0.0, 0.0};
  std::size_t used = 0;
  for (std::size_t loc : cube.sorted_order()) {
    double sum[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};
    for (std::size_t t = lag; t < cube.m(); ++t) {
      if (!y.observed(loc, t) || !x.observed(loc, t - lag)) continue;
      const auto regime = static_cast<std::size_t>(x.value(loc, t - lag));
      sum[regime] += y.value(loc, t);
      ++count[regime];
    }
    const bool both = count[0] > 0 && count[1] > 0;
    if (both) {
      total[0] += sum[0] / static_cast<double>(count[0]);
      total[1] += sum[1] / static_cast<double>(count[1]);
      ++used;
    }
    if (options.keep_fits) {
      LocationFit fit;
      fit.location_id = cube.location(loc).id;
      fit.counts = {count[0], count[1]};
      if (both) {
        fit.coefficients = {sum[0] / static_cast<double>(count[0]), sum[1] / static_cast<double>(count[1])};
      } else {
        fit.status = FitStatus::excluded;
        fit.reason = "does not observe both regimes";
      }
      fits.push_back(std::move(fit));
    }
  }
  if (used == 0) throw EstimationError("no location observes both regimes");

  EffectEstimate est;
  est.estimator = "lscm-binary";
  est.kind = EffectEstimate::Kind::value_table;
  est.levels = {0.0, 1.0};
  est.values = {total[0] / static_cast<double>(used), total[1] / static_cast<double>(used)};
  est.n_total = n;
  est.n_used = used;
  est.lag = lag;
  est.fits = std::move(fits);
  return est;
}

EffectEstimate estimate_ace_observed_confounder(const DataCube& cube, const BasisSpec& basis,
                                                std::vector<double> levels, const EstimateOptions& options) {
  if (cube.p() == 0) throw ConfigError("observed-confounder estimator needs at least one covariate column");
  if (cube.d() != 1) throw ConfigError("observed-confounder estimator supports one treatment variable");
  const std::size_t q = cube.p();
  if (basis.input_dim() != 1 + q) {
    throw ConfigError("basis over (x, w) must have input dimension " + std::to_string(1 + q));
  }

  auto covariates_observed = [&](std::size_t loc, std::size_t t) {
    for (const auto& w : cube.covariates()) {
      if (!w.observed(loc, t)) return false;
    }
    return true;
  };

  // Pooled empirical distribution of W over all observed cells, in sorted location order.
  std::vector<double> pooled_w;
  for (std::size_t loc : cube.sorted_order()) {
    for (std::size_t t = 0; t < cube.m(); ++t) {
      if (!covariates_observed(loc, t)) continue;
      for (const auto& w : cube.covariates()) pooled_w.push_back(w.value(loc, t));
    }
  }
  if (pooled_w.empty()) throw EstimationError("no observed covariate values");

  const std::size_t n = cube.n();
  std::vector<LocationFit> fits(n);
  parallel_for(n, options.threads, [&](std::size_t k) {
    const std::size_t loc = cube.sorted_order()[k];
    std::vector<double> xw;
    std::vector<double> y;
    for (std::size_t t = 0; t < cube.m(); ++t) {
      if (!cube.response().observed(loc, t) || !cube.treatment().observed(loc, t) || !covariates_observed(loc, t)) {
        continue;
      }
      xw.push_back(cube.treatment().value(loc, t));
      for (const auto& w : cube.covariates()) xw.push_back(w.value(loc, t));
      y.push_back(cube.response().value(loc, t));
    }
    fits[k] = fit_location_ols(xw, y, basis, cube.location(loc).id);
  });

  const std::size_t p = basis.size();
  std::vector<double> beta(p, 0.0);
  std::size_t used = 0;
  for (const auto& f : fits) {
    if (f.status != FitStatus::ok) continue;
    for (std::size_t j = 0; j < p; ++j) beta[j] += f.coefficients[j];
    ++used;
  }
  if (used == 0) throw EstimationError("no usable locations");
  for (auto& b : beta) b /= static_cast<double>(used);

  // (1/n) sum_i E_W[phi(x, W)' gamma_i] = E_W[phi(x, W)]' beta.
  auto marginal = [basis, beta, pooled = std::make_shared<const std::vector<double>>(std::move(pooled_w)),
                   q](std::span<const double> x) {
    const std::size_t draws = pooled->size() / q;
    std::vector<double> point(1 + q);
    point[0] = x[0];
    std::vector<double> phi(basis.size());
    std::vector<double> mean_phi(basis.size(), 0.0);
    for (std::size_t k = 0; k < draws; ++k) {
      std::copy_n(pooled->begin() + static_cast<std::ptrdiff_t>(k * q), q, point.begin() + 1);
      basis.evaluate(point, phi);
      for (std::size_t j = 0; j < phi.size(); ++j) mean_phi[j] += phi[j];
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) acc += mean_phi[j] / static_cast<double>(draws) * beta[j];
    return acc;
  };

  EffectEstimate est;
  est.estimator = "observed-confounder";
  est.kind = EffectEstimate::Kind::value_table;
  est.basis_id = basis.id();
  est.basis_names = basis.names();
  est.coefficients = beta;
  est.levels = std::move(levels);
  for (double level : est.levels) est.values.push_back(marginal(std::span<const double>(&level, 1)));
  est.n_total = n;
  est.n_used = used;
  if (options.keep_fits) est.fits = std::move(fits);
  est.set_evaluator(marginal);
  return est;
}

EffectEstimate estimate_model1(const DataCube& cube) {
  require_binary(cube);
  const Field& x = cube.treatment();
  const Field& y = cube.response();
  double sum[2] = {0.0, 0.0};
  std::size_t count[2] = {0, 0};
  for (std::size_t loc : cube.sorted_order()) {
    for (std::size_t t = 0; t < cube.m(); ++t) {
      if (!x.observed(loc, t) || !y.observed(loc, t)) continue;
      const auto regime = static_cast<std::size_t>(x.value(loc, t));
      sum[regime] += y.value(loc, t);
      ++count[regime];
    }
  }
  if (count[0] == 0 || count[1] == 0) {
    throw EstimationError("regime x=" + std::string(count[0] == 0 ? "0" : "1") + " has no observations");
  }
  EffectEstimate est;
  est.estimator = "model1";
  est.kind = EffectEstimate::Kind::value_table;
  est.levels = {0.0, 1.0};
  est.values = {sum[0] / static_cast<double>(count[0]), sum[1] / static_cast<double>(count[1])};
  est.n_total = cube.n();
  est.n_used = cube.n();
  return est;
}

std::vector<double> quantile_edges(std::vector<double> values, std::size_t n_bins) {
  if (n_bins == 0) throw ConfigError("number of quantile bins must be positive");
  if (values.empty()) throw EstimationError("cannot compute quantiles of an empty sample");
  std::sort(values.begin(), values.end());
  const double last = static_cast<double>(values.size() - 1);
  std::vector<double> edges(n_bins + 1);
  for (std::size_t j = 0; j <= n_bins; ++j) {
    const double pos = last * static_cast<double>(j) / static_cast<double>(n_bins);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    edges[j] = frac == 0.0 ? values[lo] : values[lo] + frac * (values[hi] - values[lo]);
  }
  return edges;
}

std::size_t quantile_bin(std::span<const double> edges, double w) {
  const std::size_t bins = edges.size() - 1;
  const auto it = std::lower_bound(edges.begin() + 1, edges.end(), w);
  return std::min(static_cast<std::size_t>(it - (edges.begin() + 1)), bins - 1);
}

EffectEstimate estimate_model2(const DataCube& cube, std::size_t n_bins, std::size_t covariate) {
  require_binary(cube);
  if (n_bins == 0) throw ConfigError("number of quantile bins must be positive");
  if (covariate >= cube.p()) throw ConfigError("model2 needs an observed confounder column");
  const Field& x = cube.treatment();
  const Field& y = cube.response();
  const Field& w = cube.covariate(covariate);

  std::vector<std::size_t> cells;
  std::vector<double> wv;
  for (std::size_t loc : cube.sorted_order()) {
    for (std::size_t t = 0; t < cube.m(); ++t) {
      if (!x.observed(loc, t) || !y.observed(loc, t) || !w.observed(loc, t)) continue;
      cells.push_back(x.cell(loc, t));
      wv.push_back(w.value(loc, t));
    }
  }
  if (cells.empty()) throw EstimationError("no complete observations for model2");
  const auto edges = quantile_edges(wv, n_bins);

  std::vector<double> sum(2 * n_bins, 0.0);
  std::vector<std::size_t> count(2 * n_bins, 0);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const std::size_t bin = quantile_bin(edges, wv[k]);
    const auto regime = static_cast<std::size_t>(x.values()[cells[k]]);
    sum[2 * bin + regime] += y.values()[cells[k]];
    ++count[2 * bin + regime];
  }

  double total[2] = {0.0, 0.0};
  std::size_t used = 0;
  std::size_t dropped = 0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[2 * b] == 0 && count[2 * b + 1] == 0) continue;
    if (count[2 * b] == 0 || count[2 * b + 1] == 0) {
      ++dropped;
      continue;
    }
    total[0] += sum[2 * b] / static_cast<double>(count[2 * b]);
    total[1] += sum[2 * b + 1] / static_cast<double>(count[2 * b + 1]);
    ++used;
  }
  if (used == 0) throw EstimationError("no quantile bin contains both regimes");

  EffectEstimate est;
  est.estimator = "model2";
  est.kind = EffectEstimate::Kind::value_table;
  est.levels = {0.0, 1.0};
  est.values = {total[0] / static_cast<double>(used), total[1] / static_cast<double>(used)};
  est.n_total = cube.n();
  est.n_used = cube.n();
  est.bins_used = used;
  est.bins_dropped = dropped;
  return est;
}

double pooled_ols_slope(const DataCube& cube) {
  if (cube.d() != 1) throw ConfigError("pooled slope needs one treatment variable");
  const Field& x = cube.treatment();
  const Field& y = cube.response();
  double sx = 0.0;
  double sy = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < x.values().size(); ++c) {
    if (!x.mask()[c] || !y.mask()[c]) continue;
    sx += x.values()[c];
    sy += y.values()[c];
    ++count;
  }
  if (count < 2) throw EstimationError("pooled regression needs at least two observations");
  const double mx = sx / static_cast<double>(count);
  const double my = sy / static_cast<double>(count);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t c = 0; c < x.values().size(); ++c) {
    if (!x.mask()[c] || !y.mask()[c]) continue;
    const double dx = x.values()[c] - mx;
    sxx += dx * dx;
    sxy += dx * (y.values()[c] - my);
  }
  if (sxx == 0.0) throw EstimationError("pooled regression has constant treatment");
  return sxy / sxx;
}

// ---------------------------------------------------------------------------
// Named estimators

std::string to_string(EstimatorKind k) {
  switch (k) {
    case EstimatorKind::lscm_basis: return "lscm-basis";
    case EstimatorKind::lscm_binary: return "lscm-binary";
    case EstimatorKind::model1: return "model1";
    case EstimatorKind::model2: return "model2";
    case EstimatorKind::observed_confounder: return "observed-confounder";
  }
  return "unknown";
}

EstimatorKind estimator_from_string(const std::string& name) {
  for (EstimatorKind k : {EstimatorKind::lscm_basis, EstimatorKind::lscm_binary, EstimatorKind::model1,
                          EstimatorKind::model2, EstimatorKind::observed_confounder}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown estimator '" + name + "'");
}

namespace {

std::size_t resolve_covariate(const DataCube& cube, const EstimatorConfig& config) {
  if (cube.p() == 0) throw ConfigError(to_string(config.kind) + " needs a covariate column");
  return config.covariate.empty() ? 0 : cube.covariate_index(config.covariate);
}

EffectEstimate run(const DataCube& cube, const EstimatorConfig& config, bool keep_fits) {
  EstimateOptions opt;
  opt.keep_fits = keep_fits;
  opt.threads = config.threads;
  switch (config.kind) {
    case EstimatorKind::lscm_basis:
      opt.lag = config.lag;
      return estimate_ace(cube, polynomial_basis(config.degree), opt);
    case EstimatorKind::lscm_binary:
      return estimate_ace_binary(cube, config.lag, opt);
    case EstimatorKind::model1:
      return estimate_model1(cube);
    case EstimatorKind::model2:
      return estimate_model2(cube, config.bins, resolve_covariate(cube, config));
    case EstimatorKind::observed_confounder: {
      const std::size_t w = resolve_covariate(cube, config);
      if (cube.p() != 1 && !config.covariate.empty()) {
        // Restrict to the designated covariate.
        DataCube reduced(cube.locations(), cube.m(), cube.response(), cube.treatments(), {cube.covariate(w)},
                         VariableNames{cube.names().response, cube.names().treatments, {cube.names().covariates[w]}},
                         cube.time_origin());
        return estimate_ace_observed_confounder(reduced, additive_basis(config.degree, 1), {0.0, 1.0}, opt);
      }
      return estimate_ace_observed_confounder(cube, additive_basis(config.degree, cube.p()), {0.0, 1.0}, opt);
    }
  }
  throw ConfigError("unknown estimator");
}

}  // namespace

EffectEstimate run_estimator(const DataCube& cube, const EstimatorConfig& config) { return run(cube, config, true); }

double plug_in_statistic(const DataCube& cube, const EstimatorConfig& config) {
  EstimatorConfig single = config;
  single.threads = 1;
  const EffectEstimate est = run(cube, single, false);
  if (config.kind == EstimatorKind::lscm_basis) {
    if (est.coefficients.size() < 2) throw ConfigError("slope statistic needs a basis of degree >= 1");
    return est.coefficients[1];
  }
  return est.contrast();
}

}  // namespace lscm
