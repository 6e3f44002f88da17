#include "lscm/experiments.hpp"

#include <boost/math/distributions/beta.hpp>
#include <charconv>
#include <cmath>
#include <memory>

#include "lscm/errors.hpp"
#include "lscm/parallel.hpp"
#include "lscm/rng.hpp"

namespace lscm {

void ConsistencyStudySpec::validate() const {
  if (replicates == 0) throw ConfigError("consistency study needs at least one replicate");
  if (!(delta > 0.0)) throw ConfigError("error radius delta must be positive");
  if (n_values.empty() || m_values.empty()) throw ConfigError("consistency study needs n and m values");
  for (std::size_t n : n_values) (void)square_grid(n);
  for (std::size_t m : m_values) {
    if (m < 3) throw ConfigError("consistency study needs m >= 3");
  }
}

std::vector<ConsistencyCell> run_consistency_study(const ConsistencyStudySpec& spec) {
  spec.validate();
  std::vector<ConsistencyCell> cells;
  const BasisSpec basis = polynomial_basis(1);

  std::size_t cell_index = 0;
  for (std::size_t n : spec.n_values) {
    LscmSpec base;
    base.grid = square_grid(n);
    base.recipe = Recipe::heterogeneous_linear;
    const auto locations = base.grid.locations();
    const GaussianFieldSampler sampler(base.covariance, locations);

    for (std::size_t m : spec.m_values) {
      const std::uint64_t cell_seed = derive_seed(spec.seed, "cell", cell_index++);
      std::vector<double> errors(spec.replicates);
      try {
        parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
          LscmSpec s = base;
          s.m = m;
          s.seed = derive_seed(cell_seed, "replicate", r);
          const Simulation sim = simulate_lscm(s, sampler);
          EstimateOptions opt;
          opt.keep_fits = false;
          const EffectEstimate est = estimate_ace(sim.cube, basis, opt);
          errors[r] = std::hypot(est.coefficients[0] - spec.beta[0], est.coefficients[1] - spec.beta[1]);
        });
      } catch (const Error& e) {
        throw EstimationError("consistency study cell (n=" + std::to_string(n) + ", m=" + std::to_string(m) +
                              "): " + e.what());
      }

      ConsistencyCell cell;
      cell.n = n;
      cell.m = m;
      cell.replicates = spec.replicates;
      double sum = 0.0;
      for (double e : errors) {
        if (e > spec.delta) ++cell.failures;
        sum += e;
      }
      cell.error_probability = static_cast<double>(cell.failures) / static_cast<double>(spec.replicates);
      cell.mean_error = sum / static_cast<double>(spec.replicates);
      cells.push_back(cell);
    }
  }
  return cells;
}

std::pair<double, double> clopper_pearson(std::size_t successes, std::size_t trials, double confidence) {
  if (trials == 0 || successes > trials) throw ConfigError("invalid binomial counts");
  const double a = (1.0 - confidence) / 2.0;
  const auto k = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  const double lo = successes == 0 ? 0.0 : boost::math::quantile(boost::math::beta_distribution<>(k, n - k + 1), a);
  const double hi =
      successes == trials ? 1.0 : boost::math::quantile(boost::math::beta_distribution<>(k + 1, n - k), 1.0 - a);
  return {lo, hi};
}

LevelStudyResult run_level_study(const LevelStudySpec& spec) {
  const Recipe recipe = spec.null_spec.recipe;
  if (recipe != Recipe::null_binary && recipe != Recipe::null_continuous) {
    throw ConfigError("level study needs a null recipe (f constant in X), got '" + to_string(recipe) + "'");
  }
  if (!(spec.alpha > 0.0) || spec.alpha > 1.0) throw ConfigError("alpha must lie in (0, 1]");
  if (spec.replicates == 0 || spec.B == 0) throw ConfigError("level study needs R >= 1 and B >= 1");
  spec.null_spec.validate();

  EstimatorConfig estimator;
  estimator.kind = is_binary(recipe) ? EstimatorKind::lscm_binary : EstimatorKind::lscm_basis;
  const NamedStatistic statistic{is_binary(recipe) ? "ace_contrast" : "ace_slope",
                                 [estimator](const DataCube& c) { return plug_in_statistic(c, estimator); }};

  const auto locations = spec.null_spec.grid.locations();
  const GaussianFieldSampler sampler(spec.null_spec.covariance, locations);

  LevelStudyResult result;
  result.replicates = spec.replicates;
  result.p_values.resize(spec.replicates);
  result.ranks.resize(spec.replicates);
  std::vector<std::uint8_t> dominated(spec.replicates, 0);

  parallel_for(spec.replicates, spec.threads, [&](std::size_t r) {
    LscmSpec s = spec.null_spec;
    s.seed = derive_seed(spec.seed, "dataset", r);
    const Simulation sim = simulate_lscm(s, sampler);
    TestOptions opt;
    opt.B = spec.B;
    opt.seed = derive_seed(spec.seed, "test", r);
    const TestResult test = run_test(sim.cube, statistic, spec.scheme, opt);
    result.p_values[r] = test.p_one_sided;
    std::size_t below = 0;
    bool strict = true;
    for (double v : test.statistics_resampled) {
      if (v < test.statistic_observed) ++below;
      if (v >= test.statistic_observed) strict = false;
    }
    result.ranks[r] = below + 1;
    dominated[r] = strict ? 1 : 0;
  });

  for (std::size_t r = 0; r < spec.replicates; ++r) {
    if (result.p_values[r] <= spec.alpha) ++result.rejections;
    result.strict_dominance += dominated[r];
  }
  result.rejection_rate = static_cast<double>(result.rejections) / static_cast<double>(spec.replicates);
  std::tie(result.ci_low, result.ci_high) = clopper_pearson(result.rejections, spec.replicates);
  return result;
}

std::vector<InterventionRow> run_intervention_check(const LscmSpec& spec, const std::vector<double>& x_values,
                                                    std::size_t draws, std::uint64_t seed) {
  if (draws < 2) throw ConfigError("intervention check needs at least two draws");
  std::vector<InterventionRow> rows;
  for (std::size_t k = 0; k < x_values.size(); ++k) {
    const auto sample = simulate_intervention(spec, x_values[k], draws, derive_seed(seed, "x", k));
    double mean = 0.0;
    for (double v : sample) mean += v;
    mean /= static_cast<double>(draws);
    double ss = 0.0;
    for (double v : sample) ss += (v - mean) * (v - mean);
    const double sd = std::sqrt(ss / static_cast<double>(draws - 1));

    InterventionRow row;
    row.x = x_values[k];
    row.mc_mean = mean;
    row.mc_se = sd / std::sqrt(static_cast<double>(draws));
    row.analytic = analytic_average_effect(spec, row.x);
    row.flagged = std::abs(row.mc_mean - row.analytic) > 3.0 * row.mc_se;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string format_table(const std::vector<ConsistencyCell>& cells) {
  std::string out = "n\tm\treplicates\tfailures\terror_probability\tmean_error\n";
  for (const auto& c : cells) {
    out += std::to_string(c.n) + '\t' + std::to_string(c.m) + '\t' + std::to_string(c.replicates) + '\t' +
           std::to_string(c.failures) + '\t' + num(c.error_probability) + '\t' + num(c.mean_error) + '\n';
  }
  return out;
}

std::string format_table(const LevelStudyResult& r, double alpha) {
  std::string out = "alpha\treplicates\trejections\trejection_rate\tci_low\tci_high\tstrict_dominance\n";
  out += num(alpha) + '\t' + std::to_string(r.replicates) + '\t' + std::to_string(r.rejections) + '\t' +
         num(r.rejection_rate) + '\t' + num(r.ci_low) + '\t' + num(r.ci_high) + '\t' +
         std::to_string(r.strict_dominance) + '\n';
  return out;
}

std::string format_table(const std::vector<InterventionRow>& rows) {
  std::string out = "x\tmc_mean\tmc_se\tanalytic\tflagged\n";
  for (const auto& r : rows) {
    out += num(r.x) + '\t' + num(r.mc_mean) + '\t' + num(r.mc_se) + '\t' + num(r.analytic) + '\t' +
           (r.flagged ? "1" : "0") + '\n';
  }
  return out;
}

}  // namespace lscm
