#include <cmath>
#include <limits>

#include "doctest.h"
#include "lscm/errors.hpp"
#include "lscm/experiments.hpp"

using namespace lscm;

namespace {

LevelStudySpec small_level_study() {
  LevelStudySpec spec;
  spec.null_spec.grid = square_grid(9);
  spec.null_spec.m = 12;
  spec.null_spec.recipe = Recipe::null_binary;
  spec.B = 19;
  spec.replicates = 30;
  spec.seed = 11;
  return spec;
}

}  // namespace

TEST_CASE("consistency study on a small design") {
  ConsistencyStudySpec spec;
  spec.n_values = {4, 9};
  spec.m_values = {10, 20};
  spec.replicates = 8;
  spec.seed = 1;
  const auto cells = run_consistency_study(spec);
  REQUIRE(cells.size() == 4);
  CHECK(cells[0].n == 4);
  CHECK(cells[1].m == 20);
  for (const auto& c : cells) {
    CHECK(c.replicates == 8);
    CHECK(c.error_probability == doctest::Approx(static_cast<double>(c.failures) / 8.0));
    CHECK(c.mean_error > 0.0);
  }
  spec.threads = 3;
  const auto again = run_consistency_study(spec);
  for (std::size_t k = 0; k < cells.size(); ++k) {
    CHECK(again[k].failures == cells[k].failures);
    CHECK(again[k].mean_error == cells[k].mean_error);
  }
}

TEST_CASE("an infinite error radius never fails") {
  ConsistencyStudySpec spec;
  spec.n_values = {4};
  spec.m_values = {5};
  spec.replicates = 1;
  spec.delta = std::numeric_limits<double>::infinity();
  const auto cells = run_consistency_study(spec);
  CHECK(cells.at(0).error_probability == 0.0);

  spec.n_values = {5};
  CHECK_THROWS_AS((void)run_consistency_study(spec), ConfigError);
}

TEST_CASE("Clopper-Pearson interval") {
  const auto [lo0, hi0] = clopper_pearson(0, 10);
  CHECK(lo0 == 0.0);
  CHECK(hi0 == doctest::Approx(1.0 - std::pow(0.025, 0.1)).epsilon(1e-10));
  const auto [lo, hi] = clopper_pearson(5, 10);
  CHECK(lo == doctest::Approx(0.187086).epsilon(1e-5));
  CHECK(hi == doctest::Approx(0.812914).epsilon(1e-5));
  const auto [lo1, hi1] = clopper_pearson(10, 10);
  CHECK(hi1 == 1.0);
  CHECK(lo1 == doctest::Approx(std::pow(0.025, 0.1)).epsilon(1e-10));
}

TEST_CASE("level study at alpha = 1 rejects every replicate") {
  LevelStudySpec spec = small_level_study();
  spec.alpha = 1.0;
  const auto r = run_level_study(spec);
  CHECK(r.rejections == r.replicates);
  CHECK(r.rejection_rate == 1.0);
}

TEST_CASE("level study at the smallest attainable alpha counts strict dominance") {
  LevelStudySpec spec = small_level_study();
  spec.alpha = 1.0 / 20.0;
  spec.replicates = 60;
  const auto r = run_level_study(spec);
  CHECK(r.rejections == r.strict_dominance);
  CHECK(r.ci_low <= r.rejection_rate);
  CHECK(r.ci_high >= r.rejection_rate);
}

TEST_CASE("level study is reproducible and thread independent") {
  LevelStudySpec spec = small_level_study();
  const auto a = run_level_study(spec);
  spec.threads = 4;
  const auto b = run_level_study(spec);
  CHECK(a.p_values == b.p_values);
  CHECK(a.ranks == b.ranks);
  CHECK(format_table(a, spec.alpha) == format_table(b, spec.alpha));
}

TEST_CASE("level study rejects recipes with an effect") {
  LevelStudySpec spec = small_level_study();
  spec.null_spec.recipe = Recipe::effect_binary;
  CHECK_THROWS_AS((void)run_level_study(spec), ConfigError);
}

TEST_CASE("ranks of the observed statistic are uniform under the null") {
  LevelStudySpec spec = small_level_study();
  spec.null_spec.m = 20;
  spec.B = 19;
  spec.replicates = 500;
  spec.seed = 2024;
  const auto r = run_level_study(spec);
  std::vector<double> counts(20, 0.0);
  for (std::size_t rank : r.ranks) {
    REQUIRE(rank >= 1);
    REQUIRE(rank <= 20);
    counts[rank - 1] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : counts) chi2 += (c - 25.0) * (c - 25.0) / 25.0;
  // Upper 1% point of chi-square with 19 degrees of freedom.
  CHECK(chi2 < 36.191);
}

TEST_CASE("intervention check against the analytic effect") {
  LscmSpec spec;
  const auto rows = run_intervention_check(spec, {-2.0, 0.0, 1.0}, 20000, 5);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].analytic == -3.0);
  CHECK(rows[1].analytic == 1.0);
  CHECK(rows[2].analytic == 3.0);
  for (const auto& r : rows) {
    CHECK(std::abs(r.mc_mean - r.analytic) < 5.0 * r.mc_se);
    CHECK(r.flagged == (std::abs(r.mc_mean - r.analytic) > 3.0 * r.mc_se));
  }
  const auto again = run_intervention_check(spec, {-2.0, 0.0, 1.0}, 20000, 5);
  CHECK(format_table(again) == format_table(rows));
}

TEST_CASE("table headers") {
  CHECK(format_table(std::vector<ConsistencyCell>{}).rfind("n\tm\treplicates\tfailures\terror_probability\tmean_error\n",
                                                           0) == 0);
  CHECK(format_table(std::vector<InterventionRow>{}) == "x\tmc_mean\tmc_se\tanalytic\tflagged\n");
}
