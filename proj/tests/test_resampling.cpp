#include <algorithm>
#include <numeric>
#include <set>

#include "doctest.h"
#include "lscm/errors.hpp"
#include "lscm/estimators.hpp"
#include "lscm/resampling.hpp"

using namespace lscm;

namespace {

/// nx x ny unit grid, response = 1000 * loc + t, alternating binary treatment, W = t.
DataCube grid_cube(std::size_t nx, std::size_t ny, std::size_t m) {
  std::vector<Location> locs;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      locs.push_back({"p" + std::to_string(1000 + i * ny + j), static_cast<double>(i), static_cast<double>(j)});
    }
  }
  const std::size_t n = locs.size();
  Field y(n, m), x(n, m), w(n, m);
  for (std::size_t l = 0; l < n; ++l) {
    for (std::size_t t = 0; t < m; ++t) {
      y.set(l, t, static_cast<double>(1000 * l + t));
      x.set(l, t, static_cast<double>((l * 7 + t * 3) % 2));
      w.set(l, t, static_cast<double>(t % 4));
    }
  }
  return DataCube(std::move(locs), m, std::move(y), {std::move(x)}, {std::move(w)});
}

bool is_permutation_of_cells(const std::vector<std::size_t>& source) {
  std::vector<std::size_t> sorted = source;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t c = 0; c < sorted.size(); ++c) {
    if (sorted[c] != c) return false;
  }
  return true;
}

const NamedStatistic kWeightedSum{"weighted_sum", [](const DataCube& c) {
                                     double s = 0;
                                     for (std::size_t t = 0; t < c.m(); ++t) {
                                       s += static_cast<double>(t + 1) * c.response().value(0, t);
                                     }
                                     return s;
                                   }};

}  // namespace

TEST_CASE("identity source leaves the cube unchanged") {
  const DataCube cube = grid_cube(2, 3, 5);
  std::vector<std::size_t> source(cube.n() * cube.m());
  std::iota(source.begin(), source.end(), std::size_t{0});
  CHECK(permute_response(cube, source) == cube);
}

TEST_CASE("every scheme draws a permutation of the cells") {
  const DataCube cube = grid_cube(5, 4, 9);
  for (const char* text : {"time_full", "time_block:3", "spatial_block:2", "stratified_by_quantile:4", "fully_random"}) {
    const PermutationSampler sampler(cube, PermutationScheme::parse(text));
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto source = sampler.draw(seed);
      CHECK_MESSAGE(is_permutation_of_cells(source), text);
      // The response multiset is preserved.
      const DataCube p = permute_response(cube, source);
      const auto pa = p.response().values();
      const auto pb = cube.response().values();
      std::vector<double> a(pa.begin(), pa.end()), b(pb.begin(), pb.end());
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      CHECK(a == b);
      CHECK(p.treatment() == cube.treatment());
      CHECK(p.covariate() == cube.covariate());
    }
  }
}

TEST_CASE("missing responses move with their values") {
  DataCube cube = grid_cube(1, 2, 4);
  Field y = cube.response();
  y.set_missing(0, 1);
  cube = cube.with_response(y);
  const std::vector<std::size_t> source{1, 0, 2, 3, 4, 5, 6, 7};
  const DataCube p = permute_response(cube, source);
  CHECK_FALSE(p.response().observed(0, 0));
  CHECK(p.response().observed(0, 1));
  CHECK(p.response().value(0, 1) == 0.0);
  CHECK(p.response().observed_count() == cube.response().observed_count());
}

TEST_CASE("time_full applies one permutation to every location") {
  const DataCube cube = grid_cube(3, 3, 6);
  const PermutationSampler sampler(cube, PermutationScheme{});
  const auto source = sampler.draw(std::uint64_t{42});
  for (std::size_t l = 0; l < cube.n(); ++l) {
    for (std::size_t t = 0; t < 6; ++t) {
      CHECK(source[l * 6 + t] == l * 6 + source[t]);
    }
  }
}

TEST_CASE("time_block keeps blocks contiguous and in order") {
  const DataCube cube = grid_cube(2, 2, 7);
  const PermutationSampler sampler(cube, PermutationScheme::parse("time_block:3"));
  std::set<std::vector<std::size_t>> orders;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto source = sampler.draw(seed);
    std::vector<std::size_t> sigma(source.begin(), source.begin() + 7);
    // Blocks {0,1,2}, {3,4,5}, {6}: every run starting at a block head continues in order.
    for (std::size_t k = 0; k < 7;) {
      const std::size_t head = sigma[k];
      REQUIRE(head % 3 == 0);
      const std::size_t len = head == 6 ? 1 : 3;
      for (std::size_t o = 0; o < len; ++o) CHECK(sigma[k + o] == head + o);
      k += len;
    }
    for (std::size_t l = 1; l < 4; ++l) {
      for (std::size_t t = 0; t < 7; ++t) CHECK(source[l * 7 + t] == l * 7 + sigma[t]);
    }
    orders.insert(sigma);
  }
  CHECK(orders.size() == 6);
  CHECK_THROWS_AS(PermutationSampler(cube, PermutationScheme::parse("time_block:8")), ConfigError);
}

TEST_CASE("spatial_block moves full blocks as units within each time slice") {
  // 5 x 4 grid with 2 x 2 blocks: rows 0-3 form four full blocks, row 4 is loose.
  const DataCube cube = grid_cube(5, 4, 3);
  const std::size_t m = 3;
  const PermutationSampler sampler(cube, PermutationScheme::parse("spatial_block:2"));
  auto block_of = [](std::size_t loc) { return std::pair{loc / 4 / 2, loc % 4 / 2}; };
  auto offset_of = [](std::size_t loc) { return std::pair{loc / 4 % 2, loc % 4 % 2}; };
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto source = sampler.draw(seed);
    for (std::size_t t = 0; t < m; ++t) {
      for (std::size_t loc = 0; loc < 20; ++loc) {
        const std::size_t from = source[loc * m + t];
        CHECK(from % m == t);
        const std::size_t from_loc = from / m;
        if (loc >= 16) {
          CHECK(from_loc >= 16);
          continue;
        }
        CHECK(from_loc < 16);
        CHECK(offset_of(from_loc) == offset_of(loc));
        // All cells of the destination block come from one source block.
        const std::size_t anchor = (loc / 8) * 8 + (loc % 4 / 2) * 2;
        CHECK(block_of(source[anchor * m + t] / m) == block_of(from_loc));
        moved = moved || from_loc != loc;
      }
    }
  }
  CHECK(moved);
}

TEST_CASE("spatial_block needs a regular grid and a block size") {
  Field f(3, 2);
  const DataCube scattered({{"a", 0.0, 0.0}, {"b", 1.0, 0.3}, {"c", 0.7, 2.0}}, 2, f, {f});
  CHECK_THROWS_AS(PermutationSampler(scattered, PermutationScheme::parse("spatial_block:2")), UnsupportedLayoutError);
  CHECK_THROWS_AS((void)PermutationScheme::parse("spatial_block"), ConfigError);
}

TEST_CASE("stratified_by_quantile permutes within W strata only") {
  DataCube cube = grid_cube(3, 3, 8);
  Field w = cube.covariate();
  w.set_missing(4, 2);
  cube = DataCube(cube.locations(), cube.m(), cube.response(), cube.treatments(), {w});
  const PermutationSampler sampler(cube, PermutationScheme::parse("stratified_by_quantile:4"));
  bool moved = false;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto source = sampler.draw(seed);
    for (std::size_t c = 0; c < source.size(); ++c) {
      if (!w.mask()[c]) {
        CHECK(source[c] == c);
        continue;
      }
      CHECK(w.value(source[c] / 8, source[c] % 8) == w.value(c / 8, c % 8));
      moved = moved || source[c] != c;
    }
  }
  CHECK(moved);

  Field one(1, 3);
  one.set(0, 0, 1.0);
  one.set(0, 1, 2.0);
  one.set(0, 2, 3.0);
  const DataCube singles({{"a", 0, 0}}, 3, one, {one}, {one});
  // Three distinct W values in three strata: nothing can move.
  const auto id = PermutationSampler(singles, PermutationScheme::parse("stratified_by_quantile:3")).draw(std::uint64_t{1});
  CHECK(id == std::vector<std::size_t>{0, 1, 2});

  const DataCube no_w({{"a", 0, 0}}, 3, one, {one});
  CHECK_THROWS_AS(PermutationSampler(no_w, PermutationScheme::parse("stratified_by_quantile:3")), ConfigError);
}

TEST_CASE("scheme descriptors round trip") {
  for (const char* text : {"time_full", "time_block:5", "spatial_block:4", "stratified_by_quantile:100",
                           "stratified_by_quantile:10:road", "fully_random"}) {
    CHECK(PermutationScheme::parse(text).describe() == text);
  }
  CHECK(PermutationScheme::parse("time_block").block_length == 3);
  CHECK_THROWS_AS((void)PermutationScheme::parse("bootstrap"), ConfigError);
  CHECK_THROWS_AS((void)PermutationScheme::parse("time_block:x"), ConfigError);
}

TEST_CASE("resampling p-value examples") {
  std::vector<double> below(999, 1.0);
  CHECK(resampling_p_value(5.0, below) == doctest::Approx(0.001));
  below[17] = 5.0;
  CHECK(resampling_p_value(5.0, below) == doctest::Approx(0.002));
  CHECK(two_sided_p_value(0.01, 0.995) == doctest::Approx(0.02));
  CHECK(two_sided_p_value(0.7, 0.6) == 1.0);
}

TEST_CASE("ties count against rejection") {
  const DataCube cube = grid_cube(2, 2, 6);
  const NamedStatistic constant{"constant", [](const DataCube&) { return 3.0; }};
  TestOptions opt;
  opt.B = 99;
  opt.seed = 1;
  const TestResult r = run_test(cube, constant, PermutationScheme{}, opt);
  CHECK(r.p_one_sided == 1.0);
  CHECK(r.p_two_sided == 1.0);
  CHECK(r.ties_count == 99);
}

TEST_CASE("results do not depend on the thread count") {
  DataCube cube = grid_cube(4, 4, 10);
  Field y = cube.response();
  for (std::size_t c = 0; c < 160; ++c) y.set(c / 10, c % 10, static_cast<double>((c * 37 + 11) % 23));
  cube = cube.with_response(y);
  const NamedStatistic stat{"contrast", [](const DataCube& c) {
                              return plug_in_statistic(c, EstimatorConfig{});
                            }};
  for (const char* text : {"time_full", "time_block:3", "spatial_block:2", "stratified_by_quantile:4", "fully_random"}) {
    TestOptions opt;
    opt.B = 64;
    opt.seed = 77;
    opt.threads = 1;
    const TestResult one = run_test(cube, stat, PermutationScheme::parse(text), opt);
    opt.threads = 4;
    const TestResult four = run_test(cube, stat, PermutationScheme::parse(text), opt);
    CHECK(one == four);
    opt.seed = 78;
    CHECK_FALSE(run_test(cube, stat, PermutationScheme::parse(text), opt).statistics_resampled ==
                one.statistics_resampled);
  }
}

TEST_CASE("an effect is detected and the p-value formula is applied") {
  // Response equals treatment at every cell: permuting in time breaks the link.
  DataCube cube = grid_cube(3, 3, 12);
  cube = cube.with_response(cube.treatment());
  const NamedStatistic stat{"contrast", [](const DataCube& c) { return plug_in_statistic(c, EstimatorConfig{}); }};
  TestOptions opt;
  opt.B = 199;
  opt.seed = 3;
  const TestResult r = run_test(cube, stat, PermutationScheme{}, opt);
  CHECK(r.statistic_observed == doctest::Approx(1.0));
  const auto ge = std::count_if(r.statistics_resampled.begin(), r.statistics_resampled.end(),
                                [&](double v) { return v >= r.statistic_observed; });
  CHECK(r.p_one_sided == doctest::Approx(static_cast<double>(1 + ge) / 200.0));
  CHECK(r.p_one_sided < 0.05);
  CHECK(r.mode == "sampled");
}

TEST_CASE("statistic failures name the resample") {
  const DataCube cube = grid_cube(2, 2, 4);
  int calls = 0;
  const NamedStatistic flaky{"flaky", [&calls](const DataCube&) -> double {
                               if (calls++ > 0) throw EstimationError("boom");
                               return 0.0;
                             }};
  TestOptions opt;
  opt.B = 3;
  try {
    (void)run_test(cube, flaky, PermutationScheme{}, opt);
    FAIL("expected an estimation error");
  } catch (const EstimationError& e) {
    CHECK(std::string(e.what()).find("resample 0") != std::string::npos);
  }
}

TEST_CASE("exhaustive enumeration with m = 2") {
  Field y(1, 2), x(1, 2);
  y.set(0, 0, 1.0);
  y.set(0, 1, 5.0);
  x.set(0, 0, 0.0);
  x.set(0, 1, 1.0);
  const DataCube cube({{"a", 0, 0}}, 2, y, {x});
  const NamedStatistic contrast{"contrast", [](const DataCube& c) { return plug_in_statistic(c, EstimatorConfig{}); }};
  // Identity gives +4, the swap gives -4.
  CHECK(enumerate_exact(cube, contrast) == 0.5);
  const NamedStatistic constant{"constant", [](const DataCube&) { return 0.0; }};
  CHECK(enumerate_exact(cube, constant) == 1.0);
}

TEST_CASE("exhaustive enumeration matches a brute-force count for m = 4") {
  Field y(1, 4), x(1, 4);
  const double ys[4] = {2.0, -1.0, 4.0, 0.5};
  for (std::size_t t = 0; t < 4; ++t) {
    y.set(0, t, ys[t]);
    x.set(0, t, 0.0);
  }
  const DataCube cube({{"a", 0, 0}}, 4, y, {x});
  const double observed = 1 * 2.0 + 2 * -1.0 + 3 * 4.0 + 4 * 0.5;
  int count = 0, total = 0;
  for (int a = 0; a < 4; ++a) {
    for (int b = 0; b < 4; ++b) {
      for (int c = 0; c < 4; ++c) {
        for (int d = 0; d < 4; ++d) {
          if (a == b || a == c || a == d || b == c || b == d || c == d) continue;
          ++total;
          const double v = 1 * ys[a] + 2 * ys[b] + 3 * ys[c] + 4 * ys[d];
          count += v >= observed;
        }
      }
    }
  }
  REQUIRE(total == 24);
  CHECK(enumerate_exact(cube, kWeightedSum) == doctest::Approx(static_cast<double>(count) / 24.0));
}

TEST_CASE("exhaustive enumeration refuses m! above the cap") {
  const DataCube cube = grid_cube(1, 1, 8);
  CHECK_THROWS_AS((void)enumerate_exact(cube, kWeightedSum), ConfigError);
  const DataCube seven = grid_cube(1, 1, 7);
  TestOptions opt;
  opt.exhaustive = true;
  const TestResult r = run_test(seven, kWeightedSum, PermutationScheme{}, opt);
  CHECK(r.B == 5040);
  CHECK(r.mode == "exhaustive");
  CHECK_THROWS_AS((void)run_test(seven, kWeightedSum, PermutationScheme::parse("fully_random"), opt), ConfigError);
}
