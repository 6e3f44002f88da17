#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "json.hpp"
#include "lscm/errors.hpp"
#include "lscm/results_io.hpp"

using namespace lscm;

namespace {

EffectEstimate sample_estimate() {
  EffectEstimate e;
  e.estimator = "lscm-basis";
  e.kind = EffectEstimate::Kind::basis_coefficients;
  e.basis_id = "poly:1";
  e.basis_names = {"1", "x"};
  e.coefficients = {0.125, -3.0e-7};
  e.n_total = 3;
  e.n_used = 2;
  e.lag = 1;
  LocationFit ok{"a", {0.1, 0.2}, {10}, 0.75, FitStatus::ok, ""};
  LocationFit bad{"b", {}, {1}, 0.0, FitStatus::excluded, "insufficient data"};
  LocationFit rd{"c", {}, {10}, 1e-17, FitStatus::rank_deficient, "smallest scaled singular value below tolerance"};
  e.fits = {ok, bad, rd};
  e.provenance = {std::uint64_t{18446744073709551615ULL}, "", "00ff00ff00ff00ff"};
  return e;
}

TestResult sample_test() {
  TestResult r;
  r.statistic_name = "lscm-binary:contrast";
  r.statistic_observed = 0.4;
  r.statistics_resampled = {0.1, -0.2, 0.4, 1.0 / 3.0};
  r.B = 4;
  r.p_one_sided = 0.6;
  r.p_two_sided = 1.0;
  r.scheme = PermutationScheme::parse("stratified_by_quantile:10:w2");
  r.seed = 99;
  r.ties_count = 1;
  r.provenance = {std::uint64_t{99}, "stratified_by_quantile:10:w2", "0123456789abcdef"};
  return r;
}

}  // namespace

TEST_CASE("effect estimates round trip") {
  const EffectEstimate e = sample_estimate();
  const EffectEstimate back = parse_effect_estimate(format_results(e));
  CHECK(back == e);
  CHECK(back.evaluate(2.0) == doctest::Approx(0.125 - 6.0e-7));

  EffectEstimate table;
  table.estimator = "model2";
  table.levels = {0.0, 1.0};
  table.values = {1.5, std::nan("")};
  table.bins_used = 97;
  table.bins_dropped = 3;
  const EffectEstimate t2 = parse_effect_estimate(format_results(table));
  CHECK(t2.bins_used == 97);
  CHECK(t2.values[0] == 1.5);
  CHECK(std::isnan(t2.values[1]));
}

TEST_CASE("test results round trip") {
  const TestResult r = sample_test();
  CHECK(parse_test_result(format_results(r)) == r);
}

TEST_CASE("documents carry the required fields") {
  const auto doc = nlohmann::json::parse(format_results(sample_test()));
  CHECK(doc.at("schema_version") == kResultSchemaVersion);
  CHECK(doc.at("type") == "test_result");
  for (const char* key : {"statistic", "statistic_observed", "B", "p_one_sided", "p_two_sided", "scheme", "seed",
                          "ties_count", "statistics_resampled", "provenance"}) {
    CHECK_MESSAGE(doc.contains(key), key);
  }
  for (const char* key : {"seed", "scheme", "config_hash", "tool_version"}) {
    CHECK_MESSAGE(doc.at("provenance").contains(key), key);
  }
  const auto est = nlohmann::json::parse(format_results(sample_estimate()));
  CHECK(est.at("type") == "effect_estimate");
  CHECK(est.at("locations").size() == 3);
  CHECK(est.at("locations")[1].at("reason") == "insufficient data");
}

TEST_CASE("files round trip and I/O failures are reported") {
  const auto dir = std::filesystem::temp_directory_path();
  write_results(sample_estimate(), dir / "lscm_est.json");
  CHECK(read_effect_estimate(dir / "lscm_est.json") == sample_estimate());
  write_results(sample_test(), dir / "lscm_test.json");
  CHECK(read_test_result(dir / "lscm_test.json") == sample_test());
  std::filesystem::remove(dir / "lscm_est.json");
  std::filesystem::remove(dir / "lscm_test.json");

  CHECK_THROWS_AS(write_results(sample_test(), "/nonexistent/dir/out.json"), IoError);
  CHECK_THROWS_AS((void)read_test_result("/nonexistent/dir/out.json"), IoError);
}

TEST_CASE("malformed documents are parse errors") {
  CHECK_THROWS_AS((void)parse_test_result("{not json"), ParseError);
  CHECK_THROWS_AS((void)parse_test_result(R"({"schema_version":"other/9","type":"test_result"})"), ParseError);
  CHECK_THROWS_AS((void)parse_test_result(format_results(sample_estimate())), ParseError);
  CHECK_THROWS_AS((void)parse_effect_estimate(R"({"schema_version":"lscm-result/1","type":"effect_estimate"})"),
                  ParseError);
}
