#include "lscm/results_io.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "lscm/errors.hpp"

namespace lscm {

using Json = nlohmann::ordered_json;

namespace {

Json real(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json reals(const std::vector<double>& v) {
  Json arr = Json::array();
  for (double x : v) arr.push_back(real(x));
  return arr;
}

double get_real(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

std::vector<double> get_reals(const Json& j) {
  std::vector<double> out;
  for (const auto& x : j) out.push_back(get_real(x));
  return out;
}

Json provenance_json(const Provenance& p) {
  Json j;
  j["seed"] = p.seed ? Json(*p.seed) : Json(nullptr);
  j["scheme"] = p.scheme;
  j["config_hash"] = p.config_hash;
  j["tool_version"] = std::string(kToolVersion);
  return j;
}

Provenance provenance_from(const Json& j) {
  Provenance p;
  if (!j.at("seed").is_null()) p.seed = j.at("seed").get<std::uint64_t>();
  p.scheme = j.at("scheme").get<std::string>();
  p.config_hash = j.at("config_hash").get<std::string>();
  return p;
}

Json header(const char* type) {
  Json j;
  j["schema_version"] = kResultSchemaVersion;
  j["type"] = type;
  return j;
}

Json parse_document(const std::string& text, const char* type) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(std::string("invalid result document: ") + e.what(), 1);
  }
  if (!j.is_object() || j.value("schema_version", "") != kResultSchemaVersion) {
    throw ParseError("unsupported or missing schema_version", 1);
  }
  if (j.value("type", "") != type) throw ParseError(std::string("document is not of type ") + type, 1);
  return j;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

template <typename F>
auto wrap_json_errors(F&& f) {
  try {
    return f();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed result document: ") + e.what(), 1);
  }
}

}  // namespace

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// EffectEstimate

std::string format_results(const EffectEstimate& e) {
  Json j = header("effect_estimate");
  j["estimator"] = e.estimator;
  j["representation"] = to_string(e.kind);
  j["basis_id"] = e.basis_id;
  j["basis_names"] = e.basis_names;
  j["coefficients"] = reals(e.coefficients);
  Json table = Json::array();
  for (std::size_t k = 0; k < e.levels.size(); ++k) {
    Json row;
    row["x"] = real(e.levels[k]);
    row["value"] = real(e.values[k]);
    table.push_back(std::move(row));
  }
  j["value_table"] = std::move(table);
  j["n_total"] = e.n_total;
  j["n_used"] = e.n_used;
  j["lag"] = e.lag;
  j["bins_used"] = e.bins_used;
  j["bins_dropped"] = e.bins_dropped;
  Json fits = Json::array();
  for (const auto& f : e.fits) {
    Json row;
    row["location"] = f.location_id;
    row["status"] = to_string(f.status);
    row["reason"] = f.reason;
    row["coefficients"] = reals(f.coefficients);
    row["counts"] = f.counts;
    row["min_singular_value"] = real(f.min_singular_value);
    fits.push_back(std::move(row));
  }
  j["locations"] = std::move(fits);
  j["provenance"] = provenance_json(e.provenance);
  return j.dump(2) + "\n";
}

EffectEstimate parse_effect_estimate(const std::string& text) {
  const Json j = parse_document(text, "effect_estimate");
  return wrap_json_errors([&] {
    EffectEstimate e;
    e.estimator = j.at("estimator").get<std::string>();
    const auto rep = j.at("representation").get<std::string>();
    if (rep == "basis_coefficients") {
      e.kind = EffectEstimate::Kind::basis_coefficients;
    } else if (rep == "value_table") {
      e.kind = EffectEstimate::Kind::value_table;
    } else {
      throw ParseError("unknown representation '" + rep + "'", 1);
    }
    e.basis_id = j.at("basis_id").get<std::string>();
    e.basis_names = j.at("basis_names").get<std::vector<std::string>>();
    e.coefficients = get_reals(j.at("coefficients"));
    for (const auto& row : j.at("value_table")) {
      e.levels.push_back(get_real(row.at("x")));
      e.values.push_back(get_real(row.at("value")));
    }
    e.n_total = j.at("n_total").get<std::size_t>();
    e.n_used = j.at("n_used").get<std::size_t>();
    e.lag = j.at("lag").get<std::size_t>();
    e.bins_used = j.at("bins_used").get<std::size_t>();
    e.bins_dropped = j.at("bins_dropped").get<std::size_t>();
    for (const auto& row : j.at("locations")) {
      LocationFit f;
      f.location_id = row.at("location").get<std::string>();
      f.status = fit_status_from_string(row.at("status").get<std::string>());
      f.reason = row.at("reason").get<std::string>();
      f.coefficients = get_reals(row.at("coefficients"));
      f.counts = row.at("counts").get<std::vector<std::size_t>>();
      f.min_singular_value = get_real(row.at("min_singular_value"));
      e.fits.push_back(std::move(f));
    }
    e.provenance = provenance_from(j.at("provenance"));
    return e;
  });
}

void write_results(const EffectEstimate& estimate, const std::filesystem::path& path) {
  write_text(path, format_results(estimate));
}

EffectEstimate read_effect_estimate(const std::filesystem::path& path) {
  return parse_effect_estimate(read_text(path));
}

// ---------------------------------------------------------------------------
// TestResult

std::string format_results(const TestResult& r) {
  Json j = header("test_result");
  j["statistic"] = r.statistic_name;
  j["statistic_observed"] = real(r.statistic_observed);
  j["B"] = r.B;
  j["mode"] = r.mode;
  j["p_one_sided"] = real(r.p_one_sided);
  j["p_two_sided"] = real(r.p_two_sided);
  j["ties_count"] = r.ties_count;
  j["scheme"] = r.scheme.describe();
  j["seed"] = r.seed;
  j["statistics_resampled"] = reals(r.statistics_resampled);
  j["provenance"] = provenance_json(r.provenance);
  return j.dump(2) + "\n";
}

TestResult parse_test_result(const std::string& text) {
  const Json j = parse_document(text, "test_result");
  return wrap_json_errors([&] {
    TestResult r;
    r.statistic_name = j.at("statistic").get<std::string>();
    r.statistic_observed = get_real(j.at("statistic_observed"));
    r.B = j.at("B").get<std::size_t>();
    r.mode = j.at("mode").get<std::string>();
    r.p_one_sided = get_real(j.at("p_one_sided"));
    r.p_two_sided = get_real(j.at("p_two_sided"));
    r.ties_count = j.at("ties_count").get<std::size_t>();
    r.scheme = PermutationScheme::parse(j.at("scheme").get<std::string>());
    r.seed = j.at("seed").get<std::uint64_t>();
    r.statistics_resampled = get_reals(j.at("statistics_resampled"));
    r.provenance = provenance_from(j.at("provenance"));
    return r;
  });
}

void write_results(const TestResult& result, const std::filesystem::path& path) {
  write_text(path, format_results(result));
}

TestResult read_test_result(const std::filesystem::path& path) { return parse_test_result(read_text(path)); }

}  // namespace lscm
