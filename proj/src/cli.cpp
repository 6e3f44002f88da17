#include "lscm/cli.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "lscm/datacube.hpp"
#include "lscm/errors.hpp"
#include "lscm/estimators.hpp"
#include "lscm/experiments.hpp"
#include "lscm/gp_sim.hpp"
#include "lscm/resampling.hpp"
#include "lscm/results_io.hpp"

namespace lscm {

namespace {

using Json = nlohmann::ordered_json;

/// Effective settings of one run. Unset fields fall back to per-subcommand defaults.
struct RunConfig {
  std::optional<std::string> input;
  std::optional<std::string> output;
  std::optional<std::string> delimiter;
  std::optional<bool> transpose;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;

  std::optional<std::string> estimator;
  std::optional<std::size_t> degree;
  std::optional<std::size_t> lag;
  std::optional<std::size_t> bins;
  std::optional<std::string> covariate;
  std::optional<std::string> scheme;
  std::optional<std::size_t> B;
  std::optional<bool> exhaustive;

  std::optional<std::string> recipe;
  std::optional<std::size_t> nx;
  std::optional<std::size_t> ny;
  std::optional<std::size_t> m;
  std::optional<double> effect;
  std::optional<double> alpha;
  std::optional<std::size_t> R;
  std::optional<std::vector<std::size_t>> n_values;
  std::optional<std::vector<std::size_t>> m_values;
  std::optional<double> delta;
  std::optional<std::vector<double>> x_values;
  std::optional<std::size_t> draws;
};

/// Binds flags and config-file keys to RunConfig members.
class OptionTable {
 public:
  template <typename T>
  void add(CLI::App* app, const std::string& key, std::optional<T> RunConfig::*member, const std::string& help) {
    auto storage = std::make_shared<T>();
    CLI::Option* opt = nullptr;
    if constexpr (std::is_same_v<T, bool>) {
      opt = app->add_flag("--" + key, *storage, help);
    } else {
      opt = app->add_option("--" + key, *storage, help);
    }
    keep_.push_back(storage);
    flag_setters_.push_back([opt, storage, member](RunConfig& c) {
      if (opt->count() > 0) c.*member = *storage;
    });
    json_setters_[key] = [member, key](RunConfig& c, const Json& v) {
      try {
        c.*member = v.get<T>();
      } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + key + "' has the wrong type");
      }
    };
  }

  void apply_json(RunConfig& c, const Json& j) const {
    if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
    for (const auto& [key, value] : j.items()) {
      const auto it = json_setters_.find(key);
      if (it == json_setters_.end()) throw ConfigError("unknown config key '" + key + "'");
      it->second(c, value);
    }
  }

  void apply_flags(RunConfig& c) const {
    for (const auto& f : flag_setters_) f(c);
  }

 private:
  std::vector<std::shared_ptr<void>> keep_;
  std::vector<std::function<void(RunConfig&)>> flag_setters_;
  std::map<std::string, std::function<void(RunConfig&, const Json&)>> json_setters_;
};

char delimiter_of(const RunConfig& c) {
  const std::string d = c.delimiter.value_or(",");
  if (d == "\\t" || d == "tab") return '\t';
  if (d.size() != 1) throw ConfigError("delimiter must be a single character");
  return d[0];
}

DataCube load_input(const RunConfig& c) {
  if (!c.input) throw ConfigError("--input is required");
  CubeSchema schema;
  schema.delimiter = delimiter_of(c);
  DataCube cube = read_cube(*c.input, schema);
  if (c.transpose.value_or(false)) cube = transpose_axes(cube);
  return cube;
}

EstimatorConfig estimator_config(const RunConfig& c) {
  EstimatorConfig e;
  e.kind = estimator_from_string(c.estimator.value_or("lscm-binary"));
  e.degree = c.degree.value_or(1);
  e.lag = c.lag.value_or(0);
  e.bins = c.bins.value_or(100);
  e.covariate = c.covariate.value_or("");
  e.threads = c.threads.value_or(1);
  if (e.bins == 0) throw ConfigError("--bins must be positive");
  return e;
}

void validate_estimator(const DataCube& cube, const EstimatorConfig& e) {
  const bool needs_w = e.kind == EstimatorKind::model2 || e.kind == EstimatorKind::observed_confounder;
  if (needs_w && cube.p() == 0) throw ConfigError(to_string(e.kind) + " needs a covariate column (w1, ...)");
  if (needs_w && !e.covariate.empty()) (void)cube.covariate_index(e.covariate);
  if (e.lag >= cube.m()) throw ConfigError("--lag must be smaller than the number of time steps");
}

std::string json_config(const RunConfig& c, const std::string& subcommand) {
  // Everything that influences results; threads and file destinations are excluded.
  Json j;
  j["subcommand"] = subcommand;
  auto put = [&](const char* key, const auto& v) {
    if (v) j[key] = *v;
  };
  put("input", c.input);
  put("delimiter", c.delimiter);
  put("transpose", c.transpose);
  put("seed", c.seed);
  put("estimator", c.estimator);
  put("degree", c.degree);
  put("lag", c.lag);
  put("bins", c.bins);
  put("covariate", c.covariate);
  put("scheme", c.scheme);
  put("B", c.B);
  put("exhaustive", c.exhaustive);
  put("recipe", c.recipe);
  put("nx", c.nx);
  put("ny", c.ny);
  put("m", c.m);
  put("effect", c.effect);
  put("alpha", c.alpha);
  put("R", c.R);
  put("n_values", c.n_values);
  put("m_values", c.m_values);
  put("delta", c.delta);
  put("x_values", c.x_values);
  put("draws", c.draws);
  return j.dump();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

void emit_table(const RunConfig& c, const std::string& table, std::ostream& out) {
  if (c.output) {
    write_text(*c.output, table);
    out << "table written to " << *c.output << "\n";
  } else {
    out << table;
  }
}

LscmSpec simulation_spec(const RunConfig& c, Recipe default_recipe, std::size_t default_side, std::size_t default_m) {
  LscmSpec spec;
  spec.recipe = recipe_from_string(c.recipe.value_or(to_string(default_recipe)));
  spec.grid.nx = c.nx.value_or(default_side);
  spec.grid.ny = c.ny.value_or(default_side);
  spec.m = c.m.value_or(default_m);
  spec.binary_effect = c.effect.value_or(1.0);
  spec.seed = *c.seed;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Subcommands

int cmd_simulate(const RunConfig& c, std::ostream& out) {
  const LscmSpec spec = simulation_spec(c, Recipe::heterogeneous_linear, 25, 100);
  if (!c.output) throw ConfigError("--output is required for simulate");
  const Simulation sim = simulate_lscm(spec);
  write_cube(sim.cube, *c.output, delimiter_of(c));
  out << "simulated recipe=" << to_string(spec.recipe) << " n=" << sim.cube.n() << " m=" << sim.cube.m()
      << " seed=" << *c.seed << " -> " << *c.output << "\n";
  return kExitOk;
}

int cmd_estimate(const RunConfig& c, const std::string& hash, std::ostream& out) {
  const DataCube cube = load_input(c);
  const EstimatorConfig e = estimator_config(c);
  validate_estimator(cube, e);
  EffectEstimate est = run_estimator(cube, e);
  est.provenance = {c.seed, "", hash};
  if (c.output) write_results(est, *c.output);

  out << "estimator=" << est.estimator << " n_used=" << est.n_used << "/" << est.n_total;
  if (est.kind == EffectEstimate::Kind::basis_coefficients) {
    out << " coefficients=";
    for (std::size_t j = 0; j < est.coefficients.size(); ++j) out << (j ? "," : "") << fmt(est.coefficients[j]);
  } else {
    for (std::size_t k = 0; k < est.levels.size(); ++k) out << " f(" << fmt(est.levels[k]) << ")=" << fmt(est.values[k]);
    out << " T=" << fmt(est.contrast());
  }
  if (est.estimator == "model2") out << " bins_used=" << est.bins_used << " bins_dropped=" << est.bins_dropped;
  out << " seed=" << *c.seed << "\n";
  return kExitOk;
}

int cmd_test(const RunConfig& c, const std::string& hash, std::ostream& out) {
  const DataCube cube = load_input(c);
  EstimatorConfig e = estimator_config(c);
  validate_estimator(cube, e);
  PermutationScheme scheme = PermutationScheme::parse(c.scheme.value_or("time_full"));
  if (scheme.kind == PermutationScheme::Kind::stratified_by_quantile && scheme.covariate.empty() &&
      !e.covariate.empty()) {
    scheme.covariate = e.covariate;
  }
  (void)PermutationSampler(cube, scheme);  // validates scheme against the cube before any work

  TestOptions opt;
  opt.B = c.B.value_or(999);
  opt.seed = *c.seed;
  opt.threads = c.threads.value_or(1);
  opt.exhaustive = c.exhaustive.value_or(false);

  const std::string name = e.kind == EstimatorKind::lscm_basis ? to_string(e.kind) + ":slope"
                                                               : to_string(e.kind) + ":contrast";
  e.threads = 1;
  const NamedStatistic statistic{name, [e](const DataCube& cube) { return plug_in_statistic(cube, e); }};
  TestResult result = run_test(cube, statistic, scheme, opt);
  result.provenance = {c.seed, scheme.describe(), hash};
  if (c.output) write_results(result, *c.output);

  const std::size_t denom = result.mode == "exhaustive" ? result.B : result.B + 1;
  const auto numer = static_cast<std::size_t>(std::llround(result.p_one_sided * static_cast<double>(denom)));
  out << "statistic=" << name << " T=" << fmt(result.statistic_observed) << " p_one_sided=" << numer << "/" << denom
      << " (" << fmt(result.p_one_sided) << ") p_two_sided=" << fmt(result.p_two_sided) << " B=" << result.B
      << " scheme=" << scheme.describe() << " seed=" << *c.seed << "\n";
  return kExitOk;
}

int cmd_level_study(const RunConfig& c, std::ostream& out) {
  LevelStudySpec spec;
  spec.null_spec = simulation_spec(c, Recipe::null_binary, 10, 20);
  spec.alpha = c.alpha.value_or(0.05);
  spec.B = c.B.value_or(199);
  spec.replicates = c.R.value_or(500);
  spec.scheme = PermutationScheme::parse(c.scheme.value_or("time_full"));
  spec.seed = *c.seed;
  spec.threads = c.threads.value_or(1);
  const LevelStudyResult result = run_level_study(spec);
  emit_table(c, format_table(result, spec.alpha), out);
  out << "rejection_rate=" << fmt(result.rejection_rate) << " (" << result.rejections << "/" << result.replicates
      << ") ci95=[" << fmt(result.ci_low) << "," << fmt(result.ci_high) << "] seed=" << *c.seed << "\n";
  return kExitOk;
}

int cmd_consistency_study(const RunConfig& c, std::ostream& out) {
  ConsistencyStudySpec spec;
  if (c.n_values) spec.n_values = *c.n_values;
  if (c.m_values) spec.m_values = *c.m_values;
  spec.replicates = c.R.value_or(100);
  spec.delta = c.delta.value_or(0.2);
  spec.seed = *c.seed;
  spec.threads = c.threads.value_or(1);
  const auto cells = run_consistency_study(spec);
  emit_table(c, format_table(cells), out);
  out << "consistency study: " << cells.size() << " cells, delta=" << fmt(spec.delta) << " seed=" << *c.seed << "\n";
  return kExitOk;
}

int cmd_intervention_check(const RunConfig& c, std::ostream& out) {
  const LscmSpec spec = simulation_spec(c, Recipe::heterogeneous_linear, 1, 1);
  const auto xs = c.x_values.value_or(std::vector<double>{-2.0, 0.0, 1.0, 2.0});
  const auto rows = run_intervention_check(spec, xs, c.draws.value_or(100000), *c.seed);
  emit_table(c, format_table(rows), out);
  std::size_t flagged = 0;
  for (const auto& r : rows) flagged += r.flagged ? 1 : 0;
  out << "intervention check: " << rows.size() << " values, flagged=" << flagged << " seed=" << *c.seed << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Causal effect estimation and permutation tests for spatio-temporal data", "lscm"};
  app.require_subcommand(1);
  std::string config_path;

  struct Sub {
    const char* name;
    const char* help;
  };
  const Sub subs[] = {
      {"simulate", "Simulate a dataset and write it as long-format CSV"},
      {"estimate", "Estimate the average causal effect"},
      {"test", "Permutation test for the absence of a causal effect"},
      {"level-study", "Empirical rejection rate of the permutation test on null data"},
      {"consistency-study", "Error probability of the basis estimator over (n, m)"},
      {"intervention-check", "Monte Carlo check of E[Y | do(X = x)] against the analytic effect"},
  };

  std::map<std::string, OptionTable> tables;
  for (const auto& s : subs) {
    CLI::App* sub = app.add_subcommand(s.name, s.help);
    OptionTable& t = tables[s.name];
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    t.add(sub, "seed", &RunConfig::seed, "Master seed (generated and printed when omitted)");
    t.add(sub, "threads", &RunConfig::threads, "Worker threads (results do not depend on it)");
    t.add(sub, "output", &RunConfig::output, "Output path");
    const std::string name = s.name;
    if (name == "estimate" || name == "test") {
      t.add(sub, "input", &RunConfig::input, "Long-format CSV input");
      t.add(sub, "delimiter", &RunConfig::delimiter, "Field delimiter (default ',')");
      t.add(sub, "transpose", &RunConfig::transpose, "Exchange the time axis with the first spatial axis");
      t.add(sub, "estimator", &RunConfig::estimator,
            "lscm-basis | lscm-binary | model1 | model2 | observed-confounder");
      t.add(sub, "degree", &RunConfig::degree, "Polynomial basis degree");
      t.add(sub, "lag", &RunConfig::lag, "Temporal lag of the treatment");
      t.add(sub, "bins", &RunConfig::bins, "Quantile strata for model2");
      t.add(sub, "covariate", &RunConfig::covariate, "Observed confounder column");
    }
    if (name == "test" || name == "level-study") {
      t.add(sub, "scheme", &RunConfig::scheme,
            "time_full | time_block:L | spatial_block:K | stratified_by_quantile:N[:col] | fully_random");
      t.add(sub, "B", &RunConfig::B, "Number of resamples");
    }
    if (name == "test") t.add(sub, "exhaustive", &RunConfig::exhaustive, "Enumerate all m! time permutations");
    if (name == "simulate" || name == "level-study" || name == "intervention-check") {
      t.add(sub, "recipe", &RunConfig::recipe, "heterogeneous_linear | null_continuous | null_binary | effect_binary");
      t.add(sub, "nx", &RunConfig::nx, "Grid size along the first axis");
      t.add(sub, "ny", &RunConfig::ny, "Grid size along the second axis");
      t.add(sub, "m", &RunConfig::m, "Number of time steps");
      t.add(sub, "effect", &RunConfig::effect, "Effect size for effect_binary");
    }
    if (name == "simulate") t.add(sub, "delimiter", &RunConfig::delimiter, "Field delimiter (default ',')");
    if (name == "level-study") {
      t.add(sub, "alpha", &RunConfig::alpha, "Test level");
      t.add(sub, "R", &RunConfig::R, "Number of simulated datasets");
    }
    if (name == "consistency-study") {
      t.add(sub, "n-values", &RunConfig::n_values, "Numbers of locations (perfect squares)");
      t.add(sub, "m-values", &RunConfig::m_values, "Numbers of time steps");
      t.add(sub, "R", &RunConfig::R, "Replicates per cell");
      t.add(sub, "delta", &RunConfig::delta, "Error radius (inf for none)");
    }
    if (name == "intervention-check") {
      t.add(sub, "x-values", &RunConfig::x_values, "Treatment values");
      t.add(sub, "draws", &RunConfig::draws, "Monte Carlo draws per value");
    }
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    CLI::App* active = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << active->help();
    return kExitDataError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  try {
    RunConfig config;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw IoError("cannot open config file '" + config_path + "'");
      Json j;
      try {
        j = Json::parse(in);
      } catch (const Json::parse_error& e) {
        throw ConfigError("config file '" + config_path + "': " + e.what());
      }
      tables.at(name).apply_json(config, j);
    }
    tables.at(name).apply_flags(config);

    if (!config.seed) {
      std::random_device rd;
      config.seed = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
      err << "seed not given; using seed=" << *config.seed << "\n";
    }
    const std::string hash = config_hash(json_config(config, name));

    if (name == "simulate") return cmd_simulate(config, out);
    if (name == "estimate") return cmd_estimate(config, hash, out);
    if (name == "test") return cmd_test(config, hash, out);
    if (name == "level-study") return cmd_level_study(config, out);
    if (name == "consistency-study") return cmd_consistency_study(config, out);
    if (name == "intervention-check") return cmd_intervention_check(config, out);
    throw ConfigError("unknown subcommand '" + name + "'");
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumericalError;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDataError;
  }
}

}  // namespace lscm
