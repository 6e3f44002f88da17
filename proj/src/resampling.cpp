#include "lscm/resampling.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "lscm/errors.hpp"
#include "lscm/estimators.hpp"
#include "lscm/parallel.hpp"

namespace lscm {

// ---------------------------------------------------------------------------
// Scheme descriptors

std::string PermutationScheme::describe() const {
  switch (kind) {
    case Kind::time_full: return "time_full";
    case Kind::time_block: return "time_block:" + std::to_string(block_length);
    case Kind::spatial_block: return "spatial_block:" + std::to_string(block_cells);
    case Kind::stratified_by_quantile:
      return "stratified_by_quantile:" + std::to_string(n_bins) + (covariate.empty() ? "" : ":" + covariate);
    case Kind::fully_random: return "fully_random";
  }
  return "unknown";
}

PermutationScheme PermutationScheme::parse(const std::string& text) {
  std::vector<std::string> parts;
  std::istringstream in(text);
  for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
  if (parts.empty()) throw ConfigError("empty permutation scheme");

  auto number = [&](std::size_t k) -> std::size_t {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(parts.at(k), &used);
      if (used != parts[k].size()) throw std::invalid_argument(parts[k]);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("malformed permutation scheme '" + text + "'");
    }
  };

  PermutationScheme s;
  const std::string& name = parts[0];
  if (name == "time_full" && parts.size() == 1) {
    s.kind = Kind::time_full;
  } else if (name == "time_block" && parts.size() <= 2) {
    s.kind = Kind::time_block;
    if (parts.size() == 2) s.block_length = number(1);
  } else if (name == "spatial_block" && parts.size() == 2) {
    s.kind = Kind::spatial_block;
    s.block_cells = number(1);
  } else if (name == "stratified_by_quantile" && parts.size() <= 3) {
    s.kind = Kind::stratified_by_quantile;
    if (parts.size() >= 2) s.n_bins = number(1);
    if (parts.size() == 3) s.covariate = parts[2];
  } else if (name == "fully_random" && parts.size() == 1) {
    s.kind = Kind::fully_random;
  } else if (name == "spatial_block") {
    throw ConfigError("spatial_block needs a block size in grid cells, e.g. spatial_block:4");
  } else {
    throw ConfigError("unknown permutation scheme '" + text + "'");
  }
  return s;
}

// ---------------------------------------------------------------------------
// Sampler

PermutationSampler::PermutationSampler(const DataCube& cube, PermutationScheme scheme)
    : scheme_(std::move(scheme)), n_(cube.n()), m_(cube.m()) {
  using Kind = PermutationScheme::Kind;
  switch (scheme_.kind) {
    case Kind::time_full:
    case Kind::fully_random:
      break;

    case Kind::time_block: {
      if (scheme_.block_length == 0 || scheme_.block_length > m_) {
        throw ConfigError("time block length must be between 1 and m = " + std::to_string(m_));
      }
      for (std::size_t start = 0; start < m_; start += scheme_.block_length) {
        time_blocks_.emplace_back(start, std::min(start + scheme_.block_length, m_));
      }
      break;
    }

    case Kind::spatial_block: {
      const std::size_t k = scheme_.block_cells;
      if (k == 0) throw ConfigError("spatial block size must be at least one grid cell");
      const auto lattice = detect_lattice(cube.locations());
      if (!lattice) throw UnsupportedLayoutError("spatial block permutation needs locations on a regular grid");
      // Blocks are anchored at the minimum coordinate of each axis.
      std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> blocks;
      for (std::size_t loc = 0; loc < n_; ++loc) {
        const auto [i1, i2] = lattice->index[loc];
        auto& members = blocks[{i1 / k, i2 / k}];
        if (members.empty()) members.assign(k * k, n_);
        members[(i1 % k) * k + (i2 % k)] = loc;
      }
      for (auto& [key, members] : blocks) {
        if (std::find(members.begin(), members.end(), n_) == members.end()) {
          full_blocks_.push_back(std::move(members));
        } else {
          for (std::size_t loc : members) {
            if (loc != n_) loose_locations_.push_back(loc);
          }
        }
      }
      std::sort(loose_locations_.begin(), loose_locations_.end());
      break;
    }

    case Kind::stratified_by_quantile: {
      if (scheme_.n_bins == 0) throw ConfigError("number of strata must be positive");
      if (cube.p() == 0) throw ConfigError("stratified_by_quantile needs a designated covariate column");
      const Field& w = cube.covariate(scheme_.covariate.empty() ? 0 : cube.covariate_index(scheme_.covariate));
      std::vector<std::size_t> cells;
      std::vector<double> values;
      for (std::size_t c = 0; c < w.values().size(); ++c) {
        if (!w.mask()[c]) continue;
        cells.push_back(c);
        values.push_back(w.values()[c]);
      }
      if (cells.empty()) throw ConfigError("covariate for stratification has no observed values");
      const auto edges = quantile_edges(values, scheme_.n_bins);
      strata_.resize(scheme_.n_bins);
      for (std::size_t k = 0; k < cells.size(); ++k) strata_[quantile_bin(edges, values[k])].push_back(cells[k]);
      std::erase_if(strata_, [](const auto& s) { return s.size() < 2; });
      break;
    }
  }
}

std::vector<std::size_t> PermutationSampler::draw(std::uint64_t seed) const {
  Engine eng = make_engine(seed);
  return draw(eng);
}

std::vector<std::size_t> PermutationSampler::draw(Engine& eng) const {
  using Kind = PermutationScheme::Kind;
  std::vector<std::size_t> source(n_ * m_);
  std::iota(source.begin(), source.end(), std::size_t{0});

  auto apply_time = [&](const std::vector<std::size_t>& sigma) {
    for (std::size_t loc = 0; loc < n_; ++loc) {
      for (std::size_t t = 0; t < m_; ++t) source[loc * m_ + t] = loc * m_ + sigma[t];
    }
  };

  switch (scheme_.kind) {
    case Kind::time_full:
      apply_time(random_permutation(m_, eng));
      break;

    case Kind::time_block: {
      const auto order = random_permutation(time_blocks_.size(), eng);
      std::vector<std::size_t> sigma;
      sigma.reserve(m_);
      for (std::size_t b : order) {
        for (std::size_t t = time_blocks_[b].first; t < time_blocks_[b].second; ++t) sigma.push_back(t);
      }
      apply_time(sigma);
      break;
    }

    case Kind::spatial_block: {
      for (std::size_t t = 0; t < m_; ++t) {
        const auto order = random_permutation(full_blocks_.size(), eng);
        for (std::size_t b = 0; b < full_blocks_.size(); ++b) {
          const auto& dest = full_blocks_[b];
          const auto& from = full_blocks_[order[b]];
          for (std::size_t o = 0; o < dest.size(); ++o) source[dest[o] * m_ + t] = from[o] * m_ + t;
        }
        const auto loose = random_permutation(loose_locations_.size(), eng);
        for (std::size_t k = 0; k < loose_locations_.size(); ++k) {
          source[loose_locations_[k] * m_ + t] = loose_locations_[loose[k]] * m_ + t;
        }
      }
      break;
    }

    case Kind::stratified_by_quantile:
      for (const auto& stratum : strata_) {
        const auto order = random_permutation(stratum.size(), eng);
        for (std::size_t k = 0; k < stratum.size(); ++k) source[stratum[k]] = stratum[order[k]];
      }
      break;

    case Kind::fully_random:
      shuffle_in_place(std::span<std::size_t>(source), eng);
      break;
  }
  return source;
}

DataCube permute_response(const DataCube& cube, std::span<const std::size_t> source) {
  const Field& y = cube.response();
  if (source.size() != y.values().size()) throw ConfigError("permutation does not match the cube size");
  Field out(cube.n(), cube.m());
  const std::size_t m = cube.m();
  for (std::size_t c = 0; c < source.size(); ++c) {
    const std::size_t from = source[c];
    if (y.mask()[from]) out.set(c / m, c % m, y.values()[from]);
  }
  return cube.with_response(std::move(out));
}

DataCube apply_permutation(const DataCube& cube, const PermutationScheme& scheme, std::uint64_t draw_seed) {
  const PermutationSampler sampler(cube, scheme);
  return permute_response(cube, sampler.draw(draw_seed));
}

// ---------------------------------------------------------------------------
// Tests

double resampling_p_value(double observed, std::span<const double> resampled) {
  const auto exceed = std::count_if(resampled.begin(), resampled.end(), [&](double v) { return v >= observed; });
  return static_cast<double>(1 + exceed) / static_cast<double>(1 + resampled.size());
}

double two_sided_p_value(double p_statistic, double p_negated) {
  return std::min(1.0, 2.0 * std::min(p_statistic, p_negated));
}

namespace {

double evaluate_checked(const NamedStatistic& statistic, const DataCube& cube, const std::string& where) {
  try {
    return statistic.fn(cube);
  } catch (const Error& e) {
    throw EstimationError("statistic '" + statistic.name + "' failed on " + where + ": " + e.what());
  }
}

std::size_t factorial_capped(std::size_t m, std::size_t cap) {
  std::size_t f = 1;
  for (std::size_t k = 2; k <= m; ++k) {
    f *= k;
    if (f > cap) return cap + 1;
  }
  return f;
}

TestResult run_exhaustive(const DataCube& cube, const NamedStatistic& statistic, const PermutationScheme& scheme,
                          const TestOptions& options) {
  if (scheme.kind != PermutationScheme::Kind::time_full) {
    throw ConfigError("exhaustive enumeration is only defined for the time_full scheme");
  }
  const std::size_t m = cube.m();
  const std::size_t count = factorial_capped(m, options.enumeration_cap);
  if (count > options.enumeration_cap) {
    throw ConfigError("m! exceeds the enumeration cap of " + std::to_string(options.enumeration_cap) +
                      "; use random resampling (run_test without exhaustive mode)");
  }

  std::vector<std::vector<std::size_t>> sigmas;
  sigmas.reserve(count);
  std::vector<std::size_t> sigma(m);
  std::iota(sigma.begin(), sigma.end(), std::size_t{0});
  do {
    sigmas.push_back(sigma);
  } while (std::next_permutation(sigma.begin(), sigma.end()));

  TestResult result;
  result.statistic_name = statistic.name;
  result.scheme = scheme;
  result.seed = options.seed;
  result.mode = "exhaustive";
  result.statistic_observed = evaluate_checked(statistic, cube, "the observed data");
  result.B = sigmas.size();
  result.statistics_resampled.resize(sigmas.size());

  parallel_for(sigmas.size(), options.threads, [&](std::size_t k) {
    std::vector<std::size_t> source(cube.n() * m);
    for (std::size_t loc = 0; loc < cube.n(); ++loc) {
      for (std::size_t t = 0; t < m; ++t) source[loc * m + t] = loc * m + sigmas[k][t];
    }
    result.statistics_resampled[k] =
        evaluate_checked(statistic, permute_response(cube, source), "permutation " + std::to_string(k));
  });

  const double t_obs = result.statistic_observed;
  const auto& stats = result.statistics_resampled;
  const auto ge = std::count_if(stats.begin(), stats.end(), [&](double v) { return v >= t_obs; });
  const auto le = std::count_if(stats.begin(), stats.end(), [&](double v) { return v <= t_obs; });
  result.ties_count = static_cast<std::size_t>(std::count(stats.begin(), stats.end(), t_obs));
  result.p_one_sided = static_cast<double>(ge) / static_cast<double>(stats.size());
  result.p_two_sided =
      two_sided_p_value(result.p_one_sided, static_cast<double>(le) / static_cast<double>(stats.size()));
  return result;
}

}  // namespace

TestResult run_test(const DataCube& cube, const NamedStatistic& statistic, const PermutationScheme& scheme,
                    const TestOptions& options) {
  if (options.exhaustive) return run_exhaustive(cube, statistic, scheme, options);
  if (options.B == 0) throw ConfigError("number of resamples B must be positive");

  const PermutationSampler sampler(cube, scheme);
  std::vector<std::uint64_t> seeds(options.B);
  for (std::size_t b = 0; b < options.B; ++b) seeds[b] = derive_seed(options.seed, "resample", b);

  TestResult result;
  result.statistic_name = statistic.name;
  result.scheme = scheme;
  result.seed = options.seed;
  result.B = options.B;
  result.statistic_observed = evaluate_checked(statistic, cube, "the observed data");
  result.statistics_resampled.resize(options.B);

  parallel_for(options.B, options.threads, [&](std::size_t b) {
    const DataCube resampled = permute_response(cube, sampler.draw(seeds[b]));
    result.statistics_resampled[b] = evaluate_checked(statistic, resampled, "resample " + std::to_string(b));
  });

  const double t_obs = result.statistic_observed;
  const auto& stats = result.statistics_resampled;
  result.ties_count = static_cast<std::size_t>(std::count(stats.begin(), stats.end(), t_obs));
  result.p_one_sided = resampling_p_value(t_obs, stats);
  std::vector<double> negated(stats.size());
  std::transform(stats.begin(), stats.end(), negated.begin(), [](double v) { return -v; });
  result.p_two_sided = two_sided_p_value(result.p_one_sided, resampling_p_value(-t_obs, negated));
  return result;
}

double enumerate_exact(const DataCube& cube, const NamedStatistic& statistic, std::size_t cap) {
  TestOptions options;
  options.exhaustive = true;
  options.enumeration_cap = cap;
  return run_test(cube, statistic, PermutationScheme{}, options).p_one_sided;
}

}  // namespace lscm
