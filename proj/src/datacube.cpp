#include "lscm/datacube.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "lscm/errors.hpp"

namespace lscm {

// ---------------------------------------------------------------------------
// Field

Field::Field(std::size_t n, std::size_t m) : n_(n), m_(m), values_(n * m, 0.0), mask_(n * m, 0) {}

std::optional<double> Field::get(std::size_t loc, std::size_t t) const {
  if (!observed(loc, t)) return std::nullopt;
  return value(loc, t);
}

void Field::set(std::size_t loc, std::size_t t, double v) {
  const std::size_t c = cell(loc, t);
  values_[c] = v;
  mask_[c] = 1;
}

void Field::set_missing(std::size_t loc, std::size_t t) {
  const std::size_t c = cell(loc, t);
  values_[c] = 0.0;
  mask_[c] = 0;
}

std::size_t Field::observed_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

// ---------------------------------------------------------------------------
// DataCube

namespace {

void check_shape(const Field& f, std::size_t n, std::size_t m, const std::string& what) {
  if (f.n() != n || f.m() != m) {
    throw IntegrityError(what + " has shape " + std::to_string(f.n()) + "x" + std::to_string(f.m()) +
                         ", expected " + std::to_string(n) + "x" + std::to_string(m));
  }
}

std::vector<std::string> default_names(char prefix, std::size_t count) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < count; ++j) names.push_back(prefix + std::to_string(j + 1));
  return names;
}

}  // namespace

DataCube::DataCube(std::vector<Location> locations, std::size_t m, Field response,
                   std::vector<Field> treatments, std::vector<Field> covariates, VariableNames names,
                   std::int64_t time_origin)
    : locations_(std::move(locations)),
      m_(m),
      response_(std::move(response)),
      treatments_(std::move(treatments)),
      covariates_(std::move(covariates)),
      names_(std::move(names)),
      time_origin_(time_origin) {
  const std::size_t n = locations_.size();
  if (n == 0 || m_ == 0) throw IntegrityError("data cube needs at least one location and one time step");
  if (treatments_.empty()) throw IntegrityError("data cube needs at least one treatment variable");

  check_shape(response_, n, m_, "response");
  for (const auto& f : treatments_) check_shape(f, n, m_, "treatment");
  for (const auto& f : covariates_) check_shape(f, n, m_, "covariate");

  if (names_.treatments.empty()) names_.treatments = default_names('x', treatments_.size());
  if (names_.covariates.empty()) names_.covariates = default_names('w', covariates_.size());
  if (names_.treatments.size() != treatments_.size() || names_.covariates.size() != covariates_.size()) {
    throw IntegrityError("variable names do not match the number of variables");
  }

  std::set<std::string> ids;
  for (const auto& loc : locations_) {
    if (!std::isfinite(loc.s1) || !std::isfinite(loc.s2)) {
      throw IntegrityError("location '" + loc.id + "' has non-finite coordinates");
    }
    if (!ids.insert(loc.id).second) throw IntegrityError("duplicate location id '" + loc.id + "'");
  }

  sorted_.resize(n);
  std::iota(sorted_.begin(), sorted_.end(), std::size_t{0});
  std::sort(sorted_.begin(), sorted_.end(),
            [this](std::size_t a, std::size_t b) { return locations_[a].id < locations_[b].id; });
}

std::size_t DataCube::covariate_index(const std::string& name) const {
  const auto it = std::find(names_.covariates.begin(), names_.covariates.end(), name);
  if (it == names_.covariates.end()) throw ConfigError("no covariate column named '" + name + "'");
  return static_cast<std::size_t>(it - names_.covariates.begin());
}

DataCube DataCube::with_response(Field response) const {
  check_shape(response, n(), m_, "response");
  DataCube copy = *this;
  copy.response_ = std::move(response);
  return copy;
}

DataCube DataCube::with_swap_record(AxisSwapRecord record) const {
  DataCube copy = *this;
  copy.swap_ = std::make_shared<const AxisSwapRecord>(std::move(record));
  return copy;
}

bool DataCube::operator==(const DataCube& other) const {
  return locations_ == other.locations_ && m_ == other.m_ && time_origin_ == other.time_origin_ &&
         names_ == other.names_ && response_ == other.response_ && treatments_ == other.treatments_ &&
         covariates_ == other.covariates_;
}

// ---------------------------------------------------------------------------
// Delimited text input

namespace {

std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_missing_token(std::string_view s) { return s.empty() || s == "NA" || s == "na"; }

double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ParseError("column '" + std::string(column) + "': cannot parse '" + std::string(s) + "' as a real",
                     line);
  }
  return v;
}

std::int64_t parse_int(std::string_view s, std::size_t line, std::string_view column) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError("column '" + std::string(column) + "': cannot parse '" + std::string(s) + "' as an integer",
                     line);
  }
  return v;
}

std::vector<std::string> auto_columns(const std::vector<std::string>& header, char prefix) {
  std::vector<std::pair<long, std::string>> found;
  for (const auto& h : header) {
    if (h.size() < 2 || h[0] != prefix) continue;
    if (!std::all_of(h.begin() + 1, h.end(), [](char c) { return c >= '0' && c <= '9'; })) continue;
    found.emplace_back(std::stol(h.substr(1)), h);
  }
  std::sort(found.begin(), found.end());
  std::vector<std::string> names;
  for (auto& f : found) names.push_back(std::move(f.second));
  return names;
}

struct Row {
  std::size_t line;
  std::size_t location;
  std::int64_t t;
  std::vector<std::optional<double>> values;  // response, treatments..., covariates...
};

}  // namespace

DataCube parse_cube(std::string_view text, const CubeSchema& schema) {
  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& out) {
    while (pos < text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      out = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      if (!trim(out).empty()) return true;
    }
    return false;
  };

  std::string_view line;
  if (!next_line(line)) throw ParseError("empty input, expected a header row", 1);

  std::vector<std::string> header;
  for (auto field : split(line, schema.delimiter)) header.emplace_back(trim(field));
  const std::size_t header_line = line_no;

  auto column = [&](const std::string& name) -> std::size_t {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("missing required column '" + name + "'", header_line);
    return static_cast<std::size_t>(it - header.begin());
  };

  VariableNames names;
  names.response = schema.response;
  names.treatments = schema.treatments.empty() ? auto_columns(header, 'x') : schema.treatments;
  names.covariates = schema.covariates.empty() ? auto_columns(header, 'w') : schema.covariates;
  if (names.treatments.empty()) throw ParseError("no treatment columns found", header_line);

  const std::size_t c_id = column(schema.loc_id);
  const std::size_t c_s1 = column(schema.s1);
  const std::size_t c_s2 = column(schema.s2);
  const std::size_t c_t = column(schema.t);
  std::vector<std::size_t> value_columns{column(names.response)};
  std::vector<std::string> value_names{names.response};
  for (const auto& nm : names.treatments) {
    value_columns.push_back(column(nm));
    value_names.push_back(nm);
  }
  for (const auto& nm : names.covariates) {
    value_columns.push_back(column(nm));
    value_names.push_back(nm);
  }

  std::vector<Location> locations;
  std::unordered_map<std::string, std::size_t> location_index;
  std::vector<Row> rows;

  while (next_line(line)) {
    const auto fields = split(line, schema.delimiter);
    if (fields.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    const std::string id(trim(fields[c_id]));
    if (id.empty()) throw ParseError("empty location id", line_no);
    const double s1 = parse_real(trim(fields[c_s1]), line_no, schema.s1);
    const double s2 = parse_real(trim(fields[c_s2]), line_no, schema.s2);

    auto [it, inserted] = location_index.try_emplace(id, locations.size());
    if (inserted) {
      locations.push_back({id, s1, s2});
    } else if (locations[it->second].s1 != s1 || locations[it->second].s2 != s2) {
      throw IntegrityError("line " + std::to_string(line_no) + ": location '" + id +
                           "' has inconsistent coordinates");
    }

    Row row{line_no, it->second, parse_int(trim(fields[c_t]), line_no, schema.t), {}};
    row.values.reserve(value_columns.size());
    for (std::size_t k = 0; k < value_columns.size(); ++k) {
      const auto tok = trim(fields[value_columns[k]]);
      if (is_missing_token(tok)) {
        row.values.emplace_back();
      } else {
        row.values.emplace_back(parse_real(tok, line_no, value_names[k]));
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows", line_no + 1);

  std::set<std::int64_t> times;
  for (const auto& r : rows) times.insert(r.t);
  const std::int64_t t0 = *times.begin();
  {
    std::int64_t expected = t0;
    for (std::int64_t t : times) {
      if (t != expected) {
        throw IntegrityError("time index is not contiguous: gap at t=" + std::to_string(expected));
      }
      ++expected;
    }
  }
  const auto m = static_cast<std::size_t>(*times.rbegin() - t0 + 1);

  // Sort locations by id so the cube does not depend on row order.
  std::vector<std::size_t> order(locations.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return locations[a].id < locations[b].id; });
  std::vector<std::size_t> rank(locations.size());
  std::vector<Location> sorted_locations;
  for (std::size_t k = 0; k < order.size(); ++k) {
    rank[order[k]] = k;
    sorted_locations.push_back(locations[order[k]]);
  }

  const std::size_t n = sorted_locations.size();
  const std::size_t d = names.treatments.size();
  const std::size_t p = names.covariates.size();
  Field response(n, m);
  std::vector<Field> treatments(d, Field(n, m));
  std::vector<Field> covariates(p, Field(n, m));
  std::vector<std::size_t> seen(n * m, 0);

  for (const auto& r : rows) {
    const std::size_t loc = rank[r.location];
    const auto t = static_cast<std::size_t>(r.t - t0);
    if (seen[loc * m + t] != 0) {
      throw IntegrityError("line " + std::to_string(r.line) + ": duplicate row for location '" +
                           sorted_locations[loc].id + "' at t=" + std::to_string(r.t) + " (first at line " +
                           std::to_string(seen[loc * m + t]) + ")");
    }
    seen[loc * m + t] = r.line;
    if (r.values[0]) response.set(loc, t, *r.values[0]);
    for (std::size_t j = 0; j < d; ++j) {
      if (r.values[1 + j]) treatments[j].set(loc, t, *r.values[1 + j]);
    }
    for (std::size_t j = 0; j < p; ++j) {
      if (r.values[1 + d + j]) covariates[j].set(loc, t, *r.values[1 + d + j]);
    }
  }

  return DataCube(std::move(sorted_locations), m, std::move(response), std::move(treatments),
                  std::move(covariates), std::move(names), t0);
}

DataCube read_cube(const std::filesystem::path& path, const CubeSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_cube(buffer.str(), schema);
}

// ---------------------------------------------------------------------------
// Delimited text output

namespace {

void append_real(std::string& out, double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  std::string_view s(buf, static_cast<std::size_t>(ptr - buf));
  out.append(s);
  // Keep a decimal point so the value reads back as a real.
  if (s.find_first_of(".eE") == std::string_view::npos && s.find("inf") == std::string_view::npos) {
    out.append(".0");
  }
}

}  // namespace

std::string format_cube(const DataCube& cube, char delimiter) {
  std::string out;
  const auto& names = cube.names();
  out += "loc_id";
  for (const char* h : {"s1", "s2", "t"}) {
    out += delimiter;
    out += h;
  }
  out += delimiter;
  out += names.response;
  for (const auto& nm : names.treatments) (out += delimiter) += nm;
  for (const auto& nm : names.covariates) (out += delimiter) += nm;
  out += '\n';

  auto put = [&](const Field& f, std::size_t loc, std::size_t t) {
    out += delimiter;
    if (f.observed(loc, t)) append_real(out, f.value(loc, t));
  };

  for (std::size_t loc : cube.sorted_order()) {
    const auto& l = cube.location(loc);
    for (std::size_t t = 0; t < cube.m(); ++t) {
      out += l.id;
      out += delimiter;
      append_real(out, l.s1);
      out += delimiter;
      append_real(out, l.s2);
      out += delimiter;
      out += std::to_string(cube.time_origin() + static_cast<std::int64_t>(t));
      put(cube.response(), loc, t);
      for (const auto& f : cube.treatments()) put(f, loc, t);
      for (const auto& f : cube.covariates()) put(f, loc, t);
      out += '\n';
    }
  }
  return out;
}

void write_cube(const DataCube& cube, const std::filesystem::path& path, char delimiter) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << format_cube(cube, delimiter);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

// ---------------------------------------------------------------------------
// Lattice detection and axis exchange

namespace {

struct Axis {
  double origin = 0.0;
  double spacing = 1.0;
  std::size_t count = 1;
  std::vector<std::size_t> index;
};

std::optional<Axis> fit_axis(const std::vector<double>& coords) {
  std::vector<double> uniq(coords);
  std::sort(uniq.begin(), uniq.end());
  uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());

  Axis axis;
  axis.origin = uniq.front();
  if (uniq.size() > 1) {
    double spacing = uniq[1] - uniq[0];
    for (std::size_t k = 2; k < uniq.size(); ++k) spacing = std::min(spacing, uniq[k] - uniq[k - 1]);
    axis.spacing = spacing;
  }
  const double extent = uniq.back() - uniq.front();
  const double tol = 1e-9 * std::max({1.0, std::abs(axis.origin), extent});

  std::size_t max_index = 0;
  axis.index.reserve(coords.size());
  for (double c : coords) {
    const double k = (c - axis.origin) / axis.spacing;
    const double rounded = std::round(k);
    if (std::abs((k - rounded) * axis.spacing) > tol) return std::nullopt;
    const auto idx = static_cast<std::size_t>(rounded);
    max_index = std::max(max_index, idx);
    axis.index.push_back(idx);
  }
  axis.count = max_index + 1;
  return axis;
}

}  // namespace

std::optional<Lattice> detect_lattice(std::span<const Location> locations) {
  if (locations.empty()) return std::nullopt;
  std::vector<double> c1;
  std::vector<double> c2;
  for (const auto& l : locations) {
    c1.push_back(l.s1);
    c2.push_back(l.s2);
  }
  auto a1 = fit_axis(c1);
  auto a2 = fit_axis(c2);
  if (!a1 || !a2) return std::nullopt;

  Lattice lat;
  lat.origin1 = a1->origin;
  lat.origin2 = a2->origin;
  lat.spacing1 = a1->spacing;
  lat.spacing2 = a2->spacing;
  lat.n1 = a1->count;
  lat.n2 = a2->count;
  std::set<std::pair<std::size_t, std::size_t>> occupied;
  for (std::size_t k = 0; k < locations.size(); ++k) {
    lat.index.emplace_back(a1->index[k], a2->index[k]);
    if (!occupied.insert(lat.index.back()).second) return std::nullopt;
  }
  return lat;
}

namespace {

std::string transposed_id(std::size_t row, std::size_t col) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "r%06zu_c%06zu", row, col);
  return buf;
}

template <typename Map>
DataCube remap(const DataCube& cube, std::vector<Location> locations, std::size_t m, std::int64_t time_origin,
               Map source) {
  const std::size_t n = locations.size();
  auto move_field = [&](const Field& f) {
    Field out(n, m);
    for (std::size_t loc = 0; loc < n; ++loc) {
      for (std::size_t t = 0; t < m; ++t) {
        const auto [sl, st] = source(loc, t);
        if (f.observed(sl, st)) out.set(loc, t, f.value(sl, st));
      }
    }
    return out;
  };
  std::vector<Field> treatments;
  for (const auto& f : cube.treatments()) treatments.push_back(move_field(f));
  std::vector<Field> covariates;
  for (const auto& f : cube.covariates()) covariates.push_back(move_field(f));
  return DataCube(std::move(locations), m, move_field(cube.response()), std::move(treatments),
                  std::move(covariates), cube.names(), time_origin);
}

}  // namespace

DataCube transpose_axes(const DataCube& cube) {
  if (const AxisSwapRecord* rec = cube.swap_record()) {
    // Undo a previous exchange.
    const auto& original = rec->original_locations;
    const auto lat = detect_lattice(original);
    if (!lat || !lat->complete() || lat->n1 != cube.m() || cube.n() % lat->n2 != 0) {
      throw UnsupportedLayoutError("axis-swap record does not match the cube");
    }
    const std::size_t n2 = lat->n2;
    const std::size_t m = cube.n() / n2;
    return remap(cube, original, m, rec->original_time_origin, [&](std::size_t loc, std::size_t t) {
      const auto [i1, i2] = lat->index[loc];
      return std::pair{t * n2 + i2, i1};
    });
  }

  const auto lat = detect_lattice(cube.locations());
  if (!lat || !lat->complete()) {
    throw UnsupportedLayoutError("axis exchange requires locations on a complete regular grid");
  }
  std::vector<std::size_t> at(lat->n1 * lat->n2);
  for (std::size_t k = 0; k < cube.n(); ++k) at[lat->index[k].first * lat->n2 + lat->index[k].second] = k;

  const std::size_t n2 = lat->n2;
  std::vector<Location> locations;
  locations.reserve(cube.m() * n2);
  for (std::size_t t = 0; t < cube.m(); ++t) {
    for (std::size_t i2 = 0; i2 < n2; ++i2) {
      locations.push_back({transposed_id(t, i2),
                           static_cast<double>(cube.time_origin() + static_cast<std::int64_t>(t)),
                           lat->origin2 + static_cast<double>(i2) * lat->spacing2});
    }
  }
  DataCube out = remap(cube, std::move(locations), lat->n1, 1, [&](std::size_t loc, std::size_t t) {
    return std::pair{at[t * n2 + loc % n2], loc / n2};
  });
  return out.with_swap_record({cube.locations(), cube.time_origin()});
}

}  // namespace lscm
