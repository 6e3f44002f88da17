#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lscm {

struct Location {
  std::string id;
  double s1 = 0.0;
  double s2 = 0.0;

  bool operator==(const Location&) const = default;
};

/**
 * @brief One variable observed on the n x m (location, time) grid.
 *
 * Missingness is tracked by an explicit mask. Unobserved cells always hold
 * 0.0 in the value array so that two fields with the same observations
 * compare equal.
 */
class Field {
 public:
  Field() = default;
  Field(std::size_t n, std::size_t m);

  [[nodiscard]] std::size_t n() const noexcept { return n_; }
  [[nodiscard]] std::size_t m() const noexcept { return m_; }
  [[nodiscard]] std::size_t cell(std::size_t loc, std::size_t t) const noexcept { return loc * m_ + t; }

  [[nodiscard]] bool observed(std::size_t loc, std::size_t t) const noexcept {
    return mask_[cell(loc, t)] != 0;
  }
  [[nodiscard]] double value(std::size_t loc, std::size_t t) const noexcept {
    return values_[cell(loc, t)];
  }
  [[nodiscard]] std::optional<double> get(std::size_t loc, std::size_t t) const;

  void set(std::size_t loc, std::size_t t, double v);
  void set_missing(std::size_t loc, std::size_t t);

  /// Flat row-major views (index = loc * m + t).
  [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
  [[nodiscard]] std::span<const std::uint8_t> mask() const noexcept { return mask_; }

  [[nodiscard]] std::size_t observed_count() const noexcept;

  bool operator==(const Field&) const = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

struct VariableNames {
  std::string response = "y";
  std::vector<std::string> treatments;
  std::vector<std::string> covariates;

  bool operator==(const VariableNames&) const = default;
};

/// What transpose_axes needs to undo itself exactly.
struct AxisSwapRecord {
  std::vector<Location> original_locations;
  std::int64_t original_time_origin = 1;
};

/**
 * @brief Multivariate spatio-temporal observations on fixed locations and
 * contiguous time indices.
 *
 * Immutable after construction. Time index k (0-based) corresponds to the
 * calendar label time_origin() + k.
 */
class DataCube {
 public:
  DataCube(std::vector<Location> locations, std::size_t m, Field response,
           std::vector<Field> treatments, std::vector<Field> covariates = {},
           VariableNames names = {}, std::int64_t time_origin = 1);

  [[nodiscard]] std::size_t n() const noexcept { return locations_.size(); }
  [[nodiscard]] std::size_t m() const noexcept { return m_; }
  [[nodiscard]] std::size_t d() const noexcept { return treatments_.size(); }
  [[nodiscard]] std::size_t p() const noexcept { return covariates_.size(); }
  [[nodiscard]] std::int64_t time_origin() const noexcept { return time_origin_; }

  [[nodiscard]] const std::vector<Location>& locations() const noexcept { return locations_; }
  [[nodiscard]] const Location& location(std::size_t i) const { return locations_.at(i); }

  [[nodiscard]] const Field& response() const noexcept { return response_; }
  [[nodiscard]] const Field& treatment(std::size_t j = 0) const { return treatments_.at(j); }
  [[nodiscard]] const Field& covariate(std::size_t j = 0) const { return covariates_.at(j); }
  [[nodiscard]] const std::vector<Field>& treatments() const noexcept { return treatments_; }
  [[nodiscard]] const std::vector<Field>& covariates() const noexcept { return covariates_; }
  [[nodiscard]] const VariableNames& names() const noexcept { return names_; }

  /// Index of the covariate called `name`; throws ConfigError if absent.
  [[nodiscard]] std::size_t covariate_index(const std::string& name) const;

  /// Location indices ordered by id. Every spatial reduction uses this order.
  [[nodiscard]] const std::vector<std::size_t>& sorted_order() const noexcept { return sorted_; }

  /// Copy with the response replaced. Shape must match.
  [[nodiscard]] DataCube with_response(Field response) const;

  [[nodiscard]] const AxisSwapRecord* swap_record() const noexcept { return swap_.get(); }
  [[nodiscard]] DataCube with_swap_record(AxisSwapRecord record) const;

  /// Compares the data and metadata. The axis-swap record is ignored.
  bool operator==(const DataCube& other) const;

 private:
  std::vector<Location> locations_;
  std::size_t m_;
  Field response_;
  std::vector<Field> treatments_;
  std::vector<Field> covariates_;
  VariableNames names_;
  std::int64_t time_origin_;
  std::vector<std::size_t> sorted_;
  std::shared_ptr<const AxisSwapRecord> swap_;
};

/// Column mapping for long-format delimited input.
struct CubeSchema {
  std::string loc_id = "loc_id";
  std::string s1 = "s1";
  std::string s2 = "s2";
  std::string t = "t";
  std::string response = "y";
  /// Empty: every header column named x<k> in order.
  std::vector<std::string> treatments;
  /// Empty: every header column named w<k> in order.
  std::vector<std::string> covariates;
  char delimiter = ',';
};

/**
 * @brief Read a long-format delimited file into a DataCube.
 *
 * Locations are sorted by id, so the row order of the file does not matter.
 * (id, t) pairs absent from the file become missing cells; empty fields and
 * "NA" are missing values.
 *
 * @throws ParseError on malformed rows, IntegrityError on duplicate keys,
 *         non-contiguous time indices or inconsistent coordinates.
 */
[[nodiscard]] DataCube read_cube(const std::filesystem::path& path, const CubeSchema& schema = {});
[[nodiscard]] DataCube parse_cube(std::string_view text, const CubeSchema& schema = {});

/// Write every (location, time) cell as one row; missing values are empty fields.
void write_cube(const DataCube& cube, const std::filesystem::path& path, char delimiter = ',');
[[nodiscard]] std::string format_cube(const DataCube& cube, char delimiter = ',');

/// Integer lattice coordinates of locations lying on a regular grid.
struct Lattice {
  double origin1 = 0.0;
  double origin2 = 0.0;
  double spacing1 = 1.0;
  double spacing2 = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
  /// Per location, (i1, i2) with s = origin + i * spacing.
  std::vector<std::pair<std::size_t, std::size_t>> index;

  [[nodiscard]] bool complete() const noexcept { return n1 * n2 == index.size(); }
};

/// Lattice underlying the locations, or nullopt if they are not on one.
[[nodiscard]] std::optional<Lattice> detect_lattice(std::span<const Location> locations);

/**
 * @brief Exchange the temporal axis with the first spatial axis.
 *
 * Requires a complete regular grid. The result has one location per
 * (time, s2) pair and one time step per s1 grid value. Applying the
 * operation to its own output restores the original cube exactly.
 *
 * @throws UnsupportedLayoutError for scattered or incomplete layouts.
 */
[[nodiscard]] DataCube transpose_axes(const DataCube& cube);

}  // namespace lscm
