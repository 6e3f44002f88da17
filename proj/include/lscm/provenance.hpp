#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace lscm {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// Where a result came from. Written with every result document.
struct Provenance {
  std::optional<std::uint64_t> seed;
  std::string scheme;
  /// Hex digest of the effective configuration (see config_hash).
  std::string config_hash;

  bool operator==(const Provenance&) const = default;
};

/// 64-bit FNV-1a digest of `canonical`, as 16 lowercase hex digits.
[[nodiscard]] std::string config_hash(std::string_view canonical);

}  // namespace lscm
