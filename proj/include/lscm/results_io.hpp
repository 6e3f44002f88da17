#pragma once

#include <filesystem>
#include <string>

#include "lscm/estimators.hpp"
#include "lscm/resampling.hpp"

namespace lscm {

/// Schema tag written as the top-level "schema_version" of every result document.
inline constexpr const char* kResultSchemaVersion = "lscm-result/1";

/**
 * @name Result documents
 *
 * JSON with a stable field order. Doubles are written in shortest
 * round-trip form, so reading a document back yields an equal object.
 * Non-finite values are written as null and read back as NaN.
 */
///@{
[[nodiscard]] std::string format_results(const EffectEstimate& estimate);
[[nodiscard]] std::string format_results(const TestResult& result);
void write_results(const EffectEstimate& estimate, const std::filesystem::path& path);
void write_results(const TestResult& result, const std::filesystem::path& path);

[[nodiscard]] EffectEstimate parse_effect_estimate(const std::string& text);
[[nodiscard]] TestResult parse_test_result(const std::string& text);
[[nodiscard]] EffectEstimate read_effect_estimate(const std::filesystem::path& path);
[[nodiscard]] TestResult read_test_result(const std::filesystem::path& path);
///@}

/// Write text to a file, replacing it. Throws IoError.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace lscm
