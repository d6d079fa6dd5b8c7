#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "intentsynth/harness.hpp"

namespace intentsynth {

enum class ReportFormat { csv, json, markdown };

ReportFormat parse_report_format(std::string_view name);

// Percent with two decimals: mean 0.9559, std 0.0090 -> "95.59±0.90".
std::string format_cell(const AggregateScore &score);

// Rows are train sets, columns test sets. Failed cells read "ERR".
std::string matrix_to_csv(const ResultMatrix &matrix);
std::string matrix_to_markdown(const ResultMatrix &matrix);

// Six rows (gold) by six columns (predicted), canonical order, with header.
std::string confusion_to_csv(const ConfusionMatrix &confusion);

// Full precision, no timestamps: identical matrices give identical bytes.
nlohmann::ordered_json matrix_to_json(const ResultMatrix &matrix);
ResultMatrix matrix_from_json(const nlohmann::json &j);

// Writes matrix.csv / matrix.json / matrix.md plus confusion/<train>__<test>.csv
// (with csv) into dir. Returns the files written.
std::vector<std::filesystem::path> emit_report(const ResultMatrix &matrix, const std::set<ReportFormat> &formats,
                                               const std::filesystem::path &dir);

} // namespace intentsynth
