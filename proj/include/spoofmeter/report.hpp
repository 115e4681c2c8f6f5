#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "spoofmeter/metrics.hpp"

namespace spoofmeter {

/// Canonical JSON; identical reports serialize to identical bytes.
std::string format_report(const EvaluationReport& report);
EvaluationReport parse_report(std::string_view json_text);
EvaluationReport load_report(const std::filesystem::path& path);

/// Aligned table, one row per report, HTER and AUC in percent. Two or more
/// reports add an "Average" row of unweighted column means.
std::string format_report_table(std::span<const EvaluationReport> reports);
std::string format_report_csv(std::span<const EvaluationReport> reports);

}  // namespace spoofmeter
