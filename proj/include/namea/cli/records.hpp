#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "namea/config.hpp"
#include "namea/eval/harness.hpp"

namespace namea::cli {

/// One line of the append-only record file.
struct RunRecord {
  std::string command;
  AttackConfig config;
  std::string config_hash;
  std::string version;
  std::string status = "OK";  // OK or FAILED
  std::string error;
  std::vector<eval::EvalResult> results;
  std::map<std::string, double> timings;  // phase -> seconds
  nlohmann::json extra = nlohmann::json::object();  // command-specific tables
};

nlohmann::json to_json(const eval::EvalResult& r);
eval::EvalResult eval_result_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunRecord& r);
RunRecord run_record_from_json(const nlohmann::json& j);

void append_record(const std::filesystem::path& path, const RunRecord& record);
std::vector<RunRecord> read_records(const std::filesystem::path& path);

/// `<dir>/<stem>_s<seed>_<hash>.<ext>`, with `_1`, `_2`, ... appended before
/// the extension when the name is taken.
std::filesystem::path artifact_path(const std::filesystem::path& dir, const std::string& stem, std::uint64_t seed,
                                    const std::string& hash, const std::string& ext);

/// Rows are targets, columns are attacks (one per result).
void write_asr_csv(const std::filesystem::path& path, std::span<const eval::EvalResult> results);
void write_masked_csv(const std::filesystem::path& path, const eval::MaskedAccuracyTable& table);
void write_matrix_csv(const std::filesystem::path& path, std::span<const std::string> labels,
                      const std::vector<std::vector<double>>& matrix);

struct Series {
  std::string name;
  std::vector<double> y;
};
/// Minimal SVG line chart.
void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const double> x, std::span<const Series> series);

/// Build identification stamped into every record.
std::string version_tag();

}  // namespace namea::cli
