#include "namea/cli/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/fmt/fmt.h>

#include "namea/cli/config_io.hpp"
#include "namea/errors.hpp"

#ifndef NAMEA_VERSION
#define NAMEA_VERSION "unknown"
#endif

namespace namea::cli {

using nlohmann::json;

json to_json(const eval::EvalResult& r) {
  return json{{"attack_id", r.attack_id}, {"asr", r.asr},   {"family_asr", r.family_asr},
              {"samples", r.samples},     {"seed", r.seed}, {"wall_seconds", r.wall_seconds},
              {"config", config_to_json(r.config)}};
}

eval::EvalResult eval_result_from_json(const json& j) {
  eval::EvalResult r;
  r.attack_id = j.at("attack_id").get<std::string>();
  r.asr = j.at("asr").get<std::map<std::string, double>>();
  r.family_asr = j.at("family_asr").get<std::map<std::string, double>>();
  r.samples = j.at("samples").get<std::size_t>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.wall_seconds = j.at("wall_seconds").get<double>();
  r.config = config_from_json(j.at("config"));
  return r;
}

json to_json(const RunRecord& r) {
  json results = json::array();
  for (const auto& e : r.results) results.push_back(to_json(e));
  return json{{"command", r.command}, {"config", config_to_json(r.config)},
              {"config_hash", r.config_hash}, {"version", r.version},
              {"status", r.status},   {"error", r.error},
              {"results", results},   {"timings", r.timings},
              {"extra", r.extra}};
}

RunRecord run_record_from_json(const json& j) {
  RunRecord r;
  r.command = j.at("command").get<std::string>();
  r.config = config_from_json(j.at("config"));
  r.config_hash = j.at("config_hash").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.status = j.at("status").get<std::string>();
  r.error = j.at("error").get<std::string>();
  for (const auto& e : j.at("results")) r.results.push_back(eval_result_from_json(e));
  r.timings = j.at("timings").get<std::map<std::string, double>>();
  r.extra = j.at("extra");
  return r;
}

void append_record(const std::filesystem::path& path, const RunRecord& record) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::app);
  if (!os) throw UsageError("cannot append to " + path.string());
  os << to_json(record).dump() << "\n";
}

std::vector<RunRecord> read_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot read " + path.string());
  std::vector<RunRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(run_record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw UsageError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::filesystem::path artifact_path(const std::filesystem::path& dir, const std::string& stem, std::uint64_t seed,
                                    const std::string& hash, const std::string& ext) {
  std::filesystem::create_directories(dir);
  const std::string base = fmt::format("{}_s{}_{}", stem, seed, hash);
  std::filesystem::path p = dir / (base + "." + ext);
  for (int i = 1; std::filesystem::exists(p); ++i) p = dir / fmt::format("{}_{}.{}", base, i, ext);
  return p;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw UsageError("cannot write " + path.string());
  return os;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

void write_asr_csv(const std::filesystem::path& path, std::span<const eval::EvalResult> results) {
  std::vector<std::string> targets;
  for (const auto& r : results)
    for (const auto& [t, v] : r.asr)
      if (std::find(targets.begin(), targets.end(), t) == targets.end()) targets.push_back(t);
  auto os = open_out(path);
  os << "target";
  for (const auto& r : results) os << "," << csv_field(r.attack_id);
  os << "\n";
  for (const auto& t : targets) {
    os << csv_field(t);
    for (const auto& r : results) {
      const auto it = r.asr.find(t);
      os << ",";
      if (it != r.asr.end()) os << fmt::format("{:.4f}", it->second);
    }
    os << "\n";
  }
  for (const std::string fam : {"CNN", "VIT", "ALL"}) {
    os << "mean_" << fam;
    for (const auto& r : results) {
      const auto it = r.family_asr.find(fam);
      os << ",";
      if (it != r.family_asr.end()) os << fmt::format("{:.4f}", it->second);
    }
    os << "\n";
  }
}

void write_masked_csv(const std::filesystem::path& path, const eval::MaskedAccuracyTable& table) {
  auto os = open_out(path);
  os << "ratio";
  for (const auto& t : table.targets) os << "," << csv_field(t);
  os << "\n0";
  for (double c : table.clean) os << fmt::format(",{:.4f}", c);
  os << "\n";
  for (std::size_t r = 0; r < table.ratios.size(); ++r) {
    os << fmt::format("{:g}", table.ratios[r]);
    for (double a : table.accuracy[r]) os << fmt::format(",{:.4f}", a);
    os << "\n";
  }
}

void write_matrix_csv(const std::filesystem::path& path, std::span<const std::string> labels,
                      const std::vector<std::vector<double>>& matrix) {
  auto os = open_out(path);
  os << "model";
  for (const auto& l : labels) os << "," << csv_field(l);
  os << "\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    os << csv_field(labels[i]);
    for (double v : matrix[i]) os << fmt::format(",{:.4f}", v);
    os << "\n";
  }
}

void write_line_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, std::span<const double> x, std::span<const Series> series) {
  constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 60;
  double xmin = x.empty() ? 0 : *std::min_element(x.begin(), x.end());
  double xmax = x.empty() ? 1 : *std::max_element(x.begin(), x.end());
  double ymin = 0.0, ymax = 1.0;
  for (const auto& s : series)
    for (double v : s.y) {
      ymin = std::min(ymin, v);
      ymax = std::max(ymax, v);
    }
  if (xmax == xmin) xmax = xmin + 1;
  const auto px = [&](double v) { return L + (v - xmin) / (xmax - xmin) * (W - L - R); };
  const auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  auto os = open_out(path);
  os << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)", W, H) << "\n";
  os << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", W, H) << "\n";
  os << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)", (W - R + L) / 2, xml_escape(title)) << "\n";
  os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", L, H - B, W - R, H - B) << "\n";
  os << fmt::format(R"(<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>)", L, T, L, H - B) << "\n";
  for (int i = 0; i <= 5; ++i) {
    const double yv = ymin + (ymax - ymin) * i / 5.0, xv = xmin + (xmax - xmin) * i / 5.0;
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="end">{:.2f}</text>)", L - 6, py(yv) + 4, yv) << "\n";
    os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{:.2f}</text>)", px(xv), H - B + 18, xv) << "\n";
  }
  os << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", (W - R + L) / 2, H - 15, xml_escape(x_label)) << "\n";
  os << fmt::format(R"svg(<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">{}</text>)svg", (H - B + T) / 2,
                    (H - B + T) / 2, xml_escape(y_label))
     << "\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % std::size(colors)];
    std::string pts;
    for (std::size_t i = 0; i < std::min(x.size(), series[s].y.size()); ++i) {
      pts += fmt::format("{:.1f},{:.1f} ", px(x[i]), py(series[s].y[i]));
    }
    os << fmt::format(R"(<polyline fill="none" stroke="{}" stroke-width="2" points="{}"/>)", color, pts) << "\n";
    os << fmt::format(R"(<text x="{}" y="{}" fill="{}">{}</text>)", W - R + 10, T + 16 * static_cast<double>(s + 1), color,
                      xml_escape(series[s].name))
       << "\n";
  }
  os << "</svg>\n";
}

std::string version_tag() { return NAMEA_VERSION; }

}  // namespace namea::cli
