#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isac/common.hpp"
#include "isac/config.hpp"
#include "isac/episode.hpp"
#include "isac/train.hpp"

namespace isac {

/// Median with the even-count convention "average of the two middle values".
inline double median_of(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median_of: empty sample");
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// RFC 4180 field quoting: only fields containing a comma, quote or newline
/// are wrapped, with embedded quotes doubled.
inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline constexpr const char* kRunsCsvHeader =
    "method,latency_ms,seed,step,sum_rate_bps,mse_m2,total_power_w,violation,reward";

inline std::string runs_csv_text(const std::vector<RunRecord>& records) {
  std::string out = kRunsCsvHeader;
  out += '\n';
  for (const auto& r : records) {
    out += csv_escape(r.method);
    out += ',';
    out += format_double(r.latency_ms);
    out += ',';
    out += std::to_string(r.seed);
    out += ',';
    out += std::to_string(r.step);
    out += ',';
    out += format_double(r.sum_rate_bps);
    out += ',';
    out += format_double(r.mse_m2);
    out += ',';
    out += format_double(r.total_power_w);
    out += ',';
    out += r.violation ? "1" : "0";
    out += ',';
    out += format_double(r.reward);
    out += '\n';
  }
  return out;
}

struct SummaryCell {
  std::string method;
  double latency_ms = 0.0;
  double median_sum_rate_bps = 0.0;
  double median_mse_m2 = 0.0;
  double median_power_ratio = 0.0;
  double violation_probability = 0.0;
  double median_reward = 0.0;
  double throughput_retention = 0.0;
  double normalized_sensing_error = 0.0;
};

struct SummaryTable {
  std::vector<SummaryCell> cells;

  const SummaryCell* find(const std::string& method, double latency_ms) const {
    for (const auto& c : cells)
      if (c.method == method && c.latency_ms == latency_ms) return &c;
    return nullptr;
  }
};

/// Aggregate step records into per-(method, latency) medians. Retention and
/// normalized sensing error divide by the same method's latency-0 cell, so
/// they equal 1 there by construction.
inline SummaryTable summarize(const std::vector<RunRecord>& records,
                              const std::vector<std::string>& methods,
                              const std::vector<double>& latencies, const SimConfig& cfg) {
  const double power_denom = static_cast<double>(cfg.world.n_bs) * cfg.power.p_max_w;
  SummaryTable table;
  for (const auto& method : methods) {
    double base_rate = std::numeric_limits<double>::quiet_NaN();
    double base_mse = std::numeric_limits<double>::quiet_NaN();
    for (double latency : latencies) {
      std::vector<double> rate, mse, power, rew;
      long long viol = 0, total = 0;
      for (const auto& r : records) {
        if (r.method != method || r.latency_ms != latency) continue;
        rate.push_back(r.sum_rate_bps);
        mse.push_back(r.mse_m2);
        power.push_back(r.total_power_w / power_denom);
        rew.push_back(r.reward);
        viol += r.violation ? 1 : 0;
        ++total;
      }
      if (total == 0)
        throw std::invalid_argument("summarize: no records for " + method + " at " +
                                    format_double(latency) + " ms");
      SummaryCell cell;
      cell.method = method;
      cell.latency_ms = latency;
      cell.median_sum_rate_bps = median_of(rate);
      cell.median_mse_m2 = median_of(mse);
      cell.median_power_ratio = median_of(power);
      cell.violation_probability = static_cast<double>(viol) / static_cast<double>(total);
      cell.median_reward = median_of(rew);
      if (latency == 0.0) {
        base_rate = cell.median_sum_rate_bps;
        base_mse = cell.median_mse_m2;
      }
      cell.throughput_retention = cell.median_sum_rate_bps / base_rate;
      cell.normalized_sensing_error = cell.median_mse_m2 / base_mse;
      table.cells.push_back(cell);
    }
  }
  return table;
}

inline nlohmann::json summary_to_json(const SummaryTable& table) {
  nlohmann::json j;
  for (const auto& c : table.cells) {
    nlohmann::json cell;
    cell["median_sum_rate_bps"] = c.median_sum_rate_bps;
    cell["median_mse_m2"] = c.median_mse_m2;
    cell["median_power_ratio"] = c.median_power_ratio;
    cell["violation_probability"] = c.violation_probability;
    cell["median_reward"] = c.median_reward;
    cell["throughput_retention"] = c.throughput_retention;
    cell["normalized_sensing_error"] = c.normalized_sensing_error;
    j[c.method][format_double(c.latency_ms)] = cell;
  }
  return j;
}

inline SummaryTable summary_from_json(const nlohmann::json& j) {
  SummaryTable table;
  for (const auto& m : j.items()) {
    for (const auto& l : m.value().items()) {
      SummaryCell c;
      c.method = m.key();
      c.latency_ms = std::stod(l.key());
      const auto& cell = l.value();
      c.median_sum_rate_bps = cell.at("median_sum_rate_bps").get<double>();
      c.median_mse_m2 = cell.at("median_mse_m2").get<double>();
      c.median_power_ratio = cell.at("median_power_ratio").get<double>();
      c.violation_probability = cell.at("violation_probability").get<double>();
      c.median_reward = cell.at("median_reward").get<double>();
      c.throughput_retention = cell.at("throughput_retention").get<double>();
      c.normalized_sensing_error = cell.at("normalized_sensing_error").get<double>();
      table.cells.push_back(c);
    }
  }
  // JSON object order is lexicographic; restore numeric latency order per method.
  std::stable_sort(table.cells.begin(), table.cells.end(), [](const auto& a, const auto& b) {
    if (a.method != b.method) return a.method < b.method;
    return a.latency_ms < b.latency_ms;
  });
  return table;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Human-readable summary table (what `report` prints).
inline std::string summary_text(const SummaryTable& table) {
  std::ostringstream os;
  os << "method          latency_ms  med_rate_mbps  med_mse_m2  retention  norm_err  "
        "viol_prob  med_reward\n";
  char line[256];
  for (const auto& c : table.cells) {
    std::snprintf(line, sizeof(line),
                  "%-15s %10.0f %14.3f %11.3f %10.3f %9.3f %10.4f %11.4f\n", c.method.c_str(),
                  c.latency_ms, c.median_sum_rate_bps / 1e6, c.median_mse_m2,
                  c.throughput_retention, c.normalized_sensing_error, c.violation_probability,
                  c.median_reward);
    os << line;
  }
  return os.str();
}

/// Long-form plot-ready CSVs derived from the summary.
inline std::string retention_csv_text(const SummaryTable& table) {
  std::string out = "method,latency_ms,throughput_retention,normalized_sensing_error\n";
  for (const auto& c : table.cells) {
    out += csv_escape(c.method);
    out += ',';
    out += format_double(c.latency_ms);
    out += ',';
    out += format_double(c.throughput_retention);
    out += ',';
    out += format_double(c.normalized_sensing_error);
    out += '\n';
  }
  return out;
}

inline std::string violation_csv_text(const SummaryTable& table) {
  std::string out = "method,latency_ms,violation_probability\n";
  for (const auto& c : table.cells) {
    out += csv_escape(c.method);
    out += ',';
    out += format_double(c.latency_ms);
    out += ',';
    out += format_double(c.violation_probability);
    out += '\n';
  }
  return out;
}

inline std::string pareto_csv_text(const SummaryTable& table, double latency_ms) {
  std::string out = "method,median_sum_rate_bps,median_mse_m2\n";
  for (const auto& c : table.cells) {
    if (c.latency_ms != latency_ms) continue;
    out += csv_escape(c.method);
    out += ',';
    out += format_double(c.median_sum_rate_bps);
    out += ',';
    out += format_double(c.median_mse_m2);
    out += '\n';
  }
  return out;
}

/// Write the four sweep artifacts. Identical inputs produce identical bytes.
inline void emit_outputs(const std::vector<RunRecord>& records, const SummaryTable& table,
                         const SimConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_text_file(out_dir / "runs.csv", runs_csv_text(records));
  write_text_file(out_dir / "summary.json", summary_to_json(table).dump(2) + "\n");
  write_text_file(out_dir / "pareto_50ms.csv", pareto_csv_text(table, 50.0));
  nlohmann::json cj = config_to_json(cfg);
  cj["content_hash"] = config_content_hash(cfg);
  write_text_file(out_dir / "config_resolved.json", cj.dump(2) + "\n");
}

/// Training-curve CSV: one row per update.
inline std::string train_curve_csv_text(const std::vector<UpdateRow>& curve) {
  std::string out =
      "update,env_steps,mean_episode_reward,policy_loss,value_loss,entropy,approx_kl,"
      "clip_fraction\n";
  for (const auto& r : curve) {
    out += std::to_string(r.update);
    out += ',';
    out += std::to_string(r.env_steps);
    out += ',';
    out += format_double(r.mean_episode_reward);
    out += ',';
    out += format_double(r.stats.policy_loss);
    out += ',';
    out += format_double(r.stats.value_loss);
    out += ',';
    out += format_double(r.stats.entropy);
    out += ',';
    out += format_double(r.stats.approx_kl);
    out += ',';
    out += format_double(r.stats.clip_fraction);
    out += '\n';
  }
  return out;
}

inline std::string episode_rewards_csv_text(const std::vector<double>& rewards) {
  std::string out = "episode,reward\n";
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    out += format_double(rewards[i]);
    out += '\n';
  }
  return out;
}

}  // namespace isac
