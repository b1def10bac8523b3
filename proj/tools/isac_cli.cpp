// Command-line front end: train / eval / sweep / report.
//
// Exit codes: 0 success, 1 validation error (bad config, bad arguments,
// missing inputs), 2 runtime failure.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isac/isac.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

std::vector<std::string> split_csv_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> parse_latency_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_csv_list(s)) {
    std::size_t pos = 0;
    double v = std::stod(tok, &pos);
    if (pos != tok.size()) throw isac::ConfigError("invalid latency value: " + tok);
    if (v < 0) throw isac::ConfigError("latency must be >= 0, got: " + tok);
    out.push_back(v);
  }
  if (out.empty()) throw isac::ConfigError("empty latency list");
  return out;
}

std::vector<isac::Method> parse_method_list(const std::string& s) {
  std::vector<isac::Method> out;
  for (const auto& tok : split_csv_list(s)) {
    auto m = isac::method_from_string(tok);
    if (!m) throw isac::ConfigError("unknown method: " + tok);
    out.push_back(*m);
  }
  if (out.empty()) throw isac::ConfigError("empty method list");
  return out;
}

fs::path checkpoint_path(const fs::path& dir, isac::Method m) {
  return dir / (std::string(isac::method_name(m)) + ".json");
}

int cmd_train(const std::string& config_path, const std::string& method_name_arg,
              const std::string& out_dir, int train_seed) {
  isac::SimConfig cfg = isac::load_config(config_path);
  auto method = isac::method_from_string(method_name_arg);
  if (!method) throw isac::ConfigError("unknown method: " + method_name_arg);
  if (!isac::method_is_learned(*method))
    throw isac::ConfigError("method has no trainable parameters: " + method_name_arg);

  fs::path out(out_dir);
  fs::path ckpt_dir = out / "checkpoints";
  fs::create_directories(ckpt_dir);

  const std::string hash = isac::config_content_hash(cfg);
  std::printf("training %s (config %s, train seed %d, %d updates)\n",
              isac::method_name(*method), hash.substr(0, 12).c_str(), train_seed,
              cfg.train.updates);

  auto hook = [&](const isac::UpdateRow& row, const isac::GaussianPolicy& policy) {
    std::printf("update %3d  steps %7lld  reward %9.3f  pi %8.4f  vf %9.4f  kl %7.4f\n",
                row.update, row.env_steps, row.mean_episode_reward, row.stats.policy_loss,
                row.stats.value_loss, row.stats.approx_kl);
    std::fflush(stdout);
    if (row.update % cfg.train.checkpoint_every == 0) {
      isac::Checkpoint ck{policy, hash, isac::method_name(*method), row.env_steps};
      isac::save_checkpoint(
          ck, (ckpt_dir / (std::string(isac::method_name(*method)) + "_update" +
                           std::to_string(row.update) + ".json"))
                  .string());
    }
  };

  isac::TrainResult res = isac::train_policy(cfg, *method, train_seed, hook);
  if (res.aborted)
    std::fprintf(stderr, "warning: non-finite loss; stopped early with last good parameters\n");

  isac::save_checkpoint(res.checkpoint, checkpoint_path(ckpt_dir, *method).string());
  isac::write_text_file(out / ("train_" + std::string(isac::method_name(*method)) + ".csv"),
                        isac::train_curve_csv_text(res.curve));
  isac::write_text_file(
      out / ("train_" + std::string(isac::method_name(*method)) + "_episodes.csv"),
      isac::episode_rewards_csv_text(res.episode_rewards));
  std::printf("wrote %s\n", checkpoint_path(ckpt_dir, *method).string().c_str());
  return kExitOk;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_file, double latency_ms,
             int seeds) {
  isac::SimConfig cfg = isac::load_config(config_path);
  if (latency_ms < 0) throw isac::ConfigError("latency must be >= 0");
  if (seeds < 1) throw isac::ConfigError("seeds must be >= 1");

  isac::Checkpoint ck = isac::load_checkpoint(checkpoint_file);
  if (ck.config_hash != isac::config_content_hash(cfg))
    throw isac::ConfigError("checkpoint was trained under a different config (hash mismatch)");
  auto method = isac::method_from_string(ck.method);
  if (!method) throw isac::ConfigError("checkpoint has unknown method: " + ck.method);

  std::printf("evaluating %s at %.0f ms over %d seeds\n", ck.method.c_str(), latency_ms, seeds);
  std::printf("seed  ep_reward  mean_rate_mbps  mean_mse_m2  viol_frac\n");
  std::vector<double> rewards;
  for (int s = 0; s < seeds; ++s) {
    isac::EpisodeResult er = isac::eval_cell(cfg, *method, latency_ms, s, &ck.policy);
    double rate = 0.0, mse = 0.0, viol = 0.0;
    for (const auto& r : er.records) {
      rate += r.sum_rate_bps;
      mse += r.mse_m2;
      viol += r.violation ? 1.0 : 0.0;
    }
    double n = static_cast<double>(er.records.size());
    std::printf("%4d %10.3f %15.3f %12.3f %10.3f\n", s, er.episode_reward, rate / n / 1e6,
                mse / n, viol / n);
    rewards.push_back(er.episode_reward);
  }
  std::printf("median episode reward: %.4f\n", isac::median_of(rewards));
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::optional<std::string>& latencies_arg,
              const std::optional<std::string>& methods_arg, std::optional<int> seeds_arg,
              const std::string& out_dir, const std::optional<std::string>& checkpoints_arg,
              int threads) {
  isac::SimConfig cfg = isac::load_config(config_path);
  isac::SweepSpec spec = isac::sweep_spec_from_config(cfg);
  if (latencies_arg) spec.latencies_ms = parse_latency_list(*latencies_arg);
  if (methods_arg) spec.methods = parse_method_list(*methods_arg);
  if (seeds_arg) {
    if (*seeds_arg < 1) throw isac::ConfigError("seeds must be >= 1");
    spec.seeds = *seeds_arg;
  }

  fs::path out(out_dir);
  fs::path ckpt_dir = checkpoints_arg ? fs::path(*checkpoints_arg) : out / "checkpoints";

  // Fail fast with the complete list of missing checkpoints.
  std::vector<std::string> missing;
  std::map<isac::Method, isac::GaussianPolicy> policies;
  const std::string hash = isac::config_content_hash(cfg);
  for (isac::Method m : spec.methods) {
    if (!isac::method_is_learned(m)) continue;
    fs::path p = checkpoint_path(ckpt_dir, m);
    if (!fs::exists(p)) {
      missing.push_back(std::string(isac::method_name(m)) + " -> " + p.string());
      continue;
    }
    isac::Checkpoint ck = isac::load_checkpoint(p.string());
    if (ck.config_hash != hash)
      throw isac::ConfigError("checkpoint " + p.string() +
                              " was trained under a different config (hash mismatch)");
    policies.emplace(m, std::move(ck.policy));
  }
  if (!missing.empty()) {
    std::string msg = "missing checkpoints:";
    for (const auto& m : missing) msg += "\n  " + m;
    throw isac::ConfigError(msg);
  }

  std::printf("sweep: %zu methods x %zu latencies x %d seeds\n", spec.methods.size(),
              spec.latencies_ms.size(), spec.seeds);
  std::fflush(stdout);
  isac::SweepResult res = isac::run_sweep(cfg, spec, policies, threads);
  isac::emit_outputs(res.records, res.summary, cfg, out);
  std::fputs(isac::summary_text(res.summary).c_str(), stdout);
  std::printf("wrote %s\n", (out / "runs.csv").string().c_str());
  return kExitOk;
}

int cmd_report(const std::string& in_dir) {
  fs::path in(in_dir);
  fs::path summary_path = in / "summary.json";
  std::ifstream f(summary_path);
  if (!f) throw isac::ConfigError("cannot open " + summary_path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw isac::ConfigError("invalid summary.json: " + std::string(e.what()));
  }
  isac::SummaryTable table = isac::summary_from_json(j);
  std::fputs(isac::summary_text(table).c_str(), stdout);
  isac::write_text_file(in / "retention_vs_latency.csv", isac::retention_csv_text(table));
  isac::write_text_file(in / "violation_vs_latency.csv", isac::violation_csv_text(table));
  std::printf("wrote %s and %s\n", (in / "retention_vs_latency.csv").string().c_str(),
              (in / "violation_vs_latency.csv").string().c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latency-robust ISAC simulator and controller"};
  app.require_subcommand(1);

  std::string config_path, method_arg, out_dir, checkpoint_file, in_dir;
  std::optional<std::string> latencies_arg, methods_arg, checkpoints_arg;
  std::optional<int> seeds_opt;
  double latency_ms = 0.0;
  int seeds = 20, train_seed = 0, threads = 0;

  auto* train = app.add_subcommand("train", "Train a learned method and write its checkpoint");
  train->add_option("--config", config_path, "Config JSON file")->required();
  train->add_option("--method", method_arg, "dt_ppo | delayed_ppo | unaware_ppo")->required();
  train->add_option("--out", out_dir, "Output directory")->required();
  train->add_option("--train-seed", train_seed, "Training seed index (default 0)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint at one latency");
  eval->add_option("--config", config_path, "Config JSON file")->required();
  eval->add_option("--checkpoint", checkpoint_file, "Checkpoint JSON file")->required();
  eval->add_option("--latency", latency_ms, "Telemetry latency in ms")->required();
  eval->add_option("--seeds", seeds, "Number of evaluation seeds")->required();

  auto* sweep = app.add_subcommand("sweep", "Evaluate methods across the latency grid");
  sweep->add_option("--config", config_path, "Config JSON file")->required();
  sweep->add_option("--latencies", latencies_arg, "Comma-separated latency list in ms");
  sweep->add_option("--methods", methods_arg, "Comma-separated method list");
  sweep->add_option("--seeds", seeds_opt, "Seeds per cell");
  sweep->add_option("--out", out_dir, "Output directory")->required();
  sweep->add_option("--checkpoints", checkpoints_arg,
                    "Checkpoint directory (default: <out>/checkpoints)");
  sweep->add_option("--threads", threads, "Worker threads (default: ISAC_THREADS or 1)");

  auto* report = app.add_subcommand("report", "Print a summary and write plot-ready CSVs");
  report->add_option("--in", in_dir, "Directory containing summary.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, method_arg, out_dir, train_seed);
    if (eval->parsed()) return cmd_eval(config_path, checkpoint_file, latency_ms, seeds);
    if (sweep->parsed())
      return cmd_sweep(config_path, latencies_arg, methods_arg, seeds_opt, out_dir,
                       checkpoints_arg, threads);
    if (report->parsed()) return cmd_report(in_dir);
  } catch (const isac::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitValidation;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitValidation;
}
