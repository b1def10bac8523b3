#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "isac/config.hpp"
#include "isac/episode.hpp"
#include "isac/hash.hpp"
#include "isac/outputs.hpp"
#include "isac/policy.hpp"

namespace isac {

/// Per-cell stream seed. Derived, not sequential, so changing the grid never
/// perturbs existing cells. Deliberately independent of method AND latency:
/// every controller at every latency with the same seed index faces the same
/// world draw, the same fading, the same delay-jitter quantiles and the same
/// measurement noise (common random numbers), so retention ratios and
/// cross-method gaps measure the delay effect rather than world luck.
inline std::uint64_t cell_seed(std::uint64_t master_seed, int seed_index) {
  return hash_seed(std::to_string(master_seed) + ":" + std::to_string(seed_index));
}

/// Evaluate one cell (deterministic policy mode).
inline EpisodeResult eval_cell(const SimConfig& cfg, Method method, double latency_ms,
                               int seed_index, const GaussianPolicy* policy) {
  return run_episode(cfg, method, latency_ms, seed_index, cell_seed(cfg.master_seed, seed_index),
                     policy, /*train_mode=*/false);
}

struct SweepSpec {
  std::vector<Method> methods;
  std::vector<double> latencies_ms;
  int seeds = 20;
};

inline SweepSpec sweep_spec_from_config(const SimConfig& cfg) {
  SweepSpec spec;
  for (const auto& name : cfg.sweep.methods) {
    auto m = method_from_string(name);
    if (!m) throw ConfigError("sweep: unknown method: " + name);
    spec.methods.push_back(*m);
  }
  spec.latencies_ms = cfg.sweep.latencies_ms;
  spec.seeds = cfg.sweep.seeds;
  return spec;
}

struct SweepResult {
  std::vector<RunRecord> records;
  SummaryTable summary;
};

/// Worker count: explicit argument wins, then the ISAC_THREADS environment
/// variable, then single-threaded.
inline int resolve_thread_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ISAC_THREADS")) {
    int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

/// Run every (method, latency, seed) cell and aggregate. Cells are
/// independent; with multiple workers they run in parallel and are stitched
/// back in deterministic cell order, so the output is identical regardless of
/// the worker count.
inline SweepResult run_sweep(const SimConfig& cfg, const SweepSpec& spec,
                             const std::map<Method, GaussianPolicy>& policies, int threads = 0) {
  // Fail fast: every learned method needs its checkpoint before any cell runs.
  for (Method m : spec.methods)
    if (method_is_learned(m) && !policies.count(m))
      throw ConfigError(std::string("sweep: missing checkpoint for method ") + method_name(m));

  struct Cell {
    Method method;
    double latency_ms;
    int seed_index;
  };
  std::vector<Cell> cells;
  for (Method m : spec.methods)
    for (double l : spec.latencies_ms)
      for (int s = 0; s < spec.seeds; ++s) cells.push_back({m, l, s});

  std::vector<std::vector<RunRecord>> slots(cells.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= cells.size() || failed.load()) return;
      const Cell& c = cells[i];
      try {
        const GaussianPolicy* policy = nullptr;
        if (method_is_learned(c.method)) policy = &policies.at(c.method);
        slots[i] = run_episode(cfg, c.method, c.latency_ms, c.seed_index,
                               cell_seed(cfg.master_seed, c.seed_index), policy,
                               /*train_mode=*/false)
                       .records;
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  int n_threads = resolve_thread_count(threads);
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SweepResult out;
  out.records.reserve(cells.size() * static_cast<std::size_t>(cfg.world.episode_steps));
  for (auto& slot : slots)
    for (auto& r : slot) out.records.push_back(std::move(r));

  std::vector<std::string> method_names;
  for (Method m : spec.methods) method_names.emplace_back(method_name(m));
  out.summary = summarize(out.records, method_names, spec.latencies_ms, cfg);
  return out;
}

}  // namespace isac
