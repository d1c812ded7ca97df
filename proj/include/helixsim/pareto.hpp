#pragma once

#include <optional>
#include <vector>

#include "helixsim/latency.hpp"
#include "helixsim/types.hpp"

namespace helixsim {

// What to enumerate: which strategies, which pool sizes, which batch sizes.
struct SearchSpace {
  std::vector<Strategy> strategies;
  std::vector<i64> gpu_counts;
  std::vector<i64> batch_sizes;
  bool hopb = true;
};

// All valid configurations for one strategy at exactly n total GPUs, in
// deterministic order (ascending tpa, then kvp, tpf, ep, pp). Helix fixes
// pp=1 and crosses attention splits (tpa*kvp = n, tpa <= KV heads) with FFN
// splits (tpf*ep = n); TP is the single all-tensor-parallel layout; TP_PP
// adds pipeline depth (pp >= 2; pp = 1 is plain TP); MedhaKVP crosses KV
// splits with pipeline depth at tpf = tpa; EP_DPAttention crosses expert
// splits with pipeline depth at tpa = kvp = 1.
std::vector<ParallelismConfig> enumerate_configs(Strategy strategy, i64 n,
                                                 const ModelSpec& model,
                                                 const HardwareSpec& hw);

// Cross product over the whole space, validity-filtered, deterministic order:
// strategy enum order, then GPU count ascending, then the per-strategy order.
std::vector<ParallelismConfig> enumerate_space(const SearchSpace& space,
                                               const ModelSpec& model,
                                               const HardwareSpec& hw);

// Evaluate every (config, batch) pair: drop points whose weights plus KV
// residency exceed per-GPU DRAM, keep the rest with both throughput metrics.
// Deterministic regardless of thread count (HELIXSIM_THREADS caps workers).
std::vector<ParetoPoint> evaluate_space(const SearchSpace& space, const ModelSpec& model,
                                        const HardwareSpec& hw, i64 kv_seq_len);

// Non-dominated subset under (tokens/s/user, tokens/s/GPU), both maximized.
// A point survives unless some other point is >= on both metrics and > on at
// least one. Among metric ties the survivor is the one with fewer GPUs, then
// lexicographically smallest (strategy, tpa, kvp, tpf, ep, pp, batch). Result
// is sorted by descending tokens/s/user.
std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points);

// Largest batch whose decode step stays within latency_budget seconds, or 0
// if even batch 1 misses it. Step latency grows monotonically with batch, so
// doubling + bisection suffices.
i64 batch_scalability(const ParallelismConfig& cfg, const ModelSpec& model,
                      const HardwareSpec& hw, i64 kv_seq_len, double latency_budget,
                      bool hopb, i64 max_batch = 1 << 20);

enum class FrontierOverlap { None, Partial, Full };

// How frontier A compares against frontier B, interpolating each frontier
// piecewise-linearly in log-log space between its knots.
struct FrontierComparison {
  double max_interactivity_ratio;              // best A user rate / best B user rate
  double throughput_ratio_at_matched_interactivity;  // sup over shared user range
  double interactivity_ratio_at_matched_throughput;  // sup over shared GPU range
  FrontierOverlap overlap;
};

FrontierComparison compare_frontiers(const std::vector<ParetoPoint>& a,
                                     const std::vector<ParetoPoint>& b);

}  // namespace helixsim
