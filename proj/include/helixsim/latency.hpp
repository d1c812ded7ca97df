#pragma once

#include "helixsim/comm.hpp"
#include "helixsim/overlap.hpp"
#include "helixsim/types.hpp"

namespace helixsim {

// Per-layer attention-phase components (FFN fields stay zero). Collectives are
// reported at full cost; overlap is applied when the step is composed.
// Throws std::invalid_argument when the config fails validate_config.
LatencyBreakdown attention_phase(const ParallelismConfig& cfg, const ModelSpec& model,
                                 const WorkloadSpec& work, const HardwareSpec& hw);

// Per-layer FFN-phase components (attention fields stay zero).
LatencyBreakdown ffn_phase(const ParallelismConfig& cfg, const ModelSpec& model,
                           i64 batch, const HardwareSpec& hw);

// Resident bytes per GPU: every stored weight shard plus this workload's KV
// slice. Storage, not traffic: inactive experts count here even though only
// activated ones are read each step.
double per_gpu_memory_bytes(const ParallelismConfig& cfg, const ModelSpec& model,
                            const WorkloadSpec& work, const HardwareSpec& hw);

inline bool capacity_feasible(const ParallelismConfig& cfg, const ModelSpec& model,
                              const WorkloadSpec& work, const HardwareSpec& hw) {
  return per_gpu_memory_bytes(cfg, model, work, hw) <= hw.dram_capacity;
}

// Whole-model time to produce one token for every request in the batch.
// Composes both phases per layer, applies batchwise overlap to the fragment
// exchange (against attention compute) and to the post-projection All-Reduce
// (against projection compute), then scales by layer count and adds pipeline
// hand-offs and the per-step token broadcast. MedhaKVP and hopb=false leave
// every collective exposed. Fields hold per-layer times as composed; ttl is
// the whole-model total.
LatencyBreakdown decode_ttl(const ParallelismConfig& cfg, const ModelSpec& model,
                            const WorkloadSpec& work, const HardwareSpec& hw,
                            bool hopb);

// The overlap timeline behind decode_ttl's a2a_exposed (R = batch).
OverlapTimeline decode_a2a_timeline(const ParallelismConfig& cfg, const ModelSpec& model,
                                    const WorkloadSpec& work, const HardwareSpec& hw,
                                    bool hopb);

}  // namespace helixsim
