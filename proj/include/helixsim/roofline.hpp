#pragma once

#include <span>
#include <vector>

#include "helixsim/types.hpp"

namespace helixsim {

// Seconds one GPU spends streaming its KV-cache slice from DRAM for one layer
// of one decode step:
//
//   batch * 2 * ceil(K/tpa) * Hsz_kv * (S/kvp) * bytes_per_param / mem_bw
//
// The ceil makes KV duplication explicit: tpa beyond the KV-head count stops
// shrinking the slice, while kvp always divides the sequence.
inline double kv_read_time(const ModelSpec& model, const WorkloadSpec& work,
                           i64 tpa, i64 kvp, const HardwareSpec& hw) {
  if (tpa < 1 || kvp < 1) throw std::invalid_argument("tpa and kvp must be >= 1");
  const double kv_bytes = static_cast<double>(work.batch) * 2.0 *
                          static_cast<double>(ceil_div(model.effective_kv_heads(), tpa)) *
                          static_cast<double>(model.kv_head_size()) *
                          (static_cast<double>(work.kv_seq_len) / static_cast<double>(kvp)) *
                          hw.bytes_per_param;
  return kv_bytes / hw.mem_bw;
}

// Seconds one GPU spends streaming its per-layer weight slice from DRAM:
// query + output projections (2*H*(Q/tpa)*Hsz), KV projections
// (2*H*ceil(K/tpa)*Hsz_kv), and the gated FFN (gate_factor*H*F/tpf).
// tpa must divide the query heads; widths that only work with ragged head
// assignment are rejected rather than silently rounded.
inline double weight_read_time(const ModelSpec& model, i64 tpa, i64 tpf,
                               const HardwareSpec& hw) {
  if (tpa < 1 || tpf < 1) throw std::invalid_argument("tpa and tpf must be >= 1");
  if (model.query_heads % tpa != 0)
    throw std::invalid_argument("tpa must divide query_heads");
  const double h = static_cast<double>(model.hidden_dim);
  const double attn_params =
      2.0 * h * static_cast<double>(model.query_heads / tpa) *
          static_cast<double>(model.head_size) +
      2.0 * h * static_cast<double>(ceil_div(model.effective_kv_heads(), tpa)) *
          static_cast<double>(model.kv_head_size());
  const double ffn_params = static_cast<double>(model.ffn_gate_factor) * h *
                            static_cast<double>(model.ffn_dim) /
                            static_cast<double>(tpf);
  return (attn_params + ffn_params) * hw.bytes_per_param / hw.mem_bw;
}

enum class SweepAxis { Tpa, Kvp, SeqLen };

inline const char* axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::Tpa: return "tpa";
    case SweepAxis::Kvp: return "kvp";
    case SweepAxis::SeqLen: return "seq_len";
  }
  return "?";
}

struct RooflineRow {
  SweepAxis axis;
  i64 value;
  double kv_read_time_s;
  double weight_read_time_s;
};

// One row per swept value, the other knobs held at their workload/model values:
//   Tpa:    kv_read(tpa=v, kvp=1)  weight(tpa=v, tpf=v)   -- pure TP scaling
//   Kvp:    kv_read(tpa=1, kvp=v)  weight(tpa=1, tpf=v)   -- KVP, pool re-provisioned
//   SeqLen: kv_read(1, 1, S=v)     weight(1, 1)           -- weight row is flat
// Sweeps cover full integer ranges, so the weight column rounds partial query
// heads up (whole heads per GPU) where tpa does not divide Q; at every divisor
// width it agrees exactly with weight_read_time.
std::vector<RooflineRow> sweep(const ModelSpec& model, const WorkloadSpec& work,
                               const HardwareSpec& hw, SweepAxis axis,
                               std::span<const i64> values);

}  // namespace helixsim
