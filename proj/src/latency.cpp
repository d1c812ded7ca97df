#include "helixsim/latency.hpp"

#include <algorithm>
#include <cmath>

#include "helixsim/roofline.hpp"

namespace helixsim {

namespace {

void require_valid(const ParallelismConfig& cfg, const ModelSpec& model,
                   const HardwareSpec& hw) {
  model.validate();
  hw.validate();
  if (Validity v = validate_config(cfg, model, hw); !v)
    throw std::invalid_argument("invalid config " + cfg.to_string() + ": " + v.rule);
}

double roofline_max(double mem_seconds, double flops, const HardwareSpec& hw) {
  return std::max(mem_seconds, flops / hw.compute_throughput);
}

// Requests one attention rank works on: the full batch everywhere except
// data-parallel attention, which splits requests ceil-evenly over the stage.
i64 attention_batch(const ParallelismConfig& cfg, i64 batch) {
  if (cfg.strategy == Strategy::EP_DPAttention)
    return ceil_div(batch, cfg.stage_pool());
  return batch;
}

// Expected number of distinct local experts a batch of top-k draws touches
// under uniform routing: E_local * (1 - (1 - 1/E_total)^(batch*k)).
double expected_activated_experts(const MoESpec& moe, i64 ep, i64 batch) {
  const double local = static_cast<double>(moe.total_experts / ep);
  const double draws = static_cast<double>(batch) *
                       static_cast<double>(moe.active_experts_per_token);
  const double miss = std::pow(1.0 - 1.0 / static_cast<double>(moe.total_experts),
                               draws);
  return local * (1.0 - miss);
}

}  // namespace

LatencyBreakdown attention_phase(const ParallelismConfig& cfg, const ModelSpec& model,
                                 const WorkloadSpec& work, const HardwareSpec& hw) {
  require_valid(cfg, model, hw);
  work.validate();

  LatencyBreakdown out{};
  const bool dp_attention = cfg.strategy == Strategy::EP_DPAttention;
  const i64 b_att = attention_batch(cfg, work.batch);
  const double h = static_cast<double>(model.hidden_dim);
  const double bytes = hw.bytes_per_param;

  // QKV projections: every KVP rank runs the full batch through its tpa slice
  // of the heads, so weights and GEMM work duplicate across kvp.
  const double qkv_cols =
      static_cast<double>(model.query_heads / cfg.tpa) *
          static_cast<double>(model.head_size) +
      2.0 * static_cast<double>(ceil_div(model.effective_kv_heads(), cfg.tpa)) *
          static_cast<double>(model.kv_head_size());
  out.qkv_proj = roofline_max(h * qkv_cols * bytes / hw.mem_bw,
                              2.0 * static_cast<double>(b_att) * h * qkv_cols, hw);

  WorkloadSpec att_work = work;
  att_work.batch = b_att;
  out.kv_read = kv_read_time(model, att_work, cfg.tpa, cfg.kvp, hw);
  out.attn_compute = 2.0 * static_cast<double>(b_att) * 2.0 *
                     static_cast<double>(ceil_div(model.effective_kv_heads(), cfg.tpa)) *
                     static_cast<double>(model.kv_head_size()) *
                     (static_cast<double>(work.kv_seq_len) / static_cast<double>(cfg.kvp)) /
                     hw.compute_throughput;

  // Fragment exchange across the kvp group; each rank holds kvp slices and
  // keeps one, so per-GPU payload is per-destination * kvp.
  if (cfg.kvp > 1) {
    const double per_dest =
        a2a_payload_per_destination(model, work.batch, cfg.kvp, cfg.tpa, hw);
    out.a2a_comm = comm_time(CollKind::AllToAll, cfg.kvp,
                             per_dest * static_cast<double>(cfg.kvp), hw);
  }
  out.a2a_exposed = out.a2a_comm;

  // Output projection sharded over the stage pool (replicated weights under
  // data-parallel attention), then an All-Reduce over the same pool.
  const double pool = static_cast<double>(cfg.stage_pool());
  const double proj_rows = dp_attention ? h : h / pool;
  out.post_proj = roofline_max(proj_rows * h * bytes / hw.mem_bw,
                               2.0 * static_cast<double>(b_att) * proj_rows * h, hw);
  if (!dp_attention)
    out.attn_allreduce =
        comm_time(CollKind::AllReduce, cfg.stage_pool(),
                  static_cast<double>(work.batch) * h * bytes, hw);
  return out;
}

LatencyBreakdown ffn_phase(const ParallelismConfig& cfg, const ModelSpec& model,
                           i64 batch, const HardwareSpec& hw) {
  require_valid(cfg, model, hw);
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");

  LatencyBreakdown out{};
  const double h = static_cast<double>(model.hidden_dim);
  const double b = static_cast<double>(batch);
  const double gate = static_cast<double>(model.ffn_gate_factor);
  const double bytes = hw.bytes_per_param;
  const double activation_bytes = b * h * bytes;

  if (model.moe) {
    const MoESpec& moe = *model.moe;
    const double fe = static_cast<double>(moe.expert_ffn_dim);
    const double fs = static_cast<double>(moe.shared_expert_ffn_dim);
    const double tpf = static_cast<double>(cfg.tpf);
    const double activated = expected_activated_experts(moe, cfg.ep, batch);

    // Only experts that won at least one token are streamed; the shared
    // expert serves every token and is always read.
    const double read_params = activated * gate * h * fe / tpf + gate * h * fs / tpf;
    out.ffn_weight_read = read_params * bytes / hw.mem_bw;

    // Uniform routing spreads batch*k token-expert pairs evenly over groups.
    const double pairs = b * static_cast<double>(moe.active_experts_per_token) /
                         static_cast<double>(cfg.ep);
    out.ffn_compute = (gate * 2.0 * pairs * h * fe / tpf +
                       gate * 2.0 * b * h * fs / tpf) /
                      hw.compute_throughput;

    // Reduce partial activations inside each expert's TP group, gather expert
    // outputs across groups, then reduce the gathered group contributions
    // locally (ep-1 adds per activation element).
    const double local_reduce =
        cfg.ep > 1 ? b * h * static_cast<double>(cfg.ep - 1) / hw.compute_throughput
                   : 0.0;
    out.moe_comm = comm_time(CollKind::AllReduce, cfg.tpf, activation_bytes, hw) +
                   comm_time(CollKind::AllGather, cfg.ep, activation_bytes, hw) +
                   local_reduce;
  } else {
    const double f = static_cast<double>(model.ffn_dim);
    const double tpf = static_cast<double>(cfg.tpf);
    out.ffn_weight_read = gate * h * f / tpf * bytes / hw.mem_bw;
    out.ffn_compute = gate * 2.0 * b * h * f / tpf / hw.compute_throughput;
    out.moe_comm = comm_time(CollKind::AllReduce, cfg.tpf, activation_bytes, hw);
  }
  return out;
}

double per_gpu_memory_bytes(const ParallelismConfig& cfg, const ModelSpec& model,
                            const WorkloadSpec& work, const HardwareSpec& hw) {
  require_valid(cfg, model, hw);
  work.validate();

  const bool dp_attention = cfg.strategy == Strategy::EP_DPAttention;
  const double h = static_cast<double>(model.hidden_dim);
  const double pool = static_cast<double>(cfg.stage_pool());

  // Attention weights: duplicated QKV slice per KVP rank plus the projection.
  double per_layer_params =
      h * static_cast<double>(model.query_heads / cfg.tpa) *
          static_cast<double>(model.head_size) +
      2.0 * h * static_cast<double>(ceil_div(model.effective_kv_heads(), cfg.tpa)) *
          static_cast<double>(model.kv_head_size()) +
      (dp_attention ? h : h / pool) * h;

  if (model.moe) {
    const MoESpec& moe = *model.moe;
    const double gate = static_cast<double>(model.ffn_gate_factor);
    per_layer_params += static_cast<double>(moe.total_experts / cfg.ep) * gate * h *
                        static_cast<double>(moe.expert_ffn_dim) /
                        static_cast<double>(cfg.tpf);
    per_layer_params += gate * h * static_cast<double>(moe.shared_expert_ffn_dim) /
                        static_cast<double>(cfg.tpf);
  } else {
    per_layer_params += static_cast<double>(model.ffn_gate_factor) * h *
                        static_cast<double>(model.ffn_dim) /
                        static_cast<double>(cfg.tpf);
  }

  // KV residency mirrors the read path: per-request whole-sequence slabs under
  // data-parallel attention, an S/kvp slice otherwise.
  const double kv_heads =
      static_cast<double>(ceil_div(model.effective_kv_heads(), cfg.tpa));
  const double kv_tokens =
      dp_attention
          ? static_cast<double>(attention_batch(cfg, work.batch)) *
                static_cast<double>(work.kv_seq_len)
          : static_cast<double>(work.batch) *
                (static_cast<double>(work.kv_seq_len) / static_cast<double>(cfg.kvp));
  const double kv_per_layer = 2.0 * kv_heads *
                              static_cast<double>(model.kv_head_size()) * kv_tokens;

  const double layers_here = static_cast<double>(model.layers) /
                             static_cast<double>(cfg.pp);
  return (per_layer_params + kv_per_layer) * layers_here * hw.bytes_per_param;
}

OverlapTimeline decode_a2a_timeline(const ParallelismConfig& cfg, const ModelSpec& model,
                                    const WorkloadSpec& work, const HardwareSpec& hw,
                                    bool hopb) {
  const LatencyBreakdown att = attention_phase(cfg, model, work, hw);
  const double attn_core = std::max(att.kv_read, att.attn_compute);
  const double r = static_cast<double>(work.batch);
  const bool overlapped = hopb && cfg.strategy != Strategy::MedhaKVP;
  return hopb_schedule(work.batch, attn_core / r, att.a2a_comm / r, overlapped);
}

LatencyBreakdown decode_ttl(const ParallelismConfig& cfg, const ModelSpec& model,
                            const WorkloadSpec& work, const HardwareSpec& hw,
                            bool hopb) {
  LatencyBreakdown out = attention_phase(cfg, model, work, hw);
  const LatencyBreakdown ffn = ffn_phase(cfg, model, work.batch, hw);
  out.ffn_weight_read = ffn.ffn_weight_read;
  out.ffn_compute = ffn.ffn_compute;
  out.moe_comm = ffn.moe_comm;

  const double attn_core = std::max(out.kv_read, out.attn_compute);
  const double ffn_core = std::max(out.ffn_weight_read, out.ffn_compute);
  const double r = static_cast<double>(work.batch);
  const bool overlapped = hopb && cfg.strategy != Strategy::MedhaKVP;

  // Batchwise overlap hides all but the residual of whichever stream is slower:
  // the fragment exchange runs against attention compute, the post-projection
  // All-Reduce against projection compute. Exposed = pipelined span - compute.
  if (overlapped) {
    out.a2a_exposed = std::max(
        0.0,
        hopb_schedule(work.batch, attn_core / r, out.a2a_comm / r, true).total -
            attn_core);
    out.attn_allreduce = std::max(
        0.0, hopb_schedule(work.batch, out.post_proj / r, out.attn_allreduce / r,
                           true)
                     .total -
                 out.post_proj);
  }

  const double per_layer = out.qkv_proj + attn_core + out.a2a_exposed +
                           out.post_proj + out.attn_allreduce + ffn_core +
                           out.moe_comm;

  // Pipeline hand-offs ship the batch activations once per stage boundary;
  // each decode step also broadcasts the new token to the KVP group.
  const double act_bytes = r * static_cast<double>(model.hidden_dim) *
                           hw.bytes_per_param;
  const double p2p = static_cast<double>(cfg.pp - 1) *
                     (hw.link_latency + act_bytes / hw.link_bw);
  const double bcast = comm_time(CollKind::Broadcast, cfg.kvp, act_bytes, hw);

  out.ttl = static_cast<double>(model.layers) * per_layer + p2p + bcast;
  return out;
}

}  // namespace helixsim
