#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace helixsim {

using i64 = std::int64_t;

// Integer ceiling division; both operands must be positive.
constexpr i64 ceil_div(i64 a, i64 b) { return (a + b - 1) / b; }

enum class AttentionKind { GQA, MLA };

// Sparse mixture-of-experts FFN description. A model without one runs a dense
// gated FFN of width ffn_dim.
struct MoESpec {
  i64 total_experts = 0;
  i64 active_experts_per_token = 0;  // top-k routing fanout
  i64 expert_ffn_dim = 0;
  i64 shared_expert_ffn_dim = 0;  // 0 means no shared expert
};

// Decoder-only transformer shape. hidden_dim must equal query_heads * head_size.
struct ModelSpec {
  std::string name;
  i64 layers = 0;
  i64 hidden_dim = 0;   // H
  i64 query_heads = 0;  // Q
  i64 kv_heads = 0;     // K (grouped-query sharing factor Q/K)
  i64 head_size = 0;    // Hsz
  i64 ffn_dim = 0;      // F (dense FFN width)
  i64 ffn_gate_factor = 3;  // weight matrices per FFN block (3 for gated FFNs)
  AttentionKind attention_kind = AttentionKind::GQA;
  // Latent-attention KV width per token-half; only meaningful for MLA, where the
  // cache behaves as a single KV head of this width (defaults to head_size).
  i64 kv_latent_dim = 0;
  std::optional<MoESpec> moe;

  // Latent attention collapses the cache to a single logical KV head.
  i64 effective_kv_heads() const {
    return attention_kind == AttentionKind::MLA ? 1 : kv_heads;
  }
  i64 kv_head_size() const {
    if (attention_kind == AttentionKind::MLA && kv_latent_dim > 0) return kv_latent_dim;
    return head_size;
  }

  void validate() const;  // throws std::invalid_argument on an inconsistent spec
};

// One GPU plus the links that connect it to its scale-up domain. Bandwidths are
// bytes/s, latency is seconds per message hop, compute is FLOP/s at the serving
// precision implied by bytes_per_param.
struct HardwareSpec {
  std::string name;
  double mem_bw = 8.0e12;
  double compute_throughput = 5.0e15;
  double link_bw = 9.0e11;
  double link_latency = 1.0e-7;
  i64 max_gpus = 64;
  double bytes_per_param = 0.5;
  double dram_capacity = 192.0e9;  // per-GPU weight + KV budget, bytes

  void validate() const;
};

// A decode-time snapshot: batch concurrent requests, each holding kv_seq_len
// cached tokens, generating decode_steps further tokens.
struct WorkloadSpec {
  i64 batch = 1;
  i64 kv_seq_len = 1;
  i64 decode_steps = 1;

  void validate() const;
};

// How the GPU pool is carved up in each of the two per-layer phases.
//   Helix          temporal pipeline: attention on kvp x tpa, FFN on tpf x ep,
//                  the same pool re-provisioned between phases (pp = 1).
//   TP             plain tensor parallelism, widths tied across phases.
//   TP_PP          tensor parallelism within each pipeline stage.
//   EP_DPAttention data-parallel attention feeding expert-parallel FFNs.
//   MedhaKVP       KV-parallel attention, but the FFN stays on the tpa-wide
//                  TP group and no communication is overlapped.
enum class Strategy { Helix, TP, TP_PP, EP_DPAttention, MedhaKVP };

const char* strategy_name(Strategy s);
std::optional<Strategy> strategy_from_name(const std::string& s);

struct ParallelismConfig {
  Strategy strategy = Strategy::TP;
  i64 tpa = 1;  // tensor parallelism across attention heads
  i64 kvp = 1;  // KV parallelism across the cached sequence
  i64 tpf = 1;  // tensor parallelism inside the FFN
  i64 ep = 1;   // expert parallelism
  i64 pp = 1;   // pipeline stages

  // GPUs inside one pipeline stage. Data-parallel attention replicates over the
  // FFN pool, so only there the FFN product defines the stage.
  i64 stage_pool() const {
    return strategy == Strategy::EP_DPAttention ? tpf * ep : kvp * tpa;
  }
  i64 total_gpus() const { return stage_pool() * pp; }

  std::string to_string() const;
};

// Validity is a value, not an exception: enumeration rejects configs by rule.
struct Validity {
  bool ok = true;
  std::string rule;  // first violated rule when !ok
  explicit operator bool() const { return ok; }
};

Validity validate_config(const ParallelismConfig& cfg, const ModelSpec& model,
                         const HardwareSpec& hw);

// Per-layer decode-step timings (seconds), plus the composed whole-model TTL.
// a2a_comm is the full fragment exchange; a2a_exposed and attn_allreduce are
// the portions left on the critical path after batchwise overlap.
struct LatencyBreakdown {
  double qkv_proj = 0;
  double kv_read = 0;
  double attn_compute = 0;
  double a2a_comm = 0;
  double a2a_exposed = 0;
  double post_proj = 0;
  double attn_allreduce = 0;
  double ffn_weight_read = 0;
  double ffn_compute = 0;
  double moe_comm = 0;
  double ttl = 0;
};

struct ParetoPoint {
  ParallelismConfig config;
  i64 batch = 0;
  double ttl = 0;
  double tokens_per_sec_per_user = 0;
  double tokens_per_sec_per_gpu = 0;
};

}  // namespace helixsim
