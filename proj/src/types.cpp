#include "helixsim/types.hpp"

#include <array>

namespace helixsim {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(what);
}

}  // namespace

void ModelSpec::validate() const {
  require(layers >= 1, "layers must be >= 1");
  require(hidden_dim >= 1, "hidden_dim must be >= 1");
  require(query_heads >= 1, "query_heads must be >= 1");
  require(kv_heads >= 1, "kv_heads must be >= 1");
  require(head_size >= 1, "head_size must be >= 1");
  require(ffn_dim >= 1, "ffn_dim must be >= 1");
  require(ffn_gate_factor >= 1, "ffn_gate_factor must be >= 1");
  require(hidden_dim == query_heads * head_size,
          "hidden_dim must equal query_heads * head_size");
  if (attention_kind == AttentionKind::GQA) {
    require(query_heads % kv_heads == 0, "query_heads must be a multiple of kv_heads");
    require(kv_latent_dim == 0, "kv_latent_dim is only meaningful for MLA");
  } else {
    require(kv_heads == 1, "MLA keeps a single latent KV head");
    require(kv_latent_dim >= 0, "kv_latent_dim must be >= 0");
  }
  if (moe) {
    require(moe->total_experts >= 1, "moe.total_experts must be >= 1");
    require(moe->active_experts_per_token >= 1,
            "moe.active_experts_per_token must be >= 1");
    require(moe->active_experts_per_token <= moe->total_experts,
            "moe.active_experts_per_token must not exceed moe.total_experts");
    require(moe->expert_ffn_dim >= 1, "moe.expert_ffn_dim must be >= 1");
    require(moe->shared_expert_ffn_dim >= 0, "moe.shared_expert_ffn_dim must be >= 0");
  }
}

void HardwareSpec::validate() const {
  require(mem_bw > 0, "mem_bw must be > 0");
  require(compute_throughput > 0, "compute_throughput must be > 0");
  require(link_bw > 0, "link_bw must be > 0");
  require(link_latency >= 0, "link_latency must be >= 0");
  require(max_gpus >= 1, "max_gpus must be >= 1");
  require(bytes_per_param > 0, "bytes_per_param must be > 0");
  require(dram_capacity > 0, "dram_capacity must be > 0");
}

void WorkloadSpec::validate() const {
  require(batch >= 1, "batch must be >= 1");
  require(kv_seq_len >= 1, "kv_seq_len must be >= 1");
  require(decode_steps >= 1, "decode_steps must be >= 1");
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Helix: return "helix";
    case Strategy::TP: return "tp";
    case Strategy::TP_PP: return "tp_pp";
    case Strategy::EP_DPAttention: return "ep_dp";
    case Strategy::MedhaKVP: return "medha_kvp";
  }
  return "?";
}

std::optional<Strategy> strategy_from_name(const std::string& s) {
  static constexpr std::array<Strategy, 5> all = {
      Strategy::Helix, Strategy::TP, Strategy::TP_PP, Strategy::EP_DPAttention,
      Strategy::MedhaKVP};
  for (Strategy k : all)
    if (s == strategy_name(k)) return k;
  return std::nullopt;
}

std::string ParallelismConfig::to_string() const {
  std::string out = strategy_name(strategy);
  out += "(tpa=" + std::to_string(tpa) + ",kvp=" + std::to_string(kvp) +
         ",tpf=" + std::to_string(tpf) + ",ep=" + std::to_string(ep) +
         ",pp=" + std::to_string(pp) + ")";
  return out;
}

// The rule strings double as user-facing diagnostics; the first broken rule wins.
Validity validate_config(const ParallelismConfig& cfg, const ModelSpec& model,
                         const HardwareSpec& hw) {
  auto fail = [](const char* rule) { return Validity{false, rule}; };

  if (cfg.tpa < 1 || cfg.kvp < 1 || cfg.tpf < 1 || cfg.ep < 1 || cfg.pp < 1)
    return fail("all parallelism widths must be >= 1");
  if (cfg.total_gpus() > hw.max_gpus) return fail("total GPUs exceed max_gpus");

  const i64 k_eff = model.effective_kv_heads();
  switch (cfg.strategy) {
    case Strategy::Helix:
      if (cfg.pp != 1) return fail("helix runs as a single pipeline stage");
      if (cfg.tpa > k_eff) return fail("helix requires tpa <= effective KV heads");
      if (cfg.kvp * cfg.tpa != cfg.tpf * cfg.ep)
        return fail("helix re-provisions one pool: kvp*tpa must equal tpf*ep");
      break;
    case Strategy::TP:
      if (cfg.pp != 1) return fail("tp has no pipeline stages");
      [[fallthrough]];
    case Strategy::TP_PP:
      if (cfg.kvp != 1) return fail("tp keeps the whole sequence per GPU (kvp=1)");
      if (cfg.ep != 1) return fail("tp shards experts with tensor parallelism (ep=1)");
      if (cfg.tpf != cfg.tpa) return fail("tp ties attention and FFN widths");
      break;
    case Strategy::EP_DPAttention:
      if (cfg.tpa != 1 || cfg.kvp != 1)
        return fail("ep_dp replicates attention (tpa=1, kvp=1)");
      break;
    case Strategy::MedhaKVP:
      if (cfg.tpf != cfg.tpa) return fail("medha_kvp keeps the FFN on the tpa group");
      if (cfg.ep != 1) return fail("medha_kvp does not shard experts (ep=1)");
      break;
  }

  if (model.query_heads % cfg.tpa != 0) return fail("tpa must divide query_heads");
  // The fragment exchange slices the hidden dim evenly across the attention pool.
  if (cfg.strategy == Strategy::Helix || cfg.strategy == Strategy::MedhaKVP) {
    if (model.hidden_dim % (cfg.kvp * cfg.tpa) != 0)
      return fail("kvp*tpa must divide hidden_dim");
  }
  if (model.moe) {
    if (model.moe->total_experts % cfg.ep != 0)
      return fail("ep must divide total_experts");
    if (model.moe->expert_ffn_dim % cfg.tpf != 0)
      return fail("tpf must divide expert_ffn_dim");
    if (model.moe->shared_expert_ffn_dim > 0 &&
        model.moe->shared_expert_ffn_dim % cfg.tpf != 0)
      return fail("tpf must divide shared_expert_ffn_dim");
  } else {
    if (cfg.ep != 1) return fail("expert parallelism needs an MoE model");
    if (model.ffn_dim % cfg.tpf != 0) return fail("tpf must divide ffn_dim");
  }
  return {};
}

}  // namespace helixsim
