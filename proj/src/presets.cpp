#include "helixsim/presets.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace helixsim {

using nlohmann::json;

ModelSpec llama405b_like() {
  ModelSpec m;
  m.name = "llama405b-like";
  m.layers = 126;
  m.hidden_dim = 16384;
  m.query_heads = 128;
  m.kv_heads = 8;
  m.head_size = 128;
  m.ffn_dim = 65536;
  m.ffn_gate_factor = 3;
  m.attention_kind = AttentionKind::GQA;
  return m;
}

ModelSpec deepseek_r1_like() {
  ModelSpec m;
  m.name = "deepseek-r1-like";
  m.layers = 61;
  m.hidden_dim = 16384;
  m.query_heads = 128;
  m.kv_heads = 1;
  m.head_size = 128;
  m.ffn_dim = 18432;
  m.ffn_gate_factor = 3;
  m.attention_kind = AttentionKind::MLA;
  m.kv_latent_dim = 288;  // latent K+V elements per token, stored once
  MoESpec moe;
  moe.total_experts = 256;
  moe.active_experts_per_token = 8;
  moe.expert_ffn_dim = 2048;
  moe.shared_expert_ffn_dim = 2048;
  m.moe = moe;
  return m;
}

HardwareSpec gb200_like() {
  HardwareSpec hw;
  hw.name = "gb200-like";
  return hw;  // defaults are the GB200-class numbers
}

std::vector<std::string> model_preset_names() {
  return {"llama405b-like", "deepseek-r1-like"};
}

std::vector<std::string> hardware_preset_names() { return {"gb200-like"}; }

namespace {

[[noreturn]] void fail(const std::string& msg) { throw ConfigError(msg); }

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.contains(key)) fail(where + ": unknown key '" + key + "'");
}

const json& field(const json& j, const std::string& key, const std::string& where) {
  if (!j.is_object()) fail(where + ": expected a JSON object");
  const auto it = j.find(key);
  if (it == j.end()) fail(where + ": missing field '" + key + "'");
  return *it;
}

i64 int_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number_integer())
    fail(where + ": field '" + key + "' must be an integer");
  return v.get<i64>();
}

double num_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_number()) fail(where + ": field '" + key + "' must be a number");
  return v.get<double>();
}

std::string str_field(const json& j, const std::string& key, const std::string& where) {
  const json& v = field(j, key, where);
  if (!v.is_string()) fail(where + ": field '" + key + "' must be a string");
  return v.get<std::string>();
}

}  // namespace

json to_json(const ModelSpec& m) {
  json j{{"name", m.name},
         {"layers", m.layers},
         {"hidden_dim", m.hidden_dim},
         {"query_heads", m.query_heads},
         {"kv_heads", m.kv_heads},
         {"head_size", m.head_size},
         {"ffn_dim", m.ffn_dim},
         {"ffn_gate_factor", m.ffn_gate_factor},
         {"attention", m.attention_kind == AttentionKind::MLA ? "mla" : "gqa"},
         {"kv_latent_dim", m.kv_latent_dim}};
  if (m.moe)
    j["moe"] = json{{"total_experts", m.moe->total_experts},
                    {"active_experts_per_token", m.moe->active_experts_per_token},
                    {"expert_ffn_dim", m.moe->expert_ffn_dim},
                    {"shared_expert_ffn_dim", m.moe->shared_expert_ffn_dim}};
  return j;
}

json to_json(const HardwareSpec& hw) {
  return json{{"name", hw.name},
              {"mem_bw_bytes_per_s", hw.mem_bw},
              {"compute_flops", hw.compute_throughput},
              {"link_bw_bytes_per_s", hw.link_bw},
              {"link_latency_s", hw.link_latency},
              {"max_gpus", hw.max_gpus},
              {"bytes_per_param", hw.bytes_per_param},
              {"dram_capacity_bytes", hw.dram_capacity}};
}

ModelSpec model_from_json(const json& j) {
  const std::string where = "model config";
  reject_unknown_keys(j, {"name", "layers", "hidden_dim", "query_heads", "kv_heads",
                          "head_size", "ffn_dim", "ffn_gate_factor", "attention",
                          "kv_latent_dim", "moe"},
                      where);
  ModelSpec m;
  m.name = str_field(j, "name", where);
  m.layers = int_field(j, "layers", where);
  m.hidden_dim = int_field(j, "hidden_dim", where);
  m.query_heads = int_field(j, "query_heads", where);
  m.kv_heads = int_field(j, "kv_heads", where);
  m.head_size = int_field(j, "head_size", where);
  m.ffn_dim = int_field(j, "ffn_dim", where);
  m.ffn_gate_factor = int_field(j, "ffn_gate_factor", where);
  const std::string kind = str_field(j, "attention", where);
  if (kind == "gqa")
    m.attention_kind = AttentionKind::GQA;
  else if (kind == "mla")
    m.attention_kind = AttentionKind::MLA;
  else
    fail(where + ": field 'attention' must be \"gqa\" or \"mla\"");
  m.kv_latent_dim = int_field(j, "kv_latent_dim", where);
  if (j.contains("moe")) {
    const json& mj = j.at("moe");
    const std::string mwhere = "model config: moe";
    reject_unknown_keys(mj, {"total_experts", "active_experts_per_token",
                             "expert_ffn_dim", "shared_expert_ffn_dim"},
                        mwhere);
    MoESpec moe;
    moe.total_experts = int_field(mj, "total_experts", mwhere);
    moe.active_experts_per_token = int_field(mj, "active_experts_per_token", mwhere);
    moe.expert_ffn_dim = int_field(mj, "expert_ffn_dim", mwhere);
    moe.shared_expert_ffn_dim = int_field(mj, "shared_expert_ffn_dim", mwhere);
    m.moe = moe;
  }
  return m;
}

json to_json(const WorkloadSpec& w) {
  return json{{"batch", w.batch},
              {"kv_seq_len", w.kv_seq_len},
              {"decode_steps", w.decode_steps}};
}

WorkloadSpec workload_from_json(const json& j) {
  const std::string where = "workload config";
  reject_unknown_keys(j, {"batch", "kv_seq_len", "decode_steps"}, where);
  WorkloadSpec w;
  w.batch = int_field(j, "batch", where);
  w.kv_seq_len = num_field(j, "kv_seq_len", where);
  w.decode_steps = int_field(j, "decode_steps", where);
  return w;
}

json to_json(const ParallelismConfig& cfg) {
  return json{{"strategy", strategy_name(cfg.strategy)}, {"tpa", cfg.tpa},
              {"kvp", cfg.kvp},                          {"tpf", cfg.tpf},
              {"ep", cfg.ep},                            {"pp", cfg.pp}};
}

ParallelismConfig parallelism_from_json(const json& j) {
  const std::string where = "parallelism config";
  reject_unknown_keys(j, {"strategy", "tpa", "kvp", "tpf", "ep", "pp"}, where);
  ParallelismConfig cfg;
  const std::string s = str_field(j, "strategy", where);
  const std::optional<Strategy> strat = strategy_from_name(s);
  if (!strat) fail(where + ": field 'strategy' has unknown value '" + s + "'");
  cfg.strategy = *strat;
  cfg.tpa = int_field(j, "tpa", where);
  cfg.kvp = int_field(j, "kvp", where);
  cfg.tpf = int_field(j, "tpf", where);
  cfg.ep = int_field(j, "ep", where);
  cfg.pp = int_field(j, "pp", where);
  return cfg;
}

HardwareSpec hardware_from_json(const json& j) {
  const std::string where = "hardware config";
  reject_unknown_keys(j, {"name", "mem_bw_bytes_per_s", "compute_flops",
                          "link_bw_bytes_per_s", "link_latency_s", "max_gpus",
                          "bytes_per_param", "dram_capacity_bytes"},
                      where);
  HardwareSpec hw;
  hw.name = str_field(j, "name", where);
  hw.mem_bw = num_field(j, "mem_bw_bytes_per_s", where);
  hw.compute_throughput = num_field(j, "compute_flops", where);
  hw.link_bw = num_field(j, "link_bw_bytes_per_s", where);
  hw.link_latency = num_field(j, "link_latency_s", where);
  hw.max_gpus = int_field(j, "max_gpus", where);
  hw.bytes_per_param = num_field(j, "bytes_per_param", where);
  hw.dram_capacity = num_field(j, "dram_capacity_bytes", where);
  return hw;
}

namespace {

json parse_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  json j = json::parse(buf.str(), nullptr, false);
  if (j.is_discarded()) fail("malformed JSON in " + path);
  return j;
}

template <class Spec, class FromJson, class Validate>
Spec load_validated(const std::string& path, FromJson from_json, Validate validate) {
  Spec spec = from_json(parse_file(path));
  try {
    validate(spec);
  } catch (const std::invalid_argument& e) {
    fail(path + ": " + e.what());
  }
  return spec;
}

}  // namespace

ModelSpec load_model(const std::string& name_or_path) {
  if (name_or_path == "llama405b-like") return llama405b_like();
  if (name_or_path == "deepseek-r1-like") return deepseek_r1_like();
  return load_validated<ModelSpec>(
      name_or_path, [](const json& j) { return model_from_json(j); },
      [](const ModelSpec& m) { m.validate(); });
}

HardwareSpec load_hardware(const std::string& name_or_path) {
  if (name_or_path == "gb200-like") return gb200_like();
  return load_validated<HardwareSpec>(
      name_or_path, [](const json& j) { return hardware_from_json(j); },
      [](const HardwareSpec& h) { h.validate(); });
}

WorkloadSpec load_workload(const std::string& path) {
  return load_validated<WorkloadSpec>(
      path, [](const json& j) { return workload_from_json(j); },
      [](const WorkloadSpec& w) { w.validate(); });
}

ParallelismConfig load_parallelism(const std::string& path) {
  // Width/divisibility validation needs the model, so only shape is checked
  // here; callers run validate_config once the model is known.
  return parallelism_from_json(parse_file(path));
}

}  // namespace helixsim
