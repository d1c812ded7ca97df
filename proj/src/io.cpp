#include "helixsim/io.hpp"

#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "helixsim/presets.hpp"

namespace helixsim {

using nlohmann::json;

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string fnv1a64_hex(const std::string& bytes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void atomic_write(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write file: " + tmp);
    out << content;
    out.flush();
    if (!out) throw ConfigError("short write to: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw ConfigError("cannot move " + tmp + " into place");
  }
}

std::string now_utc() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json to_json(const RunManifest& m) {
  json inputs = json::array();
  for (const RunManifest::Input& in : m.inputs)
    inputs.push_back(json{{"label", in.label}, {"digest", in.digest}});
  return json{{"tool_version", m.tool_version},
              {"command_line", m.command_line},
              {"seed", m.seed},
              {"inputs", inputs},
              {"timestamp", m.timestamp}};
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string roofline_csv(const std::vector<RooflineRow>& rows) {
  std::string out = "axis,value,kv_read_time_s,weight_read_time_s\n";
  for (const RooflineRow& r : rows) {
    out += std::string(axis_name(r.axis)) + ',' + std::to_string(r.value) + ',' +
           format_double(r.kv_read_time_s) + ',' + format_double(r.weight_read_time_s) +
           '\n';
  }
  return out;
}

std::string timeline_csv(const OverlapTimeline& timeline) {
  std::string out = "request,compute_start_s,compute_end_s,comm_start_s,comm_end_s\n";
  for (const OverlapEvent& e : timeline.events) {
    out += std::to_string(e.request) + ',' + format_double(e.compute_start) + ',' +
           format_double(e.compute_end) + ',' + format_double(e.comm_start) + ',' +
           format_double(e.comm_end) + '\n';
  }
  return out;
}

namespace {

bool same_point(const ParetoPoint& a, const ParetoPoint& b) {
  return a.config.strategy == b.config.strategy && a.config.tpa == b.config.tpa &&
         a.config.kvp == b.config.kvp && a.config.tpf == b.config.tpf &&
         a.config.ep == b.config.ep && a.config.pp == b.config.pp && a.batch == b.batch;
}

}  // namespace

std::string pareto_csv(const std::vector<ParetoPoint>& points,
                       const std::vector<ParetoPoint>& frontier) {
  std::string out = "strategy,tpa,kvp,tpf,ep,pp,batch,ttl_s,tok_s_user,tok_s_gpu,on_frontier\n";
  for (const ParetoPoint& p : points) {
    bool on = false;
    for (const ParetoPoint& f : frontier)
      if (same_point(p, f)) {
        on = true;
        break;
      }
    out += std::string(strategy_name(p.config.strategy)) + ',' +
           std::to_string(p.config.tpa) + ',' + std::to_string(p.config.kvp) + ',' +
           std::to_string(p.config.tpf) + ',' + std::to_string(p.config.ep) + ',' +
           std::to_string(p.config.pp) + ',' + std::to_string(p.batch) + ',' +
           format_double(p.ttl) + ',' + format_double(p.tokens_per_sec_per_user) + ',' +
           format_double(p.tokens_per_sec_per_gpu) + ',' + (on ? "1" : "0") + '\n';
  }
  return out;
}

json to_json(const LatencyBreakdown& b) {
  return json{{"qkv_proj_s", b.qkv_proj},
              {"kv_read_s", b.kv_read},
              {"attn_compute_s", b.attn_compute},
              {"a2a_comm_s", b.a2a_comm},
              {"a2a_exposed_s", b.a2a_exposed},
              {"post_proj_s", b.post_proj},
              {"attn_allreduce_s", b.attn_allreduce},
              {"ffn_weight_read_s", b.ffn_weight_read},
              {"ffn_compute_s", b.ffn_compute},
              {"moe_comm_s", b.moe_comm},
              {"ttl_s", b.ttl}};
}

json to_json(const ParetoPoint& p) {
  return json{{"strategy", strategy_name(p.config.strategy)},
              {"tpa", p.config.tpa},
              {"kvp", p.config.kvp},
              {"tpf", p.config.tpf},
              {"ep", p.config.ep},
              {"pp", p.config.pp},
              {"batch", p.batch},
              {"ttl_s", p.ttl},
              {"tok_s_user", p.tokens_per_sec_per_user},
              {"tok_s_gpu", p.tokens_per_sec_per_gpu}};
}

namespace {

json number_or_null(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

}  // namespace

json to_json(const FrontierComparison& cmp) {
  const char* overlap = cmp.overlap == FrontierOverlap::Full      ? "full"
                        : cmp.overlap == FrontierOverlap::Partial ? "partial"
                                                                  : "none";
  return json{{"max_interactivity_ratio", number_or_null(cmp.max_interactivity_ratio)},
              {"throughput_ratio_at_matched_interactivity",
               number_or_null(cmp.throughput_ratio_at_matched_interactivity)},
              {"interactivity_ratio_at_matched_throughput",
               number_or_null(cmp.interactivity_ratio_at_matched_throughput)},
              {"overlap", overlap}};
}

double uniform_unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

i64 uniform_int(std::mt19937_64& rng, i64 lo, i64 hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  return lo + static_cast<i64>(rng() % span);
}

}  // namespace helixsim
