#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "helixsim/attention.hpp"
#include "helixsim/io.hpp"
#include "helixsim/latency.hpp"
#include "helixsim/pareto.hpp"
#include "helixsim/presets.hpp"
#include "helixsim/roofline.hpp"
#include "helixsim/types.hpp"

namespace {

using namespace helixsim;
using nlohmann::json;

constexpr int kOk = 0;
constexpr int kUnexpected = 1;
constexpr int kParseError = 2;       // CLI usage, missing files, schema violations
constexpr int kValidationError = 3;  // dimensional/config validation failures
constexpr int kToleranceError = 4;   // numeric check exceeded its tolerance

struct ToleranceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Inclusive "a..b" or comma list "1,2,4"; values must be >= 1 and ascending.
std::vector<i64> parse_range(const std::string& text) {
  std::vector<i64> out;
  const auto parse_int = [&](const std::string& tok) {
    std::size_t pos = 0;
    i64 v = 0;
    try {
      v = std::stoll(tok, &pos);
    } catch (const std::exception&) {
      throw ConfigError("bad integer '" + tok + "' in range '" + text + "'");
    }
    if (pos != tok.size())
      throw ConfigError("bad integer '" + tok + "' in range '" + text + "'");
    return v;
  };
  if (const std::size_t dots = text.find(".."); dots != std::string::npos) {
    const i64 lo = parse_int(text.substr(0, dots));
    const i64 hi = parse_int(text.substr(dots + 2));
    if (lo < 1 || hi < lo)
      throw ConfigError("range '" + text + "' must satisfy 1 <= a <= b");
    for (i64 v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string tok =
        text.substr(start, comma == std::string::npos ? comma : comma - start);
    out.push_back(parse_int(tok));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty range expression");
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i] < 1) throw ConfigError("range values must be >= 1");
    if (i > 0 && out[i] <= out[i - 1])
      throw ConfigError("range values must be strictly ascending");
  }
  return out;
}

bool parse_hopb(const std::string& s) {
  if (s == "on") return true;
  if (s == "off") return false;
  throw ConfigError("--hopb must be 'on' or 'off'");
}

// Digest for the manifest: file bytes if the argument is a file, otherwise
// the canonical JSON dump of the named preset.
std::string input_digest(const std::string& name_or_path, const json& canonical) {
  if (std::filesystem::exists(name_or_path)) return fnv1a64_hex(read_file(name_or_path));
  return fnv1a64_hex(canonical.dump(2));
}

// All file output funnels through one sink: atomic writes under --out, plus
// a manifest describing the run.
struct OutputSink {
  std::string dir;  // empty = no --out, primary artifact goes to stdout

  bool enabled() const { return !dir.empty(); }

  void write(const std::string& name, const std::string& content) const {
    atomic_write((std::filesystem::path(dir) / name).string(), content);
  }

  void write_manifest(const RunManifest& manifest) const {
    RunManifest stamped = manifest;
    stamped.timestamp = now_utc();
    write("manifest.json", to_json(stamped).dump(2) + "\n");
  }
};

OutputSink make_sink(const std::string& out_dir) {
  OutputSink sink{out_dir};
  if (sink.enabled()) std::filesystem::create_directories(out_dir);
  return sink;
}

std::string join_args(int argc, char** argv) {
  std::string s;
  for (int i = 0; i < argc; ++i) {
    if (i) s += ' ';
    s += argv[i];
  }
  return s;
}

// ---------------------------------------------------------------------------
// roofline

struct RooflineArgs {
  std::string model = "llama405b-like";
  std::string hardware = "gb200-like";
  std::string axis;
  std::string range;
  double seq_len = 1e6;
  i64 batch = 8;
  std::string out;
};

int cmd_roofline(const RooflineArgs& args, const std::string& command_line,
                 std::uint64_t seed) {
  const ModelSpec model = load_model(args.model);
  const HardwareSpec hw = load_hardware(args.hardware);
  WorkloadSpec work;
  work.batch = args.batch;
  work.kv_seq_len = static_cast<i64>(std::llround(args.seq_len));
  work.validate();
  model.validate();
  hw.validate();

  SweepAxis axis;
  if (args.axis == "tpa")
    axis = SweepAxis::Tpa;
  else if (args.axis == "kvp")
    axis = SweepAxis::Kvp;
  else if (args.axis == "seq_len")
    axis = SweepAxis::SeqLen;
  else
    throw ConfigError("--axis must be tpa, kvp or seq_len");

  const std::vector<i64> values = parse_range(args.range);
  const std::vector<RooflineRow> rows = sweep(model, work, hw, axis, values);
  const std::string csv = roofline_csv(rows);

  const OutputSink sink = make_sink(args.out);
  if (!sink.enabled()) {
    std::cout << csv;
    return kOk;
  }
  sink.write("roofline.csv", csv);
  RunManifest manifest;
  manifest.command_line = command_line;
  manifest.seed = seed;
  manifest.inputs = {{"model", input_digest(args.model, to_json(model))},
                     {"hardware", input_digest(args.hardware, to_json(hw))}};
  sink.write_manifest(manifest);
  std::cout << "wrote " << args.out << "/roofline.csv\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::string model = "llama405b-like";
  std::string hardware = "gb200-like";
  std::string workload_file;  // optional; overrides --seq-len/--batch
  std::string config_file;    // optional; overrides the width flags
  std::string strategy = "helix";
  i64 tpa = 1, kvp = 1, tpf = 1, ep = 1, pp = 1;
  double seq_len = 1e6;
  i64 batch = 8;
  std::string hopb = "on";
  bool timeline = false;
  double ttl_budget = 0;  // 0 = not requested
  std::string out;
};

int cmd_simulate(const SimulateArgs& args, const std::string& command_line,
                 std::uint64_t seed) {
  const ModelSpec model = load_model(args.model);
  const HardwareSpec hw = load_hardware(args.hardware);

  WorkloadSpec work;
  if (!args.workload_file.empty()) {
    work = load_workload(args.workload_file);
  } else {
    work.batch = args.batch;
    work.kv_seq_len = static_cast<i64>(std::llround(args.seq_len));
    work.validate();
  }

  ParallelismConfig cfg;
  if (!args.config_file.empty()) {
    cfg = load_parallelism(args.config_file);
  } else {
    const std::optional<Strategy> strat = strategy_from_name(args.strategy);
    if (!strat) throw ConfigError("unknown strategy '" + args.strategy + "'");
    cfg = {*strat, args.tpa, args.kvp, args.tpf, args.ep, args.pp};
  }

  const bool hopb = parse_hopb(args.hopb);
  const LatencyBreakdown breakdown = decode_ttl(cfg, model, work, hw, hopb);

  json report = to_json(breakdown);
  report["config"] = to_json(cfg);
  report["workload"] = to_json(work);
  report["hopb"] = hopb;
  report["total_gpus"] = cfg.total_gpus();
  report["capacity_feasible"] = capacity_feasible(cfg, model, work, hw);
  report["per_gpu_memory_bytes"] = per_gpu_memory_bytes(cfg, model, work, hw);
  report["tokens_per_sec_per_user"] = 1.0 / breakdown.ttl;
  report["tokens_per_sec_per_gpu"] =
      static_cast<double>(work.batch) /
      (breakdown.ttl * static_cast<double>(cfg.total_gpus()));
  if (args.ttl_budget > 0)
    report["max_batch_within_ttl_budget"] =
        batch_scalability(cfg, model, hw, work.kv_seq_len, args.ttl_budget, hopb);

  const std::string body = report.dump(2) + "\n";
  const OutputSink sink = make_sink(args.out);
  if (!sink.enabled()) {
    if (args.timeline)
      throw ConfigError("--timeline needs --out to receive timeline.csv");
    std::cout << body;
    return kOk;
  }
  sink.write("breakdown.json", body);
  if (args.timeline)
    sink.write("timeline.csv",
               timeline_csv(decode_a2a_timeline(cfg, model, work, hw, hopb)));
  RunManifest manifest;
  manifest.command_line = command_line;
  manifest.seed = seed;
  manifest.inputs = {{"model", input_digest(args.model, to_json(model))},
                     {"hardware", input_digest(args.hardware, to_json(hw))}};
  if (!args.workload_file.empty())
    manifest.inputs.push_back({"workload", input_digest(args.workload_file, json())});
  if (!args.config_file.empty())
    manifest.inputs.push_back({"config", input_digest(args.config_file, json())});
  sink.write_manifest(manifest);
  std::cout << "wrote " << args.out << "/breakdown.json"
            << (args.timeline ? " and timeline.csv" : "") << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// pareto

struct ParetoArgs {
  std::string model = "llama405b-like";
  std::string hardware = "gb200-like";
  std::string gpus = "1..64";
  std::string batches = "1,2,4,8,16,32,64,128,256,512,1024";
  double seq_len = 1e6;
  std::string hopb = "on";
  bool ablate_hopb = false;
  std::string out;
};

json frontier_json(const std::vector<ParetoPoint>& frontier) {
  json arr = json::array();
  for (const ParetoPoint& p : frontier) arr.push_back(to_json(p));
  return arr;
}

int cmd_pareto(const ParetoArgs& args, const std::string& command_line,
               std::uint64_t seed) {
  const ModelSpec model = load_model(args.model);
  const HardwareSpec hw = load_hardware(args.hardware);
  const bool hopb = parse_hopb(args.hopb);

  SearchSpace helix_space;
  helix_space.strategies = {Strategy::Helix};
  helix_space.gpu_counts = parse_range(args.gpus);
  helix_space.batch_sizes = parse_range(args.batches);
  helix_space.hopb = hopb;

  SearchSpace baseline_space = helix_space;
  baseline_space.strategies = {Strategy::TP, Strategy::TP_PP, Strategy::EP_DPAttention,
                              Strategy::MedhaKVP};

  const i64 seq_len = static_cast<i64>(std::llround(args.seq_len));
  const std::vector<ParetoPoint> helix_points =
      evaluate_space(helix_space, model, hw, seq_len);
  const std::vector<ParetoPoint> baseline_points =
      evaluate_space(baseline_space, model, hw, seq_len);
  const std::vector<ParetoPoint> helix_frontier = pareto_frontier(helix_points);
  const std::vector<ParetoPoint> baseline_frontier = pareto_frontier(baseline_points);

  std::vector<ParetoPoint> all_points = helix_points;
  all_points.insert(all_points.end(), baseline_points.begin(), baseline_points.end());
  std::vector<ParetoPoint> all_frontier = helix_frontier;
  all_frontier.insert(all_frontier.end(), baseline_frontier.begin(),
                      baseline_frontier.end());
  const std::string csv = pareto_csv(all_points, all_frontier);

  json report;
  report["model"] = model.name;
  report["hardware"] = hw.name;
  report["kv_seq_len"] = args.seq_len;
  report["hopb"] = hopb;
  report["points_evaluated"] = all_points.size();
  report["helix_frontier"] = frontier_json(helix_frontier);
  report["baseline_frontier"] = frontier_json(baseline_frontier);
  if (!helix_frontier.empty() && !baseline_frontier.empty())
    report["helix_vs_baseline"] =
        to_json(compare_frontiers(helix_frontier, baseline_frontier));

  if (args.ablate_hopb) {
    SearchSpace off_space = helix_space;
    off_space.hopb = false;
    const std::vector<ParetoPoint> off_points =
        evaluate_space(off_space, model, hw, seq_len);
    const std::vector<ParetoPoint> off_frontier = pareto_frontier(off_points);
    json ablation;
    ablation["hopb_on_frontier"] = frontier_json(helix_frontier);
    ablation["hopb_off_frontier"] = frontier_json(off_frontier);
    if (!off_frontier.empty() && !helix_frontier.empty()) {
      const FrontierComparison off_vs_on =
          compare_frontiers(off_frontier, helix_frontier);
      ablation["off_vs_on"] = to_json(off_vs_on);
      ablation["best_interactivity_drop"] = 1.0 - off_vs_on.max_interactivity_ratio;
    }
    report["hopb_ablation"] = ablation;
  }

  const std::string body = report.dump(2) + "\n";
  const OutputSink sink = make_sink(args.out);
  if (!sink.enabled()) {
    std::cout << body;
    return kOk;
  }
  sink.write("pareto.csv", csv);
  sink.write("report.json", body);
  RunManifest manifest;
  manifest.command_line = command_line;
  manifest.seed = seed;
  manifest.inputs = {{"model", input_digest(args.model, to_json(model))},
                     {"hardware", input_digest(args.hardware, to_json(hw))}};
  sink.write_manifest(manifest);
  std::cout << "wrote " << args.out << "/pareto.csv and report.json\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// verify-attention

struct VerifyArgs {
  i64 trials = 25;
  std::uint64_t seed = 0;
  double tolerance = 1e-10;
  std::string out;
};

struct FuzzStats {
  i64 trials = 0;
  i64 decode_steps = 0;
  double max_rel_error = 0;
  i64 broadcast_messages = 0;
  i64 a2a_messages = 0;
  i64 payload_scalars = 0;
  i64 lse_scalars = 0;
};

double rel_error(const exact::Matrix<double>& got, const exact::Matrix<double>& want) {
  const double scale = std::max(1e-12, want.cwiseAbs().maxCoeff());
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

// One fuzz trial: random pool shape and context, three decode steps, sharded
// result vs monolithic reference.
void fuzz_trial(std::mt19937_64& rng, FuzzStats& stats, double tolerance) {
  const i64 kv_heads = i64{1} << uniform_int(rng, 0, 3);    // 1..8
  const i64 q_per_kv = i64{1} << uniform_int(rng, 0, 2);    // 1..4
  const i64 head_size = i64{4} << uniform_int(rng, 0, 4);   // 4..64
  std::vector<i64> tpa_choices;
  for (i64 t = 1; t <= kv_heads; t *= 2) tpa_choices.push_back(t);
  const i64 tpa = tpa_choices[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<i64>(tpa_choices.size()) - 1))];
  const i64 hidden = kv_heads * q_per_kv * head_size;
  std::vector<i64> kvp_choices;
  for (i64 k = 1; k <= 8; k *= 2)
    if (hidden % (tpa * k) == 0) kvp_choices.push_back(k);
  const i64 kvp = kvp_choices[static_cast<std::size_t>(
      uniform_int(rng, 0, static_cast<i64>(kvp_choices.size()) - 1))];
  const i64 context = uniform_int(rng, 1, 512);
  const i64 chunk = uniform_int(rng, 1, 32);

  exact::DecodeHarness<double>::Dims dims{kv_heads * q_per_kv, kv_heads, head_size};
  exact::DecodeHarness<double> harness(dims, tpa, kvp, chunk, rng());
  harness.grow_random(context, rng);

  for (int step = 0; step < 3; ++step) {
    exact::Vector<double> x(hidden);
    for (i64 i = 0; i < hidden; ++i)
      x[i] = 2.0 * uniform_unit(rng) - 1.0;
    const exact::Matrix<double> want = harness.reference(x);
    const exact::Matrix<double> got = harness.step(x);
    const double err = rel_error(got, want);
    stats.max_rel_error = std::max(stats.max_rel_error, err);
    ++stats.decode_steps;
    if (err > tolerance)
      throw ToleranceError("decode step exceeded tolerance: rel error " +
                           format_double(err) + " > " + format_double(tolerance));
  }
  for (const exact::Message& m : harness.transcript()) {
    if (m.kind == exact::MsgKind::Broadcast)
      ++stats.broadcast_messages;
    else
      ++stats.a2a_messages;
    stats.payload_scalars += m.payload_scalars;
    stats.lse_scalars += m.lse_scalars;
  }
  ++stats.trials;
}

int cmd_verify(const VerifyArgs& args, const std::string& command_line) {
  if (args.trials < 1) throw ConfigError("trials must be >= 1");
  std::mt19937_64 rng(args.seed);
  FuzzStats stats;
  std::string failure;
  try {
    for (i64 t = 0; t < args.trials; ++t) fuzz_trial(rng, stats, args.tolerance);
  } catch (const ToleranceError& e) {
    failure = e.what();
  }

  std::string text;
  text += "trials: " + std::to_string(stats.trials) + "\n";
  text += "decode_steps: " + std::to_string(stats.decode_steps) + "\n";
  text += "max_rel_error: " + format_double(stats.max_rel_error) + "\n";
  text += "tolerance: " + format_double(args.tolerance) + "\n";
  text += "broadcast_messages: " + std::to_string(stats.broadcast_messages) + "\n";
  text += "a2a_messages: " + std::to_string(stats.a2a_messages) + "\n";
  text += "payload_scalars: " + std::to_string(stats.payload_scalars) + "\n";
  text += "lse_scalars: " + std::to_string(stats.lse_scalars) + "\n";
  text += failure.empty() ? "status: ok\n" : "status: FAIL " + failure + "\n";

  const OutputSink sink = make_sink(args.out);
  if (sink.enabled()) {
    sink.write("verify.txt", text);
    RunManifest manifest;
    manifest.command_line = command_line;
    manifest.seed = args.seed;
    sink.write_manifest(manifest);
  }
  std::cout << text;
  return failure.empty() ? kOk : kToleranceError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Analytical decode-latency simulator and Pareto search for "
               "long-context LLM sharding strategies"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for randomized subcommands");

  RooflineArgs roofline_args;
  CLI::App* roofline_cmd =
      app.add_subcommand("roofline", "Sweep KV-read and weight-read roofline times");
  roofline_cmd->add_option("--model", roofline_args.model, "Model preset or JSON file");
  roofline_cmd->add_option("--hardware", roofline_args.hardware,
                           "Hardware preset or JSON file");
  roofline_cmd->add_option("--axis", roofline_args.axis, "tpa | kvp | seq_len")
      ->required();
  roofline_cmd->add_option("--range", roofline_args.range, "a..b or comma list")
      ->required();
  roofline_cmd->add_option("--seq-len", roofline_args.seq_len, "KV context length");
  roofline_cmd->add_option("--batch", roofline_args.batch, "Concurrent requests");
  roofline_cmd->add_option("--out", roofline_args.out, "Output directory");

  SimulateArgs sim_args;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "Score one parallelism config's decode step");
  sim_cmd->add_option("--model", sim_args.model, "Model preset or JSON file");
  sim_cmd->add_option("--hardware", sim_args.hardware, "Hardware preset or JSON file");
  sim_cmd->add_option("--workload", sim_args.workload_file,
                      "Workload JSON file (overrides --seq-len/--batch)");
  sim_cmd->add_option("--config", sim_args.config_file,
                      "Parallelism JSON file (overrides the width flags)");
  sim_cmd->add_option("--strategy", sim_args.strategy,
                      "helix | tp | tp_pp | ep_dp | medha_kvp");
  sim_cmd->add_option("--tpa", sim_args.tpa, "Attention tensor-parallel width");
  sim_cmd->add_option("--kvp", sim_args.kvp, "KV-parallel width");
  sim_cmd->add_option("--tpf", sim_args.tpf, "FFN tensor-parallel width");
  sim_cmd->add_option("--ep", sim_args.ep, "Expert-parallel width");
  sim_cmd->add_option("--pp", sim_args.pp, "Pipeline stages");
  sim_cmd->add_option("--seq-len", sim_args.seq_len, "KV context length");
  sim_cmd->add_option("--batch", sim_args.batch, "Concurrent requests");
  sim_cmd->add_option("--hopb", sim_args.hopb, "on | off");
  sim_cmd->add_flag("--timeline", sim_args.timeline,
                    "Also write the batch overlap timeline CSV");
  sim_cmd->add_option("--ttl-budget", sim_args.ttl_budget,
                      "Also report the largest batch within this TTL (seconds)");
  sim_cmd->add_option("--out", sim_args.out, "Output directory");

  ParetoArgs pareto_args;
  CLI::App* pareto_cmd = app.add_subcommand(
      "pareto", "Sweep configurations and extract throughput/interactivity frontiers");
  pareto_cmd->add_option("--model", pareto_args.model, "Model preset or JSON file");
  pareto_cmd->add_option("--hardware", pareto_args.hardware,
                         "Hardware preset or JSON file");
  pareto_cmd->add_option("--gpus", pareto_args.gpus, "GPU counts, a..b or comma list");
  pareto_cmd->add_option("--batches", pareto_args.batches,
                         "Batch sizes, a..b or comma list");
  pareto_cmd->add_option("--seq-len", pareto_args.seq_len, "KV context length");
  pareto_cmd->add_option("--hopb", pareto_args.hopb, "on | off");
  pareto_cmd->add_flag("--ablate-hopb", pareto_args.ablate_hopb,
                       "Also evaluate the Helix space with overlap disabled");
  pareto_cmd->add_option("--out", pareto_args.out, "Output directory");

  VerifyArgs verify_args;
  CLI::App* verify_cmd = app.add_subcommand(
      "verify-attention", "Fuzz sharded attention against the monolithic reference");
  verify_cmd->add_option("--trials", verify_args.trials, "Fuzz trials to run");
  verify_cmd->add_option("--tolerance", verify_args.tolerance,
                         "Max allowed relative error");
  verify_cmd->add_option("--out", verify_args.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParseError;
  }

  const std::string command_line = join_args(argc, argv);
  try {
    if (roofline_cmd->parsed()) return cmd_roofline(roofline_args, command_line, seed);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, command_line, seed);
    if (pareto_cmd->parsed()) return cmd_pareto(pareto_args, command_line, seed);
    if (verify_cmd->parsed()) {
      verify_args.seed = seed;
      return cmd_verify(verify_args, command_line);
    }
    std::cerr << "no subcommand\n";
    return kParseError;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParseError;
  } catch (const ToleranceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kToleranceError;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidationError;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return kUnexpected;
  }
}
