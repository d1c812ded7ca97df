#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "helixsim/pareto.hpp"
#include "helixsim/presets.hpp"

using namespace helixsim;

namespace {

// Small shapes keep enumeration oracles hand-checkable and evaluation cheap.
ModelSpec toy_moe() {
  ModelSpec m;
  m.name = "toy-moe";
  m.layers = 2;
  m.hidden_dim = 64;
  m.query_heads = 8;
  m.kv_heads = 4;
  m.head_size = 8;
  m.ffn_dim = 128;
  m.moe = MoESpec{4, 2, 8, 8};
  return m;
}

ModelSpec toy_mla() {
  ModelSpec m;
  m.name = "toy-mla";
  m.layers = 2;
  m.hidden_dim = 64;
  m.query_heads = 8;
  m.kv_heads = 1;
  m.head_size = 8;
  m.ffn_dim = 128;
  m.attention_kind = AttentionKind::MLA;
  m.kv_latent_dim = 16;
  return m;
}

using Widths = std::tuple<i64, i64, i64, i64, i64>;

Widths widths(const ParallelismConfig& c) {
  return {c.tpa, c.kvp, c.tpf, c.ep, c.pp};
}

ParetoPoint point(double user, double gpu, i64 total_gpus = 1, i64 batch = 1,
                  Strategy s = Strategy::TP) {
  ParetoPoint p;
  p.config = ParallelismConfig{s, total_gpus, 1, total_gpus, 1, 1};
  p.batch = batch;
  p.ttl = 1.0 / user;
  p.tokens_per_sec_per_user = user;
  p.tokens_per_sec_per_gpu = gpu;
  return p;
}

// Documented tie-break, reimplemented from the contract: fewer total GPUs,
// then lexicographically smallest (strategy, widths, batch).
bool precedes(const ParetoPoint& a, const ParetoPoint& b) {
  if (a.config.total_gpus() != b.config.total_gpus())
    return a.config.total_gpus() < b.config.total_gpus();
  const auto key = [](const ParetoPoint& p) {
    return std::make_tuple(static_cast<int>(p.config.strategy), p.config.tpa,
                           p.config.kvp, p.config.tpf, p.config.ep, p.config.pp,
                           p.batch);
  };
  return key(a) < key(b);
}

// Quadratic reference: a point survives unless something dominates it, or an
// exact metric twin with tie-break priority exists.
std::vector<ParetoPoint> brute_frontier(const std::vector<ParetoPoint>& pts) {
  std::vector<ParetoPoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const ParetoPoint& p = pts[i];
    bool keep = true;
    for (std::size_t j = 0; j < pts.size() && keep; ++j) {
      if (i == j) continue;
      const ParetoPoint& q = pts[j];
      const bool ge = q.tokens_per_sec_per_user >= p.tokens_per_sec_per_user &&
                      q.tokens_per_sec_per_gpu >= p.tokens_per_sec_per_gpu;
      const bool gt = q.tokens_per_sec_per_user > p.tokens_per_sec_per_user ||
                      q.tokens_per_sec_per_gpu > p.tokens_per_sec_per_gpu;
      if (ge && gt) keep = false;
      if (ge && !gt && precedes(q, p)) keep = false;
      // Fully indistinguishable twins collapse to a single survivor.
      if (ge && !gt && !precedes(q, p) && !precedes(p, q) && j < i) keep = false;
    }
    if (keep) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.tokens_per_sec_per_user != b.tokens_per_sec_per_user)
      return a.tokens_per_sec_per_user > b.tokens_per_sec_per_user;
    if (a.tokens_per_sec_per_gpu != b.tokens_per_sec_per_gpu)
      return a.tokens_per_sec_per_gpu > b.tokens_per_sec_per_gpu;
    return precedes(a, b);
  });
  return out;
}

bool same_points(const std::vector<ParetoPoint>& a, const std::vector<ParetoPoint>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (widths(a[i].config) != widths(b[i].config)) return false;
    if (a[i].config.strategy != b[i].config.strategy) return false;
    if (a[i].batch != b[i].batch) return false;
    if (a[i].tokens_per_sec_per_user != b[i].tokens_per_sec_per_user) return false;
    if (a[i].tokens_per_sec_per_gpu != b[i].tokens_per_sec_per_gpu) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("helix enumeration crosses attention and ffn splits") {
  const HardwareSpec hw = gb200_like();
  const auto cfgs = enumerate_configs(Strategy::Helix, 4, toy_moe(), hw);
  const std::vector<Widths> expected = {
      {1, 4, 1, 4, 1}, {1, 4, 2, 2, 1}, {1, 4, 4, 1, 1},
      {2, 2, 1, 4, 1}, {2, 2, 2, 2, 1}, {2, 2, 4, 1, 1},
      {4, 1, 1, 4, 1}, {4, 1, 2, 2, 1}, {4, 1, 4, 1, 1},
  };
  REQUIRE(cfgs.size() == expected.size());
  for (std::size_t i = 0; i < cfgs.size(); ++i) {
    CHECK(widths(cfgs[i]) == expected[i]);
    CHECK(cfgs[i].strategy == Strategy::Helix);
    CHECK(cfgs[i].total_gpus() == 4);
  }
}

TEST_CASE("latent attention pins helix to a single attention shard") {
  const HardwareSpec hw = gb200_like();
  const auto cfgs = enumerate_configs(Strategy::Helix, 4, toy_mla(), hw);
  REQUIRE(cfgs.size() == 1);
  CHECK(widths(cfgs[0]) == Widths{1, 4, 4, 1, 1});

  // The deepseek-like preset behaves the same way at any count.
  for (const ParallelismConfig& c :
       enumerate_configs(Strategy::Helix, 8, deepseek_r1_like(), hw))
    CHECK(c.tpa == 1);
}

TEST_CASE("baseline strategies enumerate their documented shapes") {
  const HardwareSpec hw = gb200_like();
  const ModelSpec moe = toy_moe();

  const auto tp = enumerate_configs(Strategy::TP, 4, moe, hw);
  REQUIRE(tp.size() == 1);
  CHECK(widths(tp[0]) == Widths{4, 1, 4, 1, 1});

  const auto tppp = enumerate_configs(Strategy::TP_PP, 4, moe, hw);
  REQUIRE(tppp.size() == 2);
  CHECK(widths(tppp[0]) == Widths{1, 1, 1, 1, 4});
  CHECK(widths(tppp[1]) == Widths{2, 1, 2, 1, 2});
  for (const ParallelismConfig& c : tppp) CHECK(c.pp >= 2);

  const auto medha = enumerate_configs(Strategy::MedhaKVP, 4, moe, hw);
  const std::vector<Widths> medha_expected = {
      {1, 1, 1, 1, 4}, {1, 2, 1, 1, 2}, {1, 4, 1, 1, 1},
      {2, 1, 2, 1, 2}, {2, 2, 2, 1, 1}, {4, 1, 4, 1, 1},
  };
  REQUIRE(medha.size() == medha_expected.size());
  for (std::size_t i = 0; i < medha.size(); ++i)
    CHECK(widths(medha[i]) == medha_expected[i]);

  const auto epdp = enumerate_configs(Strategy::EP_DPAttention, 4, moe, hw);
  const std::vector<Widths> epdp_expected = {
      {1, 1, 1, 1, 4}, {1, 1, 1, 2, 2}, {1, 1, 1, 4, 1},
      {1, 1, 2, 1, 2}, {1, 1, 2, 2, 1}, {1, 1, 4, 1, 1},
  };
  REQUIRE(epdp.size() == epdp_expected.size());
  for (std::size_t i = 0; i < epdp.size(); ++i)
    CHECK(widths(epdp[i]) == epdp_expected[i]);

  // A dense model forbids expert spreading, leaving pure tensor/pipeline mixes.
  const auto epdp_dense = enumerate_configs(Strategy::EP_DPAttention, 4, toy_mla(), hw);
  const std::vector<Widths> dense_expected = {
      {1, 1, 1, 1, 4}, {1, 1, 2, 1, 2}, {1, 1, 4, 1, 1}};
  REQUIRE(epdp_dense.size() == dense_expected.size());
  for (std::size_t i = 0; i < epdp_dense.size(); ++i)
    CHECK(widths(epdp_dense[i]) == dense_expected[i]);
}

TEST_CASE("space enumeration deduplicates and orders blocks") {
  const HardwareSpec hw = gb200_like();
  SearchSpace space;
  space.strategies = {Strategy::Helix, Strategy::Helix};
  space.gpu_counts = {4, 4, 2};
  const auto cfgs = enumerate_space(space, toy_moe(), hw);
  // Helix at n=2 gives 2 attention splits x 2 ffn splits; n=4 gives 9.
  REQUIRE(cfgs.size() == 4 + 9);
  for (std::size_t i = 0; i < 4; ++i) CHECK(cfgs[i].total_gpus() == 2);
  for (std::size_t i = 4; i < cfgs.size(); ++i) CHECK(cfgs[i].total_gpus() == 4);
}

TEST_CASE("evaluation yields one point per feasible config-batch pair") {
  const HardwareSpec hw = gb200_like();
  SearchSpace space;
  space.strategies = {Strategy::Helix};
  space.gpu_counts = {4};
  space.batch_sizes = {4, 1, 2};  // unsorted on purpose
  const auto pts = evaluate_space(space, toy_moe(), hw, 1000);
  REQUIRE(pts.size() == 9 * 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const ParetoPoint& p = pts[i];
    CHECK(p.batch == std::vector<i64>{1, 2, 4}[i % 3]);
    CHECK(p.ttl > 0.0);
    CHECK(p.tokens_per_sec_per_user == 1.0 / p.ttl);
    CHECK(p.tokens_per_sec_per_gpu ==
          static_cast<double>(p.batch) / (p.ttl * 4.0));
  }
}

TEST_CASE("evaluation drops configurations that overflow dram") {
  const HardwareSpec hw = gb200_like();
  SearchSpace space;
  space.strategies = {Strategy::TP};
  space.gpu_counts = {8};
  space.batch_sizes = {8, 64};  // batch 64 needs ~1 TB/GPU of KV at 1M tokens
  const auto pts = evaluate_space(space, llama405b_like(), hw, 1000000);
  REQUIRE(pts.size() == 1);
  CHECK(pts[0].batch == 8);
}

TEST_CASE("evaluation is deterministic across thread counts") {
  const HardwareSpec hw = gb200_like();
  SearchSpace space;
  space.strategies = {Strategy::Helix, Strategy::MedhaKVP, Strategy::EP_DPAttention};
  space.gpu_counts = {2, 4};
  space.batch_sizes = {1, 3, 8};
  setenv("HELIXSIM_THREADS", "1", 1);
  const auto serial = evaluate_space(space, toy_moe(), hw, 5000);
  setenv("HELIXSIM_THREADS", "5", 1);
  const auto threaded = evaluate_space(space, toy_moe(), hw, 5000);
  unsetenv("HELIXSIM_THREADS");
  CHECK(same_points(serial, threaded));
}

TEST_CASE("the sweep frontier matches a quadratic reference on random sets") {
  std::mt19937_64 rng(11);
  auto draw_points = [&](int n, bool gridded) {
    std::vector<ParetoPoint> pts;
    for (int i = 0; i < n; ++i) {
      double user, gpu;
      if (gridded) {  // coarse grid forces metric ties and exact duplicates
        user = static_cast<double>(1 + rng() % 4);
        gpu = static_cast<double>(1 + rng() % 4) * 0.5;
      } else {
        user = 1.0 + static_cast<double>(rng() % 100000) * 1e-4;
        gpu = 1.0 + static_cast<double>(rng() % 100000) * 1e-4;
      }
      ParetoPoint p = point(user, gpu);
      p.config.strategy = static_cast<Strategy>(rng() % 5);
      p.config.tpa = static_cast<i64>(1) << (rng() % 4);
      p.config.kvp = static_cast<i64>(1) << (rng() % 3);
      p.config.tpf = static_cast<i64>(1) << (rng() % 4);
      p.config.ep = static_cast<i64>(1) << (rng() % 2);
      p.config.pp = static_cast<i64>(1) << (rng() % 2);
      p.batch = static_cast<i64>(1 + rng() % 16);
      p.tokens_per_sec_per_user = user;
      p.tokens_per_sec_per_gpu = gpu;
      pts.push_back(p);
    }
    return pts;
  };
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 60);
    const auto pts = draw_points(n, trial % 2 == 0);
    CHECK(same_points(pareto_frontier(pts), brute_frontier(pts)));
  }
  // One larger continuous set for good measure.
  const auto big = draw_points(500, false);
  CHECK(same_points(pareto_frontier(big), brute_frontier(big)));
}

TEST_CASE("frontier output is strictly ordered in both metrics") {
  const HardwareSpec hw = gb200_like();
  SearchSpace space;
  space.strategies = {Strategy::Helix, Strategy::TP, Strategy::MedhaKVP};
  space.gpu_counts = {1, 2, 4};
  space.batch_sizes = {1, 2, 4, 8};
  const auto pts = evaluate_space(space, toy_moe(), hw, 2000);
  const auto front = pareto_frontier(pts);
  REQUIRE(!front.empty());
  for (std::size_t i = 1; i < front.size(); ++i) {
    CHECK(front[i].tokens_per_sec_per_user < front[i - 1].tokens_per_sec_per_user);
    CHECK(front[i].tokens_per_sec_per_gpu > front[i - 1].tokens_per_sec_per_gpu);
  }
}

TEST_CASE("batch scalability finds the largest batch inside the budget") {
  const ModelSpec model = llama405b_like();
  const HardwareSpec hw = gb200_like();
  const ParallelismConfig cfg{Strategy::TP, 8, 1, 8, 1, 1};
  const i64 seq = 100000;
  auto ttl_at = [&](i64 batch) {
    return decode_ttl(cfg, model, WorkloadSpec{batch, seq, 1}, hw, true).ttl;
  };

  // Below the single-request latency nothing fits.
  CHECK(batch_scalability(cfg, model, hw, seq, ttl_at(1) * 0.999, true) == 0);
  // A budget of exactly the batch-7 latency admits batch 7 (<=, not <).
  const i64 at7 = batch_scalability(cfg, model, hw, seq, ttl_at(7), true);
  CHECK(at7 >= 7);
  CHECK(at7 == 7);
  // Exact budgets recover their batch across the range; latency grows strictly.
  for (i64 b : {1, 5, 12, 33, 64})
    CHECK(batch_scalability(cfg, model, hw, seq, ttl_at(b), true) == b);
  // The cap clamps an unbounded budget, on and off the doubling lattice.
  CHECK(batch_scalability(cfg, model, hw, seq, 1e9, true, 64) == 64);
  CHECK(batch_scalability(cfg, model, hw, seq, 1e9, true, 100) == 100);
  // Monotone in the budget.
  CHECK(batch_scalability(cfg, model, hw, seq, ttl_at(5), true) <=
        batch_scalability(cfg, model, hw, seq, ttl_at(9), true));
}

TEST_CASE("comparing a frontier against itself is the identity") {
  const std::vector<ParetoPoint> f = {point(8.0, 1.0), point(4.0, 2.0),
                                      point(2.0, 4.0)};
  const FrontierComparison cmp = compare_frontiers(f, f);
  CHECK(cmp.max_interactivity_ratio == 1.0);
  CHECK(cmp.throughput_ratio_at_matched_interactivity == 1.0);
  CHECK(cmp.interactivity_ratio_at_matched_throughput == 1.0);
  CHECK(cmp.overlap == FrontierOverlap::Full);
}

TEST_CASE("a uniformly doubled frontier reports a 2x ratio") {
  const std::vector<ParetoPoint> base = {point(8.0, 1.0), point(4.0, 2.0),
                                         point(2.0, 4.0)};
  const std::vector<ParetoPoint> doubled = {point(8.0, 2.0), point(4.0, 4.0),
                                            point(2.0, 8.0)};
  const FrontierComparison cmp = compare_frontiers(doubled, base);
  CHECK(cmp.max_interactivity_ratio == 1.0);
  CHECK(cmp.throughput_ratio_at_matched_interactivity == 2.0);
  CHECK(cmp.interactivity_ratio_at_matched_throughput == 2.0);
  CHECK(cmp.overlap == FrontierOverlap::Full);
  // The reverse comparison inverts the ratios.
  const FrontierComparison rev = compare_frontiers(base, doubled);
  CHECK(rev.throughput_ratio_at_matched_interactivity == doctest::Approx(0.5));
}

TEST_CASE("interpolation evaluates between knots in log-log space") {
  // Knots (16,1) and (4,4) lie on gpu = 16/user, so gpu(8) = 2.
  const std::vector<ParetoPoint> a = {point(16.0, 1.0), point(4.0, 4.0)};
  const std::vector<ParetoPoint> b = {point(8.0, 1.0)};
  const FrontierComparison cmp = compare_frontiers(a, b);
  CHECK(cmp.throughput_ratio_at_matched_interactivity == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(cmp.overlap == FrontierOverlap::Full);
}

TEST_CASE("disjoint frontiers yield nan ratios and no overlap") {
  const std::vector<ParetoPoint> a = {point(100.0, 1.0)};
  const std::vector<ParetoPoint> b = {point(1.0, 5.0)};
  const FrontierComparison cmp = compare_frontiers(a, b);
  CHECK(cmp.max_interactivity_ratio == 100.0);
  CHECK(std::isnan(cmp.throughput_ratio_at_matched_interactivity));
  CHECK(std::isnan(cmp.interactivity_ratio_at_matched_throughput));
  CHECK(cmp.overlap == FrontierOverlap::None);
}

TEST_CASE("partially overlapping user ranges are flagged as partial") {
  const std::vector<ParetoPoint> a = {point(16.0, 1.0), point(4.0, 3.0)};
  const std::vector<ParetoPoint> b = {point(32.0, 0.5), point(8.0, 2.0)};
  const FrontierComparison cmp = compare_frontiers(a, b);
  CHECK(cmp.overlap == FrontierOverlap::Partial);
  CHECK(cmp.max_interactivity_ratio == 0.5);
}

TEST_CASE("frontier comparison rejects empty inputs") {
  const std::vector<ParetoPoint> f = {point(8.0, 1.0)};
  CHECK_THROWS_AS(compare_frontiers({}, f), std::invalid_argument);
  CHECK_THROWS_AS(compare_frontiers(f, {}), std::invalid_argument);
}
