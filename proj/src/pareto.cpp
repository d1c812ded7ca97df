#include "helixsim/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <tuple>

#include "helixsim/parallel.hpp"

namespace helixsim {

namespace {

std::vector<i64> divisors(i64 n) {
  std::vector<i64> d;
  for (i64 i = 1; i * i <= n; ++i)
    if (n % i == 0) {
      d.push_back(i);
      if (i != n / i) d.push_back(n / i);
    }
  std::sort(d.begin(), d.end());
  return d;
}

auto width_key(const ParallelismConfig& c) {
  return std::make_tuple(c.tpa, c.kvp, c.tpf, c.ep, c.pp);
}

void keep_if_valid(std::vector<ParallelismConfig>& out, const ParallelismConfig& cfg,
                   const ModelSpec& model, const HardwareSpec& hw) {
  if (validate_config(cfg, model, hw)) out.push_back(cfg);
}

}  // namespace

std::vector<ParallelismConfig> enumerate_configs(Strategy strategy, i64 n,
                                                 const ModelSpec& model,
                                                 const HardwareSpec& hw) {
  std::vector<ParallelismConfig> out;
  const std::vector<i64> divs = divisors(n);
  switch (strategy) {
    case Strategy::Helix:
      for (i64 tpa : divs)
        for (i64 tpf : divs)
          keep_if_valid(out, {strategy, tpa, n / tpa, tpf, n / tpf, 1}, model, hw);
      break;
    case Strategy::TP:
      keep_if_valid(out, {strategy, n, 1, n, 1, 1}, model, hw);
      break;
    case Strategy::TP_PP:
      for (i64 pp : divs)
        if (pp >= 2)  // pp = 1 is plain TP; keep the strategies disjoint
          keep_if_valid(out, {strategy, n / pp, 1, n / pp, 1, pp}, model, hw);
      break;
    case Strategy::EP_DPAttention:
      for (i64 pp : divs)
        for (i64 tpf : divisors(n / pp))
          keep_if_valid(out, {strategy, 1, 1, tpf, n / pp / tpf, pp}, model, hw);
      break;
    case Strategy::MedhaKVP:
      for (i64 pp : divs)
        for (i64 tpa : divisors(n / pp))
          keep_if_valid(out, {strategy, tpa, n / pp / tpa, tpa, 1, pp}, model, hw);
      break;
  }
  std::sort(out.begin(), out.end(), [](const ParallelismConfig& a,
                                       const ParallelismConfig& b) {
    return width_key(a) < width_key(b);
  });
  return out;
}

std::vector<ParallelismConfig> enumerate_space(const SearchSpace& space,
                                               const ModelSpec& model,
                                               const HardwareSpec& hw) {
  std::vector<Strategy> strategies = space.strategies;
  std::sort(strategies.begin(), strategies.end());
  strategies.erase(std::unique(strategies.begin(), strategies.end()),
                   strategies.end());
  std::vector<i64> counts = space.gpu_counts;
  std::sort(counts.begin(), counts.end());
  counts.erase(std::unique(counts.begin(), counts.end()), counts.end());

  std::vector<ParallelismConfig> out;
  for (Strategy s : strategies)
    for (i64 n : counts) {
      std::vector<ParallelismConfig> cfgs = enumerate_configs(s, n, model, hw);
      out.insert(out.end(), cfgs.begin(), cfgs.end());
    }
  return out;
}

std::vector<ParetoPoint> evaluate_space(const SearchSpace& space, const ModelSpec& model,
                                        const HardwareSpec& hw, i64 kv_seq_len) {
  const std::vector<ParallelismConfig> cfgs = enumerate_space(space, model, hw);
  std::vector<i64> batches = space.batch_sizes;
  std::sort(batches.begin(), batches.end());
  batches.erase(std::unique(batches.begin(), batches.end()), batches.end());

  struct Task {
    ParallelismConfig cfg;
    i64 batch;
  };
  std::vector<Task> tasks;
  tasks.reserve(cfgs.size() * batches.size());
  for (const ParallelismConfig& c : cfgs)
    for (i64 b : batches) tasks.push_back({c, b});

  std::vector<std::optional<ParetoPoint>> slots(tasks.size());
  parallel_for(static_cast<i64>(tasks.size()), [&](i64 i) {
    const Task& t = tasks[static_cast<std::size_t>(i)];
    WorkloadSpec work{t.batch, kv_seq_len, 1};
    try {
      if (!capacity_feasible(t.cfg, model, work, hw)) return;
      const LatencyBreakdown lat = decode_ttl(t.cfg, model, work, hw, space.hopb);
      ParetoPoint p;
      p.config = t.cfg;
      p.batch = t.batch;
      p.ttl = lat.ttl;
      p.tokens_per_sec_per_user = 1.0 / lat.ttl;
      p.tokens_per_sec_per_gpu =
          static_cast<double>(t.batch) / (lat.ttl * static_cast<double>(t.cfg.total_gpus()));
      slots[static_cast<std::size_t>(i)] = p;
    } catch (const std::invalid_argument&) {
      // Unevaluable (config, batch) pairs are simply absent from the result.
    }
  });

  std::vector<ParetoPoint> out;
  out.reserve(tasks.size());
  for (const auto& slot : slots)
    if (slot) out.push_back(*slot);
  return out;
}

namespace {

// Tie-break among points with identical metrics: fewer GPUs first, then the
// lexicographically smallest configuration.
bool config_precedes(const ParetoPoint& a, const ParetoPoint& b) {
  if (a.config.total_gpus() != b.config.total_gpus())
    return a.config.total_gpus() < b.config.total_gpus();
  const auto ka = std::make_tuple(static_cast<int>(a.config.strategy), a.config.tpa,
                                  a.config.kvp, a.config.tpf, a.config.ep, a.config.pp,
                                  a.batch);
  const auto kb = std::make_tuple(static_cast<int>(b.config.strategy), b.config.tpa,
                                  b.config.kvp, b.config.tpf, b.config.ep, b.config.pp,
                                  b.batch);
  return ka < kb;
}

}  // namespace

std::vector<ParetoPoint> pareto_frontier(const std::vector<ParetoPoint>& points) {
  std::vector<ParetoPoint> sorted = points;
  // Descending user rate; within a user-rate tie descending GPU rate; within
  // a full metric tie the tie-break winner first.
  std::sort(sorted.begin(), sorted.end(), [](const ParetoPoint& a, const ParetoPoint& b) {
    if (a.tokens_per_sec_per_user != b.tokens_per_sec_per_user)
      return a.tokens_per_sec_per_user > b.tokens_per_sec_per_user;
    if (a.tokens_per_sec_per_gpu != b.tokens_per_sec_per_gpu)
      return a.tokens_per_sec_per_gpu > b.tokens_per_sec_per_gpu;
    return config_precedes(a, b);
  });

  std::vector<ParetoPoint> out;
  double best_gpu = -std::numeric_limits<double>::infinity();
  for (const ParetoPoint& p : sorted) {
    // Everything earlier has user rate >= ours, so we survive only by
    // strictly beating every earlier GPU rate; metric duplicates lose too.
    if (p.tokens_per_sec_per_gpu > best_gpu) {
      out.push_back(p);
      best_gpu = p.tokens_per_sec_per_gpu;
    }
  }
  return out;
}

i64 batch_scalability(const ParallelismConfig& cfg, const ModelSpec& model,
                      const HardwareSpec& hw, i64 kv_seq_len, double latency_budget,
                      bool hopb, i64 max_batch) {
  const auto fits = [&](i64 batch) {
    WorkloadSpec work{batch, kv_seq_len, 1};
    return decode_ttl(cfg, model, work, hw, hopb).ttl <= latency_budget;
  };
  if (!fits(1)) return 0;

  i64 lo = 1;  // known to fit
  i64 hi = 2;
  while (hi <= max_batch && fits(hi)) {
    lo = hi;
    hi *= 2;
  }
  if (hi > max_batch) {
    if (lo == max_batch || fits(max_batch)) return max_batch;
    hi = max_batch;  // max_batch itself fails; bisect below it
  }
  // Invariant: fits(lo), !fits(hi).
  while (hi - lo > 1) {
    const i64 mid = lo + (hi - lo) / 2;
    (fits(mid) ? lo : hi) = mid;
  }
  return lo;
}

namespace {

struct Curve {
  // Knots with x ascending, y descending (frontier shape), both positive.
  std::vector<double> x, y;

  double x_min() const { return x.front(); }
  double x_max() const { return x.back(); }

  // Piecewise-linear in log-log space between knots; defined on [x_min, x_max].
  double at(double q) const {
    if (q < x_min() || q > x_max())
      throw std::invalid_argument("interpolation query outside curve domain");
    const auto it = std::lower_bound(x.begin(), x.end(), q);
    std::size_t i = static_cast<std::size_t>(it - x.begin());
    if (i < x.size() && x[i] == q) return y[i];
    const std::size_t hi = i, lo = i - 1;
    const double t = (std::log(q) - std::log(x[lo])) / (std::log(x[hi]) - std::log(x[lo]));
    return std::exp(std::log(y[lo]) + t * (std::log(y[hi]) - std::log(y[lo])));
  }
};

Curve user_to_gpu(const std::vector<ParetoPoint>& frontier) {
  Curve c;
  for (const ParetoPoint& p : frontier) {
    c.x.push_back(p.tokens_per_sec_per_user);
    c.y.push_back(p.tokens_per_sec_per_gpu);
  }
  std::reverse(c.x.begin(), c.x.end());  // frontier is sorted by descending user
  std::reverse(c.y.begin(), c.y.end());
  return c;
}

Curve gpu_to_user(const std::vector<ParetoPoint>& frontier) {
  Curve c;
  for (const ParetoPoint& p : frontier) {  // descending user = ascending gpu
    c.x.push_back(p.tokens_per_sec_per_gpu);
    c.y.push_back(p.tokens_per_sec_per_user);
  }
  return c;
}

// Sup of a.at(q)/b.at(q) over the shared domain. Both curves are piecewise
// linear in log space, so the sup sits at a knot of either curve or at a
// domain endpoint; scanning those suffices.
double sup_ratio(const Curve& a, const Curve& b) {
  const double lo = std::max(a.x_min(), b.x_min());
  const double hi = std::min(a.x_max(), b.x_max());
  if (lo > hi) return std::numeric_limits<double>::quiet_NaN();
  std::vector<double> qs{lo, hi};
  for (double q : a.x)
    if (q >= lo && q <= hi) qs.push_back(q);
  for (double q : b.x)
    if (q >= lo && q <= hi) qs.push_back(q);
  double best = -std::numeric_limits<double>::infinity();
  for (double q : qs) best = std::max(best, a.at(q) / b.at(q));
  return best;
}

}  // namespace

FrontierComparison compare_frontiers(const std::vector<ParetoPoint>& a,
                                     const std::vector<ParetoPoint>& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("frontier comparison needs nonempty frontiers");
  const Curve ag = user_to_gpu(a), bg = user_to_gpu(b);
  const Curve au = gpu_to_user(a), bu = gpu_to_user(b);

  FrontierComparison cmp{};
  cmp.max_interactivity_ratio = ag.x_max() / bg.x_max();
  cmp.throughput_ratio_at_matched_interactivity = sup_ratio(ag, bg);
  cmp.interactivity_ratio_at_matched_throughput = sup_ratio(au, bu);

  const double lo = std::max(ag.x_min(), bg.x_min());
  const double hi = std::min(ag.x_max(), bg.x_max());
  if (lo > hi) {
    cmp.overlap = FrontierOverlap::None;
  } else {
    const bool a_covers_b = ag.x_min() <= bg.x_min() && ag.x_max() >= bg.x_max();
    const bool b_covers_a = bg.x_min() <= ag.x_min() && bg.x_max() >= ag.x_max();
    cmp.overlap = (a_covers_b || b_covers_a) ? FrontierOverlap::Full
                                             : FrontierOverlap::Partial;
  }
  return cmp;
}

}  // namespace helixsim
