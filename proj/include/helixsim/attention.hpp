#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "helixsim/types.hpp"

// Desk-scale proof that sequence-sharded attention with log-sum-exp merging is
// exact: shards compute locally normalized partial outputs, a recorded
// exchange moves fragments between ranks, and the merge reproduces monolithic
// softmax attention to rounding error regardless of how tokens were split.
namespace helixsim::exact {

template <class Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <class Scalar>
constexpr Scalar neg_inf() {
  return -std::numeric_limits<Scalar>::infinity();
}

// ---------------------------------------------------------------------------
// Single-head primitives

template <class Scalar>
Scalar logit_scale(Eigen::Index head_width) {
  return Scalar(1) / std::sqrt(static_cast<Scalar>(head_width));
}

// One head of softmax attention over the full context, max-stabilized:
// out = softmax(K q / sqrt(width)) V. Rows of keys/values are tokens.
template <class Scalar>
Vector<Scalar> reference_attention(const Vector<Scalar>& q, const Matrix<Scalar>& keys,
                                   const Matrix<Scalar>& values) {
  if (keys.rows() == 0) throw std::invalid_argument("attention needs >= 1 context token");
  if (keys.rows() != values.rows() || keys.cols() != q.size() ||
      values.cols() != q.size())
    throw std::invalid_argument("mismatched attention operand shapes");
  Vector<Scalar> logits = (keys * q) * logit_scale<Scalar>(q.size());
  const Scalar m = logits.maxCoeff();
  Vector<Scalar> w = (logits.array() - m).exp();
  return (values.transpose() * w) / w.sum();
}

// Locally normalized output plus the shard's log-sum-exp; the pair is all a
// peer needs to fold this shard into a global softmax. Empty shards carry the
// identity element (zero output, -inf lse).
template <class Scalar>
struct HeadFragment {
  Vector<Scalar> partial_out;
  Scalar lse = neg_inf<Scalar>();
};

template <class Scalar>
HeadFragment<Scalar> partial_head_attention(const Vector<Scalar>& q,
                                            const Matrix<Scalar>& keys,
                                            const Matrix<Scalar>& values) {
  HeadFragment<Scalar> frag;
  frag.partial_out = Vector<Scalar>::Zero(q.size());
  if (keys.rows() == 0) return frag;
  Vector<Scalar> logits = (keys * q) * logit_scale<Scalar>(q.size());
  const Scalar m = logits.maxCoeff();
  Vector<Scalar> w = (logits.array() - m).exp();
  const Scalar z = w.sum();
  frag.partial_out = (values.transpose() * w) / z;
  frag.lse = m + std::log(z);
  return frag;
}

// ---------------------------------------------------------------------------
// Merging

namespace detail {

// Canonical fragment order: descending lse, ties broken by the first differing
// output coefficient. Merging in this order makes the result a pure function
// of the fragment *set* - any caller-side permutation or rank scheduling
// yields bitwise-identical output.
template <class Scalar>
std::vector<std::size_t> canonical_order(std::span<const HeadFragment<Scalar>> frags) {
  std::vector<std::size_t> idx(frags.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (frags[a].lse != frags[b].lse) return frags[a].lse > frags[b].lse;
    const auto& oa = frags[a].partial_out;
    const auto& ob = frags[b].partial_out;
    for (Eigen::Index i = 0; i < oa.size() && i < ob.size(); ++i)
      if (oa[i] != ob[i]) return oa[i] < ob[i];
    return oa.size() < ob.size();
  });
  return idx;
}

}  // namespace detail

template <class Scalar>
struct MergedHead {
  Vector<Scalar> out;
  Scalar lse = neg_inf<Scalar>();
};

// Fold shard fragments into the global softmax result:
//   m = max lse_i,  w_i = exp(lse_i - m),
//   out = sum(w_i * out_i) / sum(w_i),  lse = m + log(sum(w_i)).
// Exact in real arithmetic for any grouping of shards; empty fragments carry
// zero weight. All fragments empty means there was no context at all.
template <class Scalar>
MergedHead<Scalar> merge_head_fragments(std::span<const HeadFragment<Scalar>> frags) {
  if (frags.empty()) throw std::invalid_argument("merge needs >= 1 fragment");
  const std::vector<std::size_t> order = detail::canonical_order(frags);
  const Scalar m = frags[order.front()].lse;
  if (m == neg_inf<Scalar>())
    throw std::invalid_argument("all fragments empty: nothing to merge");

  const Eigen::Index width = frags[order.front()].partial_out.size();
  Vector<Scalar> acc = Vector<Scalar>::Zero(width);
  Scalar z = 0;
  for (std::size_t i : order) {
    if (frags[i].partial_out.size() != width)
      throw std::invalid_argument("fragment widths differ");
    if (frags[i].lse == neg_inf<Scalar>()) continue;
    const Scalar w = std::exp(frags[i].lse - m);
    acc += w * frags[i].partial_out;
    z += w;
  }
  return {acc / z, m + std::log(z)};
}

// ---------------------------------------------------------------------------
// Multi-head fragments (one KVP rank's contribution for a head group)

template <class Scalar>
struct AttentionFragment {
  Matrix<Scalar> partial_out;  // query heads x head size
  Vector<Scalar> lse;          // one scalar per query head
};

template <class Scalar>
struct MergedAttention {
  Matrix<Scalar> out;
  Vector<Scalar> lse;
};

template <class Scalar>
MergedAttention<Scalar> merge_fragments(std::span<const AttentionFragment<Scalar>> frags) {
  if (frags.empty()) throw std::invalid_argument("merge needs >= 1 fragment");
  const Eigen::Index heads = frags.front().partial_out.rows();
  const Eigen::Index width = frags.front().partial_out.cols();
  MergedAttention<Scalar> merged;
  merged.out.resize(heads, width);
  merged.lse.resize(heads);
  std::vector<HeadFragment<Scalar>> per_head(frags.size());
  for (Eigen::Index h = 0; h < heads; ++h) {
    for (std::size_t i = 0; i < frags.size(); ++i) {
      if (frags[i].partial_out.rows() != heads || frags[i].lse.size() != heads)
        throw std::invalid_argument("fragment head counts differ");
      per_head[i].partial_out = frags[i].partial_out.row(h).transpose();
      per_head[i].lse = frags[i].lse[h];
    }
    MergedHead<Scalar> head = merge_head_fragments<Scalar>(per_head);
    merged.out.row(h) = head.out.transpose();
    merged.lse[h] = head.lse;
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Sharded KV cache

// Tokens for one KV head on one rank, stored as fixed-capacity chunks.
template <class Scalar>
struct KvChunk {
  Matrix<Scalar> keys;    // tokens x width
  Matrix<Scalar> values;  // tokens x width
};

template <class Scalar>
struct KVShard {
  i64 rank = 0;
  // heads[h] is the ordered chunk list for KV head h; every head of a shard
  // holds the same token count.
  std::vector<std::vector<KvChunk<Scalar>>> heads;

  i64 tokens() const {
    if (heads.empty()) return 0;
    i64 n = 0;
    for (const KvChunk<Scalar>& c : heads.front()) n += c.keys.rows();
    return n;
  }

  // Concatenated context for one head, chunks in append order.
  KvChunk<Scalar> concatenated(i64 head) const {
    const auto& chunks = heads.at(static_cast<std::size_t>(head));
    i64 n = 0;
    Eigen::Index width = 0;
    for (const KvChunk<Scalar>& c : chunks) {
      n += c.keys.rows();
      width = c.keys.cols();
    }
    KvChunk<Scalar> out;
    out.keys.resize(n, width);
    out.values.resize(n, width);
    i64 row = 0;
    for (const KvChunk<Scalar>& c : chunks) {
      out.keys.middleRows(row, c.keys.rows()) = c.keys;
      out.values.middleRows(row, c.values.rows()) = c.values;
      row += c.keys.rows();
    }
    return out;
  }
};

// Where token g of the global sequence landed.
struct TokenRef {
  i64 rank;
  i64 row;  // position within the shard's concatenated sequence
};

// A KV cache split across kvp ranks along the sequence. Growth is round-robin
// in chunk_size blocks: chunk_size appends land on the cursor rank, then the
// cursor advances, keeping shard populations within one chunk of each other.
// token_order records the global interleave so the monolithic sequence stays
// recoverable for reference checks.
template <class Scalar>
class ShardedKVCache {
 public:
  ShardedKVCache(i64 kvp, i64 kv_heads, i64 head_width, i64 chunk_size = 16)
      : head_width_(head_width), chunk_size_(chunk_size) {
    if (kvp < 1 || kv_heads < 1 || head_width < 1 || chunk_size < 1)
      throw std::invalid_argument("cache dimensions must be >= 1");
    shards_.resize(static_cast<std::size_t>(kvp));
    appended_.assign(static_cast<std::size_t>(kvp), 0);
    for (i64 r = 0; r < kvp; ++r) {
      shards_[static_cast<std::size_t>(r)].rank = r;
      shards_[static_cast<std::size_t>(r)].heads.resize(
          static_cast<std::size_t>(kv_heads));
    }
  }

  i64 kvp() const { return static_cast<i64>(shards_.size()); }
  i64 kv_heads() const { return static_cast<i64>(shards_.front().heads.size()); }
  i64 head_width() const { return head_width_; }
  i64 chunk_size() const { return chunk_size_; }
  i64 total_tokens() const { return static_cast<i64>(token_order_.size()); }
  const KVShard<Scalar>& shard(i64 r) const {
    return shards_.at(static_cast<std::size_t>(r));
  }
  const std::vector<TokenRef>& token_order() const { return token_order_; }

  // Append one token: row h of k/v feeds KV head h. Lands on the cursor
  // rank's open chunk; a full chunk hands the cursor to the next rank.
  void append_round_robin(const Matrix<Scalar>& k, const Matrix<Scalar>& v) {
    if (k.rows() != kv_heads() || v.rows() != kv_heads() ||
        k.cols() != head_width_ || v.cols() != head_width_)
      throw std::invalid_argument("appended token has wrong shape");
    KVShard<Scalar>& sh = shards_[static_cast<std::size_t>(cursor_)];
    if (fill_ == 0)
      for (auto& chunks : sh.heads)
        chunks.push_back({Matrix<Scalar>::Zero(chunk_size_, head_width_),
                          Matrix<Scalar>::Zero(chunk_size_, head_width_)});
    for (i64 h = 0; h < kv_heads(); ++h) {
      KvChunk<Scalar>& c = sh.heads[static_cast<std::size_t>(h)].back();
      c.keys.row(fill_) = k.row(h);
      c.values.row(fill_) = v.row(h);
    }
    token_order_.push_back({cursor_, appended_[static_cast<std::size_t>(cursor_)]++});
    ++fill_;
    if (fill_ == chunk_size_) {
      fill_ = 0;
      cursor_ = (cursor_ + 1) % kvp();
    }
  }

  // Largest minus smallest shard population; round-robin growth keeps this
  // within one chunk at every prefix.
  i64 max_min_gap() const {
    i64 lo = std::numeric_limits<i64>::max(), hi = 0;
    for (const KVShard<Scalar>& s : shards_) {
      const i64 n = effective_tokens(s.rank);
      lo = std::min(lo, n);
      hi = std::max(hi, n);
    }
    return hi - lo;
  }

  // Tokens actually appended to a rank (the open chunk counts only its fill).
  i64 effective_tokens(i64 rank) const {
    return appended_.at(static_cast<std::size_t>(rank));
  }

  // Trailing unfilled rows of the cursor rank's open chunk are dead space;
  // expose per-rank contexts with them trimmed.
  KvChunk<Scalar> context(i64 rank, i64 head) const {
    KvChunk<Scalar> full = shard(rank).concatenated(head);
    const i64 n = effective_tokens(rank);
    full.keys.conservativeResize(n, Eigen::NoChange);
    full.values.conservativeResize(n, Eigen::NoChange);
    return full;
  }

  // Rebuild the monolithic sequence for one head in global append order.
  KvChunk<Scalar> global_context(i64 head) const {
    std::vector<KvChunk<Scalar>> per_rank;
    per_rank.reserve(shards_.size());
    for (const KVShard<Scalar>& s : shards_) per_rank.push_back(context(s.rank, head));
    KvChunk<Scalar> out;
    out.keys.resize(total_tokens(), head_width_);
    out.values.resize(total_tokens(), head_width_);
    std::vector<i64> next(shards_.size(), 0);
    for (i64 g = 0; g < total_tokens(); ++g) {
      const TokenRef& t = token_order_[static_cast<std::size_t>(g)];
      const i64 row = next[static_cast<std::size_t>(t.rank)]++;
      out.keys.row(g) = per_rank[static_cast<std::size_t>(t.rank)].keys.row(row);
      out.values.row(g) = per_rank[static_cast<std::size_t>(t.rank)].values.row(row);
    }
    return out;
  }

  // Build a cache from an explicit (possibly wildly uneven) token-to-rank
  // assignment, preserving global order. keys/values hold one matrix per KV
  // head, rows in global token order.
  static ShardedKVCache from_partition(i64 kvp, std::span<const Matrix<Scalar>> keys,
                                       std::span<const Matrix<Scalar>> values,
                                       std::span<const i64> rank_of_token,
                                       i64 chunk_size = 16) {
    if (keys.empty() || keys.size() != values.size())
      throw std::invalid_argument("need matching per-head key/value matrices");
    ShardedKVCache cache(kvp, static_cast<i64>(keys.size()), keys.front().cols(),
                         chunk_size);
    for (std::size_t g = 0; g < rank_of_token.size(); ++g) {
      const i64 r = rank_of_token[g];
      if (r < 0 || r >= kvp) throw std::invalid_argument("token rank out of range");
      KVShard<Scalar>& sh = cache.shards_[static_cast<std::size_t>(r)];
      for (i64 h = 0; h < cache.kv_heads(); ++h) {
        auto& chunks = sh.heads[static_cast<std::size_t>(h)];
        if (chunks.empty() || chunks.back().keys.rows() == chunk_size)
          chunks.push_back({Matrix<Scalar>(0, cache.head_width_),
                            Matrix<Scalar>(0, cache.head_width_)});
        KvChunk<Scalar>& c = chunks.back();
        c.keys.conservativeResize(c.keys.rows() + 1, Eigen::NoChange);
        c.values.conservativeResize(c.values.rows() + 1, Eigen::NoChange);
        c.keys.row(c.keys.rows() - 1) = keys[h].row(static_cast<Eigen::Index>(g));
        c.values.row(c.values.rows() - 1) = values[h].row(static_cast<Eigen::Index>(g));
      }
      cache.token_order_.push_back(
          {r, cache.appended_[static_cast<std::size_t>(r)]++});
    }
    return cache;
  }

 private:
  std::vector<KVShard<Scalar>> shards_;
  std::vector<TokenRef> token_order_;
  std::vector<i64> appended_;  // per-rank token counts, kept in step with token_order_
  i64 head_width_;
  i64 chunk_size_;
  i64 cursor_ = 0;
  i64 fill_ = 0;  // rows used in the cursor rank's open chunk
};

// One rank's shard attention for a contiguous group of query heads.
// queries: group query heads x head width; kv head h serves query heads
// [h*q_per_kv, (h+1)*q_per_kv) within the group starting at kv_head_offset.
template <class Scalar>
AttentionFragment<Scalar> shard_attention(const Matrix<Scalar>& queries,
                                          const ShardedKVCache<Scalar>& cache,
                                          i64 rank, i64 kv_head_offset,
                                          i64 kv_head_count, i64 q_per_kv) {
  if (queries.rows() != kv_head_count * q_per_kv)
    throw std::invalid_argument("query rows must equal kv_head_count * q_per_kv");
  AttentionFragment<Scalar> frag;
  frag.partial_out.resize(queries.rows(), queries.cols());
  frag.lse.resize(queries.rows());
  for (i64 h = 0; h < kv_head_count; ++h) {
    const KvChunk<Scalar> ctx = cache.context(rank, kv_head_offset + h);
    for (i64 qi = 0; qi < q_per_kv; ++qi) {
      const i64 row = h * q_per_kv + qi;
      const Vector<Scalar> q = queries.row(row).transpose();
      const HeadFragment<Scalar> hf = partial_head_attention<Scalar>(q, ctx.keys,
                                                                     ctx.values);
      frag.partial_out.row(row) = hf.partial_out.transpose();
      frag.lse[row] = hf.lse;
    }
  }
  return frag;
}

// ---------------------------------------------------------------------------
// Decode-step harness

enum class MsgKind { Broadcast, AllToAll };

// One recorded inter-rank transfer. Sizes are scalar counts, not bytes; they
// depend only on batch, hidden width and pool shape - never on context length.
struct Message {
  MsgKind kind;
  i64 src;
  i64 dst;
  i64 payload_scalars;
  i64 lse_scalars;
};

// Drives one full decode step over a kvp x tpa pool of in-process "ranks":
// broadcast the token, project QKV per tpa group, shard-attend per kvp rank,
// exchange fragment slices, merge, append the new token. Every transfer lands
// in the transcript; the arithmetic matches monolithic attention exactly up
// to rounding.
template <class Scalar>
class DecodeHarness {
 public:
  struct Dims {
    i64 query_heads;
    i64 kv_heads;
    i64 head_size;
    i64 hidden() const { return query_heads * head_size; }
  };

  DecodeHarness(Dims dims, i64 tpa, i64 kvp, i64 chunk_size, std::uint64_t seed)
      : dims_(dims), tpa_(tpa), kvp_(kvp),
        cache_(kvp, dims.kv_heads, dims.head_size, chunk_size) {
    if (tpa < 1 || kvp < 1) throw std::invalid_argument("tpa and kvp must be >= 1");
    if (dims.query_heads % dims.kv_heads != 0)
      throw std::invalid_argument("query_heads must be a multiple of kv_heads");
    if (dims.kv_heads % tpa != 0)
      throw std::invalid_argument("tpa must divide kv_heads");
    if (dims.hidden() % (tpa * kvp) != 0)
      throw std::invalid_argument("tpa*kvp must divide the hidden width");
    std::mt19937_64 rng(seed);
    const i64 h = dims.hidden();
    wq_ = random_matrix(rng, h, dims.query_heads * dims.head_size);
    wk_ = random_matrix(rng, h, dims.kv_heads * dims.head_size);
    wv_ = random_matrix(rng, h, dims.kv_heads * dims.head_size);
  }

  ShardedKVCache<Scalar>& cache() { return cache_; }
  const ShardedKVCache<Scalar>& cache() const { return cache_; }
  const std::vector<Message>& transcript() const { return transcript_; }
  i64 pool() const { return tpa_ * kvp_; }

  // Grow the context by n random tokens (stand-ins for previously decoded
  // steps), round-robin like real decode.
  void grow_random(i64 n, std::mt19937_64& rng) {
    for (i64 i = 0; i < n; ++i)
      cache_.append_round_robin(random_matrix(rng, dims_.kv_heads, dims_.head_size),
                                random_matrix(rng, dims_.kv_heads, dims_.head_size));
  }

  // One decode step for hidden state x: returns the merged attention output
  // (query heads x head size) and appends x's K/V to the cache afterwards.
  Matrix<Scalar> step(const Vector<Scalar>& x) {
    if (x.size() != dims_.hidden())
      throw std::invalid_argument("hidden state has wrong width");
    if (cache_.total_tokens() == 0)
      throw std::invalid_argument("decode needs a nonempty context");

    // Rank 0 owns the fresh token; everyone else receives it.
    for (i64 r = 1; r < pool(); ++r)
      transcript_.push_back({MsgKind::Broadcast, 0, r, dims_.hidden(), 0});

    const i64 kv_per_group = dims_.kv_heads / tpa_;
    const i64 q_per_kv = dims_.query_heads / dims_.kv_heads;
    const i64 q_per_group = kv_per_group * q_per_kv;
    const i64 group_width = q_per_group * dims_.head_size;
    const i64 slice = group_width / kvp_;

    Matrix<Scalar> out(dims_.query_heads, dims_.head_size);
    for (i64 g = 0; g < tpa_; ++g) {
      // Every rank of column g projects the full query slice for its heads.
      Matrix<Scalar> queries(q_per_group, dims_.head_size);
      for (i64 qi = 0; qi < q_per_group; ++qi) {
        const i64 head = g * q_per_group + qi;
        queries.row(qi) =
            (x.transpose() * wq_.middleCols(head * dims_.head_size, dims_.head_size));
      }

      std::vector<AttentionFragment<Scalar>> frags;
      frags.reserve(static_cast<std::size_t>(kvp_));
      for (i64 r = 0; r < kvp_; ++r)
        frags.push_back(shard_attention<Scalar>(queries, cache_, r, g * kv_per_group,
                                                kv_per_group, q_per_kv));

      // Fragment exchange: rank r ships peer p's slice of its flattened
      // (heads x width) output plus the lse scalars of the heads that slice
      // touches. Count per destination: group_width/kvp + those lse scalars.
      for (i64 r = 0; r < kvp_; ++r)
        for (i64 p = 0; p < kvp_; ++p) {
          if (p == r) continue;
          const i64 first_head = p * slice / dims_.head_size;
          const i64 last_head = ((p + 1) * slice - 1) / dims_.head_size;
          transcript_.push_back({MsgKind::AllToAll, rank_id(r, g), rank_id(p, g),
                                 slice, last_head - first_head + 1});
        }

      const MergedAttention<Scalar> merged = merge_fragments<Scalar>(frags);
      out.middleRows(g * q_per_group, q_per_group) = merged.out;
    }

    append_projected(x);
    return out;
  }

  // Monolithic oracle for the same step: rebuild the global sequence per KV
  // head and run plain stabilized attention head by head.
  Matrix<Scalar> reference(const Vector<Scalar>& x) const {
    Matrix<Scalar> out(dims_.query_heads, dims_.head_size);
    const i64 q_per_kv = dims_.query_heads / dims_.kv_heads;
    for (i64 kh = 0; kh < dims_.kv_heads; ++kh) {
      const KvChunk<Scalar> ctx = cache_.global_context(kh);
      for (i64 qi = 0; qi < q_per_kv; ++qi) {
        const i64 head = kh * q_per_kv + qi;
        const Vector<Scalar> q =
            (x.transpose() * wq_.middleCols(head * dims_.head_size, dims_.head_size))
                .transpose();
        out.row(head) =
            reference_attention<Scalar>(q, ctx.keys, ctx.values).transpose();
      }
    }
    return out;
  }

  void append_projected(const Vector<Scalar>& x) {
    Matrix<Scalar> k(dims_.kv_heads, dims_.head_size);
    Matrix<Scalar> v(dims_.kv_heads, dims_.head_size);
    for (i64 h = 0; h < dims_.kv_heads; ++h) {
      k.row(h) = x.transpose() * wk_.middleCols(h * dims_.head_size, dims_.head_size);
      v.row(h) = x.transpose() * wv_.middleCols(h * dims_.head_size, dims_.head_size);
    }
    cache_.append_round_robin(k, v);
  }

  static Matrix<Scalar> random_matrix(std::mt19937_64& rng, i64 rows, i64 cols) {
    Matrix<Scalar> m(rows, cols);
    for (i64 r = 0; r < rows; ++r)
      for (i64 c = 0; c < cols; ++c) m(r, c) = unit_draw(rng);
    return m;
  }

  // Portable uniform in [-1, 1): fixed 53-bit mapping, no distribution objects.
  static Scalar unit_draw(std::mt19937_64& rng) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return static_cast<Scalar>(2.0 * u - 1.0);
  }

 private:
  i64 rank_id(i64 kvp_rank, i64 tpa_group) const { return tpa_group * kvp_ + kvp_rank; }

  Dims dims_;
  i64 tpa_;
  i64 kvp_;
  Matrix<Scalar> wq_, wk_, wv_;
  ShardedKVCache<Scalar> cache_;
  std::vector<Message> transcript_;
};

}  // namespace helixsim::exact
