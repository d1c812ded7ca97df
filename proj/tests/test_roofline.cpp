#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <random>
#include <vector>

#include "helixsim/io.hpp"
#include "helixsim/roofline.hpp"
#include "helixsim/types.hpp"

using namespace helixsim;

namespace {

// Reference dims: B=8, Q=128, K=8, Hsz=128, H=16384, F=65536, fp4 storage,
// 8 TB/s HBM.
ModelSpec ref_model() {
  ModelSpec m;
  m.name = "ref";
  m.layers = 1;
  m.hidden_dim = 16384;
  m.query_heads = 128;
  m.kv_heads = 8;
  m.head_size = 128;
  m.ffn_dim = 65536;
  return m;
}

WorkloadSpec ref_work(i64 batch = 8, i64 s = 1'000'000) {
  WorkloadSpec w;
  w.batch = batch;
  w.kv_seq_len = s;
  return w;
}

HardwareSpec ref_hw() { return HardwareSpec{}; }

}  // namespace

TEST_CASE("kv read time matches the hand-derived value") {
  // 8 requests x 2 (K,V) x ceil(8/8)=1 head x 128 wide x 1e6 tokens x 0.5 B
  // = 1.024e9 bytes; / 8e12 B/s = 1.28e-4 s.
  const double t = kv_read_time(ref_model(), ref_work(), 8, 1, ref_hw());
  CHECK(t == doctest::Approx(1.28e-4).epsilon(1e-12));
  // kvp=8 splits the sequence: exactly one eighth.
  const double t8 = kv_read_time(ref_model(), ref_work(), 8, 8, ref_hw());
  CHECK(t8 == doctest::Approx(1.6e-5).epsilon(1e-12));
  CHECK(t8 * 8 == t);  // power-of-two split: bitwise exact
}

TEST_CASE("weight read time matches the hand-derived value") {
  // QKV slice: 16384*(128/8)*128 + 2*16384*ceil(8/8)*128 = 67,108,864 +
  // 4,194,304 params; FFN: 3*16384*65536/8 = 402,653,184 params.
  // Total 473,956,352 x 0.5 B / 8e12 = 2.9622272e-5 s.
  const double t = weight_read_time(ref_model(), 8, 8, ref_hw());
  CHECK(t == doctest::Approx(2.9622272e-5).epsilon(1e-12));
  // Widening only the FFN split to 64 shrinks just the FFN term:
  // (67,108,864 + 4,194,304 + 50,331,648) x 0.5 / 8e12 = 7.602176e-6.
  const double t64 = weight_read_time(ref_model(), 8, 64, ref_hw());
  CHECK(t64 == doctest::Approx(7.602176e-6).epsilon(1e-12));
}

TEST_CASE("weight read rejects tpa not dividing the query heads") {
  CHECK_THROWS_AS(weight_read_time(ref_model(), 3, 8, ref_hw()),
                  std::invalid_argument);
}

TEST_CASE("kv read plateaus beyond the KV head count") {
  // K=8: for tpa >= 8 every GPU still holds at least one whole KV head;
  // ceil(8/tpa) = 1 for all of them, so the times are identical.
  const double t8 = kv_read_time(ref_model(), ref_work(), 8, 1, ref_hw());
  for (i64 tpa : {16, 32, 64}) {
    CHECK(kv_read_time(ref_model(), ref_work(), tpa, 1, ref_hw()) == t8);
  }
  // Below the plateau the read still shrinks with tpa.
  CHECK(kv_read_time(ref_model(), ref_work(), 4, 1, ref_hw()) == 2 * t8);
}

TEST_CASE("kv read scales exactly in S, B and 1/kvp") {
  std::mt19937_64 rng(7);
  const ModelSpec m = ref_model();
  const HardwareSpec hw = ref_hw();
  for (int draw = 0; draw < 1000; ++draw) {
    const i64 tpa = i64{1} << uniform_int(rng, 0, 3);
    const i64 kvp = i64{1} << uniform_int(rng, 0, 4);
    const i64 s = uniform_int(rng, 1, 1 << 20);
    const i64 b = uniform_int(rng, 1, 256);
    const double base = kv_read_time(m, ref_work(b, s), tpa, kvp, hw);
    // Doubling S or B doubles the time bitwise (power-of-two scaling).
    CHECK(kv_read_time(m, ref_work(b, 2 * s), tpa, kvp, hw) == 2.0 * base);
    CHECK(kv_read_time(m, ref_work(2 * b, s), tpa, kvp, hw) == 2.0 * base);
    // Doubling kvp halves it bitwise.
    CHECK(kv_read_time(m, ref_work(b, s), tpa, 2 * kvp, hw) == 0.5 * base);
  }
}

TEST_CASE("sweep emits one row per value with the documented semantics") {
  const ModelSpec m = ref_model();
  const WorkloadSpec w = ref_work();
  const HardwareSpec hw = ref_hw();

  std::vector<i64> values;
  for (i64 v = 1; v <= 64; ++v) values.push_back(v);

  const std::vector<RooflineRow> tpa_rows = sweep(m, w, hw, SweepAxis::Tpa, values);
  REQUIRE(tpa_rows.size() == 64);
  for (std::size_t i = 0; i < tpa_rows.size(); ++i) {
    const i64 v = values[i];
    CHECK(tpa_rows[i].value == v);
    CHECK(tpa_rows[i].kv_read_time_s == kv_read_time(m, w, v, 1, hw));
    if (m.query_heads % v == 0)
      CHECK(tpa_rows[i].weight_read_time_s == weight_read_time(m, v, v, hw));
  }
  // Non-divisor widths round query heads up to whole heads, so the weight
  // column decreases monotonically but never below the exact next divisor.
  for (std::size_t i = 1; i < tpa_rows.size(); ++i)
    CHECK(tpa_rows[i].weight_read_time_s <= tpa_rows[i - 1].weight_read_time_s);

  const std::vector<RooflineRow> kvp_rows = sweep(m, w, hw, SweepAxis::Kvp, values);
  REQUIRE(kvp_rows.size() == 64);
  for (std::size_t i = 0; i < kvp_rows.size(); ++i)
    CHECK(kvp_rows[i].kv_read_time_s == kv_read_time(m, w, 1, values[i], hw));

  const std::vector<i64> seqs{100'000, 1'000'000};
  const std::vector<RooflineRow> s_rows = sweep(m, w, hw, SweepAxis::SeqLen, seqs);
  REQUIRE(s_rows.size() == 2);
  CHECK(s_rows[0].weight_read_time_s == s_rows[1].weight_read_time_s);
  CHECK(10.0 * s_rows[0].kv_read_time_s == s_rows[1].kv_read_time_s);
}

TEST_CASE("sweep validates its value list") {
  const ModelSpec m = ref_model();
  const WorkloadSpec w = ref_work();
  const HardwareSpec hw = ref_hw();
  CHECK_THROWS_AS(sweep(m, w, hw, SweepAxis::Tpa, std::vector<i64>{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sweep(m, w, hw, SweepAxis::Tpa, std::vector<i64>{2, 1}),
                  std::invalid_argument);
  CHECK_THROWS_AS(sweep(m, w, hw, SweepAxis::Tpa, std::vector<i64>{0, 1}),
                  std::invalid_argument);
}

TEST_CASE("MLA collapses the KV axis to a single latent head") {
  ModelSpec m = ref_model();
  m.kv_heads = 1;
  m.attention_kind = AttentionKind::MLA;
  m.kv_latent_dim = 288;
  // 8 x 2 x 1 x 288 x 1e6 x 0.5 / 8e12 = 2.88e-4 s; tpa cannot shrink it.
  const double t = kv_read_time(m, ref_work(), 1, 1, ref_hw());
  CHECK(t == doctest::Approx(2.88e-4).epsilon(1e-12));
  CHECK(kv_read_time(m, ref_work(), 1, 8, ref_hw()) == t / 8);
}
