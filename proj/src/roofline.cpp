#include "helixsim/roofline.hpp"

namespace helixsim {

namespace {

// Sweep-only variant: whole query heads per GPU (ceil) so that full integer
// ranges stay total; identical to weight_read_time wherever tpa divides Q.
double weight_read_time_whole_heads(const ModelSpec& model, i64 tpa, i64 tpf,
                                    const HardwareSpec& hw) {
  const double h = static_cast<double>(model.hidden_dim);
  const double attn_params =
      2.0 * h * static_cast<double>(ceil_div(model.query_heads, tpa)) *
          static_cast<double>(model.head_size) +
      2.0 * h * static_cast<double>(ceil_div(model.effective_kv_heads(), tpa)) *
          static_cast<double>(model.kv_head_size());
  const double ffn_params = static_cast<double>(model.ffn_gate_factor) * h *
                            static_cast<double>(model.ffn_dim) /
                            static_cast<double>(tpf);
  return (attn_params + ffn_params) * hw.bytes_per_param / hw.mem_bw;
}

}  // namespace

std::vector<RooflineRow> sweep(const ModelSpec& model, const WorkloadSpec& work,
                               const HardwareSpec& hw, SweepAxis axis,
                               std::span<const i64> values) {
  if (values.empty()) throw std::invalid_argument("sweep range must be nonempty");
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] <= values[i - 1])
      throw std::invalid_argument("sweep range must be strictly ascending");
  if (values.front() < 1) throw std::invalid_argument("sweep values must be >= 1");

  std::vector<RooflineRow> rows;
  rows.reserve(values.size());
  for (i64 v : values) {
    RooflineRow row{axis, v, 0.0, 0.0};
    switch (axis) {
      case SweepAxis::Tpa:
        row.kv_read_time_s = kv_read_time(model, work, v, 1, hw);
        row.weight_read_time_s = weight_read_time_whole_heads(model, v, v, hw);
        break;
      case SweepAxis::Kvp:
        row.kv_read_time_s = kv_read_time(model, work, 1, v, hw);
        row.weight_read_time_s = weight_read_time_whole_heads(model, 1, v, hw);
        break;
      case SweepAxis::SeqLen: {
        WorkloadSpec w = work;
        w.kv_seq_len = v;
        row.kv_read_time_s = kv_read_time(model, w, 1, 1, hw);
        row.weight_read_time_s = weight_read_time_whole_heads(model, 1, 1, hw);
        break;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace helixsim
