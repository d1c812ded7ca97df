#pragma once

#include "helixsim/types.hpp"

namespace helixsim {

enum class CollKind { AllToAll, AllReduce, AllGather, Broadcast };

inline const char* coll_name(CollKind k) {
  switch (k) {
    case CollKind::AllToAll: return "all_to_all";
    case CollKind::AllReduce: return "all_reduce";
    case CollKind::AllGather: return "all_gather";
    case CollKind::Broadcast: return "broadcast";
  }
  return "?";
}

// Alpha-beta collective cost on a flat switched domain. payload_bytes_per_gpu
// is the data each participant holds going in; a group of one costs nothing.
//
//   AllToAll   lat            + payload*(g-1)/g / bw      (1/g stays local)
//   AllReduce  lat*2(g-1)     + 2*payload*(g-1)/g / bw    (ring reduce+share)
//   AllGather  lat*(g-1)      + payload*(g-1)/g / bw
//   Broadcast  lat            + payload / bw
inline double comm_time(CollKind kind, i64 group_size, double payload_bytes_per_gpu,
                        const HardwareSpec& hw) {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  if (payload_bytes_per_gpu < 0)
    throw std::invalid_argument("payload must be >= 0 bytes");
  if (group_size == 1) return 0.0;
  const double g = static_cast<double>(group_size);
  const double frac = payload_bytes_per_gpu * (g - 1.0) / g / hw.link_bw;
  switch (kind) {
    case CollKind::AllToAll: return hw.link_latency + frac;
    case CollKind::AllReduce: return hw.link_latency * 2.0 * (g - 1.0) + 2.0 * frac;
    case CollKind::AllGather: return hw.link_latency * (g - 1.0) + frac;
    case CollKind::Broadcast: return hw.link_latency + payload_bytes_per_gpu / hw.link_bw;
  }
  return 0.0;
}

struct CommEvent {
  CollKind kind;
  i64 group_size;
  double bytes_per_gpu;
  double time;
};

inline CommEvent make_comm_event(CollKind kind, i64 group_size,
                                 double payload_bytes_per_gpu,
                                 const HardwareSpec& hw) {
  return {kind, group_size, payload_bytes_per_gpu,
          comm_time(kind, group_size, payload_bytes_per_gpu, hw)};
}

// Bytes one KVP rank sends to one peer in the fragment exchange: its slice of
// the per-token hidden state, batch-wide, plus one log-sum-exp scalar per
// query head riding along (the 1/Hsz term). Independent of sequence length.
inline double a2a_payload_per_destination(const ModelSpec& model, i64 batch,
                                          i64 kvp, i64 tpa, const HardwareSpec& hw) {
  if (kvp < 1 || tpa < 1) throw std::invalid_argument("kvp and tpa must be >= 1");
  if (model.hidden_dim % (kvp * tpa) != 0)
    throw std::invalid_argument("kvp*tpa must divide hidden_dim");
  const double slice = static_cast<double>(model.hidden_dim) /
                       static_cast<double>(kvp * tpa);
  const double lse_overhead = 1.0 / static_cast<double>(model.head_size);
  return static_cast<double>(batch) * slice * (1.0 + lse_overhead) * hw.bytes_per_param;
}

// Total bytes each rank puts on the wire: one slice per peer.
inline double a2a_total_send_bytes(const ModelSpec& model, i64 batch, i64 kvp,
                                   i64 tpa, const HardwareSpec& hw) {
  return a2a_payload_per_destination(model, batch, kvp, tpa, hw) *
         static_cast<double>(kvp - 1);
}

}  // namespace helixsim
