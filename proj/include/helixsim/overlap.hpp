#pragma once

#include <algorithm>
#include <vector>

#include "helixsim/types.hpp"

namespace helixsim {

struct OverlapEvent {
  i64 request;
  double compute_start;
  double compute_end;
  double comm_start;
  double comm_end;
};

struct OverlapTimeline {
  i64 requests = 0;
  double per_request_compute = 0;
  double per_request_comm = 0;
  bool enabled = false;
  std::vector<OverlapEvent> events;  // one per request, in issue order
  double total = 0;                  // comm_end of the last request
};

// Batchwise communication overlap for one phase of one layer.
//
// Disabled: every request runs compute then communication back to back,
//   total = R * (c + t).
// Enabled: compute stays dense (request i computes over [i*c, (i+1)*c]) and
//   each request's communication starts as soon as both its own compute and
//   the previous request's communication have finished:
//     comm_start(i) = max(compute_end(i), comm_end(i-1))
//   which telescopes to total = max(R*c + t, c + R*t): only the first compute
//   block and the slower of the two streams stay exposed.
inline OverlapTimeline hopb_schedule(i64 requests, double compute, double comm,
                                     bool enabled) {
  if (requests < 1) throw std::invalid_argument("requests must be >= 1");
  if (compute < 0 || comm < 0)
    throw std::invalid_argument("per-request times must be >= 0");

  OverlapTimeline tl;
  tl.requests = requests;
  tl.per_request_compute = compute;
  tl.per_request_comm = comm;
  tl.enabled = enabled;
  tl.events.reserve(static_cast<std::size_t>(requests));

  if (!enabled) {
    for (i64 i = 0; i < requests; ++i) {
      const double base = static_cast<double>(i) * (compute + comm);
      tl.events.push_back({i, base, base + compute, base + compute,
                           base + compute + comm});
    }
  } else {
    double prev_comm_end = 0.0;
    for (i64 i = 0; i < requests; ++i) {
      const double cs = static_cast<double>(i) * compute;
      const double ce = static_cast<double>(i + 1) * compute;
      const double ms = i == 0 ? ce : std::max(ce, prev_comm_end);
      const double me = ms + comm;
      tl.events.push_back({i, cs, ce, ms, me});
      prev_comm_end = me;
    }
  }
  tl.total = tl.events.back().comm_end;
  return tl;
}

}  // namespace helixsim
