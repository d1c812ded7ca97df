#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "helixsim/latency.hpp"
#include "helixsim/overlap.hpp"
#include "helixsim/pareto.hpp"
#include "helixsim/roofline.hpp"
#include "helixsim/types.hpp"

namespace helixsim {

inline constexpr const char* kToolVersion = "0.1.0";

// FNV-1a over raw bytes; digests label config inputs in run manifests.
std::uint64_t fnv1a64(const std::string& bytes);
std::string fnv1a64_hex(const std::string& bytes);

std::string read_file(const std::string& path);  // ConfigError if unreadable

// Write via temp file + rename so readers never observe a partial file.
void atomic_write(const std::string& path, const std::string& content);

// Everything needed to reproduce a run. Identical manifests (timestamp
// aside) imply byte-identical outputs; the timestamp lives only here, never
// in data files.
struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command_line;
  std::uint64_t seed = 0;
  struct Input {
    std::string label;
    std::string digest;  // "fnv1a64:<16 hex>"
  };
  std::vector<Input> inputs;
  std::string timestamp;  // ISO 8601 UTC, filled by now_utc()
};

std::string now_utc();
nlohmann::json to_json(const RunManifest& m);

// ---------------------------------------------------------------------------
// Output serialization (stable field order, '\n' line endings, %.17g floats
// so round-trips are exact)

std::string format_double(double v);

std::string roofline_csv(const std::vector<RooflineRow>& rows);
std::string timeline_csv(const OverlapTimeline& timeline);
std::string pareto_csv(const std::vector<ParetoPoint>& points,
                       const std::vector<ParetoPoint>& frontier);

nlohmann::json to_json(const LatencyBreakdown& b);
nlohmann::json to_json(const ParetoPoint& p);
nlohmann::json to_json(const FrontierComparison& cmp);

// ---------------------------------------------------------------------------
// Portable randomness: fixed mappings over raw mt19937_64 draws, so streams
// are identical across standard libraries (std distributions are not).

double uniform_unit(std::mt19937_64& rng);            // [0, 1)
i64 uniform_int(std::mt19937_64& rng, i64 lo, i64 hi);  // inclusive range

}  // namespace helixsim
