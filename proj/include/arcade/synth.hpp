// Synthetic labeled traffic at desk scale: normal flows drawn from a small
// family of header-like templates with bounded per-byte jitter; anomalies
// are uniform-random payloads (class 1) or a single slice repeated across
// the flow (class 2, flood-style). Emitted samples obey the ingest value
// invariants, including zeroed MAC/IP address positions.
#pragma once

#include <cstdint>

#include "arcade/dataset.hpp"

namespace arcade::synth {

struct SynthConfig {
  std::uint64_t seed = 1;          // sampling stream
  std::uint64_t profile_seed = 0;  // template family; 0 = derive from seed.
                                   // Sets meant to share one traffic profile
                                   // (train vs held-out) share this value.
  std::int64_t normal_flows = 1000;
  std::int64_t anomaly_flows = 1000;
  int n = 2;
  int l = 100;
  int template_count = 4;
  int jitter = 8;             // +- amplitude on payload/jitter positions
  double flood_weight = 0.5;  // anomaly mix: flood_repeat vs random_payload
  int packets_min = 0;        // 0 means exactly n packets per flow
  int packets_max = 0;

  void validate() const;
};

constexpr std::uint8_t kClassRandomPayload = 1;
constexpr std::uint8_t kClassFloodRepeat = 2;

dataset::SampleSet synth_generate(const SynthConfig& cfg);

}  // namespace arcade::synth
