// Capture parsing and flow assembly: pcap/pcapng readers, 5-tuple flow
// table with timeout/FIN termination, and the anonymize-and-trim step that
// turns frames into fixed-length normalized byte vectors.
#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arcade/dataset.hpp"

namespace arcade::ingest {

struct FlowKey {
  std::uint8_t ip_version = 4;
  std::array<std::uint8_t, 16> src_ip{};  // v4 uses the first 4 bytes
  std::array<std::uint8_t, 16> dst_ip{};
  std::uint16_t src_port = 0;
  std::uint16_t dst_port = 0;
  std::uint8_t protocol = 0;

  auto operator<=>(const FlowKey&) const = default;
  std::string str() const;
};

// Byte ranges that carry endpoint identity, derived from the parsed
// headers (never hardcoded offsets; VLAN tags and IPv6 shift them).
struct FrameLayout {
  bool has_ethernet = false;  // when set, bytes 0..11 are MAC addresses
  int src_addr_offset = 0;
  int dst_addr_offset = 0;
  int addr_len = 4;
};

struct PacketRecord {
  double timestamp = 0.0;
  std::vector<std::uint8_t> link_bytes;
  FlowKey five_tuple;
  std::optional<std::uint8_t> tcp_flags;
  FrameLayout layout;
};

constexpr std::uint8_t kTcpFin = 0x01;

struct CaptureCounters {
  std::uint64_t frames_total = 0;
  std::uint64_t skipped_non_ip = 0;
  std::uint64_t dropped_short = 0;   // frames too short for their IP header
  bool truncated_tail = false;       // capture ended mid-record
};

struct ParsedFrame {
  FlowKey key;
  std::optional<std::uint8_t> tcp_flags;
  FrameLayout layout;
};

// Link types supported by the readers.
constexpr std::uint32_t kLinkEthernet = 1;
constexpr std::uint32_t kLinkRawIp = 101;
constexpr std::uint32_t kLinkNull = 0;

// Parses one frame; returns nothing for non-IP frames or frames too short
// to contain their declared IP header (counters updated accordingly).
std::optional<ParsedFrame> parse_frame(std::span<const std::uint8_t> frame,
                                       std::uint32_t linktype,
                                       CaptureCounters& counters);

// Zeroes MAC and IP address bytes per the layout, keeps the first l bytes
// (zero-padding short frames), and maps byte b to b/255.
std::vector<double> anonymize_and_trim(std::span<const std::uint8_t> frame,
                                       const FrameLayout& layout, int l);

// Sequential reader over pcap (classic, us or ns) and pcapng captures.
class CaptureReader {
 public:
  explicit CaptureReader(const std::string& path);
  explicit CaptureReader(std::unique_ptr<std::istream> stream,
                         const std::string& name = "<stream>");
  ~CaptureReader();
  CaptureReader(CaptureReader&&) noexcept;
  CaptureReader& operator=(CaptureReader&&) noexcept;

  // Next IP packet, already parsed; nullopt at end of capture.
  std::optional<PacketRecord> next();
  const CaptureCounters& counters() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// ---------------------------------------------------------------------------
// Flow assembly
// ---------------------------------------------------------------------------

enum class FlowMode { flow, session };

struct IngestConfig {
  int n = 2;
  int l = 100;
  double timeout_s = 120.0;
  FlowMode mode = FlowMode::flow;
  bool pad_incomplete = false;
};

enum class FlowState { active, terminated_fin, terminated_timeout, emitted };

enum class Disposition { emitted_earlier, discarded, padded };

struct EmittedSample {
  FlowKey key;
  double first_seen = 0.0;
  std::vector<double> values;  // length n*l
};

struct FlowStats {
  std::uint64_t emitted = 0;
  std::uint64_t discarded = 0;
  std::uint64_t padded = 0;
  std::uint64_t absorbed_after_done = 0;  // packets arriving after emit/FIN
};

class FlowTable {
 public:
  explicit FlowTable(IngestConfig cfg);

  // Appends the packet to its flow (creating or, after a timeout gap,
  // resetting the entry). Returns the flow's sample exactly once, when the
  // n-th packet lands. Padded samples produced by timeout displacement are
  // queued; drain them with take_pending().
  std::optional<EmittedSample> ingest_packet(const PacketRecord& pkt);

  // Finalizes flows past the timeout relative to `now` (pass +inf at end of
  // capture) and FIN-terminated flows. Ordered by (first_seen, key).
  std::vector<std::pair<FlowKey, Disposition>> flush(double now);

  std::vector<EmittedSample> take_pending();
  const FlowStats& stats() const { return stats_; }
  std::size_t open_flows() const { return flows_.size(); }

 private:
  struct Buffer {
    std::vector<std::vector<double>> packets;
    double first_seen = 0.0;
    double last_seen = 0.0;
    FlowState state = FlowState::active;
    bool fin_fwd = false;
    bool fin_rev = false;
  };

  FlowKey table_key(const FlowKey& k, bool& forward_dir) const;
  std::optional<EmittedSample> finalize(const FlowKey& key, Buffer& b,
                                        Disposition& disp);

  IngestConfig cfg_;
  std::map<FlowKey, Buffer> flows_;
  std::vector<EmittedSample> pending_;
  FlowStats stats_;
};

struct PreprocessResult {
  dataset::SampleSet samples;
  CaptureCounters counters;
  FlowStats flows;
};

PreprocessResult preprocess_capture(const std::string& path, const IngestConfig& cfg);
PreprocessResult preprocess_capture(std::unique_ptr<std::istream> stream,
                                    const IngestConfig& cfg);

}  // namespace arcade::ingest
