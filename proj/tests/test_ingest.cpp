#include <doctest.h>

#include <cmath>
#include <limits>
#include <memory>
#include <sstream>

#include "arcade/errors.hpp"
#include "arcade/ingest.hpp"
#include "support/capture_builder.hpp"

using namespace arcade;
using namespace testsupport;

namespace {

std::unique_ptr<std::istream> stream_of(const std::vector<std::uint8_t>& bytes) {
  return std::make_unique<std::istringstream>(bytes_to_string(bytes));
}

ingest::PacketRecord packet_from(const std::vector<std::uint8_t>& frame, double ts) {
  ingest::CaptureCounters c;
  auto parsed = ingest::parse_frame(frame, ingest::kLinkEthernet, c);
  REQUIRE(parsed.has_value());
  ingest::PacketRecord rec;
  rec.timestamp = ts;
  rec.link_bytes = frame;
  rec.five_tuple = parsed->key;
  rec.tcp_flags = parsed->tcp_flags;
  rec.layout = parsed->layout;
  return rec;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST_CASE("empty capture with a valid header yields no packets") {
  auto bytes = build_pcap({});
  ingest::CaptureReader r(stream_of(bytes));
  CHECK_FALSE(r.next().has_value());
  CHECK(r.counters().frames_total == 0);
}

TEST_CASE("invalid magic is a fatal parse error") {
  std::vector<std::uint8_t> bad{0xde, 0xad, 0xbe, 0xef, 0, 0, 0, 0};
  CHECK_THROWS_AS(ingest::CaptureReader(stream_of(bad)), ParseError);
}

TEST_CASE("ARP frames are skipped with a counter; TCP frames come through") {
  TcpFrameSpec a;
  TcpFrameSpec b = a;
  b.src_port = 40001;
  auto bytes = build_pcap({{0.0, arp_frame()},
                           {0.1, eth_ipv4_frame(a)},
                           {0.2, eth_ipv4_frame(b)}});
  ingest::CaptureReader r(stream_of(bytes));
  int count = 0;
  while (auto p = r.next()) {
    CHECK(p->five_tuple.protocol == 6);
    ++count;
  }
  CHECK(count == 2);
  CHECK(r.counters().frames_total == 3);
  CHECK(r.counters().skipped_non_ip == 1);
}

TEST_CASE("truncated trailing packet stops iteration with a warning flag") {
  TcpFrameSpec s;
  auto bytes = build_pcap({{0.0, eth_ipv4_frame(s)}, {0.1, eth_ipv4_frame(s)}});
  bytes.resize(bytes.size() - 10);  // cut into the last record's data
  ingest::CaptureReader r(stream_of(bytes));
  CHECK(r.next().has_value());
  CHECK_FALSE(r.next().has_value());
  CHECK(r.counters().truncated_tail);
}

TEST_CASE("pcapng enhanced packet blocks parse to the same packets") {
  TcpFrameSpec s;
  auto classic = build_pcap({{1.5, eth_ipv4_frame(s)}});
  auto ng = build_pcapng({{1.5, eth_ipv4_frame(s)}});
  ingest::CaptureReader rc(stream_of(classic));
  ingest::CaptureReader rn(stream_of(ng));
  auto pc = rc.next();
  auto pn = rn.next();
  REQUIRE(pc.has_value());
  REQUIRE(pn.has_value());
  CHECK(pc->timestamp == doctest::Approx(pn->timestamp));
  CHECK(pc->five_tuple == pn->five_tuple);
  CHECK(pc->link_bytes == pn->link_bytes);
}

TEST_CASE("anonymize_and_trim zeroes identity bytes, pads, and normalizes") {
  TcpFrameSpec s;
  s.src_mac = {0xff, 0xff, 0xff, 0xff, 0xff, 0xff};
  auto frame = eth_ipv4_frame(s);  // 54 bytes, no payload
  frame.resize(60, 0xab);          // 60-byte frame
  ingest::CaptureCounters c;
  auto parsed = ingest::parse_frame(frame, ingest::kLinkEthernet, c);
  REQUIRE(parsed.has_value());
  auto v = ingest::anonymize_and_trim(frame, parsed->layout, 100);
  REQUIRE(v.size() == 100);
  for (int i = 0; i < 12; ++i) CHECK(v[i] == 0.0);    // MACs (incl. broadcast)
  for (int i = 26; i < 34; ++i) CHECK(v[i] == 0.0);   // IPv4 addresses
  for (int i = 60; i < 100; ++i) CHECK(v[i] == 0.0);  // zero padding
  CHECK(v[12] == doctest::Approx(0x08 / 255.0));      // EtherType preserved
  CHECK(v[56] == doctest::Approx(0xab / 255.0));
  // byte value mapping: 0xFF -> 1.0, 0x80 -> 128/255
  std::vector<std::uint8_t> probe(4, 0);
  probe[0] = 0xff;
  probe[1] = 0x80;
  ingest::FrameLayout none{};
  none.src_addr_offset = none.dst_addr_offset = 200;  // outside the window
  auto pv = ingest::anonymize_and_trim(probe, none, 4);
  CHECK(pv[0] == 1.0);
  CHECK(pv[1] == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("VLAN tags shift the anonymized address offsets") {
  TcpFrameSpec s;
  s.vlan_tags = 1;
  auto frame = eth_ipv4_frame(s);
  ingest::CaptureCounters c;
  auto parsed = ingest::parse_frame(frame, ingest::kLinkEthernet, c);
  REQUIRE(parsed.has_value());
  CHECK(parsed->layout.src_addr_offset == 30);  // 14 + 4 (tag) + 12
  auto v = ingest::anonymize_and_trim(frame, parsed->layout, 100);
  for (int i = 30; i < 38; ++i) CHECK(v[i] == 0.0);
  // The untagged address range now holds other header bytes and survives.
  CHECK(v[26] != 0.0);
}

TEST_CASE("frame too short for its IP header is dropped and counted") {
  TcpFrameSpec s;
  auto frame = eth_ipv4_frame(s);
  frame.resize(20);  // cuts into the IP header
  ingest::CaptureCounters c;
  CHECK_FALSE(ingest::parse_frame(frame, ingest::kLinkEthernet, c).has_value());
  CHECK(c.dropped_short == 1);
}

TEST_CASE("two packets with one 5-tuple emit one sample of length n*l") {
  ingest::IngestConfig cfg;  // n=2, l=100
  ingest::FlowTable table(cfg);
  TcpFrameSpec s;
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0)).has_value());
  auto sample = table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.5));
  REQUIRE(sample.has_value());
  CHECK(sample->values.size() == 200);
  CHECK(sample->first_seen == 0.0);
  CHECK(table.stats().emitted == 1);
}

TEST_CASE("different source ports are distinct flows") {
  ingest::IngestConfig cfg;
  ingest::FlowTable table(cfg);
  TcpFrameSpec a;
  TcpFrameSpec b = a;
  b.src_port = 40001;
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(a), 0.0)).has_value());
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(b), 0.1)).has_value());
  CHECK(table.open_flows() == 2);
}

TEST_CASE("timeout gap starts a new flow instance") {
  ingest::IngestConfig cfg;  // timeout 120
  ingest::FlowTable table(cfg);
  TcpFrameSpec s;
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0)).has_value());
  // 200 s later: the first instance is finalized (discarded), a new one starts.
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 200.0)).has_value());
  CHECK(table.stats().discarded == 1);
  CHECK(table.open_flows() == 1);
  // The new instance completes with its second packet.
  auto sample = table.ingest_packet(packet_from(eth_ipv4_frame(s), 201.0));
  REQUIRE(sample.has_value());
  CHECK(sample->first_seen == 200.0);
}

TEST_CASE("a gap of exactly the timeout keeps the flow alive") {
  ingest::IngestConfig cfg;
  ingest::FlowTable table(cfg);
  TcpFrameSpec s;
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0)).has_value());
  CHECK(table.ingest_packet(packet_from(eth_ipv4_frame(s), 120.0)).has_value());
}

TEST_CASE("FIN terminates a flow in flow mode; excess packets are absorbed") {
  ingest::IngestConfig cfg;
  cfg.n = 3;
  ingest::FlowTable table(cfg);
  TcpFrameSpec s;
  TcpFrameSpec fin = s;
  fin.tcp_flags = 0x11;  // FIN|ACK
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0)).has_value());
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(fin), 0.1)).has_value());
  // Terminated: the third packet is buffered excess and is discarded.
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.2)).has_value());
  CHECK(table.stats().absorbed_after_done == 1);
  auto disps = table.flush(kInf);
  REQUIRE(disps.size() == 1);
  CHECK(disps[0].second == ingest::Disposition::discarded);
}

TEST_CASE("FIN on the n-th packet still emits the sample") {
  ingest::IngestConfig cfg;  // n=2
  ingest::FlowTable table(cfg);
  TcpFrameSpec s;
  TcpFrameSpec fin = s;
  fin.tcp_flags = 0x11;
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0)).has_value());
  CHECK(table.ingest_packet(packet_from(eth_ipv4_frame(fin), 0.1)).has_value());
  auto disps = table.flush(kInf);
  REQUIRE(disps.size() == 1);
  CHECK(disps[0].second == ingest::Disposition::emitted_earlier);
}

TEST_CASE("session mode: both directions share one buffer, FIN needs both sides") {
  ingest::IngestConfig cfg;
  cfg.n = 4;
  cfg.mode = ingest::FlowMode::session;
  ingest::FlowTable table(cfg);
  TcpFrameSpec fwd;
  TcpFrameSpec rev = fwd;
  std::swap(rev.src_ip, rev.dst_ip);
  std::swap(rev.src_port, rev.dst_port);
  TcpFrameSpec fin_fwd = fwd;
  fin_fwd.tcp_flags = 0x11;
  TcpFrameSpec fin_rev = rev;
  fin_rev.tcp_flags = 0x11;

  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(fwd), 0.0)).has_value());
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(rev), 0.1)).has_value());
  CHECK(table.open_flows() == 1);  // canonicalized key
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(fin_fwd), 0.2)).has_value());
  // One-sided FIN does not terminate a session: the next packet is appended
  // and completes the sample.
  auto sample = table.ingest_packet(packet_from(eth_ipv4_frame(fin_rev), 0.3));
  CHECK(sample.has_value());
}

TEST_CASE("session mode: FIN in both directions terminates before n packets") {
  ingest::IngestConfig cfg;
  cfg.n = 4;
  cfg.mode = ingest::FlowMode::session;
  ingest::FlowTable table(cfg);
  TcpFrameSpec fwd;
  fwd.tcp_flags = 0x11;
  TcpFrameSpec rev = fwd;
  std::swap(rev.src_ip, rev.dst_ip);
  std::swap(rev.src_port, rev.dst_port);
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(fwd), 0.0)).has_value());
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(rev), 0.1)).has_value());
  CHECK_FALSE(table.ingest_packet(packet_from(eth_ipv4_frame(fwd), 0.2)).has_value());
  CHECK(table.stats().absorbed_after_done == 1);
}

TEST_CASE("flush pads incomplete flows only when configured") {
  TcpFrameSpec s;
  SUBCASE("default: discard") {
    ingest::IngestConfig cfg;
    ingest::FlowTable table(cfg);
    (void)table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0));
    auto disps = table.flush(kInf);
    REQUIRE(disps.size() == 1);
    CHECK(disps[0].second == ingest::Disposition::discarded);
    CHECK(table.take_pending().empty());
  }
  SUBCASE("pad_incomplete: zero-padded sample") {
    ingest::IngestConfig cfg;
    cfg.pad_incomplete = true;
    ingest::FlowTable table(cfg);
    (void)table.ingest_packet(packet_from(eth_ipv4_frame(s), 0.0));
    auto disps = table.flush(kInf);
    REQUIRE(disps.size() == 1);
    CHECK(disps[0].second == ingest::Disposition::padded);
    auto pending = table.take_pending();
    REQUIRE(pending.size() == 1);
    REQUIRE(pending[0].values.size() == 200);
    for (int i = 100; i < 200; ++i) CHECK(pending[0].values[i] == 0.0);
    bool any = false;
    for (int i = 0; i < 100; ++i) any = any || pending[0].values[i] != 0.0;
    CHECK(any);
  }
}

TEST_CASE("end-to-end preprocess: determinism and value range") {
  TcpFrameSpec a;
  TcpFrameSpec b = a;
  b.src_port = 40001;
  b.payload = {0x11, 0x22, 0x33};
  std::vector<CapturePacket> pkts{{0.0, eth_ipv4_frame(a)},
                                  {0.1, eth_ipv4_frame(b)},
                                  {0.2, eth_ipv4_frame(a)},
                                  {0.3, eth_ipv4_frame(b)}};
  auto bytes = build_pcap(pkts);
  ingest::IngestConfig cfg;
  auto r1 = ingest::preprocess_capture(stream_of(bytes), cfg);
  auto r2 = ingest::preprocess_capture(stream_of(bytes), cfg);
  CHECK(r1.samples.count() == 2);
  REQUIRE(r1.samples.values.numel() == r2.samples.values.numel());
  for (std::int64_t i = 0; i < r1.samples.values.numel(); ++i) {
    CHECK(r1.samples.values[i] == r2.samples.values[i]);
    // every value is k/255 for integer k (or padding zero)
    const double k = r1.samples.values[i] * 255.0;
    CHECK(std::abs(k - std::round(k)) < 1e-9);
    CHECK(r1.samples.values[i] >= 0.0);
    CHECK(r1.samples.values[i] <= 1.0);
  }
}

TEST_CASE("reordering packets of different flows does not change samples") {
  TcpFrameSpec a;
  TcpFrameSpec b = a;
  b.src_port = 40001;
  b.payload = {0x77};
  auto fa1 = eth_ipv4_frame(a);
  a.payload = {0x01, 0x02};
  auto fa2 = eth_ipv4_frame(a);
  auto fb1 = eth_ipv4_frame(b);
  b.payload = {0x99};
  auto fb2 = eth_ipv4_frame(b);

  auto interleaved = build_pcap({{0.0, fa1}, {0.1, fb1}, {0.2, fa2}, {0.3, fb2}});
  auto grouped = build_pcap({{0.0, fa1}, {0.1, fa2}, {0.2, fb1}, {0.3, fb2}});
  ingest::IngestConfig cfg;
  auto r1 = ingest::preprocess_capture(stream_of(interleaved), cfg);
  auto r2 = ingest::preprocess_capture(stream_of(grouped), cfg);
  REQUIRE(r1.samples.count() == 2);
  REQUIRE(r2.samples.count() == 2);
  // Flow A completes first in both captures; per-flow contents must match.
  for (std::int64_t i = 0; i < r1.samples.values.numel(); ++i)
    CHECK(r1.samples.values[i] == r2.samples.values[i]);
}

TEST_CASE("raw-IP link type parses without MAC anonymization") {
  TcpFrameSpec s;
  auto eth = eth_ipv4_frame(s);
  std::vector<std::uint8_t> raw(eth.begin() + 14, eth.end());  // strip Ethernet
  ingest::CaptureCounters c;
  auto parsed = ingest::parse_frame(raw, ingest::kLinkRawIp, c);
  REQUIRE(parsed.has_value());
  CHECK_FALSE(parsed->layout.has_ethernet);
  CHECK(parsed->layout.src_addr_offset == 12);
  auto v = ingest::anonymize_and_trim(raw, parsed->layout, 100);
  CHECK(v[0] == doctest::Approx(0x45 / 255.0));  // version/IHL byte survives
  for (int i = 12; i < 20; ++i) CHECK(v[i] == 0.0);
}
