// Test-only builders for Ethernet/IPv4 frames and pcap/pcapng capture
// bytes, written directly from the wire-format definitions so they stay
// independent of the reader under test.
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace testsupport {

struct TcpFrameSpec {
  std::array<std::uint8_t, 6> dst_mac{0x02, 0, 0, 0, 0, 0x01};
  std::array<std::uint8_t, 6> src_mac{0x02, 0, 0, 0, 0, 0x02};
  std::array<std::uint8_t, 4> src_ip{10, 0, 0, 1};
  std::array<std::uint8_t, 4> dst_ip{10, 0, 0, 2};
  std::uint16_t src_port = 40000;
  std::uint16_t dst_port = 80;
  std::uint8_t protocol = 6;        // 6 tcp, 17 udp
  std::uint8_t tcp_flags = 0x18;    // PSH|ACK
  std::uint8_t ttl = 64;
  std::vector<std::uint8_t> payload;
  int vlan_tags = 0;
};

inline void push_u16be(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
}

inline std::vector<std::uint8_t> eth_ipv4_frame(const TcpFrameSpec& s) {
  std::vector<std::uint8_t> f;
  f.insert(f.end(), s.dst_mac.begin(), s.dst_mac.end());
  f.insert(f.end(), s.src_mac.begin(), s.src_mac.end());
  for (int i = 0; i < s.vlan_tags; ++i) {
    push_u16be(f, 0x8100);
    push_u16be(f, 0x0064);  // VLAN 100
  }
  push_u16be(f, 0x0800);

  const int l4_len = s.protocol == 6 ? 20 : 8;
  const auto total = static_cast<std::uint16_t>(20 + l4_len + s.payload.size());
  f.push_back(0x45);
  f.push_back(0x00);
  push_u16be(f, total);
  push_u16be(f, 0x1234);  // id
  push_u16be(f, 0x4000);  // DF
  f.push_back(s.ttl);
  f.push_back(s.protocol);
  push_u16be(f, 0xbeef);  // checksum placeholder
  f.insert(f.end(), s.src_ip.begin(), s.src_ip.end());
  f.insert(f.end(), s.dst_ip.begin(), s.dst_ip.end());

  if (s.protocol == 6) {
    push_u16be(f, s.src_port);
    push_u16be(f, s.dst_port);
    push_u16be(f, 0x0000); push_u16be(f, 0x0001);  // seq
    push_u16be(f, 0x0000); push_u16be(f, 0x0002);  // ack
    f.push_back(0x50);  // data offset 5
    f.push_back(s.tcp_flags);
    push_u16be(f, 0x1000);  // window
    push_u16be(f, 0xcafe);  // checksum placeholder
    push_u16be(f, 0x0000);  // urgent
  } else {
    push_u16be(f, s.src_port);
    push_u16be(f, s.dst_port);
    push_u16be(f, static_cast<std::uint16_t>(8 + s.payload.size()));
    push_u16be(f, 0xfeed);
  }
  f.insert(f.end(), s.payload.begin(), s.payload.end());
  return f;
}

inline std::vector<std::uint8_t> arp_frame() {
  std::vector<std::uint8_t> f(42, 0);
  f[12] = 0x08;
  f[13] = 0x06;  // ARP ethertype
  return f;
}

struct CapturePacket {
  double ts = 0.0;
  std::vector<std::uint8_t> frame;
};

inline void push_u32le(std::vector<std::uint8_t>& v, std::uint32_t x) {
  for (int i = 0; i < 4; ++i) v.push_back(static_cast<std::uint8_t>((x >> (8 * i)) & 0xff));
}
inline void push_u16le(std::vector<std::uint8_t>& v, std::uint16_t x) {
  v.push_back(static_cast<std::uint8_t>(x & 0xff));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
}

// Classic little-endian microsecond pcap.
inline std::vector<std::uint8_t> build_pcap(const std::vector<CapturePacket>& pkts,
                                            std::uint32_t linktype = 1) {
  std::vector<std::uint8_t> out;
  push_u32le(out, 0xa1b2c3d4);
  push_u16le(out, 2);
  push_u16le(out, 4);
  push_u32le(out, 0);       // thiszone
  push_u32le(out, 0);       // sigfigs
  push_u32le(out, 65535);   // snaplen
  push_u32le(out, linktype);
  for (const auto& p : pkts) {
    const auto sec = static_cast<std::uint32_t>(p.ts);
    const auto usec = static_cast<std::uint32_t>((p.ts - sec) * 1e6 + 0.5);
    push_u32le(out, sec);
    push_u32le(out, usec);
    push_u32le(out, static_cast<std::uint32_t>(p.frame.size()));
    push_u32le(out, static_cast<std::uint32_t>(p.frame.size()));
    out.insert(out.end(), p.frame.begin(), p.frame.end());
  }
  return out;
}

// Minimal pcapng: SHB + one IDB (microsecond resolution) + EPBs.
inline std::vector<std::uint8_t> build_pcapng(const std::vector<CapturePacket>& pkts,
                                              std::uint16_t linktype = 1) {
  std::vector<std::uint8_t> out;
  auto block = [&](std::uint32_t type, const std::vector<std::uint8_t>& body) {
    const std::uint32_t total = static_cast<std::uint32_t>(12 + body.size());
    push_u32le(out, type);
    push_u32le(out, total);
    out.insert(out.end(), body.begin(), body.end());
    push_u32le(out, total);
  };
  {
    std::vector<std::uint8_t> shb;
    push_u32le(shb, 0x1a2b3c4d);
    push_u16le(shb, 1);
    push_u16le(shb, 0);
    for (int i = 0; i < 8; ++i) shb.push_back(0xff);  // section length unknown
    block(0x0a0d0d0a, shb);
  }
  {
    std::vector<std::uint8_t> idb;
    push_u16le(idb, linktype);
    push_u16le(idb, 0);
    push_u32le(idb, 65535);  // snaplen
    block(1, idb);
  }
  for (const auto& p : pkts) {
    const auto ts = static_cast<std::uint64_t>(p.ts * 1e6 + 0.5);  // microseconds
    std::vector<std::uint8_t> epb;
    push_u32le(epb, 0);  // interface id
    push_u32le(epb, static_cast<std::uint32_t>(ts >> 32));
    push_u32le(epb, static_cast<std::uint32_t>(ts & 0xffffffff));
    push_u32le(epb, static_cast<std::uint32_t>(p.frame.size()));
    push_u32le(epb, static_cast<std::uint32_t>(p.frame.size()));
    epb.insert(epb.end(), p.frame.begin(), p.frame.end());
    while (epb.size() % 4) epb.push_back(0);
    block(6, epb);
  }
  return out;
}

inline std::string bytes_to_string(const std::vector<std::uint8_t>& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size());
}

}  // namespace testsupport
