#include "arcade/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "arcade/errors.hpp"

namespace arcade::ingest {

namespace {

std::uint16_t be16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

}  // namespace

std::string FlowKey::str() const {
  std::ostringstream os;
  auto ip = [&](const std::array<std::uint8_t, 16>& a) {
    if (ip_version == 4) {
      os << int(a[0]) << '.' << int(a[1]) << '.' << int(a[2]) << '.' << int(a[3]);
    } else {
      for (int i = 0; i < 16; i += 2) {
        if (i) os << ':';
        char buf[5];
        std::snprintf(buf, sizeof buf, "%02x%02x", a[i], a[i + 1]);
        os << buf;
      }
    }
  };
  ip(src_ip);
  os << ':' << src_port << "->";
  ip(dst_ip);
  os << ':' << dst_port << " proto " << int(protocol);
  return os.str();
}

// ---------------------------------------------------------------------------
// Frame parsing
// ---------------------------------------------------------------------------

namespace {

std::optional<ParsedFrame> parse_ipv4(std::span<const std::uint8_t> f, int off,
                                      bool has_eth, CaptureCounters& c) {
  if (f.size() < static_cast<std::size_t>(off) + 20) {
    ++c.dropped_short;
    return std::nullopt;
  }
  const std::uint8_t vihl = f[off];
  if ((vihl >> 4) != 4) {
    ++c.dropped_short;
    return std::nullopt;
  }
  const int ihl = (vihl & 0x0f) * 4;
  if (ihl < 20 || f.size() < static_cast<std::size_t>(off + ihl)) {
    ++c.dropped_short;
    return std::nullopt;
  }
  ParsedFrame p;
  p.key.ip_version = 4;
  p.key.protocol = f[off + 9];
  std::copy_n(f.data() + off + 12, 4, p.key.src_ip.begin());
  std::copy_n(f.data() + off + 16, 4, p.key.dst_ip.begin());
  p.layout.has_ethernet = has_eth;
  p.layout.src_addr_offset = off + 12;
  p.layout.dst_addr_offset = off + 16;
  p.layout.addr_len = 4;

  const int frag = ((f[off + 6] & 0x1f) << 8) | f[off + 7];
  const int l4 = off + ihl;
  if (frag == 0 && (p.key.protocol == 6 || p.key.protocol == 17) &&
      f.size() >= static_cast<std::size_t>(l4) + 4) {
    p.key.src_port = be16(f.data() + l4);
    p.key.dst_port = be16(f.data() + l4 + 2);
    if (p.key.protocol == 6 && f.size() >= static_cast<std::size_t>(l4) + 14)
      p.tcp_flags = f[l4 + 13];
  }
  return p;
}

std::optional<ParsedFrame> parse_ipv6(std::span<const std::uint8_t> f, int off,
                                      bool has_eth, CaptureCounters& c) {
  if (f.size() < static_cast<std::size_t>(off) + 40) {
    ++c.dropped_short;
    return std::nullopt;
  }
  if ((f[off] >> 4) != 6) {
    ++c.dropped_short;
    return std::nullopt;
  }
  ParsedFrame p;
  p.key.ip_version = 6;
  p.key.protocol = f[off + 6];  // next header; extension chains not walked
  std::copy_n(f.data() + off + 8, 16, p.key.src_ip.begin());
  std::copy_n(f.data() + off + 24, 16, p.key.dst_ip.begin());
  p.layout.has_ethernet = has_eth;
  p.layout.src_addr_offset = off + 8;
  p.layout.dst_addr_offset = off + 24;
  p.layout.addr_len = 16;

  const int l4 = off + 40;
  if ((p.key.protocol == 6 || p.key.protocol == 17) &&
      f.size() >= static_cast<std::size_t>(l4) + 4) {
    p.key.src_port = be16(f.data() + l4);
    p.key.dst_port = be16(f.data() + l4 + 2);
    if (p.key.protocol == 6 && f.size() >= static_cast<std::size_t>(l4) + 14)
      p.tcp_flags = f[l4 + 13];
  }
  return p;
}

}  // namespace

std::optional<ParsedFrame> parse_frame(std::span<const std::uint8_t> frame,
                                       std::uint32_t linktype,
                                       CaptureCounters& counters) {
  switch (linktype) {
    case kLinkEthernet: {
      if (frame.size() < 14) {
        ++counters.skipped_non_ip;
        return std::nullopt;
      }
      int etype_off = 12;
      std::uint16_t et = be16(frame.data() + etype_off);
      while (et == 0x8100 || et == 0x88a8 || et == 0x9100) {
        etype_off += 4;
        if (frame.size() < static_cast<std::size_t>(etype_off) + 2) {
          ++counters.skipped_non_ip;
          return std::nullopt;
        }
        et = be16(frame.data() + etype_off);
      }
      const int l3 = etype_off + 2;
      if (et == 0x0800) return parse_ipv4(frame, l3, true, counters);
      if (et == 0x86dd) return parse_ipv6(frame, l3, true, counters);
      ++counters.skipped_non_ip;
      return std::nullopt;
    }
    case kLinkRawIp: {
      if (frame.empty()) {
        ++counters.skipped_non_ip;
        return std::nullopt;
      }
      const int v = frame[0] >> 4;
      if (v == 4) return parse_ipv4(frame, 0, false, counters);
      if (v == 6) return parse_ipv6(frame, 0, false, counters);
      ++counters.skipped_non_ip;
      return std::nullopt;
    }
    case kLinkNull: {
      if (frame.size() < 4) {
        ++counters.skipped_non_ip;
        return std::nullopt;
      }
      // Family word is in the capturing host's byte order; accept both.
      const std::uint32_t fam_le = frame[0] | (frame[1] << 8) | (frame[2] << 16) |
                                   (static_cast<std::uint32_t>(frame[3]) << 24);
      const std::uint32_t fam_be = frame[3] | (frame[2] << 8) | (frame[1] << 16) |
                                   (static_cast<std::uint32_t>(frame[0]) << 24);
      const std::uint32_t fam = fam_le <= 255 ? fam_le : fam_be;
      if (fam == 2) return parse_ipv4(frame, 4, false, counters);
      if (fam == 24 || fam == 28 || fam == 30)
        return parse_ipv6(frame, 4, false, counters);
      ++counters.skipped_non_ip;
      return std::nullopt;
    }
    default:
      throw ParseError("unsupported link type " + std::to_string(linktype));
  }
}

std::vector<double> anonymize_and_trim(std::span<const std::uint8_t> frame,
                                       const FrameLayout& layout, int l) {
  std::vector<double> out(static_cast<std::size_t>(l), 0.0);
  const std::size_t copy = std::min(static_cast<std::size_t>(l), frame.size());
  for (std::size_t i = 0; i < copy; ++i) out[i] = frame[i] / 255.0;
  auto zero = [&](int from, int len) {
    for (int i = from; i < from + len; ++i)
      if (i >= 0 && i < l) out[static_cast<std::size_t>(i)] = 0.0;
  };
  if (layout.has_ethernet) zero(0, 12);
  zero(layout.src_addr_offset, layout.addr_len);
  zero(layout.dst_addr_offset, layout.addr_len);
  return out;
}

// ---------------------------------------------------------------------------
// Capture readers
// ---------------------------------------------------------------------------

struct CaptureReader::Impl {
  std::unique_ptr<std::istream> owned;
  std::istream* is = nullptr;
  std::string name;
  CaptureCounters counters;

  enum class Format { pcap, pcapng } fmt = Format::pcap;
  bool swap = false;        // classic pcap byte swap
  double ts_scale = 1e-6;   // classic pcap timestamp unit
  std::uint32_t linktype = kLinkEthernet;

  struct Iface {
    std::uint32_t linktype = kLinkEthernet;
    double tsresol = 1e-6;
  };
  std::vector<Iface> ifaces;  // pcapng
  bool ng_swap = false;       // pcapng section byte order
  bool done = false;

  bool read_exact(void* p, std::size_t n) {
    is->read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    return static_cast<std::size_t>(is->gcount()) == n;
  }

  std::uint16_t u16(const std::uint8_t* p, bool sw) const {
    return sw ? static_cast<std::uint16_t>((p[0] << 8) | p[1])
              : static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32(const std::uint8_t* p, bool sw) const {
    return sw ? (static_cast<std::uint32_t>(p[0]) << 24) |
                    (static_cast<std::uint32_t>(p[1]) << 16) |
                    (static_cast<std::uint32_t>(p[2]) << 8) | p[3]
              : (static_cast<std::uint32_t>(p[3]) << 24) |
                    (static_cast<std::uint32_t>(p[2]) << 16) |
                    (static_cast<std::uint32_t>(p[1]) << 8) | p[0];
  }

  void open() {
    std::uint8_t magic[4];
    if (!read_exact(magic, 4)) throw ParseError(name + ": empty or unreadable capture");
    const std::uint32_t m = u32(magic, false);
    if (m == 0xa1b2c3d4 || m == 0xa1b23c4d || m == 0xd4c3b2a1 || m == 0x4d3cb2a1) {
      fmt = Format::pcap;
      swap = (m == 0xd4c3b2a1 || m == 0x4d3cb2a1);
      ts_scale = (m == 0xa1b23c4d || m == 0x4d3cb2a1) ? 1e-9 : 1e-6;
      std::uint8_t hdr[20];
      if (!read_exact(hdr, 20)) throw ParseError(name + ": truncated pcap header");
      linktype = u32(hdr + 16, swap);
      return;
    }
    if (m == 0x0a0d0d0a) {
      fmt = Format::pcapng;
      // Block total length + byte-order magic decide the section endianness.
      std::uint8_t rest[8];
      if (!read_exact(rest, 8)) throw ParseError(name + ": truncated pcapng header");
      const std::uint32_t bom = u32(rest + 4, false);
      if (bom == 0x1a2b3c4d) ng_swap = false;
      else if (bom == 0x4d3c2b1a) ng_swap = true;
      else throw ParseError(name + ": bad pcapng byte-order magic");
      const std::uint32_t total = u32(rest, ng_swap);
      if (total < 28 || total % 4 != 0)
        throw ParseError(name + ": bad pcapng section header length");
      // 12 bytes consumed so far (type + length + byte-order magic); skip the
      // rest of the block including its trailing length word.
      skip(total - 12);
      return;
    }
    throw ParseError(name + ": unrecognized capture magic");
  }

  void skip(std::size_t n) {
    is->ignore(static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is->gcount()) != n) {
      counters.truncated_tail = true;
      done = true;
    }
  }

  // Returns raw frame + timestamp + linktype, or nullopt at end.
  struct RawFrame {
    std::vector<std::uint8_t> bytes;
    double ts = 0.0;
    std::uint32_t linktype = kLinkEthernet;
  };

  std::optional<RawFrame> next_raw() {
    if (done) return std::nullopt;
    return fmt == Format::pcap ? next_pcap() : next_pcapng();
  }

  std::optional<RawFrame> next_pcap() {
    std::uint8_t hdr[16];
    is->read(reinterpret_cast<char*>(hdr), 16);
    const auto got = static_cast<std::size_t>(is->gcount());
    if (got == 0) {
      done = true;
      return std::nullopt;
    }
    if (got < 16) {
      counters.truncated_tail = true;
      done = true;
      return std::nullopt;
    }
    RawFrame f;
    const std::uint32_t sec = u32(hdr, swap);
    const std::uint32_t frac = u32(hdr + 4, swap);
    const std::uint32_t incl = u32(hdr + 8, swap);
    f.ts = static_cast<double>(sec) + static_cast<double>(frac) * ts_scale;
    f.linktype = linktype;
    f.bytes.resize(incl);
    if (incl > 0 && !read_exact(f.bytes.data(), incl)) {
      counters.truncated_tail = true;
      done = true;
      return std::nullopt;
    }
    return f;
  }

  std::optional<RawFrame> next_pcapng() {
    for (;;) {
      std::uint8_t bh[8];
      is->read(reinterpret_cast<char*>(bh), 8);
      const auto got = static_cast<std::size_t>(is->gcount());
      if (got == 0) {
        done = true;
        return std::nullopt;
      }
      if (got < 8) {
        counters.truncated_tail = true;
        done = true;
        return std::nullopt;
      }
      const std::uint32_t type = u32(bh, ng_swap);
      std::uint32_t total = u32(bh + 4, ng_swap);

      if (type == 0x0a0d0d0a) {
        // New section: re-detect byte order from its own magic.
        std::uint8_t bom_bytes[4];
        if (!read_exact(bom_bytes, 4)) {
          counters.truncated_tail = true;
          done = true;
          return std::nullopt;
        }
        const std::uint32_t bom = u32(bom_bytes, false);
        if (bom == 0x1a2b3c4d) ng_swap = false;
        else if (bom == 0x4d3c2b1a) ng_swap = true;
        else throw ParseError(name + ": bad pcapng byte-order magic");
        total = u32(bh + 4, ng_swap);
        if (total < 28 || total % 4 != 0)
          throw ParseError(name + ": bad pcapng section header length");
        ifaces.clear();
        skip(total - 12);
        continue;
      }

      if (total < 12 || total % 4 != 0)
        throw ParseError(name + ": bad pcapng block length");
      const std::size_t body_len = total - 12;
      std::vector<std::uint8_t> body(body_len);
      if (body_len > 0 && !read_exact(body.data(), body_len)) {
        counters.truncated_tail = true;
        done = true;
        return std::nullopt;
      }
      skip(4);  // trailing total length
      if (done) return std::nullopt;

      if (type == 1) {  // Interface Description Block
        if (body_len < 8) throw ParseError(name + ": short IDB");
        Iface ifc;
        ifc.linktype = u16(body.data(), ng_swap);
        // Walk options for if_tsresol (code 9).
        std::size_t p = 8;
        while (p + 4 <= body_len) {
          const std::uint16_t code = u16(body.data() + p, ng_swap);
          const std::uint16_t olen = u16(body.data() + p + 2, ng_swap);
          p += 4;
          if (code == 0) break;
          if (code == 9 && olen >= 1 && p < body_len) {
            const std::uint8_t v = body[p];
            ifc.tsresol = (v & 0x80) ? std::pow(2.0, -(v & 0x7f))
                                     : std::pow(10.0, -static_cast<double>(v));
          }
          p += (olen + 3u) & ~3u;
        }
        ifaces.push_back(ifc);
        continue;
      }

      if (type == 6) {  // Enhanced Packet Block
        if (body_len < 20) throw ParseError(name + ": short EPB");
        const std::uint32_t ifid = u32(body.data(), ng_swap);
        const std::uint64_t ts_hi = u32(body.data() + 4, ng_swap);
        const std::uint64_t ts_lo = u32(body.data() + 8, ng_swap);
        const std::uint32_t cap = u32(body.data() + 12, ng_swap);
        if (20 + cap > body_len) throw ParseError(name + ": EPB data overruns block");
        const Iface ifc = ifid < ifaces.size() ? ifaces[ifid] : Iface{};
        RawFrame f;
        f.ts = static_cast<double>((ts_hi << 32) | ts_lo) * ifc.tsresol;
        f.linktype = ifc.linktype;
        f.bytes.assign(body.begin() + 20, body.begin() + 20 + cap);
        return f;
      }

      if (type == 3) {  // Simple Packet Block (no timestamp)
        if (body_len < 4) throw ParseError(name + ": short SPB");
        const std::uint32_t orig = u32(body.data(), ng_swap);
        const std::size_t cap = std::min<std::size_t>(orig, body_len - 4);
        const Iface ifc = !ifaces.empty() ? ifaces[0] : Iface{};
        RawFrame f;
        f.ts = 0.0;
        f.linktype = ifc.linktype;
        f.bytes.assign(body.begin() + 4, body.begin() + 4 + cap);
        return f;
      }

      // Other block types (name resolution, statistics, ...) are skipped.
    }
  }
};

CaptureReader::CaptureReader(const std::string& path) : impl_(new Impl) {
  auto f = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*f) throw IoError("cannot open capture: " + path);
  impl_->owned = std::move(f);
  impl_->is = impl_->owned.get();
  impl_->name = path;
  impl_->open();
}

CaptureReader::CaptureReader(std::unique_ptr<std::istream> stream, const std::string& name)
    : impl_(new Impl) {
  impl_->owned = std::move(stream);
  impl_->is = impl_->owned.get();
  impl_->name = name;
  impl_->open();
}

CaptureReader::~CaptureReader() = default;
CaptureReader::CaptureReader(CaptureReader&&) noexcept = default;
CaptureReader& CaptureReader::operator=(CaptureReader&&) noexcept = default;

std::optional<PacketRecord> CaptureReader::next() {
  for (;;) {
    auto raw = impl_->next_raw();
    if (!raw) return std::nullopt;
    ++impl_->counters.frames_total;
    auto parsed = parse_frame(raw->bytes, raw->linktype, impl_->counters);
    if (!parsed) continue;
    PacketRecord rec;
    rec.timestamp = raw->ts;
    rec.link_bytes = std::move(raw->bytes);
    rec.five_tuple = parsed->key;
    rec.tcp_flags = parsed->tcp_flags;
    rec.layout = parsed->layout;
    return rec;
  }
}

const CaptureCounters& CaptureReader::counters() const { return impl_->counters; }

// ---------------------------------------------------------------------------
// FlowTable
// ---------------------------------------------------------------------------

FlowTable::FlowTable(IngestConfig cfg) : cfg_(cfg) {
  if (cfg_.n < 1 || cfg_.l < 1) throw ConfigError("FlowTable: n and l must be >= 1");
  if (cfg_.timeout_s <= 0) throw ConfigError("FlowTable: timeout must be positive");
}

FlowKey FlowTable::table_key(const FlowKey& k, bool& forward_dir) const {
  forward_dir = true;
  if (cfg_.mode == FlowMode::flow) return k;
  const auto a = std::tie(k.src_ip, k.src_port);
  const auto b = std::tie(k.dst_ip, k.dst_port);
  if (b < a) {
    FlowKey c = k;
    std::swap(c.src_ip, c.dst_ip);
    std::swap(c.src_port, c.dst_port);
    forward_dir = false;
    return c;
  }
  return k;
}

std::optional<EmittedSample> FlowTable::finalize(const FlowKey& key, Buffer& b,
                                                 Disposition& disp) {
  if (b.state == FlowState::emitted) {
    disp = Disposition::emitted_earlier;
    return std::nullopt;
  }
  if (cfg_.pad_incomplete && !b.packets.empty()) {
    disp = Disposition::padded;
    ++stats_.padded;
    EmittedSample s;
    s.key = key;
    s.first_seen = b.first_seen;
    s.values.assign(static_cast<std::size_t>(cfg_.n) * cfg_.l, 0.0);
    for (std::size_t i = 0; i < b.packets.size(); ++i)
      std::copy(b.packets[i].begin(), b.packets[i].end(),
                s.values.begin() + static_cast<std::ptrdiff_t>(i) * cfg_.l);
    b.state = FlowState::emitted;
    return s;
  }
  disp = Disposition::discarded;
  ++stats_.discarded;
  return std::nullopt;
}

std::optional<EmittedSample> FlowTable::ingest_packet(const PacketRecord& pkt) {
  bool fwd = true;
  const FlowKey key = table_key(pkt.five_tuple, fwd);
  auto it = flows_.find(key);

  // A gap strictly larger than the timeout ends the previous instance; the
  // current packet then opens a fresh flow under the same key.
  if (it != flows_.end() && pkt.timestamp - it->second.last_seen > cfg_.timeout_s) {
    Disposition disp;
    if (auto s = finalize(key, it->second, disp)) pending_.push_back(std::move(*s));
    flows_.erase(it);
    it = flows_.end();
  }

  if (it == flows_.end()) {
    Buffer nb;
    nb.first_seen = pkt.timestamp;
    nb.last_seen = pkt.timestamp;
    it = flows_.emplace(key, std::move(nb)).first;
  }
  Buffer& buf = it->second;
  buf.last_seen = pkt.timestamp;

  if (buf.state != FlowState::active) {
    // Completed or FIN-closed instance: buffered excess is discarded.
    ++stats_.absorbed_after_done;
    return std::nullopt;
  }

  buf.packets.push_back(anonymize_and_trim(pkt.link_bytes, pkt.layout, cfg_.l));

  if (static_cast<int>(buf.packets.size()) == cfg_.n) {
    EmittedSample s;
    s.key = key;
    s.first_seen = buf.first_seen;
    s.values.reserve(static_cast<std::size_t>(cfg_.n) * cfg_.l);
    for (const auto& p : buf.packets)
      s.values.insert(s.values.end(), p.begin(), p.end());
    buf.packets.clear();
    buf.packets.shrink_to_fit();
    buf.state = FlowState::emitted;
    ++stats_.emitted;
    return s;
  }

  if (pkt.tcp_flags && (*pkt.tcp_flags & kTcpFin)) {
    if (cfg_.mode == FlowMode::flow) {
      buf.state = FlowState::terminated_fin;
    } else {
      (fwd ? buf.fin_fwd : buf.fin_rev) = true;
      if (buf.fin_fwd && buf.fin_rev) buf.state = FlowState::terminated_fin;
    }
  }
  return std::nullopt;
}

std::vector<std::pair<FlowKey, Disposition>> FlowTable::flush(double now) {
  struct Entry {
    double first_seen;
    FlowKey key;
  };
  std::vector<Entry> due;
  for (auto& [key, buf] : flows_) {
    const bool timed_out = now - buf.last_seen > cfg_.timeout_s;
    if (timed_out && buf.state == FlowState::active)
      buf.state = FlowState::terminated_timeout;
    if (timed_out || buf.state == FlowState::terminated_fin ||
        buf.state == FlowState::terminated_timeout)
      due.push_back({buf.first_seen, key});
  }
  std::sort(due.begin(), due.end(), [](const Entry& a, const Entry& b) {
    return a.first_seen != b.first_seen ? a.first_seen < b.first_seen
                                        : a.key < b.key;
  });

  std::vector<std::pair<FlowKey, Disposition>> out;
  out.reserve(due.size());
  for (const auto& e : due) {
    auto it = flows_.find(e.key);
    Disposition disp;
    if (auto s = finalize(e.key, it->second, disp)) pending_.push_back(std::move(*s));
    out.emplace_back(e.key, disp);
    flows_.erase(it);
  }
  return out;
}

std::vector<EmittedSample> FlowTable::take_pending() {
  return std::exchange(pending_, {});
}

// ---------------------------------------------------------------------------
// End-to-end preprocessing
// ---------------------------------------------------------------------------

namespace {

PreprocessResult run_preprocess(CaptureReader& reader, const IngestConfig& cfg) {
  FlowTable table(cfg);
  std::vector<EmittedSample> emitted;
  while (auto pkt = reader.next()) {
    if (auto s = table.ingest_packet(*pkt)) emitted.push_back(std::move(*s));
    for (auto& p : table.take_pending()) emitted.push_back(std::move(p));
  }
  table.flush(std::numeric_limits<double>::infinity());
  for (auto& p : table.take_pending()) emitted.push_back(std::move(p));

  PreprocessResult res;
  res.counters = reader.counters();
  res.flows = table.stats();
  res.samples.n = cfg.n;
  res.samples.l = cfg.l;
  const std::int64_t w = res.samples.w();
  res.samples.values = Tensor({static_cast<std::int64_t>(emitted.size()), w});
  for (std::size_t i = 0; i < emitted.size(); ++i)
    std::copy(emitted[i].values.begin(), emitted[i].values.end(),
              res.samples.values.data() + static_cast<std::int64_t>(i) * w);
  return res;
}

}  // namespace

PreprocessResult preprocess_capture(const std::string& path, const IngestConfig& cfg) {
  CaptureReader reader(path);
  return run_preprocess(reader, cfg);
}

PreprocessResult preprocess_capture(std::unique_ptr<std::istream> stream,
                                    const IngestConfig& cfg) {
  CaptureReader reader(std::move(stream));
  return run_preprocess(reader, cfg);
}

}  // namespace arcade::ingest
