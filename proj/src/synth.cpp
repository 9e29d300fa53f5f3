#include "arcade/synth.hpp"

#include <algorithm>
#include <vector>

#include "arcade/errors.hpp"
#include "arcade/rng.hpp"

namespace arcade::synth {

namespace {

// Ethernet+IPv4 identity byte positions inside each packet slice.
constexpr int kMacFrom = 0, kMacTo = 12;     // [0,12)
constexpr int kIpFrom = 26, kIpTo = 34;      // [26,34)

bool anonymized(int pos) {
  return (pos >= kMacFrom && pos < kMacTo) || (pos >= kIpFrom && pos < kIpTo);
}

struct Template {
  // base bytes and jitter flags per packet slice of the flow
  std::vector<std::vector<std::uint8_t>> base;    // [n][l]
  std::vector<std::vector<bool>> jittered;        // [n][l]
};

Template make_template(Rng& rng, int n, int l) {
  Template t;
  t.base.assign(static_cast<std::size_t>(n), std::vector<std::uint8_t>(l, 0));
  t.jittered.assign(static_cast<std::size_t>(n), std::vector<bool>(l, false));

  const std::uint8_t ttl = rng.uniform() < 0.5 ? 64 : 128;
  const std::uint8_t proto = rng.uniform() < 0.7 ? 6 : 17;
  const int dst_port = rng.uniform() < 0.5 ? 80 : (rng.uniform() < 0.5 ? 443 : 53);
  const int src_port = rng.uniform_int(1024, 19999);
  // Template payload bytes stay in a moderate band: consistent per-template
  // structure a small decoder fits within a short schedule, and far from
  // the uniform byte distribution the anomaly generators draw from.
  auto band_byte = [&rng] {
    return static_cast<std::uint8_t>(0x10 + rng.uniform_index(0x50));
  };

  for (int p = 0; p < n; ++p) {
    auto& b = t.base[static_cast<std::size_t>(p)];
    auto& j = t.jittered[static_cast<std::size_t>(p)];
    if (l > 13) { b[12] = 0x08; b[13] = 0x00; }  // EtherType IPv4
    auto set = [&](int pos, std::uint8_t v) { if (pos < l) b[static_cast<std::size_t>(pos)] = v; };
    set(14, 0x45);
    set(15, 0x00);
    const int total_len = 40 + rng.uniform_int(0, 40);
    set(16, static_cast<std::uint8_t>(total_len >> 8));
    set(17, static_cast<std::uint8_t>(total_len & 0xff));
    if (l > 19) { j[18] = j[19] = true; b[18] = 0x40; b[19] = 0x10; }  // IP id jitters
    set(20, 0x40);
    set(21, 0x00);
    set(22, ttl);
    set(23, proto);
    if (l > 25) { j[24] = j[25] = true; b[24] = 0x2c; b[25] = 0x32; }  // checksum jitters
    set(34, static_cast<std::uint8_t>(src_port >> 8));
    set(35, static_cast<std::uint8_t>(src_port & 0xff));
    set(36, static_cast<std::uint8_t>(dst_port >> 8));
    set(37, static_cast<std::uint8_t>(dst_port & 0xff));
    // Sequence/ack words jitter; remaining payload is template-specific
    // structure with sparse jitter so flows stay learnable.
    for (int pos = 38; pos < std::min(l, 46); ++pos) { j[pos] = true; b[pos] = band_byte(); }
    for (int pos = 46; pos < l; ++pos) {
      b[static_cast<std::size_t>(pos)] = band_byte();
      j[static_cast<std::size_t>(pos)] = rng.uniform() < 0.35;
    }
    for (int pos = 0; pos < l; ++pos)
      if (anonymized(pos)) { b[static_cast<std::size_t>(pos)] = 0; j[static_cast<std::size_t>(pos)] = false; }
  }
  return t;
}

void emit_normal(const Template& t, Rng& rng, int n, int l, int jitter,
                 int packets, double* out) {
  for (int p = 0; p < n; ++p) {
    for (int pos = 0; pos < l; ++pos) {
      const std::size_t o = static_cast<std::size_t>(p) * l + pos;
      if (p >= packets) { out[o] = 0.0; continue; }  // short flow, zero padded
      int v = t.base[static_cast<std::size_t>(p)][static_cast<std::size_t>(pos)];
      if (t.jittered[static_cast<std::size_t>(p)][static_cast<std::size_t>(pos)] && jitter > 0)
        v = std::clamp(v + rng.uniform_int(-jitter, jitter), 0, 255);
      out[o] = v / 255.0;
    }
  }
}

void emit_random_payload(Rng& rng, int n, int l, double* out) {
  for (int p = 0; p < n; ++p)
    for (int pos = 0; pos < l; ++pos)
      out[static_cast<std::size_t>(p) * l + pos] =
          anonymized(pos) ? 0.0 : rng.uniform_index(256) / 255.0;
}

void emit_flood_repeat(Rng& rng, int n, int l, double* out) {
  std::vector<double> slice(static_cast<std::size_t>(l));
  for (int pos = 0; pos < l; ++pos)
    slice[static_cast<std::size_t>(pos)] =
        anonymized(pos) ? 0.0 : rng.uniform_index(256) / 255.0;
  for (int p = 0; p < n; ++p)
    std::copy(slice.begin(), slice.end(), out + static_cast<std::size_t>(p) * l);
}

}  // namespace

void SynthConfig::validate() const {
  if (normal_flows < 0 || anomaly_flows < 0 || normal_flows + anomaly_flows == 0)
    throw ConfigError("synth: flow counts must be positive");
  if (n < 1 || l < 1) throw ConfigError("synth: n and l must be >= 1");
  if (template_count < 1) throw ConfigError("synth: need at least one template");
  if (jitter < 0 || jitter > 127) throw ConfigError("synth: jitter out of range");
  if (flood_weight < 0 || flood_weight > 1)
    throw ConfigError("synth: flood_weight must lie in [0,1]");
  if (packets_min < 0 || packets_max < packets_min)
    throw ConfigError("synth: bad packets_per_flow range");
}

dataset::SampleSet synth_generate(const SynthConfig& cfg) {
  cfg.validate();
  const std::uint64_t profile = cfg.profile_seed ? cfg.profile_seed : cfg.seed;
  Rng tmpl_rng = Rng(profile).derive(0x7E);
  Rng flow_rng = Rng(cfg.seed).derive(0xF1);

  std::vector<Template> templates;
  templates.reserve(static_cast<std::size_t>(cfg.template_count));
  for (int i = 0; i < cfg.template_count; ++i)
    templates.push_back(make_template(tmpl_rng, cfg.n, cfg.l));

  dataset::SampleSet s;
  s.n = cfg.n;
  s.l = cfg.l;
  s.labeled = true;
  const std::int64_t total = cfg.normal_flows + cfg.anomaly_flows;
  s.values = Tensor({total, s.w()});
  s.labels.resize(static_cast<std::size_t>(total));

  for (std::int64_t i = 0; i < cfg.normal_flows; ++i) {
    const auto& t = templates[flow_rng.uniform_index(templates.size())];
    int packets = cfg.n;
    if (cfg.packets_min > 0)
      packets = std::min(cfg.n, flow_rng.uniform_int(cfg.packets_min, cfg.packets_max));
    emit_normal(t, flow_rng, cfg.n, cfg.l, cfg.jitter, packets,
                s.values.data() + i * s.w());
    s.labels[static_cast<std::size_t>(i)] = dataset::kLabelNormal;
  }
  for (std::int64_t i = cfg.normal_flows; i < total; ++i) {
    double* out = s.values.data() + i * s.w();
    if (flow_rng.uniform() < cfg.flood_weight) {
      emit_flood_repeat(flow_rng, cfg.n, cfg.l, out);
      s.labels[static_cast<std::size_t>(i)] = kClassFloodRepeat;
    } else {
      emit_random_payload(flow_rng, cfg.n, cfg.l, out);
      s.labels[static_cast<std::size_t>(i)] = kClassRandomPayload;
    }
  }
  return s;
}

}  // namespace arcade::synth
