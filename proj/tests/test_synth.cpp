#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "arcade/dataset.hpp"
#include "arcade/errors.hpp"
#include "arcade/synth.hpp"

using namespace arcade;

TEST_CASE("synthetic corpora are deterministic per seed") {
  synth::SynthConfig cfg;
  cfg.seed = 9;
  cfg.normal_flows = 50;
  cfg.anomaly_flows = 50;
  auto a = synth::synth_generate(cfg);
  auto b = synth::synth_generate(cfg);
  REQUIRE(a.values.numel() == b.values.numel());
  for (std::int64_t i = 0; i < a.values.numel(); ++i) CHECK(a.values[i] == b.values[i]);
  CHECK(a.labels == b.labels);

  cfg.seed = 10;
  auto c = synth::synth_generate(cfg);
  bool differs = false;
  for (std::int64_t i = 0; i < a.values.numel() && !differs; ++i)
    differs = a.values[i] != c.values[i];
  CHECK(differs);

  namespace fs = std::filesystem;
  const auto p1 = (fs::temp_directory_path() / "synth_a.arcd").string();
  const auto p2 = (fs::temp_directory_path() / "synth_b.arcd").string();
  dataset::write_arcd(p1, a);
  dataset::write_arcd(p2, b);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("samples obey the ingest value invariants") {
  synth::SynthConfig cfg;
  cfg.seed = 3;
  cfg.normal_flows = 40;
  cfg.anomaly_flows = 40;
  auto s = synth::synth_generate(cfg);
  REQUIRE(s.count() == 80);
  REQUIRE(s.labeled);
  for (std::int64_t i = 0; i < s.count(); ++i) {
    for (int p = 0; p < cfg.n; ++p) {
      for (int pos = 0; pos < cfg.l; ++pos) {
        const double v = s.values.at(i, p * cfg.l + pos);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        const double k = v * 255.0;
        CHECK(std::abs(k - std::round(k)) < 1e-9);
        if (pos < 12 || (pos >= 26 && pos < 34)) CHECK(v == 0.0);  // MAC + IP bytes
      }
    }
  }
}

TEST_CASE("flood anomalies repeat one slice across the flow") {
  synth::SynthConfig cfg;
  cfg.seed = 5;
  cfg.normal_flows = 1;
  cfg.anomaly_flows = 30;
  cfg.flood_weight = 1.0;
  auto s = synth::synth_generate(cfg);
  for (std::int64_t i = 1; i < s.count(); ++i) {
    REQUIRE(s.labels[static_cast<std::size_t>(i)] == synth::kClassFloodRepeat);
    for (int pos = 0; pos < cfg.l; ++pos)
      CHECK(s.values.at(i, pos) == s.values.at(i, cfg.l + pos));
  }
}

TEST_CASE("normal and anomaly byte distributions differ") {
  synth::SynthConfig cfg;
  cfg.seed = 6;
  cfg.normal_flows = 200;
  cfg.anomaly_flows = 200;
  auto s = synth::synth_generate(cfg);
  const std::int64_t w = s.w();
  std::vector<double> mean_n(w, 0.0), mean_a(w, 0.0);
  std::int64_t cn = 0, ca = 0;
  for (std::int64_t i = 0; i < s.count(); ++i) {
    const bool anom = s.labels[static_cast<std::size_t>(i)] >= 1;
    for (std::int64_t j = 0; j < w; ++j)
      (anom ? mean_a : mean_n)[static_cast<std::size_t>(j)] += s.values.at(i, j);
    (anom ? ca : cn)++;
  }
  double mad = 0.0;
  for (std::int64_t j = 0; j < w; ++j)
    mad += std::abs(mean_n[j] / cn - mean_a[j] / ca);
  mad /= static_cast<double>(w);
  CHECK(mad > 0.0);
}

TEST_CASE("zero total flows is an error") {
  synth::SynthConfig cfg;
  cfg.normal_flows = 0;
  cfg.anomaly_flows = 0;
  CHECK_THROWS_AS((void)synth::synth_generate(cfg), ConfigError);
}

TEST_CASE("short-flow mode zero-pads trailing packet slices") {
  synth::SynthConfig cfg;
  cfg.seed = 8;
  cfg.n = 3;
  cfg.normal_flows = 30;
  cfg.anomaly_flows = 0;
  cfg.packets_min = 1;
  cfg.packets_max = 2;  // never the full 3 packets
  auto s = synth::synth_generate(cfg);
  for (std::int64_t i = 0; i < s.count(); ++i) {
    bool padded_tail = true;
    for (int pos = 0; pos < cfg.l; ++pos)
      padded_tail = padded_tail && s.values.at(i, 2 * cfg.l + pos) == 0.0;
    CHECK(padded_tail);
  }
}
