#include "arcade/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>

#include "arcade/detector.hpp"
#include "arcade/errors.hpp"

namespace arcade::harness {

namespace {
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

std::vector<BenchRow> bench_throughput(const model::ModelHandles& m,
                                       const Tensor& samples,
                                       const std::vector<int>& batch_sizes,
                                       double warmup_seconds, int runs) {
  if (samples.rank() != 2 || samples.dim(0) < 1)
    throw ContractError("bench: non-empty [N,w] sample tensor required");
  if (runs < 1) throw ConfigError("bench: runs must be >= 1");

  const auto flows = static_cast<double>(samples.dim(0));
  std::vector<BenchRow> rows;
  for (int bs : batch_sizes) {
    if (bs < 1) throw ConfigError("bench: batch size must be >= 1");
    // Warm-up passes are untimed.
    const auto w0 = Clock::now();
    do {
      detect::anomaly_scores(m, samples, bs);
    } while (seconds_since(w0) < warmup_seconds);

    std::vector<double> rates;
    rates.reserve(static_cast<std::size_t>(runs));
    for (int r = 0; r < runs; ++r) {
      const auto t0 = Clock::now();
      detect::anomaly_scores(m, samples, bs);
      rates.push_back(flows / seconds_since(t0));
    }
    BenchRow row;
    row.batch_size = bs;
    row.runs = runs;
    double s = 0;
    for (double v : rates) s += v;
    row.mean_flows_per_s = s / static_cast<double>(runs);
    if (runs > 1) {
      double acc = 0;
      for (double v : rates) acc += (v - row.mean_flows_per_s) * (v - row.mean_flows_per_s);
      row.std_flows_per_s = std::sqrt(acc / static_cast<double>(runs - 1));
    }
    rows.push_back(row);
  }
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "batch_size,runs,mean_flows_per_s,std_flows_per_s\n";
  os.precision(10);
  for (const auto& r : rows)
    os << r.batch_size << ',' << r.runs << ',' << r.mean_flows_per_s << ','
       << r.std_flows_per_s << '\n';
}

}  // namespace arcade::harness
