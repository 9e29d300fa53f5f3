// Detection-speed benchmark: flows scored per second at given batch sizes,
// mean and standard deviation over repeated timed runs after a warm-up.
#pragma once

#include <string>
#include <vector>

#include "arcade/model.hpp"

namespace arcade::harness {

struct BenchRow {
  int batch_size = 0;
  int runs = 0;
  double mean_flows_per_s = 0;
  double std_flows_per_s = 0;
};

std::vector<BenchRow> bench_throughput(const model::ModelHandles& m,
                                       const Tensor& samples,  // [N,w]
                                       const std::vector<int>& batch_sizes,
                                       double warmup_seconds = 1.0,
                                       int runs = 10);

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

}  // namespace arcade::harness
