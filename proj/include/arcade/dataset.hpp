// In-memory sample sets and the binary sample file format.
//
// File layout (little-endian): magic "ARCD", version u16 = 1, n u16, l u16,
// reserved u16 = 0, count u64, count * n * l float32 values, then one
// presence byte (0/1) followed, when 1, by count label bytes
// (0 = normal, >= 1 = anomaly class id).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arcade/tensor.hpp"

namespace arcade::dataset {

constexpr std::uint8_t kLabelNormal = 0;

struct SampleSet {
  int n = 0;
  int l = 0;
  Tensor values;  // [count, n*l]
  bool labeled = false;
  std::vector<std::uint8_t> labels;

  std::int64_t count() const { return values.rank() == 2 ? values.dim(0) : 0; }
  std::int64_t w() const { return static_cast<std::int64_t>(n) * l; }

  std::vector<double> row(std::int64_t i) const;
  void validate() const;
};

void write_arcd(const std::string& path, const SampleSet& s);
SampleSet read_arcd(const std::string& path);

// Subset by row indices (labels follow when present).
SampleSet subset(const SampleSet& s, const std::vector<std::int64_t>& rows);

}  // namespace arcade::dataset
