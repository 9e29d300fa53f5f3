// Anomaly scoring, threshold fitting, metrics and the split protocol.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arcade/dataset.hpp"
#include "arcade/model.hpp"

namespace arcade::detect {

// A(x) = L2(x, reconstruction(x)); inference mode, batch-independent.
double anomaly_score(const model::ModelHandles& m, const std::vector<double>& x);
std::vector<double> anomaly_scores(const model::ModelHandles& m,
                                   const Tensor& samples,  // [N,w]
                                   int batch_size = 256);

enum class ThresholdPolicy { percentile99, max, custom };

ThresholdPolicy threshold_policy_from_string(const std::string& s);
std::string to_string(ThresholdPolicy p);

// Nearest-rank 99th percentile or maximum of the supplied normal scores.
double fit_threshold(std::vector<double> normal_scores, ThresholdPolicy policy,
                     double custom_value = 0.0);

// Midrank (Mann-Whitney) AUROC; labels are binarized (anomaly = label >= 1).
// Throws ContractError when only one class is present.
double auroc(const std::vector<double>& scores,
             const std::vector<std::uint8_t>& labels);

struct Metrics {
  std::optional<double> auroc;
  std::string auroc_error;  // set when AUROC is undefined
  double accuracy = 0, precision = 0, recall = 0, f1 = 0;
  double dr = 0;   // detection rate = recall on anomalies
  double far = 0;  // false alarm rate = FP / normals
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  double threshold = 0;
};

// Predicted anomaly iff score > tau (ties classified normal).
Metrics evaluate(const std::vector<double>& scores,
                 const std::vector<std::uint8_t>& labels, double tau);

struct SplitResult {
  dataset::SampleSet train;       // normal only
  dataset::SampleSet test;        // class-balanced, validation removed
  dataset::SampleSet validation;  // 5% of each test class
  std::int64_t per_class_quota = 0;
  std::int64_t validation_per_class = 0;
};

// Normal-only train set, class-balanced test set, 5% per-class validation
// carved from the test allocation. Deterministic under the seed.
SplitResult split_dataset(const dataset::SampleSet& corpus, std::uint64_t seed,
                          std::int64_t quota_override = 0);

}  // namespace arcade::detect
