#include "arcade/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "arcade/errors.hpp"
#include "arcade/losses.hpp"
#include "arcade/rng.hpp"

namespace arcade::detect {

double anomaly_score(const model::ModelHandles& m, const std::vector<double>& x) {
  Tensor in({static_cast<std::int64_t>(x.size())}, x);
  Tensor rec = model::reconstruct(m, in);
  return losses::l2_loss(x, rec.vec());
}

std::vector<double> anomaly_scores(const model::ModelHandles& m,
                                   const Tensor& samples, int batch_size) {
  if (samples.rank() != 2)
    throw ContractError("anomaly_scores: [N,w] tensor required");
  const std::int64_t n = samples.dim(0), w = samples.dim(1);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t start = 0; start < n; start += batch_size) {
    const std::int64_t count = std::min<std::int64_t>(batch_size, n - start);
    Tensor batch({count, w});
    std::memcpy(batch.data(), samples.data() + start * w,
                static_cast<std::size_t>(count * w) * sizeof(double));
    Tensor rec = model::reconstruct(m, batch);
    for (double s : losses::l2_per_sample(batch, rec)) out.push_back(s);
  }
  return out;
}

ThresholdPolicy threshold_policy_from_string(const std::string& s) {
  if (s == "p99" || s == "percentile99") return ThresholdPolicy::percentile99;
  if (s == "max") return ThresholdPolicy::max;
  if (s == "custom") return ThresholdPolicy::custom;
  throw ConfigError("unknown threshold policy: " + s);
}

std::string to_string(ThresholdPolicy p) {
  switch (p) {
    case ThresholdPolicy::percentile99: return "p99";
    case ThresholdPolicy::max: return "max";
    case ThresholdPolicy::custom: return "custom";
  }
  return "?";
}

double fit_threshold(std::vector<double> normal_scores, ThresholdPolicy policy,
                     double custom_value) {
  if (policy == ThresholdPolicy::custom) return custom_value;
  if (normal_scores.empty()) throw ContractError("fit_threshold: empty score set");
  if (policy == ThresholdPolicy::max)
    return *std::max_element(normal_scores.begin(), normal_scores.end());
  if (normal_scores.size() < 100)
    throw ContractError("fit_threshold: percentile policy needs >= 100 scores");
  std::sort(normal_scores.begin(), normal_scores.end());
  // Nearest rank: the ceil(0.99 * N)-th order statistic (1-indexed).
  const auto n = normal_scores.size();
  const auto rank = static_cast<std::size_t>(
      std::ceil(0.99 * static_cast<double>(n)));
  return normal_scores[rank - 1];
}

double auroc(const std::vector<double>& scores,
             const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw ContractError("auroc: score/label count mismatch");
  std::size_t pos = 0, neg = 0;
  for (auto b : labels) (b >= 1 ? pos : neg)++;
  if (pos == 0 || neg == 0)
    throw ContractError("auroc: undefined for a single-class label set");

  // Midranks over the pooled scores.
  std::vector<std::size_t> idx(scores.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]] >= 1) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double u = rank_sum_pos - static_cast<double>(pos) * (static_cast<double>(pos) + 1.0) / 2.0;
  return u / (static_cast<double>(pos) * static_cast<double>(neg));
}

Metrics evaluate(const std::vector<double>& scores,
                 const std::vector<std::uint8_t>& labels, double tau) {
  if (scores.size() != labels.size())
    throw ContractError("evaluate: score/label count mismatch");
  if (scores.empty()) throw ContractError("evaluate: empty input");
  Metrics m;
  m.threshold = tau;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool is_anom = labels[i] >= 1;
    const bool pred_anom = scores[i] > tau;
    if (is_anom && pred_anom) ++m.tp;
    else if (is_anom) ++m.fn;
    else if (pred_anom) ++m.fp;
    else ++m.tn;
  }
  const auto d = [](double num, double den) { return den > 0 ? num / den : 0.0; };
  m.accuracy = d(static_cast<double>(m.tp + m.tn), static_cast<double>(scores.size()));
  m.precision = d(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fp));
  m.recall = d(static_cast<double>(m.tp), static_cast<double>(m.tp + m.fn));
  m.f1 = d(2.0 * m.precision * m.recall, m.precision + m.recall);
  m.dr = m.recall;
  m.far = d(static_cast<double>(m.fp), static_cast<double>(m.fp + m.tn));
  try {
    m.auroc = auroc(scores, labels);
  } catch (const ContractError& e) {
    m.auroc_error = e.what();
  }
  return m;
}

SplitResult split_dataset(const dataset::SampleSet& corpus, std::uint64_t seed,
                          std::int64_t quota_override) {
  corpus.validate();
  if (!corpus.labeled)
    throw ContractError("split_dataset: labeled corpus required");

  std::map<std::uint8_t, std::vector<std::int64_t>> by_class;
  for (std::int64_t i = 0; i < corpus.count(); ++i)
    by_class[corpus.labels[static_cast<std::size_t>(i)]].push_back(i);
  if (by_class.size() < 2)
    throw ContractError("split_dataset: need normal plus at least one anomaly class");
  if (!by_class.count(dataset::kLabelNormal))
    throw ContractError("split_dataset: no normal samples");

  std::int64_t quota = -1;
  for (const auto& [label, rows] : by_class)
    if (label != dataset::kLabelNormal)
      quota = quota < 0 ? static_cast<std::int64_t>(rows.size())
                        : std::min<std::int64_t>(quota, static_cast<std::int64_t>(rows.size()));
  if (quota_override > 0) quota = std::min(quota, quota_override);
  const auto normal_total =
      static_cast<std::int64_t>(by_class[dataset::kLabelNormal].size());
  quota = std::min(quota, normal_total - 1);  // leave normals for training
  if (quota < 20)
    throw ContractError(
        "split_dataset: smallest class allows a test quota of " +
        std::to_string(quota) +
        " (< 20); the 5% validation carve-out would be empty. Provide more "
        "samples of the rare classes or a balanced corpus.");
  const std::int64_t val_count =
      static_cast<std::int64_t>(std::floor(0.05 * static_cast<double>(quota)));

  Rng rng = Rng(seed).derive(0x5917);
  std::vector<std::int64_t> train_rows, test_rows, val_rows;
  for (auto& [label, rows] : by_class) {
    rng.shuffle(rows);
    // First `quota` rows form the balanced test allocation; the validation
    // carve-out is removed from it before the test set is finalized.
    for (std::int64_t i = 0; i < quota; ++i)
      (i < val_count ? val_rows : test_rows).push_back(rows[static_cast<std::size_t>(i)]);
    if (label == dataset::kLabelNormal)
      for (std::size_t i = static_cast<std::size_t>(quota); i < rows.size(); ++i)
        train_rows.push_back(rows[i]);
  }
  std::sort(train_rows.begin(), train_rows.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(val_rows.begin(), val_rows.end());

  SplitResult r;
  r.per_class_quota = quota;
  r.validation_per_class = val_count;
  r.train = dataset::subset(corpus, train_rows);
  r.test = dataset::subset(corpus, test_rows);
  r.validation = dataset::subset(corpus, val_rows);
  return r;
}

}  // namespace arcade::detect
