// Experiment orchestration: synth -> train -> score -> evaluate per sweep
// point (adversarial coefficient and/or input size) per seed, with CSV
// tables, SVG plots and a JSON report. Every artifact path is a pure
// function of the spec hash; all numerics are pure functions of the seeds.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arcade/detector.hpp"
#include "arcade/synth.hpp"
#include "arcade/trainer.hpp"

namespace arcade::harness {

struct ExperimentSpec {
  std::string name = "experiment";
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<double> lambda_g_values{0.01};
  std::vector<int> n_values{2};

  // Synthetic data sizes (train pool is normal-only; test pool is labeled).
  std::int64_t train_normal_flows = 2000;
  std::int64_t test_normal_flows = 400;
  std::int64_t test_anomaly_flows = 400;
  synth::SynthConfig synth_base;  // seed/n/counts overridden per point

  train::TrainConfig train_base;  // lambda_g/seed overridden per point
  int latent_dim = 0;             // 0 = PCA (95% explained variance)
  detect::ThresholdPolicy policy = detect::ThresholdPolicy::percentile99;
  int eval_every = 1;  // epochs between AUROC curve points

  void validate() const;
  std::string canonical_json() const;
  std::string hash() const;  // hex digest of the canonical form

  static ExperimentSpec from_json_file(const std::string& path);
};

struct RunOutcome {
  double lambda_g = 0;
  int n = 0;
  std::uint64_t seed = 0;
  int latent_dim = 0;
  detect::Metrics metrics;            // on the held-out test set
  std::vector<int> curve_epochs;
  std::vector<double> curve_auroc;    // test AUROC per evaluated epoch
  std::string error;                  // set when the run failed
  bool ok() const { return error.empty(); }
};

struct SummaryRow {
  double lambda_g = 0;
  int n = 0;
  int runs = 0;
  double auroc_mean = 0, auroc_std = 0;
  double f1_mean = 0, f1_std = 0;
};

struct ExperimentResult {
  std::string out_dir;  // <out>/<hash>
  std::vector<RunOutcome> runs;
  std::vector<SummaryRow> summary;
};

ExperimentResult run_experiment(const ExperimentSpec& spec,
                                const std::string& out_root, int jobs = 0);

}  // namespace arcade::harness
