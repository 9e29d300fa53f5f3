// Adversarial training loop: per batch, one critic Adam step (score gap
// plus interpolate gradient penalty) followed by one autoencoder Adam step
// (similarity plus the critic's score of the reconstruction), under a
// two-phase learning-rate schedule. Trains on normal traffic only.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "arcade/dataset.hpp"
#include "arcade/losses.hpp"
#include "arcade/model.hpp"
#include "arcade/nn.hpp"
#include "arcade/rng.hpp"

namespace arcade::train {

enum class ReconLoss { mssim, l2 };

struct TrainConfig {
  int batch_size = 64;  // m
  double lambda_c = 10.0;
  double lambda_g = 0.01;
  double lr_phase1 = 1e-4;
  double lr_phase2 = 1e-5;
  int epochs_phase1 = 100;
  int epochs_phase2 = 50;
  double beta1 = 0.0;
  double beta2 = 0.9;
  std::uint64_t seed = 0;
  bool shuffle = true;
  bool drop_last_partial = true;
  ReconLoss recon = ReconLoss::mssim;  // l2 gives the plain-L2 configuration
  losses::SSIMConfig ssim;

  int total_epochs() const { return epochs_phase1 + epochs_phase2; }
  void validate() const;
};

// 1e-4 through phase one, 1e-5 through phase two; epochs past the schedule
// are an error.
double lr_schedule(const TrainConfig& cfg, int epoch);

struct EpochStats {
  int epoch = 0;
  double lr = 0;
  double critic_loss = 0;     // mean C(x) - C(x~) + lambda_c * penalty
  double generator_loss = 0;  // mean MSSIM + lambda_g * C(x~)
  double mssim = 0;
  std::int64_t critic_steps = 0;
  std::int64_t generator_steps = 0;
};

using EpochCallback =
    std::function<void(const EpochStats&, const model::ModelHandles&)>;

struct TrainResult {
  std::vector<EpochStats> history;
};

// Deterministic per-epoch sample order (a pure function of the stream).
std::vector<std::int64_t> epoch_order(Rng& shuffle_rng, std::int64_t count,
                                      bool shuffle);

// The independent streams a run consumes; batch order and interpolation
// draws are pure functions of the seed through these.
Rng shuffle_stream(std::uint64_t seed);
Rng epsilon_stream(std::uint64_t seed);

// Stateful trainer; supports mid-run state capture and bit-exact resume.
class Trainer {
 public:
  Trainer(model::ModelHandles model, TrainConfig cfg);

  // Runs epochs [current, current+count); count < 0 runs to the end of the
  // schedule. The dataset must be normal-only (unlabeled sets are treated
  // as normal).
  void run(const dataset::SampleSet& data, int count = -1,
           const EpochCallback& cb = nullptr);

  int epoch() const { return epoch_; }
  const std::vector<EpochStats>& history() const { return history_; }
  const model::ModelHandles& model() const { return model_; }
  model::ModelHandles& model() { return model_; }

  void save_state(const std::string& path) const;
  static Trainer load_state(const std::string& path);

  static void write_losses_csv(const std::string& path,
                               const std::vector<EpochStats>& history);

 private:
  void train_batch(const Tensor& x, double lr, EpochStats& stats);

  model::ModelHandles model_;
  TrainConfig cfg_;
  std::unique_ptr<nn::Adam> adam_critic_;
  std::unique_ptr<nn::Adam> adam_ae_;
  Rng shuffle_rng_;
  Rng eps_rng_;
  int epoch_ = 0;
  std::vector<EpochStats> history_;
};

// Convenience wrapper: build optimizer state, run the full schedule.
TrainResult train(const dataset::SampleSet& data, model::ModelHandles& m,
                  const TrainConfig& cfg, const EpochCallback& cb = nullptr);

}  // namespace arcade::train
