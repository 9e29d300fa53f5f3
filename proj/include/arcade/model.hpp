// Encoder / decoder (autoencoder) and critic, parameterized by strided 1-d
// convolutions. Channel widths, kernel geometry and normalization placement
// follow the fixed three-stage layout; lengths that do not divide by 8 are
// handled by mirroring each encoder stage's floor-arithmetic output length
// in the matching decoder stage.
#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arcade/nn.hpp"
#include "arcade/tensor.hpp"

namespace arcade::model {

struct ModelConfig {
  int n = 2;                 // packets per sample
  int l = 100;               // bytes per packet
  int d = 50;                // latent dimension
  std::array<int, 3> channels{16, 32, 64};
  int kernel = 4;
  int stride = 2;
  int padding = 1;
  double leaky_slope = 0.2;
  double init_stddev = 0.02;
  int critic_hidden = 50;

  std::int64_t w() const { return static_cast<std::int64_t>(n) * l; }
  void validate() const;
};

// Per-stage sequence lengths implied by the config (floor arithmetic of the
// strided convolutions).
struct StageLengths {
  std::int64_t l0, l1, l2, l3;
};
StageLengths stage_lengths(const ModelConfig& cfg);

class Encoder {
 public:
  explicit Encoder(const ModelConfig& cfg);
  ad::Var forward(const ad::Var& x) const;  // [N,1,w] -> [N,d]
  void init(Rng& rng, double stddev);
  void set_training(bool t);
  void collect(std::vector<nn::ParamRef>& p, std::vector<nn::BufferRef>& b);

 private:
  nn::Conv1d c1_, c2_, c3_;
  mutable nn::BatchNorm1dChan b1_, b2_, b3_;
  nn::Linear fc_;
  double slope_;
};

class Decoder {
 public:
  explicit Decoder(const ModelConfig& cfg);
  ad::Var forward(const ad::Var& z) const;  // [N,d] -> [N,1,w]
  void init(Rng& rng, double stddev);
  void set_training(bool t);
  void collect(std::vector<nn::ParamRef>& p, std::vector<nn::BufferRef>& b);

 private:
  std::int64_t c3_, l3_;
  nn::Linear fc_;
  mutable nn::BatchNorm1dFlat b0_;
  nn::ConvTranspose1d t1_, t2_, t3_;
  mutable nn::BatchNorm1dChan b1_, b2_;
};

class Critic {
 public:
  explicit Critic(const ModelConfig& cfg);
  ad::Var forward(const ad::Var& x) const;  // [N,1,w] -> [N]
  void init(Rng& rng, double stddev);
  void collect(std::vector<nn::ParamRef>& p);

 private:
  nn::Conv1d c1_, c2_, c3_;
  nn::LayerNorm n1_, n2_, n3_, n4_;
  nn::Linear fc1_, fc2_;
  double slope_;
};

struct ModelHandles {
  ModelConfig cfg;
  std::uint64_t seed = 0;
  std::shared_ptr<Encoder> encoder;
  std::shared_ptr<Decoder> decoder;
  std::shared_ptr<Critic> critic;

  std::vector<nn::ParamRef> encoder_params, decoder_params, critic_params;
  std::vector<nn::BufferRef> buffers;

  std::vector<ad::Var> autoencoder_vars() const;
  std::vector<ad::Var> critic_vars() const;

  std::int64_t encoder_param_count() const;
  std::int64_t decoder_param_count() const;
  std::int64_t critic_param_count() const;

  void set_training(bool t) const;

  // Differentiable autoencoder pass: [N,1,w] -> [N,1,w].
  ad::Var reconstruct_var(const ad::Var& x) const;
};

ModelHandles build_model(const ModelConfig& cfg, std::uint64_t seed);

// Inference-mode entry points (normalization layers frozen); accept [w] or
// [N,w] and validate lengths against the config.
Tensor encode(const ModelHandles& m, const Tensor& x);
Tensor reconstruct(const ModelHandles& m, const Tensor& x);
Tensor critic_score(const ModelHandles& m, const Tensor& x);

// Checkpoint archive: config + named parameter/buffer arrays + metadata.
// Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelHandles& m,
                     const std::map<std::string, std::string>& metadata = {});
struct Checkpoint {
  ModelHandles model;
  std::map<std::string, std::string> metadata;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace arcade::model
