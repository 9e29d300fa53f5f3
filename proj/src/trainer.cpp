#include "arcade/trainer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/io.hpp"

namespace arcade::train {

using ad::Var;
using json = nlohmann::json;

void TrainConfig::validate() const {
  if (batch_size < 2)
    throw ConfigError("TrainConfig: batch size must be >= 2 (the gradient "
                      "penalty interpolates within a batch)");
  if (lambda_c < 0 || lambda_g < 0)
    throw ConfigError("TrainConfig: penalty coefficients must be >= 0");
  if (lr_phase1 <= 0 || lr_phase2 <= 0)
    throw ConfigError("TrainConfig: learning rates must be positive");
  if (epochs_phase1 < 0 || epochs_phase2 < 0 || total_epochs() < 1)
    throw ConfigError("TrainConfig: epoch schedule must cover at least 1 epoch");
  if (beta1 < 0 || beta1 >= 1 || beta2 < 0 || beta2 >= 1)
    throw ConfigError("TrainConfig: Adam betas must lie in [0,1)");
}

double lr_schedule(const TrainConfig& cfg, int epoch) {
  if (epoch < 0 || epoch >= cfg.total_epochs())
    throw ContractError("lr_schedule: epoch " + std::to_string(epoch) +
                        " outside the schedule of " +
                        std::to_string(cfg.total_epochs()) + " epochs");
  return epoch < cfg.epochs_phase1 ? cfg.lr_phase1 : cfg.lr_phase2;
}

std::vector<std::int64_t> epoch_order(Rng& shuffle_rng, std::int64_t count,
                                      bool shuffle) {
  std::vector<std::int64_t> order(static_cast<std::size_t>(count));
  for (std::int64_t i = 0; i < count; ++i) order[static_cast<std::size_t>(i)] = i;
  if (shuffle) shuffle_rng.shuffle(order);
  return order;
}

Rng shuffle_stream(std::uint64_t seed) { return Rng(seed).derive(0x51); }
Rng epsilon_stream(std::uint64_t seed) { return Rng(seed).derive(0xE5); }

// ---------------------------------------------------------------------------

Trainer::Trainer(model::ModelHandles model, TrainConfig cfg)
    : model_(std::move(model)),
      cfg_(cfg),
      shuffle_rng_(shuffle_stream(cfg.seed)),
      eps_rng_(epsilon_stream(cfg.seed)) {
  cfg_.validate();
  adam_critic_ = std::make_unique<nn::Adam>(model_.critic_vars(), cfg_.beta1, cfg_.beta2);
  adam_ae_ = std::make_unique<nn::Adam>(model_.autoencoder_vars(), cfg_.beta1, cfg_.beta2);
}

void Trainer::train_batch(const Tensor& x, double lr, EpochStats& stats) {
  const std::int64_t m = x.dim(0);
  auto critic_fn = [this](const Var& v) { return model_.critic->forward(v); };
  losses::AdversarialConfig adv{cfg_.lambda_c, cfg_.lambda_g};

  // One reconstruction per batch; the critic step sees it as data, the
  // autoencoder step backpropagates through it.
  model_.set_training(true);
  Var x_tilde = model_.reconstruct_var(Var::constant(x));

  // Critic step: ascend the score gap, descend the gradient penalty.
  std::vector<double> eps(static_cast<std::size_t>(m));
  for (auto& e : eps) e = eps_rng_.uniform();
  auto parts = losses::critic_loss(critic_fn, x, x_tilde.value(), adv, eps);
  const double lc = parts.total.value().item();
  if (!std::isfinite(lc))
    throw std::runtime_error("training diverged: non-finite critic loss at epoch " +
                             std::to_string(epoch_));
  auto critic_vars = model_.critic_vars();
  auto cgrads = ad::gradients(parts.objective, critic_vars);
  std::vector<Tensor> cg;
  cg.reserve(cgrads.size());
  for (auto& g : cgrads) cg.push_back(g.value());
  adam_critic_->step(cg, lr);
  ++stats.critic_steps;

  // Autoencoder step against the just-updated critic.
  Var recon_term;
  double mssim_value;
  if (cfg_.recon == ReconLoss::mssim) {
    recon_term = losses::mssim_mean(Var::constant(x), x_tilde, model_.cfg.n,
                                    model_.cfg.l, cfg_.ssim);
    mssim_value = recon_term.value().item();
  } else {
    recon_term = ad::neg(losses::l2_mean(Var::constant(x), x_tilde));
    mssim_value = losses::mssim_mean(Var::constant(x),
                                     Var::constant(x_tilde.value()), model_.cfg.n,
                                     model_.cfg.l, cfg_.ssim)
                      .value()
                      .item();
  }
  Var gen_gain = recon_term;
  if (cfg_.lambda_g != 0.0) {
    Var adv_term = ad::mean(critic_fn(x_tilde));
    gen_gain = ad::add(recon_term, ad::mul_scalar(adv_term, cfg_.lambda_g));
  }
  const double lg = gen_gain.value().item();
  if (!std::isfinite(lg))
    throw std::runtime_error("training diverged: non-finite generator loss at epoch " +
                             std::to_string(epoch_));
  auto ae_vars = model_.autoencoder_vars();
  auto ggrads = ad::gradients(ad::neg(gen_gain), ae_vars);
  std::vector<Tensor> gg;
  gg.reserve(ggrads.size());
  for (auto& g : ggrads) gg.push_back(g.value());
  adam_ae_->step(gg, lr);
  ++stats.generator_steps;

  stats.critic_loss += lc;
  stats.generator_loss += lg;
  stats.mssim += mssim_value;
}

void Trainer::run(const dataset::SampleSet& data, int count, const EpochCallback& cb) {
  data.validate();
  if (data.labeled)
    for (auto b : data.labels)
      if (b != dataset::kLabelNormal)
        throw ContractError("train: anomaly-labeled sample in the training set");
  if (data.w() != model_.cfg.w())
    throw ContractError("train: sample length does not match model input");
  if (data.count() < cfg_.batch_size && cfg_.drop_last_partial)
    throw ContractError("train: fewer samples than one batch");

  const std::int64_t w = data.w();
  int end = count < 0 ? cfg_.total_epochs() : std::min(cfg_.total_epochs(), epoch_ + count);
  for (; epoch_ < end; ++epoch_) {
    const double lr = lr_schedule(cfg_, epoch_);
    EpochStats stats;
    stats.epoch = epoch_;
    stats.lr = lr;

    auto order = epoch_order(shuffle_rng_, data.count(), cfg_.shuffle);
    const std::int64_t nb = cfg_.drop_last_partial
                                ? data.count() / cfg_.batch_size
                                : (data.count() + cfg_.batch_size - 1) / cfg_.batch_size;
    std::int64_t batches = 0;
    for (std::int64_t b = 0; b < nb; ++b) {
      const std::int64_t start = b * cfg_.batch_size;
      const std::int64_t count_b =
          std::min<std::int64_t>(cfg_.batch_size, data.count() - start);
      if (count_b < 2) continue;  // batch normalization needs >= 2
      Tensor batch({count_b, 1, w});
      for (std::int64_t i = 0; i < count_b; ++i)
        std::memcpy(batch.data() + i * w,
                    data.values.data() + order[static_cast<std::size_t>(start + i)] * w,
                    static_cast<std::size_t>(w) * sizeof(double));
      train_batch(batch, lr, stats);
      ++batches;
    }
    if (batches == 0) throw ContractError("train: no full batch available");
    stats.critic_loss /= static_cast<double>(batches);
    stats.generator_loss /= static_cast<double>(batches);
    stats.mssim /= static_cast<double>(batches);
    history_.push_back(stats);
    if (cb) cb(stats, model_);
  }
}

void Trainer::write_losses_csv(const std::string& path,
                               const std::vector<EpochStats>& history) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path);
  os << "epoch,lr,critic_loss,generator_loss,mssim\n";
  os.precision(17);
  for (const auto& h : history)
    os << h.epoch << ',' << h.lr << ',' << h.critic_loss << ','
       << h.generator_loss << ',' << h.mssim << '\n';
}

// ---------------------------------------------------------------------------
// State capture / resume
// ---------------------------------------------------------------------------

namespace {
constexpr char kStateMagic[4] = {'A', 'R', 'T', 'S'};

json config_to_json(const TrainConfig& c) {
  return json{{"batch_size", c.batch_size},
              {"lambda_c", c.lambda_c},
              {"lambda_g", c.lambda_g},
              {"lr_phase1", c.lr_phase1},
              {"lr_phase2", c.lr_phase2},
              {"epochs_phase1", c.epochs_phase1},
              {"epochs_phase2", c.epochs_phase2},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"seed", c.seed},
              {"shuffle", c.shuffle},
              {"drop_last_partial", c.drop_last_partial},
              {"recon", c.recon == ReconLoss::mssim ? "mssim" : "l2"},
              {"ssim",
               {{"c1", c.ssim.c1},
                {"c2", c.ssim.c2},
                {"window", c.ssim.window},
                {"sigma", c.ssim.sigma},
                {"squared_constants", c.ssim.squared_constants}}}};
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.batch_size = j.at("batch_size").get<int>();
  c.lambda_c = j.at("lambda_c").get<double>();
  c.lambda_g = j.at("lambda_g").get<double>();
  c.lr_phase1 = j.at("lr_phase1").get<double>();
  c.lr_phase2 = j.at("lr_phase2").get<double>();
  c.epochs_phase1 = j.at("epochs_phase1").get<int>();
  c.epochs_phase2 = j.at("epochs_phase2").get<int>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.shuffle = j.at("shuffle").get<bool>();
  c.drop_last_partial = j.at("drop_last_partial").get<bool>();
  c.recon = j.at("recon").get<std::string>() == "l2" ? ReconLoss::l2 : ReconLoss::mssim;
  const auto& s = j.at("ssim");
  c.ssim.c1 = s.at("c1").get<double>();
  c.ssim.c2 = s.at("c2").get<double>();
  c.ssim.window = s.at("window").get<int>();
  c.ssim.sigma = s.at("sigma").get<double>();
  c.ssim.squared_constants = s.at("squared_constants").get<bool>();
  return c;
}
}  // namespace

void Trainer::save_state(const std::string& path) const {
  const std::string model_path = path + ".model";
  model::save_checkpoint(model_path, model_);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  json hdr{{"config", config_to_json(cfg_)},
           {"epoch", epoch_},
           {"shuffle_rng", shuffle_rng_.serialize()},
           {"eps_rng", eps_rng_.serialize()},
           {"model_file", model_path}};
  json hist = json::array();
  for (const auto& h : history_)
    hist.push_back({{"epoch", h.epoch},
                    {"lr", h.lr},
                    {"critic_loss", h.critic_loss},
                    {"generator_loss", h.generator_loss},
                    {"mssim", h.mssim},
                    {"critic_steps", h.critic_steps},
                    {"generator_steps", h.generator_steps}});
  hdr["history"] = hist;
  const std::string hs = hdr.dump();
  io::write_bytes(os, kStateMagic, 4);
  io::write_le<std::uint64_t>(os, hs.size());
  io::write_bytes(os, hs.data(), hs.size());
  adam_critic_->save_state(os);
  adam_ae_->save_state(os);
  if (!os) throw IoError("state write failed: " + path);
}

Trainer Trainer::load_state(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kStateMagic, 4) != 0)
    throw ParseError("not a trainer state file: " + path);
  const auto hlen = io::read_le<std::uint64_t>(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw ParseError("truncated trainer state");
  json hdr = json::parse(hs);

  auto ck = model::load_checkpoint(hdr.at("model_file").get<std::string>());
  Trainer t(std::move(ck.model), config_from_json(hdr.at("config")));
  t.epoch_ = hdr.at("epoch").get<int>();
  t.shuffle_rng_ = Rng::deserialize(hdr.at("shuffle_rng").get<std::string>());
  t.eps_rng_ = Rng::deserialize(hdr.at("eps_rng").get<std::string>());
  for (const auto& h : hdr.at("history")) {
    EpochStats s;
    s.epoch = h.at("epoch").get<int>();
    s.lr = h.at("lr").get<double>();
    s.critic_loss = h.at("critic_loss").get<double>();
    s.generator_loss = h.at("generator_loss").get<double>();
    s.mssim = h.at("mssim").get<double>();
    s.critic_steps = h.at("critic_steps").get<std::int64_t>();
    s.generator_steps = h.at("generator_steps").get<std::int64_t>();
    t.history_.push_back(s);
  }
  t.adam_critic_->load_state(is);
  t.adam_ae_->load_state(is);
  if (!is) throw ParseError("truncated trainer state (optimizer)");
  return t;
}

TrainResult train(const dataset::SampleSet& data, model::ModelHandles& m,
                  const TrainConfig& cfg, const EpochCallback& cb) {
  Trainer t(std::move(m), cfg);
  t.run(data, -1, cb);
  m = t.model();
  TrainResult r;
  r.history = t.history();
  return r;
}

}  // namespace arcade::train
