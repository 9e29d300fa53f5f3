#include "arcade/model.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "arcade/errors.hpp"
#include "arcade/io.hpp"

namespace arcade::model {

using ad::Var;
using json = nlohmann::json;

void ModelConfig::validate() const {
  if (n < 1) throw ConfigError("ModelConfig: n must be >= 1");
  if (l < 1) throw ConfigError("ModelConfig: l must be >= 1");
  if (d < 1) throw ConfigError("ModelConfig: d must be >= 1");
  if (w() < 8)
    throw ConfigError("ModelConfig: sequence length " + std::to_string(w()) +
                      " too short for three stride-2 stages (need w >= 8)");
  if (critic_hidden < 1) throw ConfigError("ModelConfig: critic_hidden must be >= 1");
}

StageLengths stage_lengths(const ModelConfig& cfg) {
  StageLengths s{};
  s.l0 = cfg.w();
  s.l1 = ad::conv_out_len(s.l0, cfg.kernel, cfg.stride, cfg.padding);
  s.l2 = ad::conv_out_len(s.l1, cfg.kernel, cfg.stride, cfg.padding);
  s.l3 = ad::conv_out_len(s.l2, cfg.kernel, cfg.stride, cfg.padding);
  return s;
}

namespace {
std::int64_t feat_count(const ModelConfig& cfg, const StageLengths& s) {
  return static_cast<std::int64_t>(cfg.channels[2]) * s.l3;
}
}  // namespace

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(const ModelConfig& cfg)
    : c1_(1, cfg.channels[0], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l0, stage_lengths(cfg).l1),
      c2_(cfg.channels[0], cfg.channels[1], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l1, stage_lengths(cfg).l2),
      c3_(cfg.channels[1], cfg.channels[2], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l2, stage_lengths(cfg).l3),
      b1_(cfg.channels[0]),
      b2_(cfg.channels[1]),
      b3_(cfg.channels[2]),
      fc_(feat_count(cfg, stage_lengths(cfg)), cfg.d, /*bias=*/false),
      slope_(cfg.leaky_slope) {}

Var Encoder::forward(const Var& x) const {
  Var h = ad::leaky_relu(b1_.forward(c1_.forward(x)), slope_);
  h = ad::leaky_relu(b2_.forward(c2_.forward(h)), slope_);
  h = ad::leaky_relu(b3_.forward(c3_.forward(h)), slope_);
  const std::int64_t n = h.value().dim(0);
  const std::int64_t f = h.value().dim(1) * h.value().dim(2);
  return fc_.forward(ad::reshape(h, {n, f}));
}

void Encoder::init(Rng& rng, double stddev) {
  c1_.init(rng, stddev);
  b1_.init(rng, stddev);
  c2_.init(rng, stddev);
  b2_.init(rng, stddev);
  c3_.init(rng, stddev);
  b3_.init(rng, stddev);
  fc_.init(rng, stddev);
}

void Encoder::set_training(bool t) {
  b1_.set_training(t);
  b2_.set_training(t);
  b3_.set_training(t);
}

void Encoder::collect(std::vector<nn::ParamRef>& p, std::vector<nn::BufferRef>& b) {
  c1_.collect(p, "encoder.conv1");
  b1_.collect(p, "encoder.bn1");
  c2_.collect(p, "encoder.conv2");
  b2_.collect(p, "encoder.bn2");
  c3_.collect(p, "encoder.conv3");
  b3_.collect(p, "encoder.bn3");
  fc_.collect(p, "encoder.fc");
  b1_.collect_buffers(b, "encoder.bn1");
  b2_.collect_buffers(b, "encoder.bn2");
  b3_.collect_buffers(b, "encoder.bn3");
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

Decoder::Decoder(const ModelConfig& cfg)
    : c3_(cfg.channels[2]),
      l3_(stage_lengths(cfg).l3),
      fc_(cfg.d, feat_count(cfg, stage_lengths(cfg)), /*bias=*/false),
      b0_(feat_count(cfg, stage_lengths(cfg))),
      t1_(cfg.channels[2], cfg.channels[1], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l3, stage_lengths(cfg).l2),
      t2_(cfg.channels[1], cfg.channels[0], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l2, stage_lengths(cfg).l1),
      t3_(cfg.channels[0], 1, cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l1, stage_lengths(cfg).l0),
      b1_(cfg.channels[1]),
      b2_(cfg.channels[0]) {}

Var Decoder::forward(const Var& z) const {
  const std::int64_t n = z.value().dim(0);
  // Batch norm acts on the flat feature vector before the reshape; its
  // parameter count (2 * channels * l3) matches that placement.
  Var h = ad::leaky_relu(b0_.forward(fc_.forward(z)), 0.0);
  h = ad::reshape(h, {n, c3_, l3_});
  h = ad::leaky_relu(b1_.forward(t1_.forward(h)), 0.0);
  h = ad::leaky_relu(b2_.forward(t2_.forward(h)), 0.0);
  return ad::sigmoid(t3_.forward(h));
}

void Decoder::init(Rng& rng, double stddev) {
  fc_.init(rng, stddev);
  b0_.init(rng, stddev);
  t1_.init(rng, stddev);
  b1_.init(rng, stddev);
  t2_.init(rng, stddev);
  b2_.init(rng, stddev);
  t3_.init(rng, stddev);
}

void Decoder::set_training(bool t) {
  b0_.set_training(t);
  b1_.set_training(t);
  b2_.set_training(t);
}

void Decoder::collect(std::vector<nn::ParamRef>& p, std::vector<nn::BufferRef>& b) {
  fc_.collect(p, "decoder.fc");
  b0_.collect(p, "decoder.bn0");
  t1_.collect(p, "decoder.tconv1");
  b1_.collect(p, "decoder.bn1");
  t2_.collect(p, "decoder.tconv2");
  b2_.collect(p, "decoder.bn2");
  t3_.collect(p, "decoder.tconv3");
  b0_.collect_buffers(b, "decoder.bn0");
  b1_.collect_buffers(b, "decoder.bn1");
  b2_.collect_buffers(b, "decoder.bn2");
}

// ---------------------------------------------------------------------------
// Critic
// ---------------------------------------------------------------------------

Critic::Critic(const ModelConfig& cfg)
    : c1_(1, cfg.channels[0], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l0, stage_lengths(cfg).l1),
      c2_(cfg.channels[0], cfg.channels[1], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l1, stage_lengths(cfg).l2),
      c3_(cfg.channels[1], cfg.channels[2], cfg.kernel, cfg.stride, cfg.padding,
          stage_lengths(cfg).l2, stage_lengths(cfg).l3),
      n1_(cfg.channels[0] * stage_lengths(cfg).l1),
      n2_(cfg.channels[1] * stage_lengths(cfg).l2),
      n3_(cfg.channels[2] * stage_lengths(cfg).l3),
      n4_(cfg.critic_hidden),
      fc1_(feat_count(cfg, stage_lengths(cfg)), cfg.critic_hidden, /*bias=*/true),
      fc2_(cfg.critic_hidden, 1, /*bias=*/true),
      slope_(cfg.leaky_slope) {}

Var Critic::forward(const Var& x) const {
  Var h = ad::leaky_relu(n1_.forward(c1_.forward(x)), slope_);
  h = ad::leaky_relu(n2_.forward(c2_.forward(h)), slope_);
  h = ad::leaky_relu(n3_.forward(c3_.forward(h)), slope_);
  const std::int64_t n = h.value().dim(0);
  const std::int64_t f = h.value().dim(1) * h.value().dim(2);
  h = ad::leaky_relu(n4_.forward(fc1_.forward(ad::reshape(h, {n, f}))), slope_);
  return ad::reshape(fc2_.forward(h), {n});
}

void Critic::init(Rng& rng, double stddev) {
  c1_.init(rng, stddev);
  c2_.init(rng, stddev);
  c3_.init(rng, stddev);
  fc1_.init(rng, stddev);
  fc2_.init(rng, stddev);
}

void Critic::collect(std::vector<nn::ParamRef>& p) {
  c1_.collect(p, "critic.conv1");
  n1_.collect(p, "critic.ln1");
  c2_.collect(p, "critic.conv2");
  n2_.collect(p, "critic.ln2");
  c3_.collect(p, "critic.conv3");
  n3_.collect(p, "critic.ln3");
  fc1_.collect(p, "critic.fc1");
  n4_.collect(p, "critic.ln4");
  fc2_.collect(p, "critic.fc2");
}

// ---------------------------------------------------------------------------
// ModelHandles
// ---------------------------------------------------------------------------

namespace {
std::int64_t count(const std::vector<nn::ParamRef>& ps) {
  std::int64_t n = 0;
  for (const auto& p : ps) n += p.var.value().numel();
  return n;
}
}  // namespace

std::vector<ad::Var> ModelHandles::autoencoder_vars() const {
  std::vector<ad::Var> v;
  for (const auto& p : encoder_params) v.push_back(p.var);
  for (const auto& p : decoder_params) v.push_back(p.var);
  return v;
}

std::vector<ad::Var> ModelHandles::critic_vars() const {
  std::vector<ad::Var> v;
  for (const auto& p : critic_params) v.push_back(p.var);
  return v;
}

std::int64_t ModelHandles::encoder_param_count() const { return count(encoder_params); }
std::int64_t ModelHandles::decoder_param_count() const { return count(decoder_params); }
std::int64_t ModelHandles::critic_param_count() const { return count(critic_params); }

void ModelHandles::set_training(bool t) const {
  encoder->set_training(t);
  decoder->set_training(t);
}

Var ModelHandles::reconstruct_var(const Var& x) const {
  return decoder->forward(encoder->forward(x));
}

ModelHandles build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelHandles m;
  m.cfg = cfg;
  m.seed = seed;
  m.encoder = std::make_shared<Encoder>(cfg);
  m.decoder = std::make_shared<Decoder>(cfg);
  m.critic = std::make_shared<Critic>(cfg);

  Rng rng = Rng(seed).derive(0xA11C);
  m.encoder->init(rng, cfg.init_stddev);
  m.decoder->init(rng, cfg.init_stddev);
  m.critic->init(rng, cfg.init_stddev);

  m.encoder->collect(m.encoder_params, m.buffers);
  m.decoder->collect(m.decoder_params, m.buffers);
  m.critic->collect(m.critic_params);
  return m;
}

// ---------------------------------------------------------------------------
// Inference entry points
// ---------------------------------------------------------------------------

namespace {

Tensor as_batch(const ModelHandles& m, const Tensor& x) {
  const std::int64_t w = m.cfg.w();
  if (x.rank() == 1) {
    if (x.dim(0) != w)
      throw ContractError("input length " + std::to_string(x.dim(0)) +
                          " does not match model w=" + std::to_string(w));
    return x.reshaped({1, 1, w});
  }
  if (x.rank() == 2) {
    if (x.dim(1) != w)
      throw ContractError("input length " + std::to_string(x.dim(1)) +
                          " does not match model w=" + std::to_string(w));
    return x.reshaped({x.dim(0), 1, w});
  }
  throw ContractError("expected [w] or [N,w] input");
}

}  // namespace

Tensor encode(const ModelHandles& m, const Tensor& x) {
  m.set_training(false);
  Tensor xb = as_batch(m, x);
  Tensor z = m.encoder->forward(Var::constant(std::move(xb))).value();
  return x.rank() == 1 ? z.reshaped({m.cfg.d}) : z;
}

Tensor reconstruct(const ModelHandles& m, const Tensor& x) {
  m.set_training(false);
  Tensor xb = as_batch(m, x);
  const std::int64_t n = xb.dim(0);
  Tensor y = m.reconstruct_var(Var::constant(std::move(xb))).value();
  return x.rank() == 1 ? y.reshaped({m.cfg.w()}) : y.reshaped({n, m.cfg.w()});
}

Tensor critic_score(const ModelHandles& m, const Tensor& x) {
  Tensor xb = as_batch(m, x);
  return m.critic->forward(Var::constant(std::move(xb))).value();
}

// ---------------------------------------------------------------------------
// Checkpoint
// ---------------------------------------------------------------------------

namespace {
constexpr char kMagic[4] = {'A', 'R', 'C', 'K'};

json config_to_json(const ModelConfig& c) {
  return json{{"n", c.n},
              {"l", c.l},
              {"d", c.d},
              {"channels", {c.channels[0], c.channels[1], c.channels[2]}},
              {"kernel", c.kernel},
              {"stride", c.stride},
              {"padding", c.padding},
              {"leaky_slope", c.leaky_slope},
              {"init_stddev", c.init_stddev},
              {"critic_hidden", c.critic_hidden}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  c.n = j.at("n").get<int>();
  c.l = j.at("l").get<int>();
  c.d = j.at("d").get<int>();
  auto ch = j.at("channels");
  c.channels = {ch.at(0).get<int>(), ch.at(1).get<int>(), ch.at(2).get<int>()};
  c.kernel = j.at("kernel").get<int>();
  c.stride = j.at("stride").get<int>();
  c.padding = j.at("padding").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.init_stddev = j.at("init_stddev").get<double>();
  c.critic_hidden = j.at("critic_hidden").get<int>();
  return c;
}
}  // namespace

void save_checkpoint(const std::string& path, const ModelHandles& m,
                     const std::map<std::string, std::string>& metadata) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open checkpoint for writing: " + path);

  json arrays = json::array();
  std::vector<const Tensor*> order;
  auto add = [&](const std::string& name, const Tensor& t) {
    arrays.push_back({{"name", name}, {"shape", t.shape()}});
    order.push_back(&t);
  };
  for (const auto& p : m.encoder_params) add(p.name, p.var.value());
  for (const auto& p : m.decoder_params) add(p.name, p.var.value());
  for (const auto& p : m.critic_params) add(p.name, p.var.value());
  for (const auto& b : m.buffers) add(b.name, *b.tensor);

  json hdr{{"config", config_to_json(m.cfg)},
           {"seed", m.seed},
           {"arrays", arrays},
           {"metadata", metadata}};
  const std::string hs = hdr.dump();

  io::write_bytes(os, kMagic, 4);
  io::write_le<std::uint32_t>(os, 1);
  io::write_le<std::uint64_t>(os, hs.size());
  io::write_bytes(os, hs.data(), hs.size());
  for (const Tensor* t : order)
    for (std::int64_t i = 0; i < t->numel(); ++i) io::write_f64(os, (*t)[i]);
  if (!os) throw IoError("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw ParseError("not a checkpoint file: " + path);
  const auto version = io::read_le<std::uint32_t>(is);
  if (version != 1) throw ParseError("unsupported checkpoint version");
  const auto hlen = io::read_le<std::uint64_t>(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw ParseError("truncated checkpoint header");
  json hdr = json::parse(hs);

  Checkpoint ck;
  ck.model = build_model(config_from_json(hdr.at("config")),
                         hdr.at("seed").get<std::uint64_t>());
  for (auto& [k, v] : hdr.at("metadata").items())
    ck.metadata[k] = v.get<std::string>();

  std::map<std::string, Tensor*> by_name;
  for (auto& p : ck.model.encoder_params) by_name[p.name] = &p.var.mutable_value();
  for (auto& p : ck.model.decoder_params) by_name[p.name] = &p.var.mutable_value();
  for (auto& p : ck.model.critic_params) by_name[p.name] = &p.var.mutable_value();
  for (auto& b : ck.model.buffers) by_name[b.name] = b.tensor;

  for (const auto& a : hdr.at("arrays")) {
    const std::string name = a.at("name").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ParseError("checkpoint: unknown array " + name);
    Tensor& t = *it->second;
    std::vector<std::int64_t> shape = a.at("shape").get<std::vector<std::int64_t>>();
    if (shape != t.shape()) throw ParseError("checkpoint: shape mismatch for " + name);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = io::read_f64(is);
  }
  if (!is) throw ParseError("truncated checkpoint data");
  return ck;
}

}  // namespace arcade::model
