// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The segravir Authors.

#include "segravir/model.hpp"

#include <cmath>
#include <random>
#include <string>
#include <utility>

#include "segravir/error.hpp"
#include "segravir/rng.hpp"

namespace segravir {

namespace {

constexpr int kBottleneckBlocks = 3;

std::string stage(const char* prefix, int r) {
  return std::string(prefix) + std::to_string(r);
}

// Registers parameters in a model under construction. With `seed` empty all
// values stay zero (skeleton for loading).
class LayerRegistry {
 public:
  LayerRegistry(NamedParameters& params,
                std::map<std::string, ops::BatchNormStats>& bn,
                std::optional<std::uint64_t> seed)
      : params_(params), bn_(bn), seed_(seed) {}

  void conv(const std::string& name, int in, int out, int k) {
    add_he_uniform(name + ".weight", {static_cast<std::size_t>(out),
                                      static_cast<std::size_t>(in),
                                      static_cast<std::size_t>(k),
                                      static_cast<std::size_t>(k)},
                   in * k * k);
    add_constant(name + ".bias", {static_cast<std::size_t>(out)}, 0.0);
  }

  void transposed_conv(const std::string& name, int in, int out) {
    add_he_uniform(name + ".weight", {static_cast<std::size_t>(in),
                                      static_cast<std::size_t>(out), 2, 2},
                   in);
    add_constant(name + ".bias", {static_cast<std::size_t>(out)}, 0.0);
  }

  void batch_norm(const std::string& name, int channels) {
    add_constant(name + ".gamma", {static_cast<std::size_t>(channels)}, 1.0);
    add_constant(name + ".beta", {static_cast<std::size_t>(channels)}, 0.0);
    bn_[name] = ops::BatchNormStats::for_channels(channels);
  }

  void conv_unit(const std::string& name, int in, int out) {
    conv(name + ".conv", in, out, 3);
    batch_norm(name + ".bn", out);
  }

  void up_unit(const std::string& name, int in, int out) {
    transposed_conv(name + ".conv", in, out);
    batch_norm(name + ".bn", out);
  }

  void res_block(const std::string& name, int channels) {
    conv_unit(name + ".unit1", channels, channels);
    conv_unit(name + ".unit2", channels, channels);
  }

  void decoder(const std::string& prefix, const ModelConfig& c) {
    for (int r = c.num_resolutions - 1; r >= 0; --r) {
      const std::string s = prefix + stage("dec", r);
      up_unit(s + ".up", c.channels_at(r + 1), c.channels_at(r));
      res_block(s + ".res", c.channels_at(r));
    }
  }

 private:
  void add_he_uniform(const std::string& name, Shape shape, int fan_in) {
    std::vector<double> values(numel(shape), 0.0);
    if (seed_) {
      std::mt19937_64 engine(derive_seed(*seed_, name));
      const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : values) v = dist(engine);
    }
    params_[name] = Tensor(std::move(shape), std::move(values), true);
  }

  void add_constant(const std::string& name, Shape shape, double value) {
    params_[name] = Tensor::full(std::move(shape), seed_ ? value : 0.0, true);
  }

  NamedParameters& params_;
  std::map<std::string, ops::BatchNormStats>& bn_;
  std::optional<std::uint64_t> seed_;
};

void register_all(const ModelConfig& c, LayerRegistry& reg) {
  reg.conv_unit("stem", c.input_channels, c.channels_at(0));
  for (int r = 0; r < c.num_resolutions; ++r) {
    reg.res_block(stage("enc", r) + ".res", c.channels_at(r));
    reg.conv_unit(stage("enc", r) + ".down", c.channels_at(r),
                  c.channels_at(r + 1));
  }
  for (int i = 0; i < kBottleneckBlocks; ++i) {
    reg.res_block(stage("bottleneck", i), c.channels_at(c.num_resolutions));
  }
  reg.decoder("", c);
  reg.conv_unit("head.conv1", c.channels_at(0), c.channels_at(0));
  reg.conv_unit("head.conv2", c.channels_at(0), c.channels_at(0));
  reg.conv("head.out", c.channels_at(0), c.num_classes, 1);
  if (c.aux_enabled) {
    reg.decoder("aux.", c);
    reg.conv("aux.out", c.channels_at(0), c.input_channels, 1);
  }
}

Model assemble(const ModelConfig& config, std::optional<std::uint64_t> seed);

class Runner {
 public:
  Runner(Model& model, Mode mode, std::uint64_t seed)
      : model_(model),
        mode_(mode),
        seed_(seed),
        rate_(model.config().dropout_rate) {}

  Tensor conv_unit(const std::string& name, const Tensor& x, int stride) {
    Tensor y = ops::conv2d(x, model_.param(name + ".conv.weight"),
                           model_.param(name + ".conv.bias"), stride, 1);
    return finish_unit(name, ops::relu(y));
  }

  Tensor up_unit(const std::string& name, const Tensor& x) {
    Tensor y = ops::transposed_conv2d(x, model_.param(name + ".conv.weight"),
                                      model_.param(name + ".conv.bias"), 2);
    return finish_unit(name, ops::relu(y));
  }

  Tensor res_block(const std::string& name, const Tensor& x) {
    Tensor y = conv_unit(name + ".unit1", x, 1);
    y = conv_unit(name + ".unit2", y, 1);
    return ops::add(x, y);
  }

  Tensor pointwise(const std::string& name, const Tensor& x) {
    return ops::conv2d(x, model_.param(name + ".weight"),
                       model_.param(name + ".bias"), 1, 0);
  }

  Tensor decoder(const std::string& prefix, Tensor x,
                 const std::vector<Tensor>& skips,
                 std::vector<Tensor>* outputs) {
    const int levels = static_cast<int>(skips.size());
    for (int r = levels - 1; r >= 0; --r) {
      const std::string s = prefix + stage("dec", r);
      x = up_unit(s + ".up", x);
      x = ops::add(res_block(s + ".res", x), skips[r]);
      if (outputs) (*outputs)[r] = x;
    }
    return x;
  }

 private:
  Tensor finish_unit(const std::string& name, const Tensor& activated) {
    auto it = model_.bn_stats().find(name + ".bn");
    if (it == model_.bn_stats().end()) {
      throw DataError("model is missing batch-norm state '" + name + ".bn'");
    }
    Tensor y = ops::batch_norm(activated, model_.param(name + ".bn.gamma"),
                               model_.param(name + ".bn.beta"), it->second,
                               mode_);
    return ops::dropout(y, rate_, derive_seed(seed_, name), mode_);
  }

  Model& model_;
  Mode mode_;
  std::uint64_t seed_;
  double rate_;
};

}  // namespace

void ModelConfig::validate(int min_classes) const {
  if (input_channels < 1) {
    throw InvalidArgument("model.input_channels must be >= 1, got " +
                          std::to_string(input_channels));
  }
  if (base_channels < 1) {
    throw InvalidArgument("model.base_channels must be >= 1, got " +
                          std::to_string(base_channels));
  }
  if (num_resolutions != 4) {
    throw InvalidArgument("model.num_resolutions must be 4, got " +
                          std::to_string(num_resolutions));
  }
  if (num_classes < min_classes) {
    throw InvalidArgument("model.num_classes must be >= " +
                          std::to_string(min_classes) + ", got " +
                          std::to_string(num_classes));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw InvalidArgument("model.dropout_rate must lie in [0, 1), got " +
                          std::to_string(dropout_rate));
  }
}

Model::Model(const Model& other) : config_(other.config_), bn_(other.bn_) {
  for (const auto& [name, t] : other.params_) {
    params_[name] = t.clone(t.requires_grad());
  }
}

Model& Model::operator=(const Model& other) {
  if (this != &other) {
    Model copy(other);
    *this = std::move(copy);
  }
  return *this;
}

std::size_t Model::parameter_count() const {
  std::size_t total = 0;
  for (const auto& [name, t] : params_) total += t.numel();
  return total;
}

Tensor& Model::param(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) {
    throw DataError("model has no parameter '" + name + "'");
  }
  return it->second;
}

namespace {

Model assemble(const ModelConfig& config, std::optional<std::uint64_t> seed) {
  Model model = make_model_skeleton(config);
  if (!seed) return model;
  NamedParameters params;
  std::map<std::string, ops::BatchNormStats> bn;
  LayerRegistry reg(params, bn, seed);
  register_all(config, reg);
  model.parameters() = std::move(params);
  model.bn_stats() = std::move(bn);
  return model;
}

}  // namespace

Model make_model_skeleton(const ModelConfig& config) {
  config.validate(1);
  Model model;
  model.config_ = config;
  LayerRegistry reg(model.params_, model.bn_, std::nullopt);
  register_all(config, reg);
  return model;
}

Model build_model(const ModelConfig& config, std::uint64_t init_seed) {
  config.validate();
  return assemble(config, init_seed);
}

ForwardResult forward(Model& model, const Tensor& batch, Mode mode,
                      std::uint64_t rng_seed, ForwardTrace* trace) {
  const ModelConfig& c = model.config();
  if (!batch.defined() || batch.rank() != 4) {
    throw InvalidArgument("forward expects an [N,C,H,W] batch");
  }
  if (batch.dim(1) != static_cast<std::size_t>(c.input_channels)) {
    throw InvalidArgument("forward: batch has " + std::to_string(batch.dim(1)) +
                          " channels, model expects " +
                          std::to_string(c.input_channels));
  }
  const std::size_t multiple = c.spatial_multiple();
  if (batch.dim(2) == 0 || batch.dim(3) == 0 || batch.dim(2) % multiple ||
      batch.dim(3) % multiple) {
    throw InvalidArgument("forward: spatial size " +
                          std::to_string(batch.dim(2)) + "x" +
                          std::to_string(batch.dim(3)) +
                          " must be a positive multiple of " +
                          std::to_string(multiple));
  }

  Runner run(model, mode, rng_seed);
  std::vector<Tensor> skips(c.num_resolutions);
  Tensor x = run.conv_unit("stem", batch, 1);
  for (int r = 0; r < c.num_resolutions; ++r) {
    skips[r] = run.res_block(stage("enc", r) + ".res", x);
    x = run.conv_unit(stage("enc", r) + ".down", skips[r], 2);
  }
  for (int i = 0; i < kBottleneckBlocks; ++i) {
    x = run.res_block(stage("bottleneck", i), x);
  }
  const Tensor bottom = x;

  if (trace) {
    trace->encoder_skips = skips;
    trace->decoder_outputs.assign(c.num_resolutions, Tensor());
  }
  Tensor d = run.decoder("", bottom, skips,
                         trace ? &trace->decoder_outputs : nullptr);
  d = run.conv_unit("head.conv1", d, 1);
  d = run.conv_unit("head.conv2", d, 1);

  ForwardResult result;
  result.seg_logits = run.pointwise("head.out", d);
  if (c.aux_enabled) {
    Tensor a = run.decoder("aux.", bottom, skips, nullptr);
    result.recon = ops::relu(run.pointwise("aux.out", a));
  }
  return result;
}

Model adapt_head(const Model& model, int new_out_channels,
                 std::uint64_t init_seed) {
  if (new_out_channels < 1) {
    throw InvalidArgument("adapt_head: new_out_channels must be >= 1, got " +
                          std::to_string(new_out_channels));
  }
  ModelConfig config = model.config();
  config.num_classes = new_out_channels;
  config.aux_enabled = false;
  Model out = make_model_skeleton(config);
  for (auto& [name, t] : out.params_) {
    if (name.rfind("head.out.", 0) == 0) continue;
    t = model.parameters().at(name).clone(true);
  }
  for (auto& [name, stats] : out.bn_) stats = model.bn_stats().at(name);

  NamedParameters fresh;
  std::map<std::string, ops::BatchNormStats> unused;
  LayerRegistry reg(fresh, unused, init_seed);
  reg.conv("head.out", config.channels_at(0), new_out_channels, 1);
  for (auto& [name, t] : fresh) out.params_[name] = t;
  return out;
}

Model adapt_input(const Model& model, int new_in_channels) {
  if (new_in_channels < 1) {
    throw InvalidArgument("adapt_input: new_in_channels must be >= 1, got " +
                          std::to_string(new_in_channels));
  }
  const int old_in = model.config().input_channels;
  if (new_in_channels == old_in) return model;

  ModelConfig config = model.config();
  config.input_channels = new_in_channels;
  Model out(model);
  out.config_ = config;

  // new[f, c'] = (1 / C_new) * sum_c old[f, c]
  const Tensor& old_kernel = model.parameters().at("stem.conv.weight");
  const std::size_t filters = old_kernel.dim(0);
  const std::size_t taps = old_kernel.dim(2) * old_kernel.dim(3);
  std::vector<double> kernel(filters * new_in_channels * taps, 0.0);
  for (std::size_t f = 0; f < filters; ++f) {
    for (std::size_t t = 0; t < taps; ++t) {
      double acc = 0.0;
      for (int c = 0; c < old_in; ++c) {
        acc += old_kernel.data()[(f * old_in + c) * taps + t];
      }
      for (int c = 0; c < new_in_channels; ++c) {
        kernel[(f * new_in_channels + c) * taps + t] = acc / new_in_channels;
      }
    }
  }
  out.params_["stem.conv.weight"] =
      Tensor({filters, static_cast<std::size_t>(new_in_channels),
              old_kernel.dim(2), old_kernel.dim(3)},
             std::move(kernel), true);

  if (config.aux_enabled) {
    // The reconstruction target changes channel count; restart its tail.
    NamedParameters fresh;
    std::map<std::string, ops::BatchNormStats> unused;
    LayerRegistry reg(fresh, unused, derive_seed(0, "adapt_input"));
    reg.conv("aux.out", config.channels_at(0), new_in_channels, 1);
    for (auto& [name, t] : fresh) out.params_[name] = t;
  }
  return out;
}

}  // namespace segravir
