#include "fcrseg/net.hpp"

#include <cmath>
#include <random>

#include "fcrseg/activation.hpp"
#include "fcrseg/imgdata.hpp"

namespace fcrseg {

void NetConfig::validate() const {
  if (base_filters < 1) throw ConfigError("base_filters must be >= 1");
  if (depth < 1 || depth > 12) throw ConfigError("depth must lie in 1..12");
  if (out_channels < 2) throw ConfigError("out_channels (K) must be >= 2");
  if (in_channels < 1) throw ConfigError("in_channels must be >= 1");
  const int div = 1 << (depth - 1);
  if (input_height < 1 || input_width < 1 || input_height % div != 0 || input_width % div != 0) {
    throw ConfigError("input size " + std::to_string(input_height) + "x" +
                      std::to_string(input_width) + " is not divisible by " +
                      std::to_string(div));
  }
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params) n += p.value.size();
  return n;
}

const Parameter& ModelState::param(const std::string& name) const {
  for (const auto& p : params) {
    if (p.name == name) return p;
  }
  throw std::out_of_range("no parameter named " + name);
}

namespace {

struct ConvSpec {
  std::string name;
  int in;
  int out;
  int ksize;
  bool feeds_relu;
};

int channels_at(const NetConfig& cfg, int level) { return cfg.base_filters << level; }

// Convolution order: encoder levels, decoder stages from coarse to fine, head.
std::vector<ConvSpec> layout(const NetConfig& cfg) {
  std::vector<ConvSpec> convs;
  for (int l = 0; l < cfg.depth; ++l) {
    const int in = l == 0 ? cfg.in_channels : channels_at(cfg, l - 1);
    const int c = channels_at(cfg, l);
    const std::string p = "enc" + std::to_string(l);
    convs.push_back({p + ".conv1", in, c, 3, false});
    convs.push_back({p + ".conv2", c, c, 3, true});
  }
  for (int l = cfg.depth - 2; l >= 0; --l) {
    const int coarse = channels_at(cfg, l + 1);
    const int c = channels_at(cfg, l);
    convs.push_back({"up" + std::to_string(l) + ".conv", coarse, coarse, 3, false});
    const std::string p = "dec" + std::to_string(l);
    convs.push_back({p + ".conv1", coarse + c, c, 3, false});
    convs.push_back({p + ".conv2", c, c, 3, true});
  }
  convs.push_back({"head.conv", channels_at(cfg, 0), cfg.out_channels, 1, false});
  return convs;
}

int enc_conv(int level, int which) { return 2 * level + which; }
int dec_conv(const NetConfig& cfg, int level, int which) {
  const int stage = cfg.depth - 2 - level;
  return 2 * cfg.depth + 3 * stage + which;  // 0 = up, 1 = conv1, 2 = conv2
}
int head_conv(const NetConfig& cfg) { return 2 * cfg.depth + 3 * (cfg.depth - 1); }

std::span<const float> weight_of(const ModelState& m, int conv) {
  return m.params[2 * conv].value;
}
std::span<const float> bias_of(const ModelState& m, int conv) {
  return m.params[2 * conv + 1].value;
}
int ksize_of(const ModelState& m, int conv) { return m.params[2 * conv].shape[2]; }

void run_conv(const ModelState& m, int conv, const Tensor& in, Tensor& out) {
  kernels::conv2d_forward(in, weight_of(m, conv), bias_of(m, conv), ksize_of(m, conv), out);
}

void run_conv_backward(const ModelState& m, int conv, const Tensor& in, const Tensor& grad_out,
                       Tensor* grad_in, Gradients& grads) {
  kernels::conv2d_backward(in, weight_of(m, conv), ksize_of(m, conv), grad_out, grad_in,
                           grads.values[2 * conv], grads.values[2 * conv + 1]);
}

void add_into(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

ModelState build(const NetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelState m;
  m.config = cfg;
  std::mt19937_64 rng(seed);
  for (const auto& conv : layout(cfg)) {
    const int fan_in = conv.in * conv.ksize * conv.ksize;
    // Variance 2/fan_in ahead of a rectifier, 1/fan_in otherwise.
    const double bound = std::sqrt((conv.feeds_relu ? 6.0 : 3.0) / fan_in);
    std::uniform_real_distribution<double> dist(-bound, bound);
    Parameter w{conv.name + ".weight", {conv.out, conv.in, conv.ksize, conv.ksize}, {}};
    w.value.resize(static_cast<std::size_t>(conv.out) * fan_in);
    for (auto& v : w.value) v = static_cast<float>(dist(rng));
    Parameter b{conv.name + ".bias", {conv.out}, std::vector<float>(conv.out, 0.0f)};
    m.params.push_back(std::move(w));
    m.params.push_back(std::move(b));
  }
  return m;
}

Tensor to_tensor(const RawImage& img) {
  Tensor t(1, img.height(), img.width());
  for (std::size_t i = 0; i < img.size(); ++i) t.data[i] = static_cast<float>(img[i]);
  return t;
}

Tensor forward_logits(const ModelState& m, const Tensor& input, ForwardCache* cache) {
  const NetConfig& cfg = m.config;
  if (input.channels != cfg.in_channels || input.height != cfg.input_height ||
      input.width != cfg.input_width) {
    throw ShapeError("input " + std::to_string(input.channels) + "x" +
                     std::to_string(input.height) + "x" + std::to_string(input.width) +
                     " does not match the configured " + std::to_string(cfg.in_channels) + "x" +
                     std::to_string(cfg.input_height) + "x" + std::to_string(cfg.input_width));
  }
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  const int depth = cfg.depth;
  c.enc_in.assign(depth, {});
  c.enc_mid.assign(depth, {});
  c.enc_out.assign(depth, {});
  c.pooled.assign(depth, {});
  c.pool_argmax.assign(depth, {});
  c.up_in.assign(depth, {});
  c.up_conv.assign(depth, {});
  c.cat.assign(depth, {});
  c.dec_mid.assign(depth, {});
  c.dec_out.assign(depth, {});

  c.enc_in[0] = input;
  for (int l = 0; l < depth; ++l) {
    run_conv(m, enc_conv(l, 0), c.enc_in[l], c.enc_mid[l]);
    run_conv(m, enc_conv(l, 1), c.enc_mid[l], c.enc_out[l]);
    kernels::relu_forward(c.enc_out[l]);
    if (l + 1 < depth) {
      kernels::maxpool2_forward(c.enc_out[l], c.pooled[l], c.pool_argmax[l]);
      c.enc_in[l + 1] = c.pooled[l];
    }
  }
  const Tensor* x = &c.enc_out[depth - 1];
  for (int l = depth - 2; l >= 0; --l) {
    c.up_in[l] = *x;
    run_conv(m, dec_conv(cfg, l, 0), c.up_in[l], c.up_conv[l]);
    Tensor up;
    kernels::upsample2_forward(c.up_conv[l], up);
    kernels::concat(up, c.enc_out[l], c.cat[l]);
    run_conv(m, dec_conv(cfg, l, 1), c.cat[l], c.dec_mid[l]);
    run_conv(m, dec_conv(cfg, l, 2), c.dec_mid[l], c.dec_out[l]);
    kernels::relu_forward(c.dec_out[l]);
    x = &c.dec_out[l];
  }
  c.head_in = *x;
  Tensor logits;
  run_conv(m, head_conv(cfg), c.head_in, logits);
  return logits;
}

EmbeddingMap logits_to_map(const Tensor& logits) {
  EmbeddingMap map(logits.height, logits.width, logits.channels);
  const std::size_t plane = logits.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    auto px = map.pixel(p);
    for (int k = 0; k < logits.channels; ++k) px[k] = logits.data[k * plane + p];
  }
  return map;
}

Tensor map_to_tensor(const EmbeddingMap& map) {
  Tensor t(map.channels(), map.height(), map.width());
  const std::size_t plane = t.plane();
  for (std::size_t p = 0; p < plane; ++p) {
    const auto px = map.pixel(p);
    for (int k = 0; k < map.channels(); ++k) t.data[k * plane + p] = static_cast<float>(px[k]);
  }
  return t;
}

EmbeddingMap forward(const ModelState& m, const RawImage& img, double alpha) {
  const Tensor logits = forward_logits(m, to_tensor(normalize(img)));
  return activate(logits_to_map(logits), alpha);
}

Gradients Gradients::zeros_like(const ModelState& m) {
  Gradients g;
  g.values.reserve(m.params.size());
  for (const auto& p : m.params) g.values.emplace_back(p.value.size(), 0.0f);
  return g;
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t j = 0; j < values[i].size(); ++j) values[i][j] += other.values[i][j];
  }
}

void Gradients::scale(float s) {
  for (auto& v : values) {
    for (auto& x : v) x *= s;
  }
}

void backward(const ModelState& m, const ForwardCache& c, const Tensor& grad_logits,
              Gradients& grads) {
  const NetConfig& cfg = m.config;
  const int depth = cfg.depth;
  Tensor g;
  run_conv_backward(m, head_conv(cfg), c.head_in, grad_logits, &g, grads);

  std::vector<Tensor> skip_grad(depth);
  for (int l = 0; l + 1 < depth; ++l) {
    // g: gradient w.r.t. dec_out[l].
    kernels::relu_backward(c.dec_out[l], g);
    Tensor g_mid, g_cat, g_up, g_coarse;
    run_conv_backward(m, dec_conv(cfg, l, 2), c.dec_mid[l], g, &g_mid, grads);
    run_conv_backward(m, dec_conv(cfg, l, 1), c.cat[l], g_mid, &g_cat, grads);
    kernels::split(g_cat, c.up_conv[l].channels, g_up, skip_grad[l]);
    kernels::upsample2_backward(g_up, g_coarse);
    run_conv_backward(m, dec_conv(cfg, l, 0), c.up_in[l], g_coarse, &g, grads);
  }

  // g: gradient w.r.t. enc_out[depth - 1].
  for (int l = depth - 1; l >= 0; --l) {
    kernels::relu_backward(c.enc_out[l], g);
    Tensor g_mid, g_in;
    run_conv_backward(m, enc_conv(l, 1), c.enc_mid[l], g, &g_mid, grads);
    run_conv_backward(m, enc_conv(l, 0), c.enc_in[l], g_mid, l > 0 ? &g_in : nullptr, grads);
    if (l == 0) break;
    Tensor g_prev(c.enc_out[l - 1].channels, c.enc_out[l - 1].height, c.enc_out[l - 1].width);
    kernels::maxpool2_backward(g_in, c.pool_argmax[l - 1], g_prev);
    add_into(g_prev, skip_grad[l - 1]);
    g = std::move(g_prev);
  }
}

}  // namespace fcrseg
