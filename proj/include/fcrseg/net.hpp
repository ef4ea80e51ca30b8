#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcrseg/kernels.hpp"
#include "fcrseg/types.hpp"

namespace fcrseg {

struct NetConfig {
  int base_filters = 16;
  /// Resolution levels: the first layer plus four doubling submodules.
  int depth = 5;
  int out_channels = 4;
  int in_channels = 1;
  int input_height = 512;
  int input_width = 512;

  /// Throws ConfigError for indivisible input sizes or K < 2.
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

struct Parameter {
  std::string name;
  std::vector<int> shape;
  std::vector<float> value;
};

struct ModelState {
  NetConfig config;
  std::vector<Parameter> params;
  int epoch = 0;

  std::size_t parameter_count() const;
  const Parameter& param(const std::string& name) const;
};

/// U-Net: per level conv3x3 -> conv3x3 -> ReLU with 2x2 max-pool between
/// levels; each decoder stage applies a channel-preserving conv3x3 at the
/// coarse level, upsamples bilinearly, concatenates the skip and repeats the
/// conv-conv-ReLU block; a 1x1 head produces K logits. Weights are fan-in
/// scaled uniform, biases zero.
ModelState build(const NetConfig& cfg, std::uint64_t seed);

/// Activations kept for the backward pass.
struct ForwardCache {
  std::vector<Tensor> enc_in, enc_mid, enc_out, pooled;
  std::vector<std::vector<std::int32_t>> pool_argmax;
  std::vector<Tensor> up_in, up_conv, cat, dec_mid, dec_out;
  Tensor head_in;
};

/// Image (already normalized) as a 1 x H x W tensor.
Tensor to_tensor(const RawImage& img);

/// Raw K-channel logits. Throws ShapeError when the input size differs from
/// the configured one.
Tensor forward_logits(const ModelState& m, const Tensor& input, ForwardCache* cache = nullptr);

/// Normalizes the image, runs the network and applies positivity and the
/// alpha-sharpened argmax. Every output pixel lies on the simplex.
EmbeddingMap forward(const ModelState& m, const RawImage& img, double alpha);

EmbeddingMap logits_to_map(const Tensor& logits);
Tensor map_to_tensor(const EmbeddingMap& map);

/// One gradient buffer per parameter, same layout as ModelState::params.
struct Gradients {
  std::vector<std::vector<float>> values;

  static Gradients zeros_like(const ModelState& m);
  void add(const Gradients& other);
  void scale(float s);
};

/// Accumulates d loss / d params given d loss / d logits.
void backward(const ModelState& m, const ForwardCache& cache, const Tensor& grad_logits,
              Gradients& grads);

inline constexpr char kCheckpointMagic[] = "FCRSEG1";

/// Single-file archive of config, epoch and named float32 arrays.
void save_checkpoint(const std::filesystem::path& path, const ModelState& m);
ModelState load_checkpoint(const std::filesystem::path& path);

}  // namespace fcrseg
