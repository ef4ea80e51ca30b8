#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace fcrseg {

/// Single-sample feature map, channel-major (C x H x W).
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<float> data;

  Tensor() = default;
  Tensor(int c, int h, int w, float fill = 0.0f)
      : channels(c), height(h), width(w),
        data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  float* channel(int c) { return data.data() + c * plane(); }
  const float* channel(int c) const { return data.data() + c * plane(); }
  float& at(int c, int y, int x) { return data[c * plane() + static_cast<std::size_t>(y) * width + x]; }
  float at(int c, int y, int x) const {
    return data[c * plane() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

/// Convolution weights are [out][in][k][k]; `ksize` is 1 or 3 with "same"
/// zero padding. OpenMP-parallel im2col + GEMM.
namespace kernels {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int ksize, Tensor& out);

/// Accumulates into grad_weight / grad_bias. grad_in is overwritten unless null.
void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize,
                     const Tensor& grad_out, Tensor* grad_in, std::span<float> grad_weight,
                     std::span<float> grad_bias);

void relu_forward(Tensor& x);
/// Zeroes grad where the forward output was not positive.
void relu_backward(const Tensor& out, Tensor& grad);

/// 2x2 max-pool, stride 2. `argmax` records the winning flat input index.
void maxpool2_forward(const Tensor& in, Tensor& out, std::vector<std::int32_t>& argmax);
void maxpool2_backward(const Tensor& grad_out, const std::vector<std::int32_t>& argmax,
                       Tensor& grad_in);

/// Bilinear 2x upsampling with half-pixel centres and edge clamping.
void upsample2_forward(const Tensor& in, Tensor& out);
void upsample2_backward(const Tensor& grad_out, Tensor& grad_in);

/// Channel concatenation [a; b] and its split.
void concat(const Tensor& a, const Tensor& b, Tensor& out);
void split(const Tensor& joined, int channels_a, Tensor& a, Tensor& b);

}  // namespace kernels

/// Straight loop nests with no threading or GEMM; the oracle for the kernels above.
namespace reference {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int ksize, Tensor& out);
void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize,
                     const Tensor& grad_out, Tensor* grad_in, std::span<float> grad_weight,
                     std::span<float> grad_bias);
void maxpool2_forward(const Tensor& in, Tensor& out);
void upsample2_forward(const Tensor& in, Tensor& out);

}  // namespace reference

/// Caps OpenMP workers at FCRSEG_THREADS when set. Returns the thread count in use.
int configure_threads();

}  // namespace fcrseg
