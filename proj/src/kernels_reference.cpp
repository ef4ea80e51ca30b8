#include <algorithm>
#include <cmath>

#include "fcrseg/kernels.hpp"

namespace fcrseg::reference {

void conv2d_forward(const Tensor& in, std::span<const float> weight, std::span<const float> bias,
                    int ksize, Tensor& out) {
  const int out_c = static_cast<int>(bias.size());
  const int pad = ksize / 2;
  out = Tensor(out_c, in.height, in.width);
  for (int o = 0; o < out_c; ++o) {
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) {
        double acc = bias[o];
        for (int c = 0; c < in.channels; ++c) {
          for (int ky = 0; ky < ksize; ++ky) {
            for (int kx = 0; kx < ksize; ++kx) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              acc += static_cast<double>(weight[((o * in.channels + c) * ksize + ky) * ksize + kx]) *
                     in.at(c, sy, sx);
            }
          }
        }
        out.at(o, y, x) = static_cast<float>(acc);
      }
    }
  }
}

void conv2d_backward(const Tensor& in, std::span<const float> weight, int ksize,
                     const Tensor& grad_out, Tensor* grad_in, std::span<float> grad_weight,
                     std::span<float> grad_bias) {
  const int pad = ksize / 2;
  if (grad_in) *grad_in = Tensor(in.channels, in.height, in.width);
  for (int o = 0; o < grad_out.channels; ++o) {
    double gb = 0.0;
    for (int y = 0; y < in.height; ++y) {
      for (int x = 0; x < in.width; ++x) gb += grad_out.at(o, y, x);
    }
    grad_bias[o] += static_cast<float>(gb);
    for (int c = 0; c < in.channels; ++c) {
      for (int ky = 0; ky < ksize; ++ky) {
        for (int kx = 0; kx < ksize; ++kx) {
          const std::size_t wi = ((o * in.channels + c) * ksize + ky) * ksize + kx;
          double gw = 0.0;
          for (int y = 0; y < in.height; ++y) {
            for (int x = 0; x < in.width; ++x) {
              const int sy = y + ky - pad;
              const int sx = x + kx - pad;
              if (sy < 0 || sy >= in.height || sx < 0 || sx >= in.width) continue;
              const float g = grad_out.at(o, y, x);
              gw += static_cast<double>(g) * in.at(c, sy, sx);
              if (grad_in) grad_in->at(c, sy, sx) += weight[wi] * g;
            }
          }
          grad_weight[wi] += static_cast<float>(gw);
        }
      }
    }
  }
}

void maxpool2_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.channels, in.height / 2, in.width / 2);
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < out.width; ++x) {
        out.at(c, y, x) = std::max({in.at(c, 2 * y, 2 * x), in.at(c, 2 * y, 2 * x + 1),
                                    in.at(c, 2 * y + 1, 2 * x), in.at(c, 2 * y + 1, 2 * x + 1)});
      }
    }
  }
}

void upsample2_forward(const Tensor& in, Tensor& out) {
  out = Tensor(in.channels, 2 * in.height, 2 * in.width);
  auto coord = [](int i, int src) {
    return std::clamp((i + 0.5) / 2.0 - 0.5, 0.0, static_cast<double>(src - 1));
  };
  for (int c = 0; c < in.channels; ++c) {
    for (int y = 0; y < out.height; ++y) {
      const double sy = coord(y, in.height);
      const int y0 = static_cast<int>(std::floor(sy));
      const int y1 = std::min(y0 + 1, in.height - 1);
      for (int x = 0; x < out.width; ++x) {
        const double sx = coord(x, in.width);
        const int x0 = static_cast<int>(std::floor(sx));
        const int x1 = std::min(x0 + 1, in.width - 1);
        const double fy = sy - y0;
        const double fx = sx - x0;
        out.at(c, y, x) = static_cast<float>(
            (1 - fy) * ((1 - fx) * in.at(c, y0, x0) + fx * in.at(c, y0, x1)) +
            fy * ((1 - fx) * in.at(c, y1, x0) + fx * in.at(c, y1, x1)));
      }
    }
  }
}

}  // namespace fcrseg::reference
