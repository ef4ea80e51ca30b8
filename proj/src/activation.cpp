#include "fcrseg/activation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fcrseg {

std::vector<double> hard_argmax(std::span<const double> v) {
  std::vector<double> out(v.size(), 0.0);
  if (v.empty()) return out;
  out[std::max_element(v.begin(), v.end()) - v.begin()] = 1.0;
  return out;
}

std::vector<double> softmax(std::span<const double> v) {
  std::vector<double> out(v.size());
  if (v.empty()) return out;
  const double top = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) sum += out[k] = std::exp(v[k] - top);
  for (auto& o : out) o /= sum;
  return out;
}

std::vector<double> param_argmax(std::span<const double> v, double alpha) {
  std::vector<double> logs(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!(v[k] > 0.0)) {
      throw std::logic_error("param_argmax: entry " + std::to_string(k) + " is not positive");
    }
    logs[k] = alpha * std::log(v[k]);
  }
  return softmax(logs);
}

namespace {

double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::vector<double> positivity(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = softplus(v[k]) + kPositivityFloor;
  return out;
}

void param_argmax_backward(std::span<const double> in, std::span<const double> out, double alpha,
                           std::span<const double> grad_out, std::span<double> grad_in) {
  // y = softmax(alpha * log s):  dL/ds_k = alpha / s_k * y_k * (g_k - <y, g>)
  double dot = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) dot += out[k] * grad_out[k];
  for (std::size_t k = 0; k < out.size(); ++k) {
    grad_in[k] = alpha / in[k] * out[k] * (grad_out[k] - dot);
  }
}

void positivity_backward(std::span<const double> in, std::span<const double> grad_out,
                         std::span<double> grad_in) {
  for (std::size_t k = 0; k < in.size(); ++k) grad_in[k] = grad_out[k] * sigmoid(in[k]);
}

ActivationSpec ActivationSpec::staged(int period) {
  ActivationSpec spec;
  spec.alpha = 2.0;
  const double stages[] = {2.0, 2.0, 4.0, 6.0, 8.0};
  for (int i = 0; i < 5; ++i) spec.schedule.emplace_back(i * period, stages[i]);
  return spec;
}

void ActivationSpec::validate() const {
  if (!(alpha >= 1.0)) throw ConfigError("alpha must be >= 1");
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i].second >= 1.0)) throw ConfigError("alpha schedule values must be >= 1");
    if (schedule[i].first < 0) throw ConfigError("alpha schedule epochs must be >= 0");
    if (i > 0 && schedule[i].first <= schedule[i - 1].first) {
      throw ConfigError("alpha schedule epochs must be strictly increasing");
    }
  }
}

double alpha_at(const ActivationSpec& spec, int epoch) {
  double alpha = spec.alpha;
  for (const auto& [start, value] : spec.schedule) {
    if (start > epoch) break;
    alpha = value;
  }
  return alpha;
}

EmbeddingMap activate(const EmbeddingMap& logits, double alpha) {
  EmbeddingMap out(logits.height(), logits.width(), logits.channels());
  for (std::size_t p = 0; p < logits.num_pixels(); ++p) {
    const auto y = param_argmax(positivity(logits.pixel(p)), alpha);
    std::copy(y.begin(), y.end(), out.pixel(p).begin());
  }
  return out;
}

EmbeddingMap activate_backward(const EmbeddingMap& logits, const EmbeddingMap& activated,
                               double alpha, const EmbeddingMap& grad_activated) {
  const int k = logits.channels();
  EmbeddingMap grad(logits.height(), logits.width(), k);
  std::vector<double> grad_s(k);
  for (std::size_t p = 0; p < logits.num_pixels(); ++p) {
    const auto s = positivity(logits.pixel(p));
    param_argmax_backward(s, activated.pixel(p), alpha, grad_activated.pixel(p), grad_s);
    positivity_backward(logits.pixel(p), grad_s, grad.pixel(p));
  }
  return grad;
}

}  // namespace fcrseg
