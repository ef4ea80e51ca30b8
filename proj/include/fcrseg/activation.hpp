#pragma once

#include <span>
#include <utility>
#include <vector>

#include "fcrseg/types.hpp"

namespace fcrseg {

/// One-hot at the maximum; ties go to the lowest index.
std::vector<double> hard_argmax(std::span<const double> v);

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> v);

/// e_k^alpha / sum_j e_j^alpha for strictly positive e. Evaluated in the log
/// domain, so large alpha does not overflow. Non-positive input is a logic error.
std::vector<double> param_argmax(std::span<const double> v, double alpha);

inline constexpr double kPositivityFloor = 1e-6;

/// softplus(x) + 1e-6, elementwise.
std::vector<double> positivity(std::span<const double> v);

/// Vector-Jacobian products. `out` is the forward result for `in`.
void param_argmax_backward(std::span<const double> in, std::span<const double> out, double alpha,
                           std::span<const double> grad_out, std::span<double> grad_in);
void positivity_backward(std::span<const double> in, std::span<const double> grad_out,
                         std::span<double> grad_in);

/// Sharpening exponent and its piecewise-constant schedule over epochs.
struct ActivationSpec {
  double alpha = 2.0;
  /// (first epoch, alpha) with strictly increasing epochs.
  std::vector<std::pair<int, double>> schedule;

  /// [2, 2, 4, 6, 8] switching every `period` epochs.
  static ActivationSpec staged(int period = 80);
  /// Throws ConfigError when the schedule is not increasing or an alpha < 1.
  void validate() const;
};

double alpha_at(const ActivationSpec& spec, int epoch);

/// positivity then param_argmax on every pixel.
EmbeddingMap activate(const EmbeddingMap& logits, double alpha);

/// Gradient of the activated map pulled back to the logits.
EmbeddingMap activate_backward(const EmbeddingMap& logits, const EmbeddingMap& activated,
                               double alpha, const EmbeddingMap& grad_activated);

}  // namespace fcrseg
