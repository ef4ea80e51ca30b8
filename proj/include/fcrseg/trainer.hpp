#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fcrseg/activation.hpp"
#include "fcrseg/loss.hpp"
#include "fcrseg/metrics.hpp"
#include "fcrseg/net.hpp"
#include "fcrseg/postprocess.hpp"

namespace fcrseg {

struct TrainConfig {
  int batch_size = 4;
  double lr = 1e-4;
  int epochs = 600;
  /// Multiplied into the learning rate once every `schedule_period` epochs.
  double lr_decay = 0.9;
  int schedule_period = 80;
  ActivationSpec alpha_schedule = ActivationSpec::staged(80);
  int adjacency_radius = 3;
  bool include_background = true;
  LossOptions loss;
  /// w_intra ramps linearly from 0 over this many epochs. Early on, random
  /// features vary more inside objects than between them, and a full-weight
  /// intra term then drives every pixel to one channel.
  int intra_warmup = 0;
  /// Loss on the activated map; false applies it to the raw logits.
  bool loss_post_activation = true;
  /// Evaluate on the eval split every this many epochs (and after the last).
  int eval_every = 10;
  PostprocessOptions post;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  std::string device = "cpu";
  std::string parallelism;

  void validate() const;

  /// 128x128 synthetic acceptance setup: 60 epochs with the schedules
  /// compressed to an 8-epoch period.
  static TrainConfig desk();
};

double lr_at(const TrainConfig& cfg, int epoch);
/// Loss weights in effect at `epoch`, after the intra warmup.
LossOptions loss_at(const TrainConfig& cfg, int epoch);

struct EpochLog {
  int epoch = 0;
  double l_intra = 0.0;
  double l_inter = 0.0;
  double total = 0.0;
  double lr = 0.0;
  double alpha = 0.0;
  std::optional<ImageScores> eval;
};

struct TrainResult {
  ModelState last;
  ModelState best;
  double best_aji = -1.0;
  std::vector<EpochLog> log;
};

struct TrainOptions {
  /// Receives `train.log`, `eval.log`, `best.ckpt` and `last.ckpt` when set.
  std::optional<std::filesystem::path> out_dir;
  /// Continue from this state at its recorded epoch.
  std::optional<ModelState> resume;
  /// Called after every epoch.
  std::function<void(const EpochLog&)> on_epoch;
};

struct NonFiniteLoss : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Adam over mini-batches with per-epoch alpha and step-decayed lr.
/// Throws NonFiniteLoss naming the batch when the loss stops being finite.
TrainResult train(const DatasetSplit& data, const NetConfig& net_cfg, const TrainConfig& cfg,
                  const TrainOptions& opts = {});

/// Prediction per sample, compared against its labels. The predictor returns
/// an activated map at the sample's resolution.
EvalReport evaluate_with(const std::function<EmbeddingMap(const Sample&)>& predictor,
                         const std::vector<Sample>& data, const PostprocessOptions& post = {});

/// forward -> postprocess -> metrics. Inputs of another size are resized to
/// the network and predictions resized back with nearest-neighbour.
EvalReport evaluate(const ModelState& m, const std::vector<Sample>& data, double alpha,
                    const PostprocessOptions& post = {});

/// Instance labels for one image at its own resolution.
LabelImage predict_labels(const ModelState& m, const RawImage& img, double alpha,
                          const PostprocessOptions& post = {});

}  // namespace fcrseg
