#include "fcrseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <tuple>

#include "fcrseg/graph.hpp"
#include "fcrseg/imgdata.hpp"

namespace fcrseg {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
  if (schedule_period < 1) throw ConfigError("schedule_period must be >= 1");
  if (adjacency_radius < 1) throw ConfigError("adjacency_radius must be >= 1");
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (intra_warmup < 0) throw ConfigError("intra_warmup must be >= 0");
  if (loss.w_intra < 0 || loss.w_inter < 0) throw ConfigError("loss weights must be >= 0");
  alpha_schedule.validate();
}

TrainConfig TrainConfig::desk() {
  TrainConfig cfg;
  cfg.epochs = 60;
  cfg.schedule_period = 8;
  cfg.alpha_schedule = ActivationSpec::staged(8);
  cfg.lr = 1e-3;
  // A full-weight intra term collapses the untrained net onto one channel.
  cfg.loss.w_intra = 0.1;
  cfg.eval_every = 5;
  return cfg;
}

double lr_at(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, epoch / cfg.schedule_period);
}

LossOptions loss_at(const TrainConfig& cfg, int epoch) {
  LossOptions opts = cfg.loss;
  if (epoch < cfg.intra_warmup) opts.w_intra *= static_cast<double>(epoch) / cfg.intra_warmup;
  return opts;
}

namespace {

struct Prepared {
  Tensor input;
  LabelImage labels;
  ObjectGraph graph;
};

Prepared prepare(const Sample& s, const NetConfig& net, const TrainConfig& cfg) {
  RawImage img = s.image;
  LabelImage labels = s.labels;
  if (img.height() != net.input_height || img.width() != net.input_width) {
    std::tie(img, labels) = resize_pair(img, labels, net.input_height, net.input_width);
  }
  Prepared p;
  p.input = to_tensor(normalize(img));
  p.graph = build_adjacency(labels, cfg.adjacency_radius, cfg.include_background);
  p.labels = std::move(labels);
  return p;
}

class Adam {
 public:
  Adam(const ModelState& m, const TrainConfig& cfg)
      : beta1_(cfg.adam_beta1), beta2_(cfg.adam_beta2), eps_(cfg.adam_eps),
        first_(Gradients::zeros_like(m)), second_(Gradients::zeros_like(m)) {}

  void step(ModelState& m, const Gradients& g, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < m.params.size(); ++i) {
      auto& w = m.params[i].value;
      auto& mo = first_.values[i];
      auto& ve = second_.values[i];
      const auto& gi = g.values[i];
      for (std::size_t j = 0; j < w.size(); ++j) {
        mo[j] = static_cast<float>(beta1_ * mo[j] + (1.0 - beta1_) * gi[j]);
        ve[j] = static_cast<float>(beta2_ * ve[j] + (1.0 - beta2_) * gi[j] * gi[j]);
        const double mhat = mo[j] / c1;
        const double vhat = ve[j] / c2;
        w[j] -= static_cast<float>(lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

 private:
  double beta1_, beta2_, eps_;
  long long t_ = 0;
  Gradients first_;
  Gradients second_;
};

LossBreakdown accumulate_sample(const ModelState& m, const Prepared& p, const TrainConfig& cfg,
                                const LossOptions& weights, double alpha, Gradients& grads) {
  ForwardCache cache;
  const Tensor logits = forward_logits(m, p.input, &cache);
  const EmbeddingMap raw = logits_to_map(logits);
  EmbeddingMap grad_map;
  LossBreakdown loss;
  if (cfg.loss_post_activation) {
    const EmbeddingMap act = activate(raw, alpha);
    EmbeddingMap grad_act;
    loss = total_loss(act, p.labels, p.graph, weights, &grad_act);
    grad_map = activate_backward(raw, act, alpha, grad_act);
  } else {
    loss = total_loss(raw, p.labels, p.graph, weights, &grad_map);
  }
  if (std::isfinite(loss.total)) backward(m, cache, map_to_tensor(grad_map), grads);
  return loss;
}

void append_line(const std::optional<std::filesystem::path>& dir, const char* file,
                 const std::string& line) {
  if (!dir) return;
  std::ofstream out(*dir / file, std::ios::app);
  out << line << "\n";
}

}  // namespace

TrainResult train(const DatasetSplit& data, const NetConfig& net_cfg, const TrainConfig& cfg,
                  const TrainOptions& opts) {
  net_cfg.validate();
  cfg.validate();
  if (data.train.empty()) throw DataError("training split is empty");
  if (opts.out_dir) std::filesystem::create_directories(*opts.out_dir);

  std::vector<Prepared> train_set;
  train_set.reserve(data.train.size());
  for (const auto& s : data.train) train_set.push_back(prepare(s, net_cfg, cfg));

  TrainResult result;
  ModelState model = opts.resume ? *opts.resume : build(net_cfg, cfg.seed);
  if (!(model.config == net_cfg)) throw ConfigError("resume state has a different NetConfig");
  Adam adam(model, cfg);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  // Fast-forward the shuffle stream so a resumed run sees the same batches.
  for (int e = 0; e < model.epoch; ++e) std::shuffle(order.begin(), order.end(), rng);

  for (int epoch = model.epoch; epoch < cfg.epochs; ++epoch) {
    const double alpha = alpha_at(cfg.alpha_schedule, epoch);
    const double lr = lr_at(cfg, epoch);
    const LossOptions weights = loss_at(cfg, epoch);
    std::shuffle(order.begin(), order.end(), rng);

    EpochLog log{epoch, 0.0, 0.0, 0.0, lr, alpha, std::nullopt};
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size, ++batch_index) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Gradients grads = Gradients::zeros_like(model);
      for (std::size_t i = start; i < end; ++i) {
        const LossBreakdown loss = accumulate_sample(model, train_set[order[i]], cfg, weights, alpha, grads);
        if (!std::isfinite(loss.total)) {
          throw NonFiniteLoss("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(batch_index) + " (sample " +
                              data.train[order[i]].name + ")");
        }
        log.l_intra += loss.l_intra;
        log.l_inter += loss.l_inter;
        log.total += loss.total;
      }
      grads.scale(1.0f / static_cast<float>(end - start));
      adam.step(model, grads, lr);
    }
    const double n = static_cast<double>(order.size());
    log.l_intra /= n;
    log.l_inter /= n;
    log.total /= n;
    model.epoch = epoch + 1;

    char line[160];
    std::snprintf(line, sizeof(line), "%d, %.6f, %.6f, %.6f, %.6g, %.1f", epoch, log.l_intra,
                  log.l_inter, log.total, lr, alpha);
    append_line(opts.out_dir, "train.log", line);

    const bool last_epoch = epoch + 1 == cfg.epochs;
    if (!data.eval.empty() && ((epoch + 1) % cfg.eval_every == 0 || last_epoch)) {
      const EvalReport report = evaluate(model, data.eval, alpha, cfg.post);
      log.eval = report.means;
      std::snprintf(line, sizeof(line), "%d, %.4f, %.4f, %.4f, %.4f", epoch, report.means.dice2,
                    report.means.aji, report.means.f1, report.means.pq);
      append_line(opts.out_dir, "eval.log", line);
      if (report.means.aji > result.best_aji) {
        result.best_aji = report.means.aji;
        result.best = model;
        if (opts.out_dir) save_checkpoint(*opts.out_dir / "best.ckpt", model);
      }
    }
    result.log.push_back(log);
    if (opts.on_epoch) opts.on_epoch(log);
  }
  if (result.best_aji < 0) result.best = model;
  result.last = std::move(model);
  if (opts.out_dir) save_checkpoint(*opts.out_dir / "last.ckpt", result.last);
  return result;
}

EvalReport evaluate_with(const std::function<EmbeddingMap(const Sample&)>& predictor,
                         const std::vector<Sample>& data, const PostprocessOptions& post) {
  EvalReport report;
  for (const auto& s : data) {
    const InstanceResult inst = postprocess(predictor(s), post);
    report.add(s.name, inst.labels, s.labels);
  }
  return report;
}

LabelImage predict_labels(const ModelState& m, const RawImage& img, double alpha,
                          const PostprocessOptions& post) {
  const NetConfig& cfg = m.config;
  const bool resized = img.height() != cfg.input_height || img.width() != cfg.input_width;
  const RawImage input = resized ? resize_bilinear(img, cfg.input_height, cfg.input_width) : img;
  LabelImage labels = postprocess(forward(m, input, alpha), post).labels;
  if (resized) labels = relabel_connected(resize_nearest(labels, img.height(), img.width()));
  return labels;
}

EvalReport evaluate(const ModelState& m, const std::vector<Sample>& data, double alpha,
                    const PostprocessOptions& post) {
  EvalReport report;
  for (const auto& s : data) report.add(s.name, predict_labels(m, s.image, alpha, post), s.labels);
  return report;
}

}  // namespace fcrseg
