#include "fcrseg/loss.hpp"

#include <cmath>
#include <string>

#include "fcrseg/imgdata.hpp"

namespace fcrseg {
namespace {

using Vec = std::vector<double>;

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Pulls a gradient w.r.t. v / (|v| + eps) back to v.
void unit_backward(std::span<const double> v, std::span<const double> g, std::span<double> out) {
  const double r = norm(v);
  const double d = r + kNormGuard;
  const double proj = r > 0 ? dot(v, g) / (d * d * r) : 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = g[k] / d - v[k] * proj;
}

struct ObjectStats {
  std::size_t count = 0;
  Vec sum;       // sum of E(p)
  Vec unit_sum;  // sum of E(p) / (|E(p)| + eps)
};

// Per-id accumulation in one pass over the pixels.
std::vector<ObjectStats> accumulate(const EmbeddingMap& emb, const LabelImage& labels) {
  if (emb.height() != labels.height() || emb.width() != labels.width()) {
    throw ShapeError("embedding and label shapes differ");
  }
  const int k = emb.channels();
  std::vector<ObjectStats> stats(count_instances(labels) + 1);
  for (auto& s : stats) {
    s.sum.assign(k, 0.0);
    s.unit_sum.assign(k, 0.0);
  }
  for (std::size_t p = 0; p < emb.num_pixels(); ++p) {
    auto& s = stats[labels[p]];
    const auto e = emb.pixel(p);
    const double inv = 1.0 / (norm(e) + kNormGuard);
    ++s.count;
    for (int c = 0; c < k; ++c) {
      s.sum[c] += e[c];
      s.unit_sum[c] += e[c] * inv;
    }
  }
  return stats;
}

Vec mean_of(const ObjectStats& s) {
  Vec mu(s.sum.size(), 0.0);
  if (s.count == 0) return mu;
  for (std::size_t c = 0; c < mu.size(); ++c) mu[c] = s.sum[c] / static_cast<double>(s.count);
  return mu;
}

double intra_term(const ObjectStats& s) {
  if (s.count < 2) return 1.0;
  const double n = static_cast<double>(s.count);
  const double sq = dot(s.unit_sum, s.unit_sum);
  return (sq - n) / (n * (n - 1.0));
}

std::vector<std::int32_t> present_nodes(const std::vector<ObjectStats>& stats, bool background) {
  std::vector<std::int32_t> ids;
  if (background && stats[0].count > 0) ids.push_back(0);
  for (std::size_t i = 1; i < stats.size(); ++i) {
    if (stats[i].count > 0) ids.push_back(static_cast<std::int32_t>(i));
  }
  return ids;
}

}  // namespace

std::vector<double> mean_feature(const EmbeddingMap& emb, const LabelImage& labels,
                                 std::int32_t object_id) {
  Vec sum(emb.channels(), 0.0);
  std::size_t count = 0;
  for (std::size_t p = 0; p < emb.num_pixels(); ++p) {
    if (labels[p] != object_id) continue;
    ++count;
    const auto e = emb.pixel(p);
    for (std::size_t c = 0; c < sum.size(); ++c) sum[c] += e[c];
  }
  if (count == 0) throw DataError("object " + std::to_string(object_id) + " has no pixels");
  for (auto& v : sum) v /= static_cast<double>(count);
  return sum;
}

double intra_similarity(const EmbeddingMap& emb, const LabelImage& labels,
                        bool include_background) {
  const auto stats = accumulate(emb, labels);
  const auto ids = present_nodes(stats, include_background);
  if (ids.empty()) return 0.0;
  double total = 0.0;
  for (auto id : ids) total += intra_term(stats[id]);
  return total / static_cast<double>(ids.size());
}

double inter_similarity(const EmbeddingMap& emb, const LabelImage& labels, const ObjectGraph& g,
                        bool remap) {
  LossOptions opts;
  opts.remap_inter = remap;
  return total_loss(emb, labels, g, opts).l_inter;
}

LossBreakdown total_loss(const EmbeddingMap& emb, const LabelImage& labels, const ObjectGraph& g,
                         const LossOptions& opts, EmbeddingMap* grad) {
  if (opts.w_intra < 0 || opts.w_inter < 0) throw ConfigError("loss weights must be >= 0");
  const int k = emb.channels();
  if (grad) *grad = EmbeddingMap(emb.height(), emb.width(), k, 0.0);

  const auto stats = accumulate(emb, labels);
  if (g.neighbors.size() < stats.size()) {
    throw DataError("object graph has fewer ids than the label image");
  }
  LossBreakdown out;
  out.per_object_means.resize(stats.size());
  for (std::size_t i = 0; i < stats.size(); ++i) out.per_object_means[i] = mean_of(stats[i]);
  if (stats.size() == 1) {
    out.no_objects = true;
    return out;
  }

  const auto ids = present_nodes(stats, g.includes_background);
  const double m = static_cast<double>(ids.size());
  std::vector<bool> is_node(g.neighbors.size(), false);
  for (auto id : ids) is_node[id] = true;

  // Unit mean features and neighbour counts restricted to present nodes.
  std::vector<Vec> mu_hat(stats.size(), Vec(k, 0.0));
  std::vector<std::size_t> degree(stats.size(), 0);
  for (auto id : ids) {
    const double inv = 1.0 / (norm(out.per_object_means[id]) + kNormGuard);
    for (int c = 0; c < k; ++c) mu_hat[id][c] = out.per_object_means[id][c] * inv;
    for (auto nb : g.neighbors[id]) degree[id] += is_node[nb];
  }

  const double remap_scale = opts.remap_inter ? 0.5 : 1.0;
  const double remap_shift = opts.remap_inter ? 0.5 : 0.0;
  double intra = 0.0;
  double inter = 0.0;
  for (auto id : ids) {
    intra += intra_term(stats[id]);
    if (degree[id] == 0) continue;
    double acc = 0.0;
    for (auto nb : g.neighbors[id]) {
      if (is_node[nb]) acc += remap_shift + remap_scale * dot(mu_hat[id], mu_hat[nb]);
    }
    inter += acc / static_cast<double>(degree[id]);
  }
  out.l_intra = intra / m;
  out.l_inter = inter / m;
  out.total = opts.w_inter * out.l_inter - opts.w_intra * out.l_intra;
  if (!grad) return out;

  // d total / d unit-sum (intra) and d total / d mean (inter), per object.
  std::vector<Vec> g_unit(stats.size(), Vec(k, 0.0));
  std::vector<Vec> g_mean(stats.size(), Vec(k, 0.0));
  Vec g_hat(k);
  for (auto id : ids) {
    const auto& s = stats[id];
    if (s.count >= 2) {
      const double n = static_cast<double>(s.count);
      const double scale = -opts.w_intra / m * 2.0 / (n * (n - 1.0));
      for (int c = 0; c < k; ++c) g_unit[id][c] = scale * s.unit_sum[c];
    }
    std::fill(g_hat.begin(), g_hat.end(), 0.0);
    for (auto nb : g.neighbors[id]) {
      if (!is_node[nb]) continue;
      // Edge (id, nb) appears in both objects' averages.
      const double weight = 1.0 / static_cast<double>(degree[id]) +
                            1.0 / static_cast<double>(degree[nb]);
      for (int c = 0; c < k; ++c) g_hat[c] += weight * mu_hat[nb][c];
    }
    for (auto& v : g_hat) v *= opts.w_inter / m * remap_scale;
    unit_backward(out.per_object_means[id], g_hat, g_mean[id]);
    for (auto& v : g_mean[id]) v /= static_cast<double>(s.count);
  }

  Vec g_pixel(k);
  for (std::size_t p = 0; p < emb.num_pixels(); ++p) {
    const auto id = labels[p];
    if (!is_node[id]) continue;
    const auto e = emb.pixel(p);
    unit_backward(e, g_unit[id], g_pixel);
    auto out_p = grad->pixel(p);
    for (int c = 0; c < k; ++c) out_p[c] = g_pixel[c] + g_mean[id][c];
  }
  return out;
}

}  // namespace fcrseg
