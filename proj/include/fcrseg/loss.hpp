#pragma once

#include <cstdint>
#include <vector>

#include "fcrseg/graph.hpp"
#include "fcrseg/types.hpp"

namespace fcrseg {

inline constexpr double kNormGuard = 1e-8;

struct LossOptions {
  double w_intra = 1.0;
  double w_inter = 1.0;
  /// Map neighbour cosine to (1 + cos) / 2 so the inter term lies in [0, 1].
  bool remap_inter = true;
};

struct LossBreakdown {
  double l_intra = 0.0;
  double l_inter = 0.0;
  /// w_inter * l_inter - w_intra * l_intra; this is what training minimises.
  double total = 0.0;
  /// Mean feature per id (row 0 is the background, zero unless it is a node).
  std::vector<std::vector<double>> per_object_means;
  /// Set when the image has no instances; all terms are then zero.
  bool no_objects = false;
};

/// Arithmetic mean of the embedding over one object's pixels.
/// Throws DataError when the object has no pixels.
std::vector<double> mean_feature(const EmbeddingMap& emb, const LabelImage& labels,
                                 std::int32_t object_id);

/// Mean over objects of the mean pairwise cosine between distinct pixels of the
/// object. Uses ||sum of unit vectors||^2 - n over n(n-1), so it is linear in
/// the pixel count. Single-pixel objects contribute 1.
double intra_similarity(const EmbeddingMap& emb, const LabelImage& labels,
                        bool include_background = false);

/// Mean over objects of the mean similarity between the object's mean feature
/// and each neighbour's. Objects without neighbours contribute 0.
double inter_similarity(const EmbeddingMap& emb, const LabelImage& labels, const ObjectGraph& g,
                        bool remap = true);

/// Both terms over the nodes of `g`. When `grad` is given it receives
/// d total / d emb with the shape of `emb`.
LossBreakdown total_loss(const EmbeddingMap& emb, const LabelImage& labels, const ObjectGraph& g,
                         const LossOptions& opts = {}, EmbeddingMap* grad = nullptr);

}  // namespace fcrseg
