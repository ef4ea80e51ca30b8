#pragma once

#include <optional>
#include <vector>

#include "fcrseg/graph.hpp"
#include "fcrseg/labeling.hpp"
#include "fcrseg/types.hpp"

namespace fcrseg {

enum class BackgroundPolicy {
  /// The channel holding the most image-border pixels is background.
  BorderMajority,
  /// The single largest component is background.
  LargestComponent,
  /// Every component is an instance.
  None,
};

struct PostprocessOptions {
  int min_area = 10;
  BackgroundPolicy background = BackgroundPolicy::BorderMajority;
  Connectivity connectivity = Connectivity::Four;
};

struct InstanceResult {
  LabelImage labels;
  /// channel_of[id] for id in 1..M; entry 0 is -1.
  std::vector<int> channel_of;
  std::optional<int> background_channel;
};

/// Per-pixel argmax channel, ties to the lowest index.
ChannelMap harden(const EmbeddingMap& emb);

/// Connected components per channel, speckle below min_area dropped, the
/// background removed per policy, remaining parts numbered 1..M in
/// (channel, scanline) order.
InstanceResult extract_instances(const ChannelMap& channels, const PostprocessOptions& opts = {});

inline InstanceResult postprocess(const EmbeddingMap& emb, const PostprocessOptions& opts = {}) {
  return extract_instances(harden(emb), opts);
}

/// One-hot map painting every node of the colouring with its colour. Pixels
/// whose id is not a node (background when it is not part of the graph) get
/// colour `fallback`.
EmbeddingMap render_one_hot(const LabelImage& labels, const Coloring& coloring, int k,
                            int fallback = 0);

}  // namespace fcrseg
