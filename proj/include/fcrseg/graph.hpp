#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "fcrseg/types.hpp"

namespace fcrseg {

/// Object adjacency over instance ids 1..M, optionally with the background as
/// pseudo-object 0.
struct ObjectGraph {
  int n_objects = 0;
  bool includes_background = false;
  /// neighbors[id] is sorted; index 0 stays empty unless background is a node.
  std::vector<std::vector<std::int32_t>> neighbors;

  /// Ids that are nodes: 1..M, preceded by 0 when the background participates.
  std::vector<std::int32_t> nodes() const;
  std::size_t edge_count() const;
  bool has_edge(std::int32_t a, std::int32_t b) const;
};

/// Objects i and j are neighbours iff a pixel of i lies within Chebyshev
/// distance `radius` of a pixel of j.
ObjectGraph build_adjacency(const LabelImage& labels, int radius, bool include_background);

struct Coloring {
  /// color[id] in 0..k-1 for every node, -1 for ids that are not nodes.
  std::vector<int> color;
};

bool is_proper(const ObjectGraph& g, const Coloring& c);

inline constexpr int kMaxColoringNodes = 1000;

/// Exact search for a proper k-colouring (DSATUR-ordered backtracking).
/// Throws CapacityError above kMaxColoringNodes nodes.
std::optional<Coloring> four_colorable(const ObjectGraph& g, int k = 4);

}  // namespace fcrseg
