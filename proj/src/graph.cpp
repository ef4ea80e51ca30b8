#include "fcrseg/graph.hpp"

#include <algorithm>
#include <string>

#include "fcrseg/imgdata.hpp"

namespace fcrseg {

std::vector<std::int32_t> ObjectGraph::nodes() const {
  std::vector<std::int32_t> ids;
  ids.reserve(n_objects + 1);
  if (includes_background) ids.push_back(0);
  for (std::int32_t i = 1; i <= n_objects; ++i) ids.push_back(i);
  return ids;
}

std::size_t ObjectGraph::edge_count() const {
  std::size_t twice = 0;
  for (const auto& n : neighbors) twice += n.size();
  return twice / 2;
}

bool ObjectGraph::has_edge(std::int32_t a, std::int32_t b) const {
  if (a < 0 || static_cast<std::size_t>(a) >= neighbors.size()) return false;
  const auto& n = neighbors[a];
  return std::binary_search(n.begin(), n.end(), b);
}

ObjectGraph build_adjacency(const LabelImage& labels, int radius, bool include_background) {
  if (radius < 1) throw ConfigError("build_adjacency: radius must be >= 1");
  ObjectGraph g;
  g.n_objects = count_instances(labels);
  g.includes_background = include_background;
  g.neighbors.assign(g.n_objects + 1, {});

  const int h = labels.height();
  const int w = labels.width();
  const auto stride = static_cast<std::uint64_t>(g.n_objects) + 1;
  std::vector<std::uint64_t> edges;
  // Half window: every unordered pixel pair within range is visited once.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t a = labels(y, x);
      if (a == 0 && !include_background) continue;
      for (int dy = 0; dy <= radius && y + dy < h; ++dy) {
        const int dx_begin = dy == 0 ? 1 : -radius;
        for (int dx = dx_begin; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const std::int32_t b = labels(y + dy, xx);
          if (b == a || (b == 0 && !include_background)) continue;
          const auto lo = static_cast<std::uint64_t>(std::min(a, b));
          const auto hi = static_cast<std::uint64_t>(std::max(a, b));
          edges.push_back(lo * stride + hi);
        }
      }
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (auto e : edges) {
    const auto a = static_cast<std::int32_t>(e / stride);
    const auto b = static_cast<std::int32_t>(e % stride);
    g.neighbors[a].push_back(b);
    g.neighbors[b].push_back(a);
  }
  for (auto& n : g.neighbors) std::sort(n.begin(), n.end());
  return g;
}

bool is_proper(const ObjectGraph& g, const Coloring& c) {
  if (c.color.size() < g.neighbors.size()) return false;
  for (auto id : g.nodes()) {
    if (c.color[id] < 0) return false;
    for (auto nb : g.neighbors[id]) {
      if (c.color[nb] == c.color[id]) return false;
    }
  }
  return true;
}

namespace {

class ColoringSearch {
 public:
  ColoringSearch(const ObjectGraph& g, int k)
      : g_(g), k_(k), color_(g.neighbors.size(), -1),
        forbidden_(g.neighbors.size(), std::vector<int>(k, 0)), nodes_(g.nodes()) {}

  std::optional<Coloring> run() {
    if (k_ < 1) return nodes_.empty() ? std::optional<Coloring>(Coloring{color_}) : std::nullopt;
    if (!assign(0, 0)) return std::nullopt;
    return Coloring{color_};
  }

 private:
  int saturation(std::int32_t v) const {
    int s = 0;
    for (int c = 0; c < k_; ++c) s += forbidden_[v][c] > 0;
    return s;
  }

  // DSATUR pick: most distinct neighbour colours, then highest degree.
  std::int32_t pick() const {
    std::int32_t best = -1;
    int best_sat = -1;
    std::size_t best_deg = 0;
    for (auto v : nodes_) {
      if (color_[v] >= 0) continue;
      const int sat = saturation(v);
      const std::size_t deg = g_.neighbors[v].size();
      if (sat > best_sat || (sat == best_sat && deg > best_deg)) {
        best = v;
        best_sat = sat;
        best_deg = deg;
      }
    }
    return best;
  }

  void set(std::int32_t v, int c, int delta) {
    for (auto nb : g_.neighbors[v]) forbidden_[nb][c] += delta;
  }

  bool assign(std::size_t colored, int used) {
    if (colored == nodes_.size()) return true;
    const std::int32_t v = pick();
    // Colours above `used` are interchangeable, so only the first new one is tried.
    const int limit = std::min(k_, used + 1);
    for (int c = 0; c < limit; ++c) {
      if (forbidden_[v][c] > 0) continue;
      color_[v] = c;
      set(v, c, +1);
      if (assign(colored + 1, std::max(used, c + 1))) return true;
      set(v, c, -1);
      color_[v] = -1;
    }
    return false;
  }

  const ObjectGraph& g_;
  int k_;
  std::vector<int> color_;
  std::vector<std::vector<int>> forbidden_;
  std::vector<std::int32_t> nodes_;
};

}  // namespace

std::optional<Coloring> four_colorable(const ObjectGraph& g, int k) {
  const auto n_nodes = g.nodes().size();
  if (n_nodes > static_cast<std::size_t>(kMaxColoringNodes)) {
    throw CapacityError("four_colorable: " + std::to_string(n_nodes) +
                        " nodes exceed the backtracking guard of " +
                        std::to_string(kMaxColoringNodes));
  }
  return ColoringSearch(g, k).run();
}

}  // namespace fcrseg
