#include "fcrseg/labeling.hpp"

#include <numeric>
#include <vector>

namespace fcrseg {
namespace {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }

  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    // Keep the smaller index as root so roots are first pixels in scan order.
    if (a < b) {
      parent_[b] = a;
    } else {
      parent_[a] = b;
    }
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace

Components connected_components(const Grid<std::int32_t>& values, Connectivity connectivity,
                                std::optional<std::int32_t> ignore_value) {
  const int h = values.height();
  const int w = values.width();
  Components out{Grid<std::int32_t>(h, w, 0), 0};
  if (values.empty()) return out;

  DisjointSet sets(values.size());
  auto active = [&](std::int32_t v) { return !ignore_value || v != *ignore_value; };

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::int32_t v = values(y, x);
      if (!active(v)) continue;
      const auto idx = static_cast<std::int32_t>(y * w + x);
      if (x > 0 && values(y, x - 1) == v) sets.unite(idx, idx - 1);
      if (y > 0 && values(y - 1, x) == v) sets.unite(idx, idx - w);
      if (connectivity == Connectivity::Eight && y > 0) {
        if (x > 0 && values(y - 1, x - 1) == v) sets.unite(idx, idx - w - 1);
        if (x + 1 < w && values(y - 1, x + 1) == v) sets.unite(idx, idx - w + 1);
      }
    }
  }

  // Roots are the smallest index of their set, so a root is always visited
  // before the rest of its component.
  std::vector<std::int32_t> root_label(values.size(), 0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!active(values[i])) continue;
    const std::int32_t root = sets.find(static_cast<std::int32_t>(i));
    if (root_label[root] == 0) root_label[root] = ++out.count;
    out.ids[i] = root_label[root];
  }
  return out;
}

}  // namespace fcrseg
