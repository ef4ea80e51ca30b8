#include "fcrseg/postprocess.hpp"

#include <algorithm>
#include <numeric>

namespace fcrseg {

ChannelMap harden(const EmbeddingMap& emb) {
  ChannelMap out(emb.height(), emb.width(), 0);
  const auto n = static_cast<std::ptrdiff_t>(emb.num_pixels());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t p = 0; p < n; ++p) {
    const auto v = emb.pixel(static_cast<std::size_t>(p));
    out[p] = static_cast<std::int32_t>(std::max_element(v.begin(), v.end()) - v.begin());
  }
  return out;
}

InstanceResult extract_instances(const ChannelMap& channels, const PostprocessOptions& opts) {
  const int h = channels.height();
  const int w = channels.width();
  const Components parts = connected_components(channels, opts.connectivity);

  std::vector<std::size_t> area(parts.count + 1, 0);
  std::vector<int> channel(parts.count + 1, -1);
  for (std::size_t i = 0; i < channels.size(); ++i) {
    ++area[parts.ids[i]];
    channel[parts.ids[i]] = channels[i];
  }

  InstanceResult result;
  std::vector<bool> keep(parts.count + 1, false);
  for (int c = 1; c <= parts.count; ++c) {
    keep[c] = area[c] >= static_cast<std::size_t>(std::max(opts.min_area, 1));
  }

  switch (opts.background) {
    case BackgroundPolicy::BorderMajority: {
      std::vector<std::size_t> border;
      auto count = [&](int y, int x) {
        const auto c = static_cast<std::size_t>(channels(y, x));
        if (c >= border.size()) border.resize(c + 1, 0);
        ++border[c];
      };
      for (int x = 0; x < w; ++x) {
        count(0, x);
        if (h > 1) count(h - 1, x);
      }
      for (int y = 1; y + 1 < h; ++y) {
        count(y, 0);
        if (w > 1) count(y, w - 1);
      }
      if (!border.empty()) {
        const int bg = static_cast<int>(std::max_element(border.begin(), border.end()) - border.begin());
        result.background_channel = bg;
        for (int c = 1; c <= parts.count; ++c) {
          if (channel[c] == bg) keep[c] = false;
        }
      }
      break;
    }
    case BackgroundPolicy::LargestComponent: {
      if (parts.count > 0) {
        const auto largest = std::max_element(area.begin() + 1, area.end()) - area.begin();
        keep[largest] = false;
        result.background_channel = channel[largest];
      }
      break;
    }
    case BackgroundPolicy::None:
      break;
  }

  std::vector<int> order;
  for (int c = 1; c <= parts.count; ++c) {
    if (keep[c]) order.push_back(c);
  }
  // Component ids are already in scanline order, so a stable sort by channel
  // yields (channel, scanline).
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return channel[a] < channel[b]; });
  std::vector<std::int32_t> new_id(parts.count + 1, 0);
  result.channel_of.assign(order.size() + 1, -1);
  for (std::size_t i = 0; i < order.size(); ++i) {
    new_id[order[i]] = static_cast<std::int32_t>(i + 1);
    result.channel_of[i + 1] = channel[order[i]];
  }
  result.labels = LabelImage(h, w, 0);
  for (std::size_t i = 0; i < channels.size(); ++i) result.labels[i] = new_id[parts.ids[i]];
  return result;
}

EmbeddingMap render_one_hot(const LabelImage& labels, const Coloring& coloring, int k,
                            int fallback) {
  EmbeddingMap out(labels.height(), labels.width(), k, 0.0);
  for (std::size_t p = 0; p < labels.size(); ++p) {
    const auto id = static_cast<std::size_t>(labels[p]);
    int c = id < coloring.color.size() ? coloring.color[id] : -1;
    if (c < 0) c = fallback;
    out.pixel(p)[c] = 1.0;
  }
  return out;
}

}  // namespace fcrseg
