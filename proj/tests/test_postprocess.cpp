#include <doctest.h>

#include <algorithm>
#include <chrono>
#include <map>
#include <random>

#include "fcrseg/graph.hpp"
#include "fcrseg/imgdata.hpp"
#include "fcrseg/postprocess.hpp"
#include "oracles/oracles.hpp"

using namespace fcrseg;

namespace {

ChannelMap random_channels(std::mt19937& rng, int h, int w, int k) {
  // Blocky noise so components have a mix of sizes.
  std::uniform_int_distribution<int> ch(0, k - 1);
  std::uniform_int_distribution<int> block(1, 4);
  ChannelMap m(h, w, 0);
  const int by = block(rng), bx = block(rng);
  for (int y = 0; y < h; y += by)
    for (int x = 0; x < w; x += bx) {
      const int c = ch(rng);
      for (int yy = y; yy < std::min(h, y + by); ++yy)
        for (int xx = x; xx < std::min(w, x + bx); ++xx) m(yy, xx) = c;
    }
  return m;
}

}  // namespace

TEST_SUITE("postprocess") {

TEST_CASE("harden examples") {
  EmbeddingMap e(1, 3, 4, 0.25);
  e.pixel(1)[2] = 1.0;
  e.pixel(2)[3] = 0.9;
  const ChannelMap c = harden(e);
  CHECK(c(0, 0) == 0);
  CHECK(c(0, 1) == 2);
  CHECK(c(0, 2) == 3);
}

TEST_CASE("extract_instances matches the flood-fill oracle") {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    const ChannelMap m = random_channels(rng, 20 + trial % 7, 24, 4);
    const bool eight = trial % 3 == 0;
    PostprocessOptions opts;
    opts.min_area = 1;
    opts.background = BackgroundPolicy::None;
    opts.connectivity = eight ? Connectivity::Eight : Connectivity::Four;
    const InstanceResult r = extract_instances(m, opts);
    const auto want = oracle::flood_fill(m, eight);
    CHECK(oracle::same_partition(r.labels, want));
    if (!eight) CHECK(satisfies_label_invariants(r.labels));
    for (std::size_t i = 0; i < m.size(); ++i) CHECK(r.channel_of[r.labels[i]] == m[i]);
  }
}

TEST_CASE("min_area and border-majority background") {
  std::mt19937 rng(32);
  for (int trial = 0; trial < 50; ++trial) {
    const ChannelMap m = random_channels(rng, 24, 24, 4);
    PostprocessOptions opts;
    opts.min_area = 6;
    const InstanceResult r = extract_instances(m, opts);

    std::vector<int> border(4, 0);
    for (int y = 0; y < 24; ++y)
      for (int x = 0; x < 24; ++x)
        if (y == 0 || x == 0 || y == 23 || x == 23) ++border[m(y, x)];
    const int bg = static_cast<int>(std::max_element(border.begin(), border.end()) - border.begin());
    REQUIRE(r.background_channel.has_value());
    CHECK(*r.background_channel == bg);

    const auto parts = oracle::flood_fill(m, false);
    std::map<int, int> area;
    for (auto v : parts.pixels()) ++area[v];
    for (std::size_t i = 0; i < m.size(); ++i) {
      const bool kept = m[i] != bg && area[parts[i]] >= 6;
      CHECK((r.labels[i] != 0) == kept);
    }
    CHECK(satisfies_label_invariants(r.labels));
  }
}

TEST_CASE("touching blobs in different channels stay separate") {
  ChannelMap m(10, 10, 0);
  for (int y = 2; y < 8; ++y) {
    for (int x = 2; x < 5; ++x) m(y, x) = 1;
    for (int x = 5; x < 8; ++x) m(y, x) = 2;
  }
  const InstanceResult r = extract_instances(m);
  CHECK(count_instances(r.labels) == 2);
  CHECK(r.background_channel == 0);
  CHECK(r.labels(2, 2) == 1);
  CHECK(r.labels(2, 5) == 2);
  CHECK(r.channel_of == std::vector<int>{-1, 1, 2});

  ChannelMap two(10, 10, 0);
  for (int y = 1; y < 4; ++y)
    for (int x = 1; x < 5; ++x) two(y, x) = two(y + 5, x + 4) = 3;
  CHECK(count_instances(extract_instances(two).labels) == 2);

  PostprocessOptions largest;
  largest.background = BackgroundPolicy::LargestComponent;
  CHECK(extract_instances(two, largest).background_channel == 0);
}

TEST_CASE("instance count is invariant to channel permutation") {
  std::mt19937 rng(33);
  for (int trial = 0; trial < 20; ++trial) {
    const ChannelMap m = random_channels(rng, 20, 20, 4);
    ChannelMap p = m;
    for (auto& v : p.pixels()) v = (v + 1 + trial % 3) % 4;
    PostprocessOptions opts;
    opts.background = BackgroundPolicy::None;
    opts.min_area = 3;
    CHECK(oracle::same_partition(extract_instances(m, opts).labels, extract_instances(p, opts).labels));
  }
}

TEST_CASE("render -> extract round trip recovers synthetic instances") {
  int exact = 0;
  for (int seed = 0; seed < 100; ++seed) {
    SynthOptions so;
    so.height = so.width = 64;
    so.seed = 1000 + seed;
    const LabelImage gt = synth_blobs(so).train.at(0).labels;
    const ObjectGraph g = build_adjacency(gt, 1, true);
    const auto coloring = four_colorable(g);
    REQUIRE(coloring.has_value());
    PostprocessOptions opts;
    opts.min_area = 1;
    const InstanceResult r = extract_instances(harden(render_one_hot(gt, *coloring, 4)), opts);
    CHECK(r.background_channel == coloring->color[0]);
    exact += oracle::same_partition(r.labels, gt);
  }
  CHECK(exact == 100);
}

TEST_CASE("throughput at 512x512") {
  std::mt19937 rng(34);
  EmbeddingMap e(512, 512, 4);
  const ChannelMap m = random_channels(rng, 512, 512, 4);
  for (std::size_t p = 0; p < e.num_pixels(); ++p) e.pixel(p)[m[p]] = 1.0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) postprocess(e);
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(5.0 / s >= 5.0);
}

}  // TEST_SUITE
