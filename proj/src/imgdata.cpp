#include "fcrseg/imgdata.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <tuple>

#include "fcrseg/labeling.hpp"

namespace fcrseg {

RawImage normalize(const RawImage& img) {
  RawImage out(img.height(), img.width(), 0.0);
  if (img.empty()) return out;
  const auto px = img.pixels();
  const double n = static_cast<double>(px.size());
  double mean = 0.0;
  for (double v : px) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : px) var += (v - mean) * (v - mean);
  const double stddev = std::sqrt(var / n);
  if (!(stddev > 1e-12)) return out;
  for (std::size_t i = 0; i < px.size(); ++i) out[i] = (px[i] - mean) / stddev;
  return out;
}

namespace {

struct Tap {
  int lo;
  int hi;
  double frac;
};

// Half-pixel-centre source coordinate for each destination index.
std::vector<Tap> bilinear_taps(int src, int dst) {
  std::vector<Tap> taps(dst);
  const double scale = static_cast<double>(src) / dst;
  for (int i = 0; i < dst; ++i) {
    double s = (i + 0.5) * scale - 0.5;
    s = std::clamp(s, 0.0, static_cast<double>(src - 1));
    const int lo = static_cast<int>(std::floor(s));
    taps[i] = {lo, std::min(lo + 1, src - 1), s - lo};
  }
  return taps;
}

}  // namespace

RawImage resize_bilinear(const RawImage& img, int height, int width) {
  RawImage out(height, width);
  const auto ty = bilinear_taps(img.height(), height);
  const auto tx = bilinear_taps(img.width(), width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const auto [y0, y1, fy] = ty[y];
      const auto [x0, x1, fx] = tx[x];
      const double top = img(y0, x0) * (1.0 - fx) + img(y0, x1) * fx;
      const double bottom = img(y1, x0) * (1.0 - fx) + img(y1, x1) * fx;
      out(y, x) = top * (1.0 - fy) + bottom * fy;
    }
  }
  return out;
}

LabelImage resize_nearest(const LabelImage& labels, int height, int width) {
  LabelImage out(height, width);
  auto src_index = [](int i, int src, int dst) {
    const auto s = static_cast<int>(std::floor((i + 0.5) * src / dst));
    return std::min(s, src - 1);
  };
  for (int y = 0; y < height; ++y) {
    const int sy = src_index(y, labels.height(), height);
    for (int x = 0; x < width; ++x) {
      out(y, x) = labels(sy, src_index(x, labels.width(), width));
    }
  }
  return out;
}

std::pair<RawImage, LabelImage> resize_pair(const RawImage& img, const LabelImage& labels,
                                            int height, int width) {
  if (!img.same_shape(labels)) {
    throw ShapeError("resize_pair: image and label shapes differ");
  }
  if (height < 8 || width < 8) throw ShapeError("resize_pair: target size below 8");
  if (height == img.height() && width == img.width()) return {img, relabel_connected(labels)};
  return {resize_bilinear(img, height, width),
          relabel_connected(resize_nearest(labels, height, width))};
}

LabelImage relabel_connected(const LabelImage& labels) {
  const Components parts = connected_components(labels, Connectivity::Four, 0);
  // Order parts by (source id, first-pixel scan order); part ids already
  // follow scan order so a stable sort on source id suffices.
  std::vector<std::int32_t> source(parts.count + 1, 0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (parts.ids[i] != 0) source[parts.ids[i]] = labels[i];
  }
  std::vector<std::int32_t> order(parts.count);
  for (int c = 0; c < parts.count; ++c) order[c] = c + 1;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::int32_t a, std::int32_t b) { return source[a] < source[b]; });
  std::vector<std::int32_t> new_id(parts.count + 1, 0);
  for (int i = 0; i < parts.count; ++i) new_id[order[i]] = i + 1;

  LabelImage out(labels.height(), labels.width(), 0);
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = new_id[parts.ids[i]];
  return out;
}

bool satisfies_label_invariants(const LabelImage& labels) {
  for (auto v : labels.pixels()) {
    if (v < 0) return false;
  }
  return relabel_connected(labels) == labels;
}

int count_instances(const LabelImage& labels) {
  std::int32_t m = 0;
  for (auto v : labels.pixels()) m = std::max(m, v);
  return m;
}

namespace {

struct Blob {
  double cy, cx, major, minor, angle, brightness;

  double radius2(double y, double x) const {
    const double dy = y - cy;
    const double dx = x - cx;
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double u = (dx * c + dy * s) / major;
    const double v = (-dx * s + dy * c) / minor;
    return u * u + v * v;
  }
  double area() const { return std::numbers::pi * major * minor; }
};

Sample synth_one(int height, int width, double density, std::uint64_t seed, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), 0x5eedu};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.04);

  const double side = std::min(height, width);
  const double target_area = density * height * width;

  std::vector<Blob> blobs;
  Grid<std::int32_t> owner(height, width, 0);
  double covered = 0.0;
  constexpr int kMaxAttempts = 40;
  constexpr double kMaxOverlap = 0.2;
  while (true) {
    Blob b{};
    b.major = side * (0.05 + 0.05 * unit(rng));
    b.minor = b.major * (0.6 + 0.4 * unit(rng));
    b.angle = std::numbers::pi * unit(rng);
    b.brightness = 0.6 + 0.4 * unit(rng);
    if (covered + 0.5 * b.area() >= target_area) break;

    // Placement with bounded overlap; the last attempt is accepted regardless,
    // so very dense requests still carve earlier blobs.
    std::vector<std::size_t> pixels;
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
      b.cy = unit(rng) * height;
      b.cx = unit(rng) * width;
      pixels.clear();
      std::map<std::int32_t, int> overlap;
      const int y0 = std::max(0, static_cast<int>(std::floor(b.cy - b.major)));
      const int y1 = std::min(height - 1, static_cast<int>(std::ceil(b.cy + b.major)));
      const int x0 = std::max(0, static_cast<int>(std::floor(b.cx - b.major)));
      const int x1 = std::min(width - 1, static_cast<int>(std::ceil(b.cx + b.major)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          if (b.radius2(y, x) <= 1.0) {
            pixels.push_back(static_cast<std::size_t>(y) * width + x);
            if (owner(y, x) != 0) ++overlap[owner(y, x)];
          }
        }
      }
      bool acceptable = !pixels.empty();
      for (const auto& [id, count] : overlap) {
        const double mine = static_cast<double>(pixels.size());
        const double theirs = blobs[id - 1].area();
        if (count > kMaxOverlap * mine || count > kMaxOverlap * theirs) acceptable = false;
      }
      if (acceptable) break;
    }
    blobs.push_back(b);
    covered += b.area();
    const auto id = static_cast<std::int32_t>(blobs.size());
    for (auto p : pixels) owner[p] = id;
  }

  Sample s;
  s.image = RawImage(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double v = 0.1;
      if (const auto id = owner(y, x); id != 0) {
        const Blob& b = blobs[id - 1];
        v = b.brightness * (0.35 + 0.65 * std::exp(-2.0 * b.radius2(y, x)));
      }
      s.image(y, x) = v + noise(rng);
    }
  }
  s.labels = relabel_connected(owner);
  return s;
}

}  // namespace

DatasetSplit synth_blobs(const SynthOptions& opts) {
  if (opts.n_images < 1) throw ConfigError("synth_blobs: n_images must be >= 1");
  if (opts.height < 1 || opts.width < 1) throw ConfigError("synth_blobs: empty size");
  if (!(opts.density > 0.0 && opts.density <= 1.0)) {
    throw ConfigError("synth_blobs: density must lie in (0, 1]");
  }
  DatasetSplit out;
  const int n_eval = opts.n_images / 5;
  const int n_train = opts.n_images - n_eval;
  for (int i = 0; i < opts.n_images; ++i) {
    Sample s = synth_one(opts.height, opts.width, opts.density, opts.seed, i);
    char name[32];
    std::snprintf(name, sizeof(name), "synth_%04d", i);
    s.name = name;
    (i < n_train ? out.train : out.eval).push_back(std::move(s));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::size_t train_count(std::size_t n) {
  constexpr std::size_t kFull = 768;
  constexpr std::size_t kTrain = 604;
  if (n == kFull) return kTrain;
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * kTrain / kFull));
}

DatasetSplit split_by_hash(std::vector<Sample> samples) {
  std::sort(samples.begin(), samples.end(), [](const Sample& a, const Sample& b) {
    return std::make_tuple(fnv1a64(a.name), a.name) < std::make_tuple(fnv1a64(b.name), b.name);
  });
  const std::size_t n_train = train_count(samples.size());
  DatasetSplit out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (i < n_train ? out.train : out.eval).push_back(std::move(samples[i]));
  }
  return out;
}

namespace {

namespace fs = std::filesystem;

bool is_image_file(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".tif" || ext == ".tiff";
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

fs::path first_existing(const fs::path& root, std::initializer_list<std::string> names) {
  for (const auto& n : names) {
    if (fs::is_directory(root / n)) return root / n;
  }
  return {};
}

Sample load_pair(const fs::path& image_path, const fs::path& label_path, std::string name) {
  Sample s;
  s.name = std::move(name);
  s.image = read_image(image_path);
  s.labels = read_labels(label_path);
  if (!s.image.same_shape(s.labels)) {
    throw DataError("image/label shape mismatch: " + image_path.string() + " vs " +
                    label_path.string());
  }
  s.labels = relabel_connected(s.labels);
  return s;
}

}  // namespace

DatasetSplit load_bbbc006(const fs::path& root, int focal_plane) {
  if (!fs::is_directory(root)) throw IoError("dataset directory not found: " + root.string());
  char plane_dir[64];
  std::snprintf(plane_dir, sizeof(plane_dir), "BBBC006_v1_images_z_%02d", focal_plane);
  const fs::path images_dir = first_existing(root, {plane_dir, "images"});
  const fs::path labels_dir = first_existing(root, {"BBBC006_v1_labels", "labels"});
  if (images_dir.empty() || labels_dir.empty()) {
    throw DataError("no image/label directories under " + root.string());
  }

  std::map<std::string, fs::path> labels;
  for (const auto& p : sorted_images(labels_dir)) labels[p.stem().string()] = p;

  std::vector<Sample> samples;
  for (const auto& img : sorted_images(images_dir)) {
    const std::string stem = img.stem().string();
    auto it = labels.find(stem);
    if (it == labels.end()) {
      // Longest label stem that prefixes the image stem at a '_' boundary.
      for (auto cand = labels.upper_bound(stem); cand != labels.begin();) {
        --cand;
        const auto& key = cand->first;
        if (stem.size() > key.size() && stem.compare(0, key.size(), key) == 0 &&
            stem[key.size()] == '_') {
          it = cand;
          break;
        }
        if (key.empty() || key[0] != stem[0]) break;
      }
    }
    if (it == labels.end()) continue;
    samples.push_back(load_pair(img, it->second, stem));
  }
  if (samples.empty()) throw DataError("no image/label pairs found under " + root.string());
  return split_by_hash(std::move(samples));
}

void write_dataset(const fs::path& dir, const DatasetSplit& data) {
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "labels");
  std::ofstream manifest(dir / "manifest.txt");
  if (!manifest) throw IoError("cannot write " + (dir / "manifest.txt").string());
  auto emit = [&](const std::vector<Sample>& samples, const char* split) {
    for (const auto& s : samples) {
      const std::string file = s.name + ".png";
      write_image(dir / "images" / file, s.image);
      write_labels(dir / "labels" / file, s.labels);
      manifest << split << " images/" << file << " labels/" << file << "\n";
    }
  };
  emit(data.train, "train");
  emit(data.eval, "eval");
}

DatasetSplit load_manifest(const fs::path& dir) {
  std::ifstream in(dir / "manifest.txt");
  if (!in) throw IoError("cannot read " + (dir / "manifest.txt").string());
  DatasetSplit out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string split, image, label;
    if (!(fields >> split >> image >> label) || (split != "train" && split != "eval")) {
      throw DataError("manifest.txt line " + std::to_string(line_no) + " is malformed");
    }
    Sample s = load_pair(dir / image, dir / label, fs::path(image).stem().string());
    (split == "train" ? out.train : out.eval).push_back(std::move(s));
  }
  if (out.train.empty() && out.eval.empty()) throw DataError("empty manifest in " + dir.string());
  return out;
}

DatasetSplit load_dataset(const fs::path& dir, int focal_plane) {
  if (fs::exists(dir / "manifest.txt")) return load_manifest(dir);
  return load_bbbc006(dir, focal_plane);
}

}  // namespace fcrseg
