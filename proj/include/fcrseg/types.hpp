#pragma once

#include <cassert>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fcrseg {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major 2-D array.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width), fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int y, int x) { return data_[index(y, x)]; }
  const T& operator()(int y, int x) const { return data_[index(y, x)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> pixels() { return data_; }
  std::span<const T> pixels() const { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return height_ == other.height() && width_ == other.width();
  }
  bool operator==(const Grid&) const = default;

 private:
  std::size_t index(int y, int x) const {
    assert(y >= 0 && y < height_ && x >= 0 && x < width_);
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

/// Grayscale intensities.
using RawImage = Grid<double>;
/// Instance ids; 0 is background, 1..M are instances.
using LabelImage = Grid<std::int32_t>;
/// Per-pixel channel index produced by hardening an embedding.
using ChannelMap = Grid<std::int32_t>;

/// H x W x K real array stored pixel-major, so each pixel's K-vector is contiguous.
class EmbeddingMap {
 public:
  EmbeddingMap() = default;
  EmbeddingMap(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        values_(static_cast<std::size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t num_pixels() const { return static_cast<std::size_t>(height_) * width_; }

  std::span<double> pixel(std::size_t p) {
    return {values_.data() + p * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(std::size_t p) const {
    return {values_.data() + p * channels_, static_cast<std::size_t>(channels_)};
  }
  std::span<double> pixel(int y, int x) { return pixel(static_cast<std::size_t>(y) * width_ + x); }
  std::span<const double> pixel(int y, int x) const {
    return pixel(static_cast<std::size_t>(y) * width_ + x);
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const EmbeddingMap&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> values_;
};

struct Sample {
  std::string name;
  RawImage image;
  LabelImage labels;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> eval;
};

}  // namespace fcrseg
