#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>

#include "fcrseg/types.hpp"

namespace fcrseg {

/// Per-image z-score. Constant images map to all zeros.
RawImage normalize(const RawImage& img);

/// Bilinear resampling with half-pixel centres and edge clamping.
RawImage resize_bilinear(const RawImage& img, int height, int width);

/// Nearest-neighbour resampling; output pixel centres map back with floor.
LabelImage resize_nearest(const LabelImage& labels, int height, int width);

/// Image bilinear, labels nearest. Ids disconnected by the resize are split so
/// every instance stays 4-connected.
std::pair<RawImage, LabelImage> resize_pair(const RawImage& img, const LabelImage& labels,
                                            int height, int width);

/// Renumbers instances to 1..M, splitting any id whose pixels form several
/// 4-connected parts. New ids follow (old id, scanline order of the part), so
/// a label map that already satisfies the invariants comes back unchanged.
LabelImage relabel_connected(const LabelImage& labels);

/// True when ids are contiguous 1..M, each present, and each 4-connected.
bool satisfies_label_invariants(const LabelImage& labels);

int count_instances(const LabelImage& labels);

struct SynthOptions {
  int n_images = 1;
  int height = 128;
  int width = 128;
  double density = 0.3;  ///< target foreground fraction, in (0, 1]
  std::uint64_t seed = 0;
};

/// Gaussian-shaded elliptical blobs on a dim background with additive noise.
/// Later blobs overwrite earlier ones; carved-away blobs are dropped and split
/// ones relabeled per part. Every fifth image (rounded down) goes to eval.
DatasetSplit synth_blobs(const SynthOptions& opts);

/// 64-bit FNV-1a, used for the deterministic train/eval split.
std::uint64_t fnv1a64(std::string_view text);

/// Number of training samples out of `n`: 604 of the full 768, otherwise the
/// same fraction rounded to nearest.
std::size_t train_count(std::size_t n);

/// Orders samples by filename hash and cuts them at train_count.
DatasetSplit split_by_hash(std::vector<Sample> samples);

/// Reads a BBBC006-style tree: images from `BBBC006_v1_images_z_NN/` (or
/// `images/`) and labels from `BBBC006_v1_labels/` (or `labels/`). A label
/// pairs with every image whose stem equals it or extends it with `_...`.
DatasetSplit load_bbbc006(const std::filesystem::path& root, int focal_plane = 16);

/// Writes `images/`, `labels/` and a `manifest.txt` listing
/// `<split> <image> <label>` lines.
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& data);

/// Reads a directory produced by write_dataset.
DatasetSplit load_manifest(const std::filesystem::path& dir);

/// Manifest directory if `manifest.txt` is present, BBBC006 layout otherwise.
DatasetSplit load_dataset(const std::filesystem::path& dir, int focal_plane = 16);

// Image codecs. Images are 8/16-bit grayscale PNG or TIFF; labels are 16-bit
// single-channel PNG with pixel value = instance id.
RawImage read_image(const std::filesystem::path& path);
LabelImage read_labels(const std::filesystem::path& path);
/// Min-max scales into the full 16-bit range.
void write_image(const std::filesystem::path& path, const RawImage& img);
void write_labels(const std::filesystem::path& path, const LabelImage& labels);
/// Grayscale image with each instance tinted by a fixed palette.
void write_overlay(const std::filesystem::path& path, const RawImage& img,
                   const LabelImage& labels);

}  // namespace fcrseg
