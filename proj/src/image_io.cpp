#include <algorithm>
#include <array>
#include <limits>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "fcrseg/imgdata.hpp"

namespace fcrseg {
namespace {

cv::Mat read_gray(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw IoError("file not found: " + path.string());
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw IoError("cannot decode image: " + path.string());
  return m;
}

void write_mat(const std::filesystem::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw IoError("cannot write image: " + path.string());
}

}  // namespace

RawImage read_image(const std::filesystem::path& path) {
  cv::Mat m = read_gray(path);
  cv::Mat as_double;
  m.convertTo(as_double, CV_64F);
  RawImage img(as_double.rows, as_double.cols);
  for (int y = 0; y < as_double.rows; ++y) {
    const auto* row = as_double.ptr<double>(y);
    std::copy(row, row + as_double.cols, &img(y, 0));
  }
  return img;
}

LabelImage read_labels(const std::filesystem::path& path) {
  cv::Mat m = read_gray(path);
  if (m.depth() != CV_8U && m.depth() != CV_16U) {
    throw DataError("label image must be 8- or 16-bit integer: " + path.string());
  }
  cv::Mat as_int;
  m.convertTo(as_int, CV_32S);
  LabelImage labels(as_int.rows, as_int.cols);
  for (int y = 0; y < as_int.rows; ++y) {
    const auto* row = as_int.ptr<std::int32_t>(y);
    std::copy(row, row + as_int.cols, &labels(y, 0));
  }
  return labels;
}

void write_image(const std::filesystem::path& path, const RawImage& img) {
  cv::Mat m(img.height(), img.width(), CV_16U);
  const auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const double low = img.empty() ? 0.0 : *lo;
  const double range = img.empty() ? 0.0 : *hi - *lo;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double t = range > 0 ? (img(y, x) - low) / range : 0.0;
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    }
  }
  write_mat(path, m);
}

void write_labels(const std::filesystem::path& path, const LabelImage& labels) {
  cv::Mat m(labels.height(), labels.width(), CV_16U);
  for (int y = 0; y < labels.height(); ++y) {
    for (int x = 0; x < labels.width(); ++x) {
      const auto v = labels(y, x);
      if (v < 0 || v > std::numeric_limits<std::uint16_t>::max()) {
        throw DataError("instance id does not fit a 16-bit label PNG: " + std::to_string(v));
      }
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(v);
    }
  }
  write_mat(path, m);
}

void write_overlay(const std::filesystem::path& path, const RawImage& img,
                   const LabelImage& labels) {
  static constexpr std::array<std::array<int, 3>, 8> kPalette{{{230, 25, 75},
                                                               {60, 180, 75},
                                                               {255, 225, 25},
                                                               {0, 130, 200},
                                                               {245, 130, 48},
                                                               {145, 30, 180},
                                                               {70, 240, 240},
                                                               {240, 50, 230}}};
  const RawImage z = normalize(img);
  cv::Mat m(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double gray = std::clamp(127.5 + 40.0 * z(y, x), 0.0, 255.0);
      std::array<double, 3> rgb{gray, gray, gray};
      if (const auto id = labels(y, x); id > 0) {
        const auto& c = kPalette[(id - 1) % kPalette.size()];
        for (int k = 0; k < 3; ++k) rgb[k] = 0.5 * gray + 0.5 * c[k];
      }
      m.at<cv::Vec3b>(y, x) = cv::Vec3b(static_cast<std::uint8_t>(rgb[2]),
                                        static_cast<std::uint8_t>(rgb[1]),
                                        static_cast<std::uint8_t>(rgb[0]));
    }
  }
  write_mat(path, m);
}

}  // namespace fcrseg
