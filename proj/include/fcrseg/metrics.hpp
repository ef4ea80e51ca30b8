#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fcrseg/types.hpp"

namespace fcrseg {

/// Instances are the distinct nonzero ids of each map; ids need not be contiguous.
struct MatchedPair {
  std::int32_t gt;
  std::int32_t pred;
  double iou;
};

struct Matching {
  std::vector<MatchedPair> pairs;
  int n_gt = 0;
  int n_pred = 0;

  int true_positives() const { return static_cast<int>(pairs.size()); }
  int false_positives() const { return n_pred - true_positives(); }
  int false_negatives() const { return n_gt - true_positives(); }
};

/// One-to-one matching of pairs with IoU above the threshold, greedy by
/// descending IoU. Unique for thresholds >= 0.5.
Matching match_instances(const LabelImage& pred, const LabelImage& gt, double iou_threshold = 0.5);

/// 2TP / (2TP + FP + FN); 1 when both maps are empty.
double f1_score(const Matching& m);

/// Sum of matched IoU over TP + FP/2 + FN/2 at IoU > 0.5; 1 when both are empty.
double panoptic_quality(const LabelImage& pred, const LabelImage& gt);
double panoptic_quality(const Matching& m);

/// Aggregated Jaccard Index: each gt object takes its best-IoU prediction,
/// intersections and unions are summed, unused predictions add their area to
/// the union. 1 when both are empty.
double aggregated_jaccard(const LabelImage& pred, const LabelImage& gt);

/// Object-wise Dice against the maximal-overlap counterpart, averaged over gt
/// objects and over predicted objects, then the two directions averaged.
/// Objects with no overlap score 0. 1 when both are empty.
double dice2(const LabelImage& pred, const LabelImage& gt);

struct ImageScores {
  std::string image;
  double dice2 = 0.0;
  double aji = 0.0;
  double f1 = 0.0;
  double pq = 0.0;
};

struct EvalReport {
  std::vector<ImageScores> per_image;
  ImageScores means{"mean"};
  int matched = 0;
  int missed = 0;
  int spurious = 0;

  void add(const std::string& image, const LabelImage& pred, const LabelImage& gt);
  /// Recomputes `means` from `per_image`.
  void finalize();
};

/// CSV with header `image,dice2,aji,f1,pq`, one row per image and a final
/// `mean` row; values to four decimals.
void write_report_csv(const std::filesystem::path& path, const EvalReport& report);
EvalReport read_report_csv(const std::filesystem::path& path);

}  // namespace fcrseg
