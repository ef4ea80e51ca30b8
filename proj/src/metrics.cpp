#include "fcrseg/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

namespace fcrseg {
namespace {

// Areas and pairwise intersections of the instances of two label maps.
struct OverlapTable {
  std::vector<std::int32_t> gt_ids;
  std::vector<std::int32_t> pred_ids;
  std::vector<std::size_t> gt_area;
  std::vector<std::size_t> pred_area;
  /// inter[g * pred_ids.size() + p]
  std::vector<std::size_t> inter;

  std::size_t intersection(std::size_t g, std::size_t p) const {
    return inter[g * pred_ids.size() + p];
  }
  std::size_t union_of(std::size_t g, std::size_t p) const {
    return gt_area[g] + pred_area[p] - intersection(g, p);
  }
  double iou(std::size_t g, std::size_t p) const {
    const std::size_t u = union_of(g, p);
    return u == 0 ? 0.0 : static_cast<double>(intersection(g, p)) / static_cast<double>(u);
  }
};

std::unordered_map<std::int32_t, std::size_t> index_ids(const LabelImage& labels,
                                                        std::vector<std::int32_t>& ids) {
  std::vector<std::int32_t> present;
  for (auto v : labels.pixels()) {
    if (v != 0) present.push_back(v);
  }
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  ids = present;
  std::unordered_map<std::int32_t, std::size_t> index;
  for (std::size_t i = 0; i < ids.size(); ++i) index[ids[i]] = i;
  return index;
}

OverlapTable overlaps(const LabelImage& pred, const LabelImage& gt) {
  if (!pred.same_shape(gt)) throw ShapeError("prediction and ground truth shapes differ");
  OverlapTable t;
  const auto gi = index_ids(gt, t.gt_ids);
  const auto pi = index_ids(pred, t.pred_ids);
  t.gt_area.assign(t.gt_ids.size(), 0);
  t.pred_area.assign(t.pred_ids.size(), 0);
  t.inter.assign(t.gt_ids.size() * t.pred_ids.size(), 0);
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const auto g = gt[i];
    const auto p = pred[i];
    if (g != 0) ++t.gt_area[gi.at(g)];
    if (p != 0) ++t.pred_area[pi.at(p)];
    if (g != 0 && p != 0) ++t.inter[gi.at(g) * t.pred_ids.size() + pi.at(p)];
  }
  return t;
}

Matching match(const OverlapTable& t, double threshold) {
  struct Candidate {
    double iou;
    std::size_t g, p;
  };
  std::vector<Candidate> cands;
  for (std::size_t g = 0; g < t.gt_ids.size(); ++g) {
    for (std::size_t p = 0; p < t.pred_ids.size(); ++p) {
      if (t.intersection(g, p) == 0) continue;
      const double iou = t.iou(g, p);
      if (iou > threshold) cands.push_back({iou, g, p});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.g != b.g) return a.g < b.g;
    return a.p < b.p;
  });
  Matching m;
  m.n_gt = static_cast<int>(t.gt_ids.size());
  m.n_pred = static_cast<int>(t.pred_ids.size());
  std::vector<bool> gt_used(t.gt_ids.size(), false);
  std::vector<bool> pred_used(t.pred_ids.size(), false);
  for (const auto& c : cands) {
    if (gt_used[c.g] || pred_used[c.p]) continue;
    gt_used[c.g] = pred_used[c.p] = true;
    m.pairs.push_back({t.gt_ids[c.g], t.pred_ids[c.p], c.iou});
  }
  return m;
}

// Mean over objects of `from` of Dice with the counterpart of largest overlap.
double directional_dice(const OverlapTable& t, bool gt_side) {
  const std::size_t n_from = gt_side ? t.gt_ids.size() : t.pred_ids.size();
  const std::size_t n_to = gt_side ? t.pred_ids.size() : t.gt_ids.size();
  if (n_from == 0) return 0.0;
  double total = 0.0;
  for (std::size_t a = 0; a < n_from; ++a) {
    std::size_t best_inter = 0;
    std::size_t best = 0;
    for (std::size_t b = 0; b < n_to; ++b) {
      const std::size_t i = gt_side ? t.intersection(a, b) : t.intersection(b, a);
      if (i > best_inter) {
        best_inter = i;
        best = b;
      }
    }
    if (best_inter == 0) continue;
    const std::size_t area_a = gt_side ? t.gt_area[a] : t.pred_area[a];
    const std::size_t area_b = gt_side ? t.pred_area[best] : t.gt_area[best];
    total += 2.0 * static_cast<double>(best_inter) / static_cast<double>(area_a + area_b);
  }
  return total / static_cast<double>(n_from);
}

}  // namespace

Matching match_instances(const LabelImage& pred, const LabelImage& gt, double iou_threshold) {
  if (!(iou_threshold > 0.0 && iou_threshold < 1.0)) {
    throw ConfigError("iou_threshold must lie in (0, 1)");
  }
  return match(overlaps(pred, gt), iou_threshold);
}

double f1_score(const Matching& m) {
  const int tp = m.true_positives();
  const int denom = 2 * tp + m.false_positives() + m.false_negatives();
  return denom == 0 ? 1.0 : 2.0 * tp / denom;
}

double panoptic_quality(const Matching& m) {
  const double denom = m.true_positives() + 0.5 * m.false_positives() + 0.5 * m.false_negatives();
  if (denom == 0.0) return 1.0;
  double iou_sum = 0.0;
  for (const auto& p : m.pairs) iou_sum += p.iou;
  return iou_sum / denom;
}

double panoptic_quality(const LabelImage& pred, const LabelImage& gt) {
  return panoptic_quality(match_instances(pred, gt, 0.5));
}

double aggregated_jaccard(const LabelImage& pred, const LabelImage& gt) {
  const OverlapTable t = overlaps(pred, gt);
  if (t.gt_ids.empty() && t.pred_ids.empty()) return 1.0;
  std::size_t inter = 0;
  std::size_t uni = 0;
  std::vector<bool> used(t.pred_ids.size(), false);
  for (std::size_t g = 0; g < t.gt_ids.size(); ++g) {
    double best_iou = 0.0;
    std::size_t best = 0;
    for (std::size_t p = 0; p < t.pred_ids.size(); ++p) {
      const double iou = t.iou(g, p);
      if (iou > best_iou) {
        best_iou = iou;
        best = p;
      }
    }
    if (best_iou > 0.0) {
      inter += t.intersection(g, best);
      uni += t.union_of(g, best);
      used[best] = true;
    } else {
      uni += t.gt_area[g];
    }
  }
  for (std::size_t p = 0; p < t.pred_ids.size(); ++p) {
    if (!used[p]) uni += t.pred_area[p];
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

double dice2(const LabelImage& pred, const LabelImage& gt) {
  const OverlapTable t = overlaps(pred, gt);
  if (t.gt_ids.empty() && t.pred_ids.empty()) return 1.0;
  return 0.5 * (directional_dice(t, true) + directional_dice(t, false));
}

void EvalReport::add(const std::string& image, const LabelImage& pred, const LabelImage& gt) {
  const Matching m = match_instances(pred, gt, 0.5);
  ImageScores s;
  s.image = image;
  s.dice2 = fcrseg::dice2(pred, gt);
  s.aji = aggregated_jaccard(pred, gt);
  s.f1 = f1_score(m);
  s.pq = panoptic_quality(m);
  per_image.push_back(std::move(s));
  matched += m.true_positives();
  missed += m.false_negatives();
  spurious += m.false_positives();
  finalize();
}

void EvalReport::finalize() {
  means = ImageScores{"mean"};
  if (per_image.empty()) return;
  for (const auto& s : per_image) {
    means.dice2 += s.dice2;
    means.aji += s.aji;
    means.f1 += s.f1;
    means.pq += s.pq;
  }
  const double n = static_cast<double>(per_image.size());
  means.dice2 /= n;
  means.aji /= n;
  means.f1 /= n;
  means.pq /= n;
}

void write_report_csv(const std::filesystem::path& path, const EvalReport& report) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  auto row = [&](const ImageScores& s) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f,%.4f\n", s.dice2, s.aji, s.f1, s.pq);
    out << s.image << buf;
  };
  out << "image,dice2,aji,f1,pq\n";
  for (const auto& s : report.per_image) row(s);
  row(report.means);
}

EvalReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "image,dice2,aji,f1,pq") {
    throw DataError(path.string() + " is not an evaluation report");
  }
  EvalReport r;
  bool have_mean = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream fields(line);
    ImageScores s;
    if (!(fields >> s.image >> s.dice2 >> s.aji >> s.f1 >> s.pq)) {
      throw DataError("malformed report row in " + path.string());
    }
    if (s.image == "mean") {
      r.means = s;
      have_mean = true;
    } else {
      r.per_image.push_back(s);
    }
  }
  if (!have_mean) r.finalize();
  return r;
}

}  // namespace fcrseg
