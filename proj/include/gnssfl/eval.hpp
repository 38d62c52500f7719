#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "gnssfl/domain.hpp"
#include "gnssfl/errors.hpp"
#include "gnssfl/features.hpp"

namespace gnssfl {

struct RocPoint {
  double fpr = 0.0;  // R_FP
  double tpr = 0.0;  // R_TP
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// Points run from (0,0) to (1,1); thresholds[k] is the score at or above
// which samples are flagged to reach points[k] (+inf for the origin).
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
};

struct AucScore {
  double value = 0.0;
};

class SingleClassError : public DataError {
 public:
  using DataError::DataError;
};

inline RocCurve roc(std::span<const double> scores, const std::vector<bool>& truth) {
  require(scores.size() == truth.size(), "roc: scores and truth must have equal length");
  const auto positives = static_cast<std::size_t>(std::count(truth.begin(), truth.end(), true));
  const std::size_t negatives = truth.size() - positives;
  if (positives == 0 || negatives == 0)
    throw SingleClassError("roc: ground truth contains a single class (" + std::to_string(positives) + " positives, " +
                           std::to_string(negatives) + " negatives)");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve c;
  c.points.push_back({0.0, 0.0});
  c.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double thr = scores[order[i]];
    while (i < order.size() && scores[order[i]] == thr) {
      (truth[order[i]] ? tp : fp) += 1;
      ++i;
    }
    c.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                        static_cast<double>(tp) / static_cast<double>(positives)});
    c.thresholds.push_back(thr);
  }
  return c;
}

inline AucScore auc(const RocCurve& curve) {
  require(curve.points.size() >= 2, "auc: curve needs at least two points");
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return {area};
}

inline double auc_of(std::span<const double> scores, const std::vector<bool>& truth) {
  return auc(roc(scores, truth)).value;
}

// ROC CSV: header "threshold,fpr,tpr", one row per curve point.
inline void write_roc_csv(const RocCurve& c, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  out.precision(10);
  for (std::size_t k = 0; k < c.points.size(); ++k) {
    if (std::isinf(c.thresholds[k]))
      out << "inf";
    else
      out << c.thresholds[k];
    out << ',' << c.points[k].fpr << ',' << c.points[k].tpr << '\n';
  }
}

// Ground truth of a window: the attacked flag of its last timestep.
inline std::vector<bool> window_truth(std::span<const Trace> traces, const WindowSet& windows) {
  std::map<std::int64_t, const Trace*> by_id;
  for (const auto& t : traces) by_id[t.trace_id] = &t;
  std::vector<bool> out(windows.size());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const auto it = by_id.find(windows.trace_ids[i]);
    if (it == by_id.end()) throw DataError("window refers to unknown trace " + std::to_string(windows.trace_ids[i]));
    out[i] = it->second->samples.at(windows.last_sample[i]).attacked;
  }
  return out;
}

struct EvalResult {
  RocCurve curve;
  AucScore auc;
};

// Scores a test split; `split` names it in the single-class error.
template <typename ScoreFn>
EvalResult evaluate_model(ScoreFn&& score, const WindowSet& test, const std::vector<bool>& truth,
                          const std::string& split, const std::filesystem::path& roc_csv = {}) {
  require(truth.size() == test.size(), "evaluate_model: truth must align with test windows");
  const auto positives = std::count(truth.begin(), truth.end(), true);
  if (positives == 0 || positives == static_cast<std::ptrdiff_t>(truth.size()))
    throw SingleClassError("test split '" + split + "' has a single ground-truth class; ROC/AUC undefined");
  const std::vector<double> scores = score(test);
  EvalResult r;
  r.curve = roc(scores, truth);
  r.auc = auc(r.curve);
  if (!roc_csv.empty()) write_roc_csv(r.curve, roc_csv);
  return r;
}

}  // namespace gnssfl
