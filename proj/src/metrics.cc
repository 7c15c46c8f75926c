// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/metrics.h"

#include <algorithm>
#include <boost/math/distributions/normal.hpp>
#include <cmath>
#include <limits>
#include <nlohmann/json.hpp>
#include <numeric>
#include <ostream>
#include <sstream>

#include "depscreen/errors.h"
#include "depscreen/format.h"

namespace depscreen {

RatePair tpr_fpr(const BinaryConfusion& cm) {
  if (cm.tp + cm.fn == 0) throw ValidationError("TPR undefined: no positive samples");
  if (cm.fp + cm.tn == 0) throw ValidationError("FPR undefined: no negative samples");
  return {static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn),
          static_cast<double>(cm.fp) / static_cast<double>(cm.fp + cm.tn)};
}

RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels,
                   std::optional<std::size_t> max_thresholds) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1) throw ValidationError("ROC labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw NumericError("ROC scores must be finite");
    positives += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t negatives = scores.size() - positives;
  if (positives == 0 || negatives == 0) {
    throw ValidationError("ROC needs both positive and negative samples");
  }
  if (max_thresholds && *max_thresholds == 0) throw ValidationError("max_thresholds must be positive");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // Cumulative counts at each distinct score, descending.
  struct Step {
    double score;
    std::size_t tp;
    std::size_t fp;
  };
  std::vector<Step> steps;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const std::size_t idx = order[i];
    (labels[idx] == 1 ? tp : fp) += 1;
    if (i + 1 == order.size() || scores[order[i + 1]] != scores[idx]) {
      steps.push_back({scores[idx], tp, fp});
    }
  }
  if (max_thresholds && steps.size() > *max_thresholds) {
    std::vector<Step> kept;
    const std::size_t n = steps.size();
    const std::size_t k = *max_thresholds;
    for (std::size_t j = 1; j <= k; ++j) kept.push_back(steps[j * n / k - 1]);
    steps = std::move(kept);
  }

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  for (const Step& s : steps) {
    curve.points.push_back({s.score, static_cast<double>(s.fp) / static_cast<double>(negatives),
                            static_cast<double>(s.tp) / static_cast<double>(positives)});
  }
  return curve;
}

double auc(const RocCurve& curve) {
  const auto& p = curve.points;
  if (p.size() < 2) throw ValidationError("ROC curve needs at least two points");
  if (p.front().fpr != 0.0 || p.front().tpr != 0.0 || p.back().fpr != 1.0 ||
      p.back().tpr != 1.0) {
    throw ValidationError("ROC curve must run from (0,0) to (1,1)");
  }
  double area = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i].fpr < p[i - 1].fpr || p[i].tpr < p[i - 1].tpr) {
      throw ValidationError("ROC curve is not monotone");
    }
    area += (p[i].fpr - p[i - 1].fpr) * (p[i].tpr + p[i - 1].tpr) * 0.5;
  }
  return area;
}

double normal_z(double level) {
  if (!(level > 0.0 && level < 1.0)) throw ValidationError("confidence level must be in (0, 1)");
  const boost::math::normal_distribution<double> standard;
  return boost::math::quantile(standard, 1.0 - (1.0 - level) / 2.0);
}

AccuracyInterval accuracy_ci(std::size_t correct, std::size_t total, double level) {
  if (total == 0) throw ValidationError("accuracy needs at least one sample");
  if (correct > total) throw ValidationError("correct count exceeds total");
  const double n = static_cast<double>(total);
  const double p = static_cast<double>(correct) / n;
  return {100.0 * p, 100.0 * normal_z(level) * std::sqrt(p * (1.0 - p) / n)};
}

double severity_score(const Prediction& prediction) {
  const auto& s = prediction.class_similarity;
  for (double v : s) {
    if (!std::isfinite(v)) throw ValidationError("prediction lacks class similarities");
  }
  return std::max({s[1], s[2], s[3]}) - s[0];
}

EvaluationReport evaluate(std::span<const LabeledPrediction> predictions, double level) {
  if (predictions.empty()) throw ValidationError("evaluation set is empty");
  EvaluationReport r;
  r.total = predictions.size();
  std::vector<double> scores;
  std::vector<int> binary;
  for (const auto& lp : predictions) {
    require_valid_label(lp.label);
    const auto truth = static_cast<std::size_t>(lp.label);
    scores.push_back(severity_score(lp.prediction));
    binary.push_back(depressed(lp.label));
    if (lp.prediction.uncertain()) {
      ++r.abstained;
      ++r.abstained_by_class[truth];
      continue;
    }
    const int predicted = *lp.prediction.label;
    ++r.confusion[truth][static_cast<std::size_t>(predicted)];
    if (predicted == lp.label) ++r.correct;
    const bool pos = depressed(lp.label) == 1;
    const bool pred_pos = depressed(predicted) == 1;
    if (pos && pred_pos) ++r.binary.tp;
    if (pos && !pred_pos) ++r.binary.fn;
    if (!pos && pred_pos) ++r.binary.fp;
    if (!pos && !pred_pos) ++r.binary.tn;
  }
  r.accuracy = accuracy_ci(r.correct, r.total, level);
  const bool both = std::count(binary.begin(), binary.end(), 1) > 0 &&
                    std::count(binary.begin(), binary.end(), 0) > 0;
  if (both) {
    r.roc = roc_curve(scores, binary);
    r.auc = auc(r.roc);
  } else {
    r.auc = std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve, double auc_value) {
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    out << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << ','
        << format_double(p.fpr) << ',' << format_double(p.tpr) << '\n';
  }
  out << "# auc=" << format_double(auc_value) << '\n';
}

std::string evaluation_to_json(const EvaluationReport& r) {
  nlohmann::json roc = nlohmann::json::array();
  for (const auto& p : r.roc.points) {
    roc.push_back({{"threshold", std::isinf(p.threshold) ? nlohmann::json("inf")
                                                         : nlohmann::json(p.threshold)},
                   {"fpr", p.fpr},
                   {"tpr", p.tpr}});
  }
  const nlohmann::json j{
      {"total", r.total},
      {"correct", r.correct},
      {"abstained", r.abstained},
      {"accuracy_pct", r.accuracy.accuracy_pct},
      {"ci_half_width_pct", r.accuracy.half_width_pct},
      {"confusion", r.confusion},
      {"abstained_by_class", r.abstained_by_class},
      {"binary", {{"tp", r.binary.tp}, {"fp", r.binary.fp}, {"tn", r.binary.tn}, {"fn", r.binary.fn}}},
      {"roc", roc},
      {"auc", std::isnan(r.auc) ? nlohmann::json(nullptr) : nlohmann::json(r.auc)}};
  return j.dump();
}

std::string evaluation_summary(const EvaluationReport& r) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(2);
  out << "sessions: " << r.total << " (abstained " << r.abstained << ")\n";
  out << "accuracy: " << r.accuracy.accuracy_pct << "% +/- " << r.accuracy.half_width_pct
      << "%\n";
  out.precision(4);
  out << "auc: " << r.auc << "\n";
  out << "confusion (rows true 0-3, columns predicted 0-3, then abstained):\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    for (std::size_t p = 0; p < kNumClasses; ++p) out << (p ? " " : "  ") << r.confusion[t][p];
    out << " | " << r.abstained_by_class[t] << "\n";
  }
  return out.str();
}

}  // namespace depscreen
