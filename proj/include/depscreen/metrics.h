// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_METRICS_H_
#define DEPSCREEN_METRICS_H_

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "depscreen/contrastive.h"
#include "depscreen/corpus.h"

namespace depscreen {

struct BinaryConfusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const BinaryConfusion&, const BinaryConfusion&) = default;
};

struct RatePair {
  double tpr = 0.0;
  double fpr = 0.0;
};

// TPR = TP / (TP + FN), FPR = FP / (FP + TN); both denominators must be > 0.
RatePair tpr_fpr(const BinaryConfusion& cm);

struct RocPoint {
  double threshold = 0.0;  // predict positive when score >= threshold
  double fpr = 0.0;
  double tpr = 0.0;
};

// Starts at (0,0) with threshold +inf and ends at (1,1).
struct RocCurve {
  std::vector<RocPoint> points;
};

// Sweeps the unique scores in descending order. With `max_thresholds`, an
// evenly spaced subset of the unique scores (always including the lowest)
// is used instead. Labels are 0/1 and both must occur.
RocCurve roc_curve(std::span<const double> scores, std::span<const int> labels,
                   std::optional<std::size_t> max_thresholds = {});

// Trapezoidal area; throws on a curve that is not monotone from (0,0) to (1,1).
double auc(const RocCurve& curve);

struct AccuracyInterval {
  double accuracy_pct = 0.0;
  double half_width_pct = 0.0;
};

// Wald normal-approximation interval: 100 z sqrt(p (1 - p) / n).
AccuracyInterval accuracy_ci(std::size_t correct, std::size_t total, double level = 0.95);

// Two-sided standard normal quantile for the given confidence level.
double normal_z(double level);

// max(best similarity of classes 1..3) - best similarity of class 0.
double severity_score(const Prediction& prediction);

// 1 for any depression (labels 1-3), 0 otherwise.
inline int depressed(int label) { return label >= 1 ? 1 : 0; }

struct LabeledPrediction {
  std::string session_id;
  int label = 0;  // reference label
  Prediction prediction;
};

struct EvaluationReport {
  std::size_t total = 0;
  std::size_t correct = 0;  // abstentions count as incorrect
  std::size_t abstained = 0;
  AccuracyInterval accuracy;
  // confusion[true][predicted]; abstentions tallied separately per true class.
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> confusion{};
  std::array<std::size_t, kNumClasses> abstained_by_class{};
  BinaryConfusion binary;  // over non-abstained predictions
  RocCurve roc;
  double auc = 0.0;
};

EvaluationReport evaluate(std::span<const LabeledPrediction> predictions, double level = 0.95);

// `threshold,fpr,tpr` rows followed by a `# auc=<value>` line.
void write_roc_csv(std::ostream& out, const RocCurve& curve, double auc_value);
std::string evaluation_to_json(const EvaluationReport& report);
// Multi-line human summary: accuracy +/- CI, AUC and the confusion matrix.
std::string evaluation_summary(const EvaluationReport& report);

}  // namespace depscreen

#endif  // DEPSCREEN_METRICS_H_
