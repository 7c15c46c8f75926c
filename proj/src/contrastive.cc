// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/contrastive.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "depscreen/errors.h"
#include "depscreen/random.h"

namespace depscreen {

bool is_valid_label(int label) { return label >= 0 && label < kNumClasses; }

void require_valid_label(int label) {
  if (!is_valid_label(label)) {
    throw ValidationError("label must be in 0..3, got " + std::to_string(label));
  }
}

double pairwise_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("embedding dimensions differ: " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(total);
}

int class_indicator(int label_a, int label_b) {
  require_valid_label(label_a);
  require_valid_label(label_b);
  return label_a == label_b ? 0 : 1;
}

namespace {

void check_loss_args(int indicator, double margin) {
  if (indicator != 0 && indicator != 1) {
    throw ValidationError("pair indicator must be 0 or 1");
  }
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw ValidationError("margin must be positive");
  }
}

}  // namespace

double contrastive_loss(std::span<const double> a, std::span<const double> b,
                        int indicator, double margin) {
  check_loss_args(indicator, margin);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!std::isfinite(a[i])) throw NumericError("non-finite embedding");
  }
  for (std::size_t i = 0; i < b.size(); ++i) {
    if (!std::isfinite(b[i])) throw NumericError("non-finite embedding");
  }
  const double d = pairwise_distance(a, b);
  if (indicator == 0) return 0.5 * d * d;
  const double hinge = std::max(0.0, margin - d);
  return 0.5 * hinge * hinge;
}

Var contrastive_loss(Tape& tape, Var a, Var b, int indicator, double margin) {
  check_loss_args(indicator, margin);
  Var diff = tape.subtract(a, b);
  if (indicator == 0) {
    // D^2 directly, so the gradient is defined at D = 0.
    return tape.scale(tape.sum(tape.multiply(diff, diff)), 0.5);
  }
  Var hinge = tape.relu(tape.shift(tape.scale(tape.l2_norm(diff), -1.0), margin));
  return tape.scale(tape.multiply(hinge, hinge), 0.5);
}

std::vector<Pair> sample_pairs(std::span<const int> labels, std::size_t count,
                               std::uint64_t seed) {
  if (labels.size() < 2) throw ValidationError("pair sampling needs >= 2 items");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require_valid_label(labels[i]);
    by_class[labels[i]].push_back(i);
  }
  if (by_class.size() < 2) {
    throw ValidationError("pair sampling needs >= 2 classes, dataset has one");
  }

  std::vector<int> classes;
  std::vector<int> pairable;  // classes with >= 2 members
  for (const auto& [label, members] : by_class) {
    classes.push_back(label);
    if (members.size() >= 2) pairable.push_back(label);
  }
  std::vector<std::pair<int, int>> class_pairs;
  for (std::size_t i = 0; i < classes.size(); ++i)
    for (std::size_t j = i + 1; j < classes.size(); ++j)
      class_pairs.emplace_back(classes[i], classes[j]);

  Rng rng(seed);
  auto pick = [&](int label) {
    const auto& members = by_class.at(label);
    return members[rng.below(members.size())];
  };

  std::vector<Pair> pairs;
  pairs.reserve(count);
  const std::size_t same = (count + 1) / 2;
  for (std::size_t k = 0; k < count; ++k) {
    if (k < same && !pairable.empty()) {
      const auto& members = by_class.at(pairable[rng.below(pairable.size())]);
      const std::size_t a = rng.below(members.size());
      std::size_t b = rng.below(members.size() - 1);
      if (b >= a) ++b;
      pairs.push_back({members[a], members[b], 0});
    } else {
      // Falls back to cross-class pairs when no class has two members.
      const auto [ca, cb] = class_pairs[rng.below(class_pairs.size())];
      const std::size_t a = pick(ca);
      const std::size_t b = pick(cb);
      pairs.push_back({a, b, 1});
    }
  }
  // Interleave so that every mini-batch sees both kinds.
  std::vector<Pair> mixed;
  mixed.reserve(count);
  std::size_t i = 0;
  std::size_t j = same < count ? same : count;
  while (mixed.size() < count) {
    if (i < same && i < count) mixed.push_back(pairs[i++]);
    if (j < count) mixed.push_back(pairs[j++]);
  }
  return mixed;
}

}  // namespace depscreen
