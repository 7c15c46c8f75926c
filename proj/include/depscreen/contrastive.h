// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_CONTRASTIVE_H_
#define DEPSCREEN_CONTRASTIVE_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "depscreen/tape.h"

namespace depscreen {

inline constexpr int kNumClasses = 4;

bool is_valid_label(int label);
// Throws ValidationError unless 0 <= label < kNumClasses.
void require_valid_label(int label);

// Euclidean distance between two embeddings of equal dimension.
double pairwise_distance(std::span<const double> a, std::span<const double> b);

// 0 when the labels agree, 1 otherwise.
int class_indicator(int label_a, int label_b);

// L = 1/2 (1-c) D^2 + 1/2 c max(0, m - D)^2. The hinge term only applies to
// cross-class pairs (c = 1), so same-class pairs are pulled together and
// cross-class pairs are pushed out to the margin.
double contrastive_loss(std::span<const double> a, std::span<const double> b,
                        int indicator, double margin);

// Same loss on a tape, for 1 x d embeddings.
Var contrastive_loss(Tape& tape, Var a, Var b, int indicator, double margin);

struct Pair {
  std::size_t left = 0;
  std::size_t right = 0;
  int indicator = 0;

  friend bool operator==(const Pair&, const Pair&) = default;
};

// Balanced pair sampling over labeled items: ceil(n/2) same-class pairs
// (class chosen uniformly among classes with two or more members, items
// distinct) and floor(n/2) cross-class pairs (unordered class pair chosen
// uniformly among present classes). Deterministic for a given seed.
std::vector<Pair> sample_pairs(std::span<const int> labels, std::size_t count,
                               std::uint64_t seed);

}  // namespace depscreen

#endif  // DEPSCREEN_CONTRASTIVE_H_
