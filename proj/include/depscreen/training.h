// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_TRAINING_H_
#define DEPSCREEN_TRAINING_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "depscreen/encoder.h"
#include "depscreen/model.h"
#include "depscreen/params.h"
#include "depscreen/tensor.h"

namespace depscreen {

struct LabeledSegment {
  Tensor frames;  // T x input_dim
  int label = 0;
};

// Called after each epoch with (epoch index, mean loss).
using EpochCallback = std::function<void(std::size_t, double)>;

struct PretrainResult {
  ParameterSet params;
  std::vector<double> loss_history;  // mean pair loss per epoch
  std::vector<std::string> warnings;
};

// Siamese contrastive training of one modality encoder. Pairs are resampled
// every epoch from a seed derived from config.seed and the epoch index.
// `initial` continues from existing parameters; otherwise they are drawn
// from config.seed.
PretrainResult pretrain_modality(std::span<const LabeledSegment> segments,
                                 const TrainConfig& config,
                                 const EncoderConfig& encoder,
                                 const ParameterSet* initial = nullptr,
                                 const EpochCallback& on_epoch = {});

struct FusionResult {
  ModelBundle bundle;
  std::vector<double> loss_history;
  std::size_t excluded_sessions = 0;  // sessions missing a modality or label
  std::vector<std::string> warnings;
};

// End-to-end training of encoders and fusion network on session pairs with
// the same contrastive loss. The returned bundle's version is one above
// `start`.
FusionResult train_fusion(const ModelBundle& start,
                          std::span<const SessionInput> sessions,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch = {});

// Initializes a bundle and pretrains both modality encoders on the segments
// of the labeled, complete sessions.
struct PretrainBundleResult {
  ModelBundle bundle;
  std::vector<double> visual_history;
  std::vector<double> audio_history;
  std::vector<std::string> warnings;
};
PretrainBundleResult pretrain_bundle(const ModelConfig& config,
                                     std::span<const SessionInput> sessions,
                                     std::uint64_t seed,
                                     const EpochCallback& on_epoch = {});

}  // namespace depscreen

#endif  // DEPSCREEN_TRAINING_H_
