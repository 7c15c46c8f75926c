// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_MODEL_H_
#define DEPSCREEN_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "depscreen/encoder.h"
#include "depscreen/optimizer.h"
#include "depscreen/params.h"
#include "depscreen/tape.h"
#include "depscreen/tensor.h"

namespace depscreen {

// How raw feature streams become encoder input.
struct PreprocessConfig {
  double window_s = 300.0;
  double min_tail_s = 30.0;
  std::size_t max_steps = 120;

  friend bool operator==(const PreprocessConfig&, const PreprocessConfig&) = default;
};

struct TrainConfig {
  double margin = 1.0;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::size_t pairs_per_epoch = 0;  // 0: four times the dataset size
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
  friend bool operator==(const TrainConfig& a, const TrainConfig& b) {
    return a.margin == b.margin && a.epochs == b.epochs &&
           a.batch_size == b.batch_size && a.pairs_per_epoch == b.pairs_per_epoch &&
           a.seed == b.seed && a.adam.learning_rate == b.adam.learning_rate &&
           a.adam.beta1 == b.adam.beta1 && a.adam.beta2 == b.adam.beta2 &&
           a.adam.epsilon == b.adam.epsilon;
  }
};

// concat(visual, audio, text) -> tanh hidden layer -> output -> L2 norm.
struct FusionConfig {
  std::size_t hidden_dim = 128;
  std::size_t output_dim = 64;

  friend bool operator==(const FusionConfig&, const FusionConfig&) = default;
};

struct ModelConfig {
  EncoderConfig visual;
  EncoderConfig audio;
  std::size_t text_dim = 64;
  FusionConfig fusion;
  PreprocessConfig preprocess;
  TrainConfig pretrain;
  TrainConfig fusion_train;

  void validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainingMetadata {
  std::uint64_t seed = 0;
  std::size_t pretrain_epochs = 0;
  std::size_t fusion_epochs = 0;
  double final_loss = 0.0;

  friend bool operator==(const TrainingMetadata&, const TrainingMetadata&) = default;
};

// The deployable unit: both modality encoders and the fusion network.
// Parameter names carry a "visual/", "audio/" or "fusion/" prefix.
struct ModelBundle {
  std::uint64_t version = 1;
  ModelConfig config;
  ParameterSet params;
  TrainingMetadata metadata;

  friend bool operator==(const ModelBundle&, const ModelBundle&) = default;
};

inline constexpr const char* kVisualPrefix = "visual/";
inline constexpr const char* kAudioPrefix = "audio/";
inline constexpr const char* kFusionPrefix = "fusion/";

// Encoder input for one session: pooled segments per modality plus the
// session's text vector.
struct SessionInput {
  std::string id;
  std::vector<Tensor> visual;
  std::vector<Tensor> audio;
  std::vector<double> text;
  std::optional<int> label;

  bool complete() const { return !visual.empty() && !audio.empty() && !text.empty(); }
};

struct SessionEmbedding {
  std::vector<double> visual;
  std::vector<double> audio;
  std::vector<double> text;
  std::vector<double> fused;
};

ParameterSet init_fusion(const ModelConfig& config, Rng& rng);
ModelBundle init_bundle(const ModelConfig& config, std::uint64_t seed);

// Unit-norm mean of the segment embeddings of one modality.
Var modality_embedding(Tape& tape, const BoundParameters& params,
                       const std::string& prefix, const EncoderConfig& config,
                       const std::vector<Tensor>& segments);

// Fused unit-norm 1 x output_dim embedding recorded on `tape`.
Var fused_embedding(Tape& tape, const BoundParameters& params,
                    const ModelConfig& config, const SessionInput& session);

// Inference with a frozen bundle. Safe to call concurrently.
SessionEmbedding embed_session(const ModelBundle& bundle, const SessionInput& session);

}  // namespace depscreen

#endif  // DEPSCREEN_MODEL_H_
