// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/model.h"

#include <cmath>
#include <string>

#include "depscreen/errors.h"

namespace depscreen {

void TrainConfig::validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) {
    throw ValidationError("margin must be positive");
  }
  if (margin > 2.0) {
    throw ValidationError("margin above 2 is unreachable for unit-norm embeddings");
  }
  if (batch_size == 0) throw ValidationError("batch size must be positive");
  if (!(adam.learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
}

void ModelConfig::validate() const {
  visual.validate();
  audio.validate();
  if (text_dim == 0 || fusion.hidden_dim == 0 || fusion.output_dim == 0) {
    throw ValidationError("fusion dimensions must be positive");
  }
  if (!(preprocess.window_s > 0.0) || preprocess.min_tail_s < 0.0 ||
      preprocess.max_steps == 0) {
    throw ValidationError("invalid preprocessing configuration");
  }
  pretrain.validate();
  fusion_train.validate();
}

ParameterSet init_fusion(const ModelConfig& config, Rng& rng) {
  const std::size_t in =
      config.visual.embedding_dim + config.audio.embedding_dim + config.text_dim;
  ParameterSet params;
  params.set("hidden.w", glorot_uniform(in, config.fusion.hidden_dim, rng));
  params.set("hidden.b", Tensor({1, config.fusion.hidden_dim}));
  params.set("out.w",
             glorot_uniform(config.fusion.hidden_dim, config.fusion.output_dim, rng));
  params.set("out.b", Tensor({1, config.fusion.output_dim}));
  return params;
}

ModelBundle init_bundle(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  ModelBundle bundle;
  bundle.config = config;
  bundle.metadata.seed = seed;
  Rng visual_rng(derive_seed(seed, 1));
  Rng audio_rng(derive_seed(seed, 2));
  Rng fusion_rng(derive_seed(seed, 3));
  bundle.params.merge(init_encoder(config.visual, visual_rng), kVisualPrefix);
  bundle.params.merge(init_encoder(config.audio, audio_rng), kAudioPrefix);
  bundle.params.merge(init_fusion(config, fusion_rng), kFusionPrefix);
  return bundle;
}

Var modality_embedding(Tape& tape, const BoundParameters& params,
                       const std::string& prefix, const EncoderConfig& config,
                       const std::vector<Tensor>& segments) {
  if (segments.empty()) throw ValidationError("modality has no segments");
  Var total = encode_segment(tape, params, prefix, config, segments.front());
  if (segments.size() == 1) return total;
  for (std::size_t i = 1; i < segments.size(); ++i) {
    total = tape.add(total, encode_segment(tape, params, prefix, config, segments[i]));
  }
  return tape.normalize(total);
}

namespace {

void check_text(const ModelConfig& config, const SessionInput& session) {
  if (session.text.size() != config.text_dim) {
    throw ShapeError("text embedding dimension " + std::to_string(session.text.size()) +
                     " does not match model text_dim " +
                     std::to_string(config.text_dim));
  }
}

Var fuse(Tape& tape, const BoundParameters& params, Var visual, Var audio, Var text) {
  const Var parts[] = {visual, audio, text};
  Var joined = tape.concat(parts);
  Var hidden = tape.tanh(tape.add(tape.matmul(joined, params["fusion/hidden.w"]),
                                  params["fusion/hidden.b"]));
  Var out = tape.add(tape.matmul(hidden, params["fusion/out.w"]), params["fusion/out.b"]);
  return tape.normalize(out);
}

}  // namespace

Var fused_embedding(Tape& tape, const BoundParameters& params,
                    const ModelConfig& config, const SessionInput& session) {
  if (!session.complete()) {
    throw ValidationError("session " + session.id + " is missing a modality");
  }
  check_text(config, session);
  Var visual = modality_embedding(tape, params, kVisualPrefix, config.visual, session.visual);
  Var audio = modality_embedding(tape, params, kAudioPrefix, config.audio, session.audio);
  Var text = tape.normalize(tape.constant(Tensor::row(session.text)));
  return fuse(tape, params, visual, audio, text);
}

SessionEmbedding embed_session(const ModelBundle& bundle, const SessionInput& session) {
  if (!session.complete()) {
    throw ValidationError("session " + session.id + " is missing a modality");
  }
  const ModelConfig& config = bundle.config;
  check_text(config, session);
  Tape tape;
  BoundParameters params(tape, bundle.params, false);
  Var visual = modality_embedding(tape, params, kVisualPrefix, config.visual, session.visual);
  Var audio = modality_embedding(tape, params, kAudioPrefix, config.audio, session.audio);
  Var text = tape.normalize(tape.constant(Tensor::row(session.text)));
  Var fused = fuse(tape, params, visual, audio, text);
  return {tape.value(visual).values(), tape.value(audio).values(),
          tape.value(text).values(), tape.value(fused).values()};
}

}  // namespace depscreen
