// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/training.h"

#include <algorithm>
#include <map>
#include <string>

#include "depscreen/contrastive.h"
#include "depscreen/errors.h"
#include "depscreen/optimizer.h"
#include "depscreen/random.h"

namespace depscreen {
namespace {

using EmbedFn =
    std::function<Var(Tape&, const BoundParameters&, std::size_t item)>;

// Shared epoch/batch loop. Each batch records one tape; items used by several
// pairs in the batch are embedded once.
std::vector<double> run_contrastive(ParameterSet& params,
                                    std::span<const int> labels,
                                    const TrainConfig& config,
                                    const EmbedFn& embed,
                                    const EpochCallback& on_epoch) {
  std::vector<double> history;
  if (config.epochs == 0) return history;
  const std::size_t pairs_per_epoch =
      config.pairs_per_epoch ? config.pairs_per_epoch : 4 * labels.size();
  OptimizerState state;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<Pair> pairs =
        sample_pairs(labels, pairs_per_epoch, derive_seed(config.seed, 1000 + epoch));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < pairs.size(); start += config.batch_size) {
      const std::size_t stop = std::min(pairs.size(), start + config.batch_size);
      Tape tape;
      BoundParameters bound(tape, params, true);
      std::map<std::size_t, Var> cache;
      auto embedding = [&](std::size_t item) {
        auto it = cache.find(item);
        if (it != cache.end()) return it->second;
        Var v = embed(tape, bound, item);
        cache.emplace(item, v);
        return v;
      };
      Var total;
      for (std::size_t k = start; k < stop; ++k) {
        const Pair& p = pairs[k];
        Var loss = contrastive_loss(tape, embedding(p.left), embedding(p.right),
                                    p.indicator, config.margin);
        total = k == start ? loss : tape.add(total, loss);
      }
      const double batch_sum = tape.value(total).item();
      epoch_loss += batch_sum;
      Var mean = tape.scale(total, 1.0 / static_cast<double>(stop - start));
      adam_step(params, bound.gradients(tape.backward(mean)), state, config.adam);
    }
    history.push_back(epoch_loss / static_cast<double>(pairs.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

bool all_features_constant(std::span<const Tensor> frames) {
  if (frames.empty()) return false;
  const Tensor& first = frames.front();
  for (const Tensor& f : frames) {
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t c = 0; c < f.cols(); ++c)
        if (f.at(r, c) != first.at(0, c)) return false;
  }
  return true;
}

}  // namespace

PretrainResult pretrain_modality(std::span<const LabeledSegment> segments,
                                 const TrainConfig& config,
                                 const EncoderConfig& encoder,
                                 const ParameterSet* initial,
                                 const EpochCallback& on_epoch) {
  config.validate();
  encoder.validate();
  std::vector<int> labels;
  std::vector<Tensor> frames;
  for (const LabeledSegment& s : segments) {
    require_valid_label(s.label);
    if (s.frames.cols() != encoder.input_dim) {
      throw ShapeError("segment feature dimension " + std::to_string(s.frames.cols()) +
                       " does not match encoder input_dim " +
                       std::to_string(encoder.input_dim));
    }
    labels.push_back(s.label);
    frames.push_back(s.frames);
  }
  if (config.epochs > 0) {
    std::vector<int> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    if (std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      throw ValidationError("pretraining needs segments from >= 2 classes");
    }
  }

  PretrainResult result;
  if (initial) {
    result.params = *initial;
  } else {
    Rng rng(config.seed);
    result.params = init_encoder(encoder, rng);
  }
  if (all_features_constant(frames)) {
    result.warnings.push_back(
        "all segment features are constant; the encoder cannot separate classes");
  }
  result.loss_history = run_contrastive(
      result.params, labels, config,
      [&](Tape& tape, const BoundParameters& bound, std::size_t item) {
        return encode_segment(tape, bound, "", encoder, segments[item].frames);
      },
      on_epoch);
  return result;
}

FusionResult train_fusion(const ModelBundle& start,
                          std::span<const SessionInput> sessions,
                          const TrainConfig& config,
                          const EpochCallback& on_epoch) {
  config.validate();
  FusionResult result;
  std::vector<const SessionInput*> usable;
  std::vector<int> labels;
  for (const SessionInput& s : sessions) {
    if (!s.complete() || !s.label || !is_valid_label(*s.label) ||
        s.text.size() != start.config.text_dim) {
      ++result.excluded_sessions;
      continue;
    }
    usable.push_back(&s);
    labels.push_back(*s.label);
  }
  if (result.excluded_sessions > 0) {
    result.warnings.push_back(std::to_string(result.excluded_sessions) +
                              " session(s) excluded: missing modality or label");
  }
  if (config.epochs > 0) {
    std::vector<int> distinct = labels;
    std::sort(distinct.begin(), distinct.end());
    if (usable.size() < 2 ||
        std::unique(distinct.begin(), distinct.end()) - distinct.begin() < 2) {
      throw ValidationError("fusion training needs labeled sessions from >= 2 classes");
    }
  }

  result.bundle = start;
  result.bundle.version = start.version + 1;
  result.bundle.config.fusion_train = config;
  result.loss_history = run_contrastive(
      result.bundle.params, labels, config,
      [&](Tape& tape, const BoundParameters& bound, std::size_t item) {
        return fused_embedding(tape, bound, start.config, *usable[item]);
      },
      on_epoch);
  result.bundle.metadata.fusion_epochs = config.epochs;
  if (!result.loss_history.empty()) {
    result.bundle.metadata.final_loss = result.loss_history.back();
  }
  return result;
}

PretrainBundleResult pretrain_bundle(const ModelConfig& config,
                                     std::span<const SessionInput> sessions,
                                     std::uint64_t seed,
                                     const EpochCallback& on_epoch) {
  PretrainBundleResult result;
  result.bundle = init_bundle(config, seed);
  std::vector<LabeledSegment> visual;
  std::vector<LabeledSegment> audio;
  for (const SessionInput& s : sessions) {
    if (!s.complete() || !s.label || !is_valid_label(*s.label)) continue;
    for (const Tensor& f : s.visual) visual.push_back({f, *s.label});
    for (const Tensor& f : s.audio) audio.push_back({f, *s.label});
  }

  TrainConfig visual_config = config.pretrain;
  visual_config.seed = derive_seed(seed, 11);
  TrainConfig audio_config = config.pretrain;
  audio_config.seed = derive_seed(seed, 12);

  const ParameterSet visual_init = result.bundle.params.extract(kVisualPrefix);
  const ParameterSet audio_init = result.bundle.params.extract(kAudioPrefix);
  PretrainResult v =
      pretrain_modality(visual, visual_config, config.visual, &visual_init, on_epoch);
  PretrainResult a =
      pretrain_modality(audio, audio_config, config.audio, &audio_init, on_epoch);

  result.bundle.params.merge(v.params, kVisualPrefix);
  result.bundle.params.merge(a.params, kAudioPrefix);
  result.bundle.metadata.pretrain_epochs = config.pretrain.epochs;
  if (!a.loss_history.empty()) result.bundle.metadata.final_loss = a.loss_history.back();
  result.visual_history = std::move(v.loss_history);
  result.audio_history = std::move(a.loss_history);
  for (auto& w : v.warnings) result.warnings.push_back("visual: " + w);
  for (auto& w : a.warnings) result.warnings.push_back("audio: " + w);
  return result;
}

}  // namespace depscreen
