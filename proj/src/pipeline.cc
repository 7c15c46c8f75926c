// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/pipeline.h"

#include <algorithm>
#include <map>

#include "depscreen/errors.h"
#include "depscreen/random.h"

namespace depscreen {

ModelConfig desk_model_config() {
  ModelConfig config;
  for (EncoderConfig* e : {&config.visual, &config.audio}) {
    e->model_dim = 32;
    e->num_blocks = 1;
    e->num_heads = 4;
    e->ffn_dim = 64;
    e->interpolation_factor = 4;
    e->embedding_dim = 32;
  }
  config.fusion = {64, 32};
  config.preprocess.max_steps = 60;
  config.pretrain.epochs = 8;
  config.fusion_train.epochs = 8;
  return config;
}

ModelConfig config_for_dataset(const DatasetIndex& index, ModelConfig base) {
  base.visual.input_dim = index.visual_dim;
  base.audio.input_dim = index.audio_dim;
  base.text_dim = index.text_dim;
  return base;
}

LoadedSession load_prepared(const std::string& manifest_path, const ModelConfig& config) {
  LoadedSession s;
  s.manifest_path = manifest_path;
  s.manifest = load_manifest(manifest_path);
  s.prepared = prepare_session(load_session(s.manifest, config), config);
  return s;
}

std::vector<LoadedSession> load_dataset_sessions(const DatasetIndex& index,
                                                 const ModelConfig& config, bool train_split) {
  std::vector<LoadedSession> out;
  for (const auto& id : index.session_ids) {
    if (in_train_split(id) != train_split) continue;
    out.push_back(load_prepared(index.manifest_path(id), config));
  }
  return out;
}

TrainOutcome train_model(const ModelConfig& config, std::span<const SessionInput> sessions,
                         std::uint64_t seed, const EpochCallback& on_epoch) {
  TrainOutcome out;
  PretrainBundleResult pre = pretrain_bundle(config, sessions, seed, on_epoch);
  TrainConfig fusion = config.fusion_train;
  fusion.seed = derive_seed(seed, 13);
  FusionResult fused = train_fusion(pre.bundle, sessions, fusion, on_epoch);
  out.bundle = std::move(fused.bundle);
  out.bundle.metadata.seed = seed;
  out.visual_history = std::move(pre.visual_history);
  out.audio_history = std::move(pre.audio_history);
  out.fusion_history = std::move(fused.loss_history);
  out.warnings = std::move(pre.warnings);
  out.warnings.insert(out.warnings.end(), fused.warnings.begin(), fused.warnings.end());
  return out;
}

ReferenceCorpus build_seed_corpus(const ModelBundle& bundle,
                                  std::span<const ExemplarCandidate> candidates,
                                  std::size_t per_class) {
  if (per_class == 0) throw ValidationError("need at least one exemplar per class");
  struct Scored {
    const ExemplarCandidate* candidate;
    std::vector<double> embedding;
    double score = 0.0;
  };
  std::array<std::vector<Scored>, kNumClasses> by_class;
  for (const auto& c : candidates) {
    if (c.input == nullptr || !c.input->label || !c.input->complete()) continue;
    require_valid_label(*c.input->label);
    by_class[static_cast<std::size_t>(*c.input->label)].push_back(
        {&c, embed_session(bundle, *c.input).fused});
  }
  ReferenceCorpus corpus;
  corpus.set_bundle_version(bundle.version);
  for (std::size_t k = 0; k < kNumClasses; ++k) {
    auto& group = by_class[k];
    if (group.empty()) {
      throw ValidationError("no labeled candidate for class " + std::to_string(k));
    }
    std::vector<double> centre(group.front().embedding.size(), 0.0);
    for (const auto& s : group) {
      for (std::size_t i = 0; i < centre.size(); ++i) centre[i] += s.embedding[i];
    }
    for (auto& s : group) {
      for (std::size_t i = 0; i < centre.size(); ++i) s.score += s.embedding[i] * centre[i];
    }
    std::sort(group.begin(), group.end(), [](const Scored& a, const Scored& b) {
      if (a.score != b.score) return a.score > b.score;
      return a.candidate->input->id < b.candidate->input->id;
    });
    for (std::size_t j = 0; j < std::min(per_class, group.size()); ++j) {
      Exemplar e;
      e.id = group[j].candidate->input->id;
      e.embedding = group[j].embedding;
      e.label = static_cast<int>(k);
      e.excerpt = group[j].candidate->excerpt;
      e.provenance = Provenance::kSeedCorpus;
      e.source = group[j].candidate->source;
      corpus.add(std::move(e));
    }
  }
  return corpus;
}

std::vector<Exemplar> reembed_exemplars(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                                        const InputLookup& lookup) {
  std::vector<Exemplar> out = corpus.exemplars();
  for (auto& e : out) e.embedding = embed_session(bundle, lookup(e)).fused;
  return out;
}

Prediction classify_input(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                          const SessionInput& input, const ClassBoundary& boundary) {
  if (!input.complete()) throw ValidationError("session " + input.id + " lacks a modality");
  return classify(embed_session(bundle, input).fused, corpus, boundary);
}

SplitSelection parse_split(std::string_view name) {
  if (name == "train") return SplitSelection::kTrain;
  if (name == "test") return SplitSelection::kTest;
  if (name == "all") return SplitSelection::kAll;
  throw ValidationError("split must be train, test or all");
}

DatasetEvaluation evaluate_dataset(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                                   const DatasetIndex& index, SplitSelection split,
                                   const ClassBoundary& boundary) {
  DatasetEvaluation out;
  for (const auto& id : index.session_ids) {
    if (split != SplitSelection::kAll && in_train_split(id) != (split == SplitSelection::kTrain)) {
      continue;
    }
    const LoadedSession s = load_prepared(index.manifest_path(id), bundle.config);
    if (!s.prepared.usable || !s.prepared.input.label) {
      ++out.excluded;
      continue;
    }
    out.predictions.push_back({id, *s.prepared.input.label,
                               classify_input(bundle, corpus, s.prepared.input, boundary)});
  }
  out.report = evaluate(out.predictions);
  return out;
}

std::string make_excerpt(const std::string& cleaned_text, std::size_t max_chars) {
  if (cleaned_text.size() <= max_chars) return cleaned_text;
  std::size_t cut = cleaned_text.rfind(' ', max_chars);
  if (cut == std::string::npos || cut == 0) cut = max_chars;
  return cleaned_text.substr(0, cut) + " ...";
}

}  // namespace depscreen
