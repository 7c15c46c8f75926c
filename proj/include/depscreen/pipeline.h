// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_PIPELINE_H_
#define DEPSCREEN_PIPELINE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depscreen/corpus.h"
#include "depscreen/dataset.h"
#include "depscreen/metrics.h"
#include "depscreen/model.h"
#include "depscreen/training.h"

namespace depscreen {

// Smaller encoders and shorter pooled sequences that train a 200-session
// dataset on one core in a few minutes.
ModelConfig desk_model_config();

// Copies the dataset's feature and text dimensions into `base`.
ModelConfig config_for_dataset(const DatasetIndex& index, ModelConfig base);

struct LoadedSession {
  SessionManifest manifest;
  std::string manifest_path;
  PreparedSession prepared;
};

LoadedSession load_prepared(const std::string& manifest_path, const ModelConfig& config);
std::vector<LoadedSession> load_dataset_sessions(const DatasetIndex& index,
                                                 const ModelConfig& config,
                                                 bool train_split);

struct TrainOutcome {
  ModelBundle bundle;
  std::vector<double> visual_history;
  std::vector<double> audio_history;
  std::vector<double> fusion_history;
  std::vector<std::string> warnings;
};

// Pretrains both encoders, then trains encoders and fusion end to end.
TrainOutcome train_model(const ModelConfig& config, std::span<const SessionInput> sessions,
                         std::uint64_t seed, const EpochCallback& on_epoch = {});

struct ExemplarCandidate {
  const SessionInput* input = nullptr;
  std::string excerpt;
  std::string source;
};

// Picks, per class, the `per_class` candidates whose fused embeddings lie
// closest to that class's mean direction (ties by id) as seed exemplars.
ReferenceCorpus build_seed_corpus(const ModelBundle& bundle,
                                  std::span<const ExemplarCandidate> candidates,
                                  std::size_t per_class);

// Re-embeds every exemplar with `bundle`; `lookup` returns the stored input
// for an exemplar source.
using InputLookup = std::function<SessionInput(const Exemplar&)>;
std::vector<Exemplar> reembed_exemplars(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                                        const InputLookup& lookup);

Prediction classify_input(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                          const SessionInput& input, const ClassBoundary& boundary);

enum class SplitSelection { kTrain, kTest, kAll };
SplitSelection parse_split(std::string_view name);

struct DatasetEvaluation {
  EvaluationReport report;
  std::vector<LabeledPrediction> predictions;
  std::size_t excluded = 0;  // unlabeled or unusable sessions
};

// Classifies every selected, labeled session of a dataset directory.
DatasetEvaluation evaluate_dataset(const ModelBundle& bundle, const ReferenceCorpus& corpus,
                                   const DatasetIndex& index, SplitSelection split,
                                   const ClassBoundary& boundary);

// Short display excerpt of cleaned text.
std::string make_excerpt(const std::string& cleaned_text, std::size_t max_chars = 160);

}  // namespace depscreen

#endif  // DEPSCREEN_PIPELINE_H_
