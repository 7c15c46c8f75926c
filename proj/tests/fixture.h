// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

// A small synthetic dataset with a quickly trained bundle and seed corpus,
// built once per test binary.

#ifndef DEPSCREEN_TESTS_FIXTURE_H_
#define DEPSCREEN_TESTS_FIXTURE_H_

#include <filesystem>
#include <memory>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "depscreen/checkpoint.h"
#include "depscreen/corpus.h"
#include "depscreen/pipeline.h"
#include "depscreen/synth.h"
#include "test_util.h"

namespace depscreen::testing {

inline ModelConfig tiny_model_config() {
  ModelConfig c = desk_model_config();
  for (EncoderConfig* e : {&c.visual, &c.audio}) {
    e->model_dim = 8;
    e->num_heads = 2;
    e->ffn_dim = 16;
    e->interpolation_factor = 2;
    e->embedding_dim = 8;
  }
  c.fusion = {16, 8};
  c.preprocess.max_steps = 16;
  for (TrainConfig* t : {&c.pretrain, &c.fusion_train}) {
    t->epochs = 2;
    t->pairs_per_epoch = 48;
  }
  return c;
}

struct Artifacts {
  TempDir dir{"artifacts"};
  DatasetIndex index;
  ModelBundle bundle;
  ReferenceCorpus corpus;
  std::string bundle_path;
  std::string corpus_path;
};

inline const Artifacts& tiny_artifacts() {
  static const std::unique_ptr<Artifacts> artifacts = [] {
    auto a = std::make_unique<Artifacts>();
    SynthConfig synth;
    synth.n_sessions = 40;
    synth.visual_dim = 4;
    synth.audio_dim = 4;
    synth.text_dim = 16;
    synth.seed = 3;
    a->index = synth_dataset(synth, (a->dir.path() / "data").string());
    const ModelConfig config = config_for_dataset(a->index, tiny_model_config());
    std::vector<LoadedSession> loaded;
    for (const auto& id : a->index.session_ids) {
      loaded.push_back(load_prepared(a->index.manifest_path(id), config));
    }
    std::vector<SessionInput> inputs;
    std::vector<ExemplarCandidate> candidates;
    for (const auto& s : loaded) inputs.push_back(s.prepared.input);
    for (std::size_t i = 0; i < loaded.size(); ++i) {
      candidates.push_back({&inputs[i], make_excerpt(loaded[i].prepared.cleaned_text),
                            std::filesystem::absolute(loaded[i].manifest_path).string()});
    }
    a->bundle = train_model(config, inputs, 11).bundle;
    a->corpus = build_seed_corpus(a->bundle, candidates, 2);
    a->bundle_path = a->dir.file("bundle.ckpt");
    a->corpus_path = a->dir.file("corpus.jsonl");
    save_bundle(a->bundle, a->bundle_path);
    write_corpus_log(a->corpus_path, corpus_log_records(a->corpus));
    return a;
  }();
  return *artifacts;
}

// JSON submission body for one synthetic session.
inline nlohmann::json submission_body(const std::string& manifest_path, bool consent = true,
                                      bool with_phq8 = true) {
  const SessionPayload p = payload_from_manifest(load_manifest(manifest_path));
  nlohmann::json body{{"consent", consent},
                      {"visual_csv", p.visual_csv},
                      {"audio_csv", p.audio_csv},
                      {"transcript_tsv", p.transcript_tsv},
                      {"external_id", p.session_id}};
  if (p.text_embedding) body["text_embedding"] = *p.text_embedding;
  if (with_phq8 && p.phq8) body["phq8"] = *p.phq8;
  return body;
}

}  // namespace depscreen::testing

#endif  // DEPSCREEN_TESTS_FIXTURE_H_
