// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_DATASET_H_
#define DEPSCREEN_DATASET_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "depscreen/ingest.h"
#include "depscreen/model.h"
#include "depscreen/text_embedder.h"

namespace depscreen {

// JSON object with keys session_id, visual, audio, transcript and the
// optional text_embedding (a key=session_id embedding table) and phq8.
// Relative paths resolve against the manifest's directory.
struct SessionManifest {
  std::string session_id;
  std::string visual;
  std::string audio;
  std::string transcript;
  std::optional<std::string> text_embedding;
  std::optional<int> phq8;

  friend bool operator==(const SessionManifest&, const SessionManifest&) = default;
};

SessionManifest parse_manifest(std::string_view json_text, const std::string& base_dir = {});
SessionManifest load_manifest(const std::string& path);
// Serialized with paths as stored (not re-relativized).
std::string manifest_to_json(const SessionManifest& m);

// Parsed but unprocessed inputs of one session.
struct RawSession {
  std::string session_id;
  FeatureMatrix visual;
  FeatureMatrix audio;
  std::vector<TranscriptTurn> turns;
  std::optional<std::vector<double>> text_embedding;
  std::optional<int> phq8;
};

RawSession load_session(const SessionManifest& manifest, const ModelConfig& config);

// Same parsing rules applied to in-memory payloads (feature CSV and
// transcript text) instead of files.
struct SessionPayload {
  std::string session_id;
  std::string visual_csv;
  std::string audio_csv;
  std::string transcript_tsv;
  std::optional<std::vector<double>> text_embedding;
  std::optional<int> phq8;
};
RawSession parse_session_payload(const SessionPayload& payload, const ModelConfig& config);
// Reads a manifest's files into a payload (the submission wire form).
SessionPayload payload_from_manifest(const SessionManifest& manifest);

struct PreparedSession {
  SessionInput input;
  std::string cleaned_text;
  std::size_t dropped_rows = 0;  // interviewer rows removed over both modalities
  bool usable = true;
  std::vector<std::string> warnings;
};

// Scrub -> segment -> pool per modality, clean the transcript and pick the
// text vector (precomputed when present, toy embedder otherwise).
PreparedSession prepare_session(const RawSession& raw, const ModelConfig& config);

// Deterministic text embedder used when a session has no precomputed vector.
TextEmbedder fallback_text_embedder(const ModelConfig& config);

// A dataset directory: dataset.json plus sessions/<id>.json manifests.
struct DatasetIndex {
  std::string root;
  std::vector<std::string> session_ids;
  std::size_t visual_dim = 0;
  std::size_t audio_dim = 0;
  std::size_t text_dim = 0;
  std::uint64_t seed = 0;

  std::string manifest_path(const std::string& session_id) const;
};

DatasetIndex load_dataset_index(const std::string& dir);
void write_dataset_index(const DatasetIndex& index);

// Stable split by session id hash; about `train_percent` of ids land in train.
bool in_train_split(std::string_view session_id, unsigned train_percent = 80);

}  // namespace depscreen

#endif  // DEPSCREEN_DATASET_H_
