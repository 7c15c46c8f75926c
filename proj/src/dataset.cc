// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/dataset.h"

#include <algorithm>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <sstream>

#include "depscreen/corpus.h"
#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/random.h"

namespace depscreen {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string resolve(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

std::string require_string(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_string() || j.at(key).get<std::string>().empty()) {
    throw ValidationError(std::string("manifest field '") + key + "' must be a non-empty string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace

SessionManifest parse_manifest(std::string_view json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("manifest must be a JSON object");
  static const char* const kKnown[] = {"session_id", "visual", "audio", "transcript",
                                       "text_embedding", "phq8"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(std::begin(kKnown), std::end(kKnown), key) == std::end(kKnown)) {
      throw ValidationError("unknown manifest field '" + key + "'");
    }
  }
  SessionManifest m;
  m.session_id = require_string(j, "session_id");
  m.visual = resolve(base_dir, require_string(j, "visual"));
  m.audio = resolve(base_dir, require_string(j, "audio"));
  m.transcript = resolve(base_dir, require_string(j, "transcript"));
  if (j.contains("text_embedding") && !j.at("text_embedding").is_null()) {
    m.text_embedding = resolve(base_dir, require_string(j, "text_embedding"));
  }
  if (j.contains("phq8") && !j.at("phq8").is_null()) {
    if (!j.at("phq8").is_number_integer()) throw ValidationError("phq8 must be an integer");
    m.phq8 = j.at("phq8").get<int>();
    phq8_to_label(*m.phq8);  // range check
  }
  return m;
}

SessionManifest load_manifest(const std::string& path) {
  return parse_manifest(read_file(path), fs::path(path).parent_path().string());
}

std::string manifest_to_json(const SessionManifest& m) {
  json j{{"session_id", m.session_id},
         {"visual", m.visual},
         {"audio", m.audio},
         {"transcript", m.transcript}};
  if (m.text_embedding) j["text_embedding"] = *m.text_embedding;
  if (m.phq8) j["phq8"] = *m.phq8;
  return j.dump(2) + "\n";
}

RawSession load_session(const SessionManifest& manifest, const ModelConfig& config) {
  RawSession raw;
  raw.session_id = manifest.session_id;
  raw.visual = load_feature_csv(manifest.visual, Modality::kVisual, config.visual.input_dim);
  raw.audio = load_feature_csv(manifest.audio, Modality::kAudio, config.audio.input_dim);
  raw.turns = load_transcript(manifest.transcript);
  if (manifest.text_embedding) {
    const auto table = EmbeddingTable::load(*manifest.text_embedding);
    raw.text_embedding = table.get(manifest.session_id);
  }
  raw.phq8 = manifest.phq8;
  return raw;
}

RawSession parse_session_payload(const SessionPayload& payload, const ModelConfig& config) {
  auto tagged = [](const char* what, auto&& parse) {
    try {
      return parse();
    } catch (const ParseError& e) {
      throw ParseError(std::string(what) + ": " + e.what());
    }
  };
  RawSession raw;
  raw.session_id = payload.session_id;
  raw.visual = tagged("visual", [&] {
    std::istringstream in(payload.visual_csv);
    return parse_feature_csv(in, Modality::kVisual, config.visual.input_dim);
  });
  raw.audio = tagged("audio", [&] {
    std::istringstream in(payload.audio_csv);
    return parse_feature_csv(in, Modality::kAudio, config.audio.input_dim);
  });
  raw.turns = tagged("transcript", [&] {
    std::istringstream in(payload.transcript_tsv);
    return parse_transcript(in);
  });
  raw.text_embedding = payload.text_embedding;
  if (payload.phq8) phq8_to_label(*payload.phq8);
  raw.phq8 = payload.phq8;
  return raw;
}

SessionPayload payload_from_manifest(const SessionManifest& manifest) {
  SessionPayload p;
  p.session_id = manifest.session_id;
  p.visual_csv = read_file(manifest.visual);
  p.audio_csv = read_file(manifest.audio);
  p.transcript_tsv = read_file(manifest.transcript);
  if (manifest.text_embedding) {
    p.text_embedding = EmbeddingTable::load(*manifest.text_embedding).get(manifest.session_id);
  }
  p.phq8 = manifest.phq8;
  return p;
}

TextEmbedder fallback_text_embedder(const ModelConfig& config) {
  TextEmbedderSpec spec;
  spec.mode = TextEmbedderMode::kToyHashedNgram;
  spec.dimension = config.text_dim;
  return TextEmbedder(spec);
}

PreparedSession prepare_session(const RawSession& raw, const ModelConfig& config) {
  PreparedSession out;
  out.input.id = raw.session_id;
  if (raw.phq8) out.input.label = phq8_to_label(*raw.phq8);

  const ScrubResult scrub = scrub_interviewer(raw.turns);
  if (!scrub.usable) {
    out.usable = false;
    out.warnings.push_back("transcript has no participant speech");
  }
  auto take = [&](const FeatureMatrix& fm, std::vector<Tensor>& dst) {
    const FeatureMatrix kept = drop_ranges(fm, scrub.excluded);
    out.dropped_rows += fm.steps() - kept.steps();
    const std::string name(modality_name(fm.modality));
    if (kept.empty()) {
      out.usable = false;
      out.warnings.push_back(name + " stream is empty after scrubbing");
      return;
    }
    for (auto& seg : segment_stream(kept, config.preprocess, raw.session_id)) {
      dst.push_back(std::move(seg.frames));
    }
    if (dst.empty()) {
      out.usable = false;
      out.warnings.push_back(name + " stream is shorter than one segment");
    }
  };
  take(raw.visual, out.input.visual);
  take(raw.audio, out.input.audio);

  for (const auto& turn : scrub.participant_turns) {
    const CleanedText c = clean_text(turn.text);
    if (c.empty) continue;
    if (!out.cleaned_text.empty()) out.cleaned_text.push_back(' ');
    out.cleaned_text += c.text;
  }
  if (raw.text_embedding) {
    if (raw.text_embedding->size() != config.text_dim) {
      throw ValidationError("text embedding has dimension " +
                            std::to_string(raw.text_embedding->size()) + ", model expects " +
                            std::to_string(config.text_dim));
    }
    out.input.text = *raw.text_embedding;
    normalize_in_place(out.input.text);
  } else if (!out.cleaned_text.empty()) {
    out.input.text = fallback_text_embedder(config).embed(out.cleaned_text);
  } else {
    out.usable = false;
    out.warnings.push_back("transcript text is empty after cleaning");
  }
  return out;
}

std::string DatasetIndex::manifest_path(const std::string& session_id) const {
  return (fs::path(root) / "sessions" / (session_id + ".json")).string();
}

DatasetIndex load_dataset_index(const std::string& dir) {
  const std::string path = (fs::path(dir) / "dataset.json").string();
  if (!fs::exists(path)) throw NotFoundError("no dataset.json in " + dir);
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  DatasetIndex index;
  index.root = dir;
  try {
    index.session_ids = j.at("sessions").get<std::vector<std::string>>();
    index.visual_dim = j.at("visual_dim").get<std::size_t>();
    index.audio_dim = j.at("audio_dim").get<std::size_t>();
    index.text_dim = j.at("text_dim").get<std::size_t>();
    index.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return index;
}

void write_dataset_index(const DatasetIndex& index) {
  const json j{{"format", "depscreen-dataset"},
               {"version", 1},
               {"seed", index.seed},
               {"visual_dim", index.visual_dim},
               {"audio_dim", index.audio_dim},
               {"text_dim", index.text_dim},
               {"sessions", index.session_ids}};
  write_file_atomic((fs::path(index.root) / "dataset.json").string(), j.dump(2) + "\n");
}

bool in_train_split(std::string_view session_id, unsigned train_percent) {
  return fnv1a64(session_id) % 100 < train_percent;
}

}  // namespace depscreen
