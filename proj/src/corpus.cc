// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/corpus.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <nlohmann/json.hpp>
#include <tuple>

#include "depscreen/errors.h"
#include "depscreen/format.h"

namespace depscreen {

using nlohmann::json;

int phq8_to_label(int score) {
  if (score < 0 || score > 24) {
    throw ValidationError("PHQ-8 score must be in 0..24, got " + std::to_string(score));
  }
  if (score <= 4) return 0;
  if (score <= 9) return 1;
  if (score <= 14) return 2;
  return 3;
}

std::string_view provenance_name(Provenance p) {
  return p == Provenance::kSeedCorpus ? "seed-corpus" : "clinician-added";
}

Provenance parse_provenance(std::string_view name) {
  if (name == "seed-corpus") return Provenance::kSeedCorpus;
  if (name == "clinician-added") return Provenance::kClinicianAdded;
  throw ValidationError("unknown provenance '" + std::string(name) + "'");
}

namespace {

void require_unit(std::span<const double> v, const std::string& what) {
  if (v.empty()) throw ValidationError(what + " is empty");
  double sq = 0.0;
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(what + " has a non-finite entry");
    sq += x * x;
  }
  if (sq == 0.0) throw NumericError(what + " has zero norm");
  if (std::abs(std::sqrt(sq) - 1.0) > 1e-9) {
    throw ValidationError(what + " is not unit-norm");
  }
}

}  // namespace

std::array<std::size_t, kNumClasses> ReferenceCorpus::class_counts() const {
  std::array<std::size_t, kNumClasses> counts{};
  for (const auto& e : exemplars_) ++counts[static_cast<std::size_t>(e.label)];
  return counts;
}

bool ReferenceCorpus::covers_all_classes() const {
  const auto counts = class_counts();
  return std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
}

const Exemplar* ReferenceCorpus::find(std::string_view id) const {
  for (const auto& e : exemplars_) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

std::uint64_t ReferenceCorpus::add(Exemplar exemplar) {
  require_valid_label(exemplar.label);
  require_unit(exemplar.embedding, "exemplar embedding");
  if (exemplar.id.empty()) throw ValidationError("exemplar id is empty");
  if (find(exemplar.id) != nullptr) {
    throw ConflictError("exemplar id '" + exemplar.id + "' already exists");
  }
  if (!exemplars_.empty() &&
      exemplars_.front().embedding.size() != exemplar.embedding.size()) {
    throw ShapeError("exemplar embedding dimension differs from the corpus");
  }
  exemplars_.push_back(std::move(exemplar));
  return ++version_;
}

std::uint64_t ReferenceCorpus::rebase(std::vector<Exemplar> reembedded,
                                      std::uint64_t bundle_version) {
  if (reembedded.size() != exemplars_.size()) {
    throw ValidationError("rebase must cover every exemplar");
  }
  for (std::size_t i = 0; i < reembedded.size(); ++i) {
    if (reembedded[i].id != exemplars_[i].id || reembedded[i].label != exemplars_[i].label) {
      throw ValidationError("rebase changed exemplar identity at position " +
                            std::to_string(i));
    }
    require_unit(reembedded[i].embedding, "exemplar embedding");
  }
  exemplars_ = std::move(reembedded);
  bundle_version_ = bundle_version;
  return ++version_;
}

namespace {

json exemplar_json(const Exemplar& e) {
  return json{{"id", e.id},
              {"label", e.label},
              {"embedding", e.embedding},
              {"excerpt", e.excerpt},
              {"provenance", provenance_name(e.provenance)},
              {"added_at_ms", e.added_at_ms},
              {"source", e.source}};
}

Exemplar exemplar_from_json(const json& j) {
  Exemplar e;
  e.id = j.at("id").get<std::string>();
  e.label = j.at("label").get<int>();
  e.embedding = j.at("embedding").get<std::vector<double>>();
  e.excerpt = j.value("excerpt", "");
  e.provenance = parse_provenance(j.at("provenance").get<std::string>());
  e.added_at_ms = j.value("added_at_ms", std::int64_t{0});
  e.source = j.value("source", "");
  return e;
}

}  // namespace

std::string corpus_add_record(const Exemplar& exemplar, std::uint64_t version,
                              std::uint64_t bundle_version) {
  return json{{"op", "add"},
              {"version", version},
              {"bundle_version", bundle_version},
              {"timestamp_ms", exemplar.added_at_ms},
              {"exemplar", exemplar_json(exemplar)}}
      .dump();
}

std::string corpus_rebase_record(const std::vector<Exemplar>& exemplars,
                                 std::uint64_t version, std::uint64_t bundle_version,
                                 std::int64_t timestamp_ms) {
  json list = json::array();
  for (const auto& e : exemplars) list.push_back(exemplar_json(e));
  return json{{"op", "rebase"},
              {"version", version},
              {"bundle_version", bundle_version},
              {"timestamp_ms", timestamp_ms},
              {"exemplars", std::move(list)}}
      .dump();
}

std::vector<std::string> corpus_log_records(const ReferenceCorpus& corpus) {
  if (corpus.version() != corpus.size()) {
    throw ValidationError("a rebased corpus cannot be rewritten as add records");
  }
  std::vector<std::string> out;
  std::uint64_t v = 0;
  for (const auto& e : corpus.exemplars()) {
    out.push_back(corpus_add_record(e, ++v, corpus.bundle_version()));
  }
  return out;
}

ReferenceCorpus replay_corpus_log(std::istream& in, std::optional<std::uint64_t> up_to_version) {
  ReferenceCorpus corpus;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(std::string("corpus log: ") + e.what(), line_no);
    }
    try {
      const auto version = record.at("version").get<std::uint64_t>();
      if (up_to_version && version > *up_to_version) break;
      const auto op = record.at("op").get<std::string>();
      std::uint64_t got = 0;
      if (op == "add") {
        got = corpus.add(exemplar_from_json(record.at("exemplar")));
        corpus.set_bundle_version(record.at("bundle_version").get<std::uint64_t>());
      } else if (op == "rebase") {
        std::vector<Exemplar> list;
        for (const auto& j : record.at("exemplars")) list.push_back(exemplar_from_json(j));
        got = corpus.rebase(std::move(list), record.at("bundle_version").get<std::uint64_t>());
      } else {
        throw ParseError("unknown corpus op '" + op + "'", line_no);
      }
      if (got != version) {
        throw ParseError("corpus log version gap: expected " + std::to_string(got) +
                             ", record says " + std::to_string(version),
                         line_no);
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("corpus log: ") + e.what(), line_no);
    }
  }
  return corpus;
}

ReferenceCorpus load_corpus(const std::string& path, std::optional<std::uint64_t> up_to_version) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus log " + path);
  return replay_corpus_log(in, up_to_version);
}

void write_corpus_log(const std::string& path, const std::vector<std::string>& records) {
  std::string contents;
  for (const auto& r : records) contents += r + "\n";
  write_file_atomic(path, contents);
}

void append_corpus_record(const std::string& path, const std::string& record) {
  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to corpus log " + path);
  out << record << '\n';
  out.flush();
  if (!out) throw IoError("short write to corpus log " + path);
}

void ClassBoundary::validate() const {
  if (!(threshold >= -1.0 && threshold <= 1.0)) {
    throw ValidationError("class boundary must lie in [-1, 1]");
  }
}

double similarity_index(std::span<const double> q, std::span<const double> r) {
  if (q.size() != r.size()) {
    throw ShapeError("similarity of vectors with dimensions " + std::to_string(q.size()) +
                     " and " + std::to_string(r.size()));
  }
  require_unit(q, "query");
  require_unit(r, "reference");
  double dot = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * r[i];
  return dot;
}

Prediction classify(std::span<const double> query, const ReferenceCorpus& corpus,
                    const ClassBoundary& boundary) {
  boundary.validate();
  const auto counts = corpus.class_counts();
  for (int k = 0; k < kNumClasses; ++k) {
    if (counts[static_cast<std::size_t>(k)] == 0) {
      throw ValidationError("reference corpus has no exemplar of class " + std::to_string(k));
    }
  }
  Prediction p;
  std::array<bool, kNumClasses> seen{};
  for (const auto& e : corpus.exemplars()) {
    const double s = similarity_index(query, e.embedding);
    const auto k = static_cast<std::size_t>(e.label);
    if (!seen[k] || s > p.class_similarity[k]) {
      p.class_similarity[k] = s;
      p.nearest_ids[k] = e.id;
      seen[k] = true;
    }
  }
  std::size_t best = 0;
  for (std::size_t k = 1; k < kNumClasses; ++k) {
    if (p.class_similarity[k] >= p.class_similarity[best]) best = k;
  }
  p.top_similarity = p.class_similarity[best];
  if (p.top_similarity >= boundary.threshold) p.label = static_cast<int>(best);
  return p;
}

std::vector<TriageEntry> triage_rank(std::vector<TriageEntry> entries) {
  // Uncertain sorts above every label.
  auto severity = [](const TriageEntry& e) {
    return e.prediction.label ? *e.prediction.label : kNumClasses;
  };
  std::stable_sort(entries.begin(), entries.end(), [&](const TriageEntry& a, const TriageEntry& b) {
    return std::tuple(-severity(a), -a.prediction.top_similarity, std::string_view(a.session_id)) <
           std::tuple(-severity(b), -b.prediction.top_similarity, std::string_view(b.session_id));
  });
  return entries;
}

}  // namespace depscreen
