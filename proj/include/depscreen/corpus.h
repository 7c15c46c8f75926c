// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_CORPUS_H_
#define DEPSCREEN_CORPUS_H_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "depscreen/contrastive.h"

namespace depscreen {

// PHQ-8 total (0..24) to severity class: 0-4, 5-9, 10-14, 15-24.
int phq8_to_label(int score);

enum class Provenance { kSeedCorpus, kClinicianAdded };
std::string_view provenance_name(Provenance p);
Provenance parse_provenance(std::string_view name);

struct Exemplar {
  std::string id;
  std::vector<double> embedding;  // unit norm
  int label = 0;
  std::string excerpt;
  Provenance provenance = Provenance::kSeedCorpus;
  std::int64_t added_at_ms = 0;
  // Where the exemplar's inputs live (manifest path or session id); used to
  // re-embed it after the model changes.
  std::string source;

  friend bool operator==(const Exemplar&, const Exemplar&) = default;
};

// Labeled exemplars that queries are compared against. Every mutation
// increments the version. `bundle_version` names the model that produced
// the embeddings.
class ReferenceCorpus {
 public:
  const std::vector<Exemplar>& exemplars() const { return exemplars_; }
  std::uint64_t version() const { return version_; }
  std::uint64_t bundle_version() const { return bundle_version_; }
  std::size_t size() const { return exemplars_.size(); }
  std::array<std::size_t, kNumClasses> class_counts() const;
  bool covers_all_classes() const;
  const Exemplar* find(std::string_view id) const;

  // Validates the label, norm and id uniqueness; returns the new version.
  std::uint64_t add(Exemplar exemplar);
  // Replaces every embedding after a retrain; ids and order must match.
  std::uint64_t rebase(std::vector<Exemplar> reembedded, std::uint64_t bundle_version);
  void set_bundle_version(std::uint64_t v) { bundle_version_ = v; }

  friend bool operator==(const ReferenceCorpus&, const ReferenceCorpus&) = default;

 private:
  std::vector<Exemplar> exemplars_;
  std::uint64_t version_ = 0;
  std::uint64_t bundle_version_ = 0;
};

// Append-only corpus history: one JSON object per line, one line per
// mutation, each carrying the resulting version and a timestamp.
std::string corpus_add_record(const Exemplar& exemplar, std::uint64_t version,
                              std::uint64_t bundle_version);
std::string corpus_rebase_record(const std::vector<Exemplar>& exemplars,
                                 std::uint64_t version, std::uint64_t bundle_version,
                                 std::int64_t timestamp_ms);
// Add records that rebuild `corpus` from empty; it must never have been
// rebased (version equals size).
std::vector<std::string> corpus_log_records(const ReferenceCorpus& corpus);
// Applies records in order; stops after `up_to_version` when given.
ReferenceCorpus replay_corpus_log(std::istream& in,
                                  std::optional<std::uint64_t> up_to_version = {});
ReferenceCorpus load_corpus(const std::string& path,
                            std::optional<std::uint64_t> up_to_version = {});
// Replaces the file atomically with `records`, one per line.
void write_corpus_log(const std::string& path, const std::vector<std::string>& records);
void append_corpus_record(const std::string& path, const std::string& record);

struct ClassBoundary {
  double threshold = 0.5;
  void validate() const;
};

struct Prediction {
  std::optional<int> label;  // empty: uncertain, routed to clinician review
  std::array<double, kNumClasses> class_similarity{};
  std::array<std::string, kNumClasses> nearest_ids;
  double top_similarity = 0.0;

  bool uncertain() const { return !label.has_value(); }
  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Cosine similarity of unit vectors (their dot product).
double similarity_index(std::span<const double> q, std::span<const double> r);

// Per-class best similarity, argmax with ties toward the more severe class,
// abstaining when the best score is below the boundary.
Prediction classify(std::span<const double> query, const ReferenceCorpus& corpus,
                    const ClassBoundary& boundary = {});

struct TriageEntry {
  std::string session_id;
  Prediction prediction;
};

// Uncertain first, then severity descending, top similarity descending,
// session id ascending.
std::vector<TriageEntry> triage_rank(std::vector<TriageEntry> entries);

}  // namespace depscreen

#endif  // DEPSCREEN_CORPUS_H_
