// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_INGEST_H_
#define DEPSCREEN_INGEST_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "depscreen/model.h"
#include "depscreen/tensor.h"

namespace depscreen {

enum class Modality { kVisual, kAudio };
std::string_view modality_name(Modality m);

// Per-timestep feature rows of one modality, as exported by a facial or
// acoustic feature extractor. Times are seconds and strictly increasing.
struct FeatureMatrix {
  Modality modality = Modality::kVisual;
  double rate_hz = 1.0;
  std::vector<std::string> feature_names;
  std::vector<double> times;
  std::vector<double> values;  // row-major, times.size() x dim()

  std::size_t dim() const { return feature_names.size(); }
  std::size_t steps() const { return times.size(); }
  bool empty() const { return times.empty(); }
};

// CSV with header `t,<d feature columns>`. Rejects a header whose feature
// count differs from `expected_dim`, malformed or non-finite cells and
// out-of-order times, naming the offending line. The sampling rate is
// inferred from the first and last timestamps (1 Hz for a single row).
FeatureMatrix parse_feature_csv(std::istream& in, Modality modality,
                                std::size_t expected_dim);
FeatureMatrix load_feature_csv(const std::string& path, Modality modality,
                               std::size_t expected_dim);
void write_feature_csv(std::ostream& out, const FeatureMatrix& fm);

enum class Speaker { kParticipant, kInterviewer };

struct TranscriptTurn {
  double start = 0.0;
  double stop = 0.0;
  Speaker speaker = Speaker::kParticipant;
  std::string text;

  friend bool operator==(const TranscriptTurn&, const TranscriptTurn&) = default;
};

// Tab-separated `start<TAB>stop<TAB>speaker<TAB>text`; an optional header
// line starting with "start" is skipped.
std::vector<TranscriptTurn> parse_transcript(std::istream& in);
std::vector<TranscriptTurn> load_transcript(const std::string& path);
void write_transcript(std::ostream& out, const std::vector<TranscriptTurn>& turns);

using TimeRange = std::pair<double, double>;  // [start, stop)

struct ScrubResult {
  std::vector<TranscriptTurn> participant_turns;
  std::vector<TimeRange> excluded;
  bool usable = true;  // false when no participant speech remains
};

// Keeps participant turns and reports interviewer turns as excluded time
// ranges. Overlapping or out-of-order turns are a ParseError.
ScrubResult scrub_interviewer(const std::vector<TranscriptTurn>& turns);

// Drops rows whose timestamp falls in any excluded range.
FeatureMatrix drop_ranges(const FeatureMatrix& fm, const std::vector<TimeRange>& excluded);

struct Segment {
  std::string session_id;
  Modality modality = Modality::kVisual;
  std::size_t window_index = 0;
  double duration_s = 0.0;  // retained source material in this window
  Tensor frames;            // pooled, at most max_steps x dim
  std::optional<int> label;
};

// Cuts the retained stream into consecutive non-overlapping windows of
// window_s seconds (round(window_s * rate) rows). A shorter final window is
// kept only if it covers at least min_tail_s. Each window is mean-pooled over
// time into at most max_steps contiguous bins.
std::vector<Segment> segment_stream(const FeatureMatrix& fm,
                                    const PreprocessConfig& config,
                                    const std::string& session_id = {});

// Mean-pools `rows` x `dim` values into min(rows, max_steps) bins.
Tensor pool_time(const double* values, std::size_t rows, std::size_t dim,
                 std::size_t max_steps);

struct CleanedText {
  std::string text;
  bool empty = false;
};

// Lowercases, removes <...> and [...] annotations, collapses whitespace.
CleanedText clean_text(std::string_view raw);

}  // namespace depscreen

#endif  // DEPSCREEN_INGEST_H_
