// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/ingest.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "depscreen/errors.h"
#include "depscreen/format.h"

namespace depscreen {

std::string_view modality_name(Modality m) {
  return m == Modality::kVisual ? "visual" : "audio";
}

namespace {

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

FeatureMatrix parse_feature_csv(std::istream& in, Modality modality,
                                std::size_t expected_dim) {
  FeatureMatrix fm;
  fm.modality = modality;
  std::string line;
  long line_no = 0;
  if (!std::getline(in, line)) throw ParseError("feature file is empty", 1);
  ++line_no;
  line = strip_cr(std::move(line));
  const auto header = split(line, ',');
  if (header.empty() || trim(header[0]) != "t") {
    throw ParseError("feature header must start with column 't'", line_no);
  }
  const std::size_t dim = header.size() - 1;
  if (dim != expected_dim) {
    throw ParseError("feature header has " + std::to_string(dim) +
                         " columns but expected_dim is " +
                         std::to_string(expected_dim),
                     line_no);
  }
  if (dim == 0) throw ParseError("feature header has no feature columns", line_no);
  std::set<std::string, std::less<>> seen;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string name(trim(header[i]));
    if (name.empty() || !seen.insert(name).second) {
      throw ParseError("feature column names must be non-empty and unique", line_no);
    }
    fm.feature_names.push_back(name);
  }
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != dim + 1) {
      throw ParseError("expected " + std::to_string(dim + 1) + " cells, got " +
                           std::to_string(cells.size()),
                       line_no);
    }
    const double t = parse_double(trim(cells[0]), line_no);
    if (!std::isfinite(t)) throw ParseError("non-finite timestamp", line_no);
    if (!fm.times.empty() && t <= fm.times.back()) {
      throw ParseError("timestamps must be strictly increasing", line_no);
    }
    fm.times.push_back(t);
    for (std::size_t i = 1; i <= dim; ++i) {
      const double v = parse_double(trim(cells[i]), line_no);
      if (!std::isfinite(v)) {
        throw ParseError("non-finite value in column '" + fm.feature_names[i - 1] + "'",
                         line_no);
      }
      fm.values.push_back(v);
    }
  }
  if (fm.times.empty()) throw ParseError("feature file has no rows", line_no);
  const std::size_t n = fm.times.size();
  fm.rate_hz = n == 1 ? 1.0 : static_cast<double>(n - 1) / (fm.times.back() - fm.times.front());
  return fm;
}

FeatureMatrix load_feature_csv(const std::string& path, Modality modality,
                               std::size_t expected_dim) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open feature file " + path);
  try {
    return parse_feature_csv(in, modality, expected_dim);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_feature_csv(std::ostream& out, const FeatureMatrix& fm) {
  out << 't';
  for (const auto& name : fm.feature_names) out << ',' << name;
  out << '\n';
  const std::size_t d = fm.dim();
  for (std::size_t r = 0; r < fm.steps(); ++r) {
    out << format_double(fm.times[r]);
    for (std::size_t c = 0; c < d; ++c) out << ',' << format_double(fm.values[r * d + c]);
    out << '\n';
  }
}

namespace {

Speaker parse_speaker(std::string_view cell, long line) {
  std::string s(trim(cell));
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (s == "participant") return Speaker::kParticipant;
  if (s == "interviewer") return Speaker::kInterviewer;
  throw ParseError("unknown speaker '" + s + "'", line);
}

}  // namespace

std::vector<TranscriptTurn> parse_transcript(std::istream& in) {
  std::vector<TranscriptTurn> turns;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (trim(line).empty()) continue;
    if (line_no == 1 && line.rfind("start", 0) == 0) continue;
    const auto cells = split(line, '\t');
    if (cells.size() < 3) throw ParseError("expected start, stop, speaker, text", line_no);
    TranscriptTurn turn;
    turn.start = parse_double(trim(cells[0]), line_no);
    turn.stop = parse_double(trim(cells[1]), line_no);
    if (!std::isfinite(turn.start) || !std::isfinite(turn.stop) || turn.start >= turn.stop) {
      throw ParseError("turn needs finite start < stop", line_no);
    }
    turn.speaker = parse_speaker(cells[2], line_no);
    // Text may itself contain tabs; keep everything after the third field.
    if (cells.size() > 3) {
      const std::size_t offset = static_cast<std::size_t>(cells[3].data() - line.data());
      turn.text = line.substr(offset);
    }
    if (!turns.empty() && turn.start < turns.back().start) {
      throw ParseError("turns are not time-ordered", line_no);
    }
    turns.push_back(std::move(turn));
  }
  return turns;
}

std::vector<TranscriptTurn> load_transcript(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open transcript " + path);
  try {
    return parse_transcript(in);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void write_transcript(std::ostream& out, const std::vector<TranscriptTurn>& turns) {
  out << "start\tstop\tspeaker\ttext\n";
  for (const auto& t : turns) {
    out << format_double(t.start) << '\t' << format_double(t.stop) << '\t'
        << (t.speaker == Speaker::kParticipant ? "participant" : "interviewer") << '\t'
        << t.text << '\n';
  }
}

ScrubResult scrub_interviewer(const std::vector<TranscriptTurn>& turns) {
  ScrubResult result;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const auto& t = turns[i];
    if (!(t.start < t.stop)) {
      throw ParseError("turn " + std::to_string(i) + " has start >= stop");
    }
    if (i > 0 && t.start < turns[i - 1].stop) {
      throw ParseError("turn " + std::to_string(i) + " overlaps the previous turn");
    }
    if (t.speaker == Speaker::kParticipant) {
      result.participant_turns.push_back(t);
    } else {
      result.excluded.emplace_back(t.start, t.stop);
    }
  }
  result.usable = !result.participant_turns.empty();
  return result;
}

FeatureMatrix drop_ranges(const FeatureMatrix& fm, const std::vector<TimeRange>& excluded) {
  FeatureMatrix out;
  out.modality = fm.modality;
  out.rate_hz = fm.rate_hz;
  out.feature_names = fm.feature_names;
  const std::size_t d = fm.dim();
  std::size_t k = 0;  // excluded ranges are sorted and disjoint
  for (std::size_t r = 0; r < fm.steps(); ++r) {
    const double t = fm.times[r];
    while (k < excluded.size() && excluded[k].second <= t) ++k;
    if (k < excluded.size() && excluded[k].first <= t) continue;
    out.times.push_back(t);
    out.values.insert(out.values.end(), fm.values.begin() + static_cast<long>(r * d),
                      fm.values.begin() + static_cast<long>((r + 1) * d));
  }
  return out;
}

Tensor pool_time(const double* values, std::size_t rows, std::size_t dim,
                 std::size_t max_steps) {
  if (rows == 0 || dim == 0 || max_steps == 0) throw ValidationError("cannot pool an empty window");
  const std::size_t bins = std::min(rows, max_steps);
  Tensor out({bins, dim});
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * rows / bins;
    const std::size_t hi = (b + 1) * rows / bins;
    for (std::size_t r = lo; r < hi; ++r) {
      for (std::size_t c = 0; c < dim; ++c) out.at(b, c) += values[r * dim + c];
    }
    const double inv = 1.0 / static_cast<double>(hi - lo);
    for (std::size_t c = 0; c < dim; ++c) out.at(b, c) *= inv;
  }
  return out;
}

std::vector<Segment> segment_stream(const FeatureMatrix& fm, const PreprocessConfig& config,
                                    const std::string& session_id) {
  if (fm.empty()) throw ValidationError("cannot segment an empty feature stream");
  if (!(fm.rate_hz > 0.0) || !std::isfinite(fm.rate_hz)) {
    throw ValidationError("feature rate must be positive");
  }
  if (!(config.window_s > 0.0) || config.max_steps == 0) {
    throw ValidationError("window length and max_steps must be positive");
  }
  const auto window_rows = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(config.window_s * fm.rate_hz)));
  const std::size_t n = fm.steps();
  const std::size_t d = fm.dim();
  std::vector<Segment> segments;
  for (std::size_t start = 0; start < n; start += window_rows) {
    const std::size_t rows = std::min(window_rows, n - start);
    const double duration = static_cast<double>(rows) / fm.rate_hz;
    if (rows < window_rows && duration < config.min_tail_s) break;
    Segment seg;
    seg.session_id = session_id;
    seg.modality = fm.modality;
    seg.window_index = segments.size();
    seg.duration_s = duration;
    seg.frames = pool_time(fm.values.data() + start * d, rows, d, config.max_steps);
    segments.push_back(std::move(seg));
  }
  return segments;
}

CleanedText clean_text(std::string_view raw) {
  std::string text;
  text.reserve(raw.size());
  char closing = 0;
  for (char ch : raw) {
    if (closing != 0) {
      if (ch == closing) {
        closing = 0;
        text.push_back(' ');
      }
      continue;
    }
    if (ch == '<') {
      closing = '>';
      continue;
    }
    if (ch == '[') {
      closing = ']';
      continue;
    }
    text.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  CleanedText out;
  std::istringstream words(text);
  std::string word;
  while (words >> word) {
    if (!out.text.empty()) out.text.push_back(' ');
    out.text += word;
  }
  out.empty = out.text.empty();
  return out;
}

}  // namespace depscreen
