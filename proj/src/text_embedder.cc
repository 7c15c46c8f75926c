// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/text_embedder.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "depscreen/errors.h"
#include "depscreen/format.h"
#include "depscreen/random.h"

namespace depscreen {

void normalize_in_place(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x * x;
  const double norm = std::sqrt(total);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericError("cannot normalize a zero or non-finite vector");
  }
  for (double& x : v) x /= norm;
}

EmbeddingTable EmbeddingTable::parse(std::istream& in) {
  EmbeddingTable table;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      throw ParseError("expected key<TAB>values", line_no);
    }
    std::vector<double> values;
    for (std::string_view cell : split(std::string_view(line).substr(tab + 1), ',')) {
      values.push_back(parse_double(cell, line_no));
    }
    try {
      table.insert(line.substr(0, tab), std::move(values));
    } catch (const Error& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  return table;
}

EmbeddingTable EmbeddingTable::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding table " + path);
  return parse(in);
}

void EmbeddingTable::insert(const std::string& key, std::vector<double> values) {
  if (values.empty()) throw ValidationError("empty embedding for key " + key);
  if (dimension_ != 0 && values.size() != dimension_) {
    throw ValidationError("embedding for key " + key + " has dimension " +
                          std::to_string(values.size()) + ", table has " +
                          std::to_string(dimension_));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("non-finite embedding value");
  }
  dimension_ = values.size();
  rows_.insert_or_assign(key, std::move(values));
}

const std::vector<double>& EmbeddingTable::get(const std::string& key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) throw NotFoundError("no text embedding for key " + key);
  return it->second;
}

void EmbeddingTable::write(std::ostream& out) const {
  for (const auto& [key, values] : rows_) {
    out << key << '\t';
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (i) out << ',';
      out << format_double(values[i]);
    }
    out << '\n';
  }
}

TextEmbedder::TextEmbedder(TextEmbedderSpec spec, EmbeddingTable table)
    : spec_(spec), table_(std::move(table)) {
  if (spec_.dimension == 0 || spec_.hash_buckets == 0) {
    throw ValidationError("text embedder dimension and buckets must be positive");
  }
  if (spec_.mode == TextEmbedderMode::kPrecomputed && table_.size() > 0 &&
      table_.dimension() != spec_.dimension) {
    throw ValidationError("embedding table dimension " +
                          std::to_string(table_.dimension()) +
                          " does not match expected " +
                          std::to_string(spec_.dimension));
  }
}

std::vector<double> TextEmbedder::embed(std::string_view text_or_key) const {
  if (text_or_key.empty()) throw ValidationError("empty text");
  if (spec_.mode == TextEmbedderMode::kPrecomputed) {
    std::vector<double> v = table_.get(std::string(text_or_key));
    normalize_in_place(v);
    return v;
  }
  return embed_toy(text_or_key);
}

std::vector<double> TextEmbedder::embed_toy(std::string_view text) const {
  std::vector<std::string_view> tokens;
  for (std::string_view tok : split(text, ' ')) {
    if (!tok.empty()) tokens.push_back(tok);
  }
  if (tokens.empty()) throw ValidationError("empty text");

  std::map<std::uint64_t, double> counts;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    counts[fnv1a64(tokens[i]) % spec_.hash_buckets] += 1.0;
    if (i + 1 < tokens.size()) {
      std::string bigram(tokens[i]);
      bigram += ' ';
      bigram += tokens[i + 1];
      counts[fnv1a64(bigram) % spec_.hash_buckets] += 1.0;
    }
  }

  // Row b of the projection is regenerated from (seed, b) on demand.
  std::vector<double> out(spec_.dimension, 0.0);
  for (const auto& [bucket, count] : counts) {
    Rng rng(derive_seed(spec_.projection_seed, bucket));
    for (double& v : out) v += count * rng.normal();
  }
  normalize_in_place(out);
  return out;
}

}  // namespace depscreen
