// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_TEXT_EMBEDDER_H_
#define DEPSCREEN_TEXT_EMBEDDER_H_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace depscreen {

enum class TextEmbedderMode { kPrecomputed, kToyHashedNgram };

struct TextEmbedderSpec {
  TextEmbedderMode mode = TextEmbedderMode::kToyHashedNgram;
  std::size_t dimension = 64;
  std::size_t hash_buckets = 4096;
  std::uint64_t projection_seed = 0x7e7751eedULL;
};

// Precomputed sentence embeddings, one `key<TAB>v1,v2,...,vd` record per line.
class EmbeddingTable {
 public:
  static EmbeddingTable parse(std::istream& in);
  static EmbeddingTable load(const std::string& path);

  void insert(const std::string& key, std::vector<double> values);
  bool contains(const std::string& key) const { return rows_.count(key) != 0; }
  const std::vector<double>& get(const std::string& key) const;
  std::size_t size() const { return rows_.size(); }
  std::size_t dimension() const { return dimension_; }
  void write(std::ostream& out) const;

 private:
  std::map<std::string, std::vector<double>> rows_;
  std::size_t dimension_ = 0;
};

// Source of per-session text vectors. In precomputed mode the input is a
// table key; in toy mode it is cleaned text whose unigram and bigram hashes
// are projected through a fixed pseudo-random matrix. Output is unit-norm.
class TextEmbedder {
 public:
  explicit TextEmbedder(TextEmbedderSpec spec, EmbeddingTable table = {});

  std::vector<double> embed(std::string_view text_or_key) const;
  const TextEmbedderSpec& spec() const { return spec_; }

 private:
  std::vector<double> embed_toy(std::string_view text) const;

  TextEmbedderSpec spec_;
  EmbeddingTable table_;
};

// L2-normalizes in place; throws NumericError on a zero or non-finite vector.
void normalize_in_place(std::vector<double>& v);

}  // namespace depscreen

#endif  // DEPSCREEN_TEXT_EMBEDDER_H_
