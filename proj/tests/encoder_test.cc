// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "depscreen/encoder.h"
#include "depscreen/errors.h"
#include "depscreen/text_embedder.h"
#include "gtest/gtest.h"

namespace depscreen {
namespace {

EncoderConfig small_config(std::size_t input_dim) {
  EncoderConfig c;
  c.input_dim = input_dim;
  c.model_dim = 8;
  c.num_blocks = 2;
  c.num_heads = 2;
  c.ffn_dim = 16;
  c.interpolation_factor = 3;
  c.embedding_dim = 6;
  return c;
}

Tensor random_frames(std::size_t steps, std::size_t dim, Rng& rng) {
  Tensor t({steps, dim});
  for (double& v : t.data()) v = rng.normal();
  return t;
}

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

TEST(PositionalEncoding, FirstRowAlternates) {
  const Tensor pe = positional_encoding(5, 6);
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(pe.at(0, c), c % 2 == 0 ? 0.0 : 1.0);
}

TEST(PositionalEncoding, ValuesInUnitRange) {
  const Tensor pe = positional_encoding(120, 64);
  for (double v : pe.data()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(PositionalEncoding, DirectEvaluation) {
  const Tensor pe = positional_encoding(3, 4);
  EXPECT_NEAR(pe.at(1, 0), 0.8414709848078965, 1e-15);
  // i = 1: rate 10000^(2/4) = 100.
  EXPECT_NEAR(pe.at(2, 2), std::sin(2.0 / 100.0), 1e-15);
  EXPECT_NEAR(pe.at(2, 3), std::cos(2.0 / 100.0), 1e-15);
}

TEST(PositionalEncoding, OddDimensionRejected) {
  EXPECT_THROW(positional_encoding(3, 5), ValidationError);
}

TEST(DenseInterpolation, SingleStepSingleSummary) {
  Tape tape;
  Var h = tape.constant(Tensor::row({0.5, -2.0, 3.0}));
  EXPECT_EQ(tape.value(dense_interpolation(tape, h, 1)), Tensor::row({0.5, -2.0, 3.0}));
}

TEST(DenseInterpolation, ConstantRowsGivePositiveMultiples) {
  Tape tape;
  const std::vector<double> row = {1.0, -2.0, 0.5};
  std::vector<double> data;
  for (int t = 0; t < 7; ++t) data.insert(data.end(), row.begin(), row.end());
  Var h = tape.constant(Tensor::matrix(7, 3, data));
  const Tensor u = tape.value(dense_interpolation(tape, h, 4));
  for (std::size_t m = 0; m < 4; ++m) {
    const double factor = u.at(m, 0) / row[0];
    EXPECT_GT(factor, 0.0);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(u.at(m, c), factor * row[c], 1e-12);
  }
}

TEST(DenseInterpolation, HandEvaluatedWeights) {
  // T=2, M=2: s = (1, 2); w(1,1)=1, w(1,2)=(1-1/2)^2, w(2,1)=(1-1/2)^2, w(2,2)=1.
  Tape tape;
  Var h = tape.constant(Tensor::matrix({{1, 0}, {0, 1}}));
  EXPECT_EQ(tape.value(dense_interpolation(tape, h, 2)),
            Tensor::matrix({{1.0, 0.25}, {0.25, 1.0}}));
}

TEST(MultiHeadAttention, SingleStepHasUnitWeight) {
  Rng rng(1);
  const EncoderConfig config = small_config(3);
  const ParameterSet params = init_encoder(config, rng);
  Tape tape;
  BoundParameters bound(tape, params, false);
  Var x = tape.constant(random_frames(1, 8, rng));
  const AttentionResult r = multi_head_attention(tape, x, bound, "block0.attn.", 2);
  ASSERT_EQ(r.weights.size(), 2u);
  for (Var w : r.weights) EXPECT_EQ(tape.value(w), Tensor::matrix({{1.0}}));
  EXPECT_EQ(tape.value(r.output).shape(), (Shape{1, 8}));
}

TEST(MultiHeadAttention, WeightRowsSumToOne) {
  Rng rng(2);
  const EncoderConfig config = small_config(3);
  const ParameterSet params = init_encoder(config, rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tape tape;
    BoundParameters bound(tape, params, false);
    Var x = tape.constant(random_frames(2 + rng.below(10), 8, rng));
    const AttentionResult r = multi_head_attention(tape, x, bound, "block1.attn.", 2);
    for (Var w : r.weights) {
      const Tensor& wv = tape.value(w);
      for (std::size_t i = 0; i < wv.rows(); ++i) {
        double total = 0.0;
        for (std::size_t j = 0; j < wv.cols(); ++j) total += wv.at(i, j);
        EXPECT_NEAR(total, 1.0, 1e-9);
      }
    }
  }
}

TEST(MultiHeadAttention, IndivisibleHeadsRejected) {
  Rng rng(2);
  const ParameterSet params = init_encoder(small_config(3), rng);
  Tape tape;
  BoundParameters bound(tape, params, false);
  Var x = tape.constant(random_frames(3, 8, rng));
  EXPECT_THROW(multi_head_attention(tape, x, bound, "block0.attn.", 3), ValidationError);
}

TEST(EncoderConfig, Validation) {
  EncoderConfig c = small_config(3);
  c.num_heads = 3;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config(3);
  c.embedding_dim = 0;
  EXPECT_THROW(c.validate(), ValidationError);
}

// Without positional encoding the blocks are permutation-equivariant over
// timesteps: every one of the 24 orderings of a T=4 sequence permutes the
// hidden states identically.
TEST(EncodeHidden, PermutationEquivariantWithoutPositions) {
  Rng rng(5);
  EncoderConfig config = small_config(3);
  config.positional_encoding = false;
  const ParameterSet params = init_encoder(config, rng);
  const Tensor frames = random_frames(4, 3, rng);

  auto hidden = [&](const Tensor& f) {
    Tape tape;
    BoundParameters bound(tape, params, false);
    return tape.value(encode_hidden(tape, bound, "", config, f));
  };
  const Tensor base = hidden(frames);

  std::vector<std::size_t> perm = {0, 1, 2, 3};
  int count = 0;
  do {
    Tensor permuted({4, 3});
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 3; ++c) permuted.at(t, c) = frames.at(perm[t], c);
    const Tensor out = hidden(permuted);
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t c = 0; c < 8; ++c)
        EXPECT_NEAR(out.at(t, c), base.at(perm[t], c), 1e-12);
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  EXPECT_EQ(count, 24);
}

TEST(EncodeHidden, PositionsBreakEquivariance) {
  Rng rng(5);
  const EncoderConfig config = small_config(3);
  const ParameterSet params = init_encoder(config, rng);
  Tensor frames = random_frames(4, 3, rng);
  Tensor swapped = frames;
  for (std::size_t c = 0; c < 3; ++c) std::swap(swapped.at(0, c), swapped.at(1, c));
  Tape tape;
  BoundParameters bound(tape, params, false);
  const Tensor a = tape.value(encode_hidden(tape, bound, "", config, frames));
  const Tensor b = tape.value(encode_hidden(tape, bound, "", config, swapped));
  EXPECT_GT(std::abs(a.at(0, 0) - b.at(1, 0)), 1e-6);
}

TEST(EncodeSegment, UnitNormAndDeterministic) {
  Rng rng(8);
  const EncoderConfig config = small_config(5);
  const ParameterSet params = init_encoder(config, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor frames = random_frames(1 + rng.below(40), 5, rng);
    const auto e = encode_segment(frames, params, config);
    ASSERT_EQ(e.size(), 6u);
    EXPECT_NEAR(norm(e), 1.0, 1e-9);
    EXPECT_EQ(e, encode_segment(frames, params, config));
  }
}

TEST(EncodeSegment, DimensionMismatch) {
  Rng rng(8);
  const EncoderConfig config = small_config(5);
  const ParameterSet params = init_encoder(config, rng);
  EXPECT_THROW(encode_segment(random_frames(4, 4, rng), params, config), ShapeError);
}

TEST(EncodeSegment, DefaultConfigParameterCount) {
  Rng rng(0);
  EncoderConfig config;
  config.input_dim = 8;
  const ParameterSet params = init_encoder(config, rng);
  // in_proj + 2 blocks x (3 x 4 heads + out + ln + ffn in/out + ln) + out_proj
  EXPECT_EQ(params.size(), 2u + 2u * (12u + 2u + 2u + 4u + 2u) + 2u);
  const auto e = encode_segment(random_frames(120, 8, rng), params, config);
  EXPECT_EQ(e.size(), 64u);
}

TEST(TextEmbedder, ToyModeDeterministic) {
  TextEmbedder embedder(TextEmbedderSpec{});
  const auto a = embedder.embed("good sleep");
  const auto b = embedder.embed("good sleep");
  EXPECT_EQ(a, b);
  EXPECT_NEAR(norm(a), 1.0, 1e-12);
  EXPECT_NEAR(std::inner_product(a.begin(), a.end(), b.begin(), 0.0), 1.0, 1e-12);
  EXPECT_NE(a, embedder.embed("bad sleep"));
}

TEST(TextEmbedder, EmptyTextRejected) {
  TextEmbedder embedder(TextEmbedderSpec{});
  EXPECT_THROW(embedder.embed(""), ValidationError);
  EXPECT_THROW(embedder.embed("   "), ValidationError);
}

TEST(TextEmbedder, PrecomputedTable) {
  std::istringstream in("s1\t3,4\ns2\t0,2\n");
  EmbeddingTable table = EmbeddingTable::parse(in);
  TextEmbedderSpec spec;
  spec.mode = TextEmbedderMode::kPrecomputed;
  spec.dimension = 2;
  TextEmbedder embedder(spec, table);
  EXPECT_EQ(embedder.embed("s1"), (std::vector<double>{0.6, 0.8}));
  EXPECT_THROW(embedder.embed("missing"), NotFoundError);
}

TEST(EmbeddingTable, MalformedLinesReportLine) {
  std::istringstream in("s1\t1,2\ns2\t1,x\n");
  try {
    EmbeddingTable::parse(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2);
  }
  std::istringstream ragged("s1\t1,2\ns2\t1,2,3\n");
  EXPECT_THROW(EmbeddingTable::parse(ragged), ParseError);
}

TEST(EmbeddingTable, WriteThenParseRoundTrips) {
  EmbeddingTable table;
  table.insert("a", {0.1, 1.0 / 3.0});
  table.insert("b", {-2.5e-17, 7.0});
  std::stringstream ss;
  table.write(ss);
  const EmbeddingTable back = EmbeddingTable::parse(ss);
  EXPECT_EQ(back.get("a"), table.get("a"));
  EXPECT_EQ(back.get("b"), table.get("b"));
}

}  // namespace
}  // namespace depscreen
