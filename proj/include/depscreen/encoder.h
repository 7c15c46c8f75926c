// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_ENCODER_H_
#define DEPSCREEN_ENCODER_H_

#include <cstddef>
#include <string>
#include <vector>

#include "depscreen/params.h"
#include "depscreen/random.h"
#include "depscreen/tape.h"
#include "depscreen/tensor.h"

namespace depscreen {

// Attention-based multivariate time-series encoder:
//   input projection -> + sinusoidal positions -> blocks of
//   (multi-head self-attention, feed-forward), each with a residual and a
//   post layer norm -> dense interpolation to M summary steps -> flatten ->
//   output projection -> L2 normalization.
struct EncoderConfig {
  std::size_t input_dim = 1;
  std::size_t model_dim = 64;
  std::size_t num_blocks = 2;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 128;
  std::size_t interpolation_factor = 4;
  std::size_t embedding_dim = 64;
  bool positional_encoding = true;

  std::size_t head_dim() const { return model_dim / num_heads; }
  // Throws ValidationError on zero dims, odd model_dim (positional encoding)
  // or a head count that does not divide model_dim.
  void validate() const;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Glorot-uniform weights, zero biases, unit layer-norm gains.
ParameterSet init_encoder(const EncoderConfig& config, Rng& rng);

// T x d matrix, entry(t, 2i) = sin(t / 10000^(2i/d)),
// entry(t, 2i+1) = cos(t / 10000^(2i/d)). d must be even.
Tensor positional_encoding(std::size_t steps, std::size_t dim);

// M x T interpolation weights w(m, t) = (1 - |s_t - m| / M)^2 with
// s_t = M * t / T, using 1-based m and t.
Tensor interpolation_weights(std::size_t steps, std::size_t factor);

struct AttentionResult {
  Var output;                 // T x model_dim, after residual + layer norm
  std::vector<Var> weights;   // one T x T row-stochastic matrix per head
};

// Scaled dot-product self-attention with `num_heads` heads under
// `prefix` ("block0.attn." style names), followed by residual + layer norm.
AttentionResult multi_head_attention(Tape& tape, Var x,
                                     const BoundParameters& params,
                                     const std::string& prefix,
                                     std::size_t num_heads);

// M x model_dim weighted summary of T x model_dim hidden states.
Var dense_interpolation(Tape& tape, Var hidden, std::size_t factor);

// Hidden states after the attention blocks (before interpolation).
Var encode_hidden(Tape& tape, const BoundParameters& params,
                  const std::string& prefix, const EncoderConfig& config,
                  const Tensor& frames);

// Unit-norm 1 x embedding_dim embedding recorded on `tape`.
Var encode_segment(Tape& tape, const BoundParameters& params,
                   const std::string& prefix, const EncoderConfig& config,
                   const Tensor& frames);

// Inference with frozen parameters. Safe to call concurrently.
std::vector<double> encode_segment(const Tensor& frames,
                                   const ParameterSet& params,
                                   const EncoderConfig& config);

}  // namespace depscreen

#endif  // DEPSCREEN_ENCODER_H_
