// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/encoder.h"

#include <cmath>
#include <string>

#include "depscreen/errors.h"

namespace depscreen {
namespace {

std::string block_prefix(std::size_t b) { return "block" + std::to_string(b) + "."; }

Var affine_layer_norm(Tape& tape, Var x, const BoundParameters& params,
                      const std::string& name) {
  const std::size_t rows = tape.value(x).rows();
  Var gamma = tape.tile_rows(params[name + ".gamma"], rows);
  Var beta = tape.tile_rows(params[name + ".beta"], rows);
  return tape.add(tape.multiply(tape.layer_norm(x), gamma), beta);
}

Var linear(Tape& tape, Var x, const BoundParameters& params,
           const std::string& name) {
  const std::size_t rows = tape.value(x).rows();
  return tape.add(tape.matmul(x, params[name + ".w"]),
                  tape.tile_rows(params[name + ".b"], rows));
}

void add_linear(ParameterSet& params, const std::string& name, std::size_t in,
                std::size_t out, Rng& rng) {
  params.set(name + ".w", glorot_uniform(in, out, rng));
  params.set(name + ".b", Tensor({1, out}));
}

void add_layer_norm(ParameterSet& params, const std::string& name,
                    std::size_t dim) {
  params.set(name + ".gamma", Tensor::filled({1, dim}, 1.0));
  params.set(name + ".beta", Tensor({1, dim}));
}

}  // namespace

void EncoderConfig::validate() const {
  if (input_dim == 0 || model_dim == 0 || num_blocks == 0 || num_heads == 0 ||
      ffn_dim == 0 || interpolation_factor == 0 || embedding_dim == 0) {
    throw ValidationError("encoder dimensions must all be >= 1");
  }
  if (model_dim % num_heads != 0) {
    throw ValidationError("model_dim " + std::to_string(model_dim) +
                          " is not divisible by num_heads " +
                          std::to_string(num_heads));
  }
  if (model_dim % 2 != 0) {
    throw ValidationError("model_dim must be even for positional encoding");
  }
}

ParameterSet init_encoder(const EncoderConfig& config, Rng& rng) {
  config.validate();
  const std::size_t d = config.model_dim;
  ParameterSet params;
  add_linear(params, "in_proj", config.input_dim, d, rng);
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string p = block_prefix(b);
    for (std::size_t h = 0; h < config.num_heads; ++h) {
      const std::string head = std::to_string(h);
      params.set(p + "attn.q" + head, glorot_uniform(d, config.head_dim(), rng));
      params.set(p + "attn.k" + head, glorot_uniform(d, config.head_dim(), rng));
      params.set(p + "attn.v" + head, glorot_uniform(d, config.head_dim(), rng));
    }
    add_linear(params, p + "attn.out", d, d, rng);
    add_layer_norm(params, p + "attn.ln", d);
    add_linear(params, p + "ffn.in", d, config.ffn_dim, rng);
    add_linear(params, p + "ffn.out", config.ffn_dim, d, rng);
    add_layer_norm(params, p + "ffn.ln", d);
  }
  add_linear(params, "out_proj", config.interpolation_factor * d,
             config.embedding_dim, rng);
  return params;
}

Tensor positional_encoding(std::size_t steps, std::size_t dim) {
  if (steps == 0) throw ShapeError("positional encoding needs >= 1 step");
  if (dim == 0 || dim % 2 != 0) {
    throw ValidationError("positional encoding dimension must be even, got " +
                          std::to_string(dim));
  }
  Tensor pe({steps, dim});
  for (std::size_t t = 0; t < steps; ++t) {
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double rate =
          std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(dim));
      const double angle = static_cast<double>(t) / rate;
      pe.at(t, 2 * i) = std::sin(angle);
      pe.at(t, 2 * i + 1) = std::cos(angle);
    }
  }
  return pe;
}

Tensor interpolation_weights(std::size_t steps, std::size_t factor) {
  if (steps == 0 || factor == 0) {
    throw ShapeError("dense interpolation needs T >= 1 and M >= 1");
  }
  const double m_total = static_cast<double>(factor);
  Tensor w({factor, steps});
  for (std::size_t t = 1; t <= steps; ++t) {
    const double s = m_total * static_cast<double>(t) / static_cast<double>(steps);
    for (std::size_t m = 1; m <= factor; ++m) {
      const double v = 1.0 - std::abs(s - static_cast<double>(m)) / m_total;
      w.at(m - 1, t - 1) = v * v;
    }
  }
  return w;
}

AttentionResult multi_head_attention(Tape& tape, Var x,
                                     const BoundParameters& params,
                                     const std::string& prefix,
                                     std::size_t num_heads) {
  const Tensor& xv = tape.value(x);
  if (num_heads == 0 || xv.cols() % num_heads != 0) {
    throw ValidationError("model_dim " + std::to_string(xv.cols()) +
                          " is not divisible by num_heads " +
                          std::to_string(num_heads));
  }
  const double inv_sqrt_dk =
      1.0 / std::sqrt(static_cast<double>(xv.cols() / num_heads));

  AttentionResult result;
  std::vector<Var> heads;
  heads.reserve(num_heads);
  for (std::size_t h = 0; h < num_heads; ++h) {
    const std::string head = std::to_string(h);
    Var q = tape.matmul(x, params[prefix + "q" + head]);
    Var k = tape.matmul(x, params[prefix + "k" + head]);
    Var v = tape.matmul(x, params[prefix + "v" + head]);
    Var scores = tape.scale(tape.matmul(q, tape.transpose(k)), inv_sqrt_dk);
    Var weights = tape.softmax(scores);
    result.weights.push_back(weights);
    heads.push_back(tape.matmul(weights, v));
  }
  Var joined = tape.concat(heads);
  Var projected = linear(tape, joined, params, prefix + "out");
  result.output =
      affine_layer_norm(tape, tape.add(x, projected), params, prefix + "ln");
  return result;
}

Var dense_interpolation(Tape& tape, Var hidden, std::size_t factor) {
  const std::size_t steps = tape.value(hidden).rows();
  return tape.matmul(tape.constant(interpolation_weights(steps, factor)), hidden);
}

Var encode_hidden(Tape& tape, const BoundParameters& params,
                  const std::string& prefix, const EncoderConfig& config,
                  const Tensor& frames) {
  if (frames.rank() != 2) throw ShapeError("segment frames must be T x d");
  if (frames.cols() != config.input_dim) {
    throw ShapeError("segment feature dimension " + std::to_string(frames.cols()) +
                     " does not match encoder input_dim " +
                     std::to_string(config.input_dim));
  }
  const std::size_t steps = frames.rows();
  Var h = linear(tape, tape.constant(frames), params, prefix + "in_proj");
  if (config.positional_encoding) {
    h = tape.add(h, tape.constant(positional_encoding(steps, config.model_dim)));
  }
  for (std::size_t b = 0; b < config.num_blocks; ++b) {
    const std::string p = prefix + block_prefix(b);
    h = multi_head_attention(tape, h, params, p + "attn.", config.num_heads).output;
    Var ff = linear(tape, tape.relu(linear(tape, h, params, p + "ffn.in")), params,
                    p + "ffn.out");
    h = affine_layer_norm(tape, tape.add(h, ff), params, p + "ffn.ln");
  }
  return h;
}

Var encode_segment(Tape& tape, const BoundParameters& params,
                   const std::string& prefix, const EncoderConfig& config,
                   const Tensor& frames) {
  Var h = encode_hidden(tape, params, prefix, config, frames);
  Var summary = dense_interpolation(tape, h, config.interpolation_factor);
  Var flat = tape.reshape(
      summary, {1, config.interpolation_factor * config.model_dim});
  return tape.normalize(linear(tape, flat, params, prefix + "out_proj"));
}

std::vector<double> encode_segment(const Tensor& frames,
                                   const ParameterSet& params,
                                   const EncoderConfig& config) {
  Tape tape;
  BoundParameters bound(tape, params, false);
  return tape.value(encode_segment(tape, bound, "", config, frames)).values();
}

}  // namespace depscreen
