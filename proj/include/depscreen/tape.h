// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef DEPSCREEN_TAPE_H_
#define DEPSCREEN_TAPE_H_

#include <cstddef>
#include <map>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "depscreen/tensor.h"

namespace depscreen {

// Operation kinds recorded on a tape. Shape rules:
//   kMatmul      [n,k] x [k,m] -> [n,m]
//   kAdd/kSubtract/kMultiply   identical shapes, elementwise
//   kConcat      same shape except the last axis, joined along it
//   kSlice       last axis columns [begin, end)
//   kTranspose   [n,m] -> [m,n]
//   kReshape     any shape with the same element count
//   kTileRows    [1,d] -> [n,d] (explicit row repeat; no implicit broadcast)
//   kRelu/kTanh  elementwise
//   kSoftmax     along the last axis
//   kLayerNorm   zero mean / unit variance along the last axis, no affine
//   kMean/kSum   all elements -> [1]
//   kL2Norm      Euclidean norm of all elements -> [1]
//   kNormalize   each last-axis slice divided by its L2 norm
//   kScale       multiply by a constant
//   kShift       add a constant
enum class OpKind {
  kLeaf,
  kMatmul,
  kAdd,
  kSubtract,
  kMultiply,
  kConcat,
  kSlice,
  kTranspose,
  kReshape,
  kTileRows,
  kRelu,
  kTanh,
  kSoftmax,
  kLayerNorm,
  kMean,
  kSum,
  kL2Norm,
  kNormalize,
  kScale,
  kShift,
};

std::string_view op_name(OpKind kind);

// Handle to a value recorded on a Tape. Only meaningful for the tape that
// produced it.
struct Var {
  std::size_t id = 0;
};

// Gradient of the loss with respect to every leaf that requires grad,
// keyed by Var id. Unreachable leaves map to zeros.
using GradientMap = std::map<std::size_t, Tensor>;

// Records operations for reverse-mode differentiation. A tape is owned by a
// single thread; separate tapes share nothing.
class Tape {
 public:
  static constexpr double kLayerNormEpsilon = 1e-9;

  Var leaf(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(Tensor value) { return leaf(std::move(value), true); }

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var subtract(Var a, Var b);
  Var multiply(Var a, Var b);
  Var concat(std::span<const Var> parts);
  Var slice(Var a, std::size_t begin, std::size_t end);
  Var transpose(Var a);
  Var reshape(Var a, Shape shape);
  Var tile_rows(Var a, std::size_t rows);
  Var relu(Var a);
  Var tanh(Var a);
  Var softmax(Var a);
  Var layer_norm(Var a);
  Var mean(Var a);
  Var sum(Var a);
  Var l2_norm(Var a);
  Var normalize(Var a);
  Var scale(Var a, double factor);
  Var shift(Var a, double offset);

  const Tensor& value(Var v) const;
  OpKind kind(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Replaces a leaf value; takes effect on the next replay().
  void set_leaf(Var v, Tensor value);
  // Recomputes every node from the current leaf values, in recording order,
  // and re-arms backward().
  void replay();

  // Reverse sweep from a scalar loss. A tape can be differentiated once per
  // forward pass; call replay() before differentiating again.
  GradientMap backward(Var loss);

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<std::size_t> inputs;
    Tensor value;
    bool requires_grad = false;
    double constant = 0.0;
    std::size_t begin = 0;
    std::size_t end = 0;
    Shape target_shape;
    Tensor saved;  // op-specific auxiliary values (norms, inverse std)
  };

  Var record(Node node);
  void compute(Node& node) const;
  void accumulate_input_grads(const Node& node, const Tensor& grad,
                              std::vector<Tensor>& grads,
                              std::vector<bool>& has_grad) const;
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

}  // namespace depscreen

#endif  // DEPSCREEN_TAPE_H_
