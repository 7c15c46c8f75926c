// Copyright 2026 The depscreen Authors.
// SPDX-License-Identifier: Apache-2.0

#include "depscreen/tape.h"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "depscreen/errors.h"

namespace depscreen {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSubtract: return "subtract";
    case OpKind::kMultiply: return "multiply";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTileRows: return "tile_rows";
    case OpKind::kRelu: return "relu";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kL2Norm: return "l2_norm";
    case OpKind::kNormalize: return "normalize";
    case OpKind::kScale: return "scale";
    case OpKind::kShift: return "shift";
  }
  return "unknown";
}

namespace {

// c[n,m] += a[n,k] * b[k,m]
void gemm_nn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    double* crow = c + i * m;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[n,k] += a[n,m] * b[k,m]^T
void gemm_nt(const double* a, const double* b, double* c, std::size_t n,
             std::size_t m, std::size_t k) {
  // Transposing b first keeps the inner loop a contiguous axpy.
  std::vector<double> bt(m * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t j = 0; j < m; ++j) bt[j * k + p] = b[p * m + j];
  gemm_nn(a, bt.data(), c, n, m, k);
}

// c[k,m] += a[n,k]^T * b[n,m]
void gemm_tn(const double* a, const double* b, double* c, std::size_t n,
             std::size_t k, std::size_t m) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * m;
      for (std::size_t j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

void require_rank2(const Tensor& t, std::string_view op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a rank-2 tensor, got " +
                     shape_string(t.shape()));
  }
}

void require_same_shape(const Tensor& a, const Tensor& b, std::string_view op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + " shape mismatch: " +
                     shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

}  // namespace

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) {
    throw ValidationError("variable " + std::to_string(v.id) +
                          " is not recorded on this tape");
  }
  return nodes_[v.id];
}

const Tensor& Tape::value(Var v) const { return node(v).value; }

OpKind Tape::kind(Var v) const { return node(v).kind; }

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NumericError("non-finite leaf value");
  Node n;
  n.kind = OpKind::kLeaf;
  n.requires_grad = requires_grad;
  value.set_requires_grad(requires_grad);
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  consumed_ = false;
  return Var{nodes_.size() - 1};
}

Var Tape::record(Node n) {
  for (std::size_t in : n.inputs) {
    if (in >= nodes_.size()) {
      throw ValidationError("input variable is not recorded on this tape");
    }
    n.requires_grad = n.requires_grad || nodes_[in].requires_grad;
  }
  compute(n);
  nodes_.push_back(std::move(n));
  consumed_ = false;
  return Var{nodes_.size() - 1};
}

void Tape::compute(Node& n) const {
  auto in = [&](std::size_t i) -> const Tensor& {
    return nodes_[n.inputs[i]].value;
  };
  switch (n.kind) {
    case OpKind::kLeaf:
      return;
    case OpKind::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_rank2(a, "matmul");
      require_rank2(b, "matmul");
      if (a.cols() != b.rows()) {
        throw ShapeError("matmul inner dimensions differ: " +
                         shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
      }
      Tensor out({a.rows(), b.cols()});
      gemm_nn(a.data().data(), b.data().data(), out.data().data(), a.rows(),
              a.cols(), b.cols());
      n.value = std::move(out);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSubtract:
    case OpKind::kMultiply: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      require_same_shape(a, b, op_name(n.kind));
      Tensor out(a.shape());
      for (std::size_t i = 0; i < a.size(); ++i) {
        out[i] = n.kind == OpKind::kAdd        ? a[i] + b[i]
                 : n.kind == OpKind::kSubtract ? a[i] - b[i]
                                               : a[i] * b[i];
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kConcat: {
      const Tensor& first = in(0);
      Shape lead(first.shape().begin(), first.shape().end() - 1);
      std::size_t total = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& p = in(i);
        if (Shape(p.shape().begin(), p.shape().end() - 1) != lead) {
          throw ShapeError("concat leading dimensions differ: " +
                           shape_string(first.shape()) + " vs " +
                           shape_string(p.shape()));
        }
        total += p.last_dim();
      }
      Shape shape = lead;
      shape.push_back(total);
      Tensor out(shape);
      const std::size_t outer = first.outer();
      std::size_t offset = 0;
      for (std::size_t i = 0; i < n.inputs.size(); ++i) {
        const Tensor& p = in(i);
        const std::size_t w = p.last_dim();
        for (std::size_t r = 0; r < outer; ++r) {
          std::copy_n(p.data().data() + r * w, w,
                      out.data().data() + r * total + offset);
        }
        offset += w;
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSlice: {
      const Tensor& a = in(0);
      if (n.begin >= n.end || n.end > a.last_dim()) {
        throw ShapeError("slice [" + std::to_string(n.begin) + "," +
                         std::to_string(n.end) + ") out of range for " +
                         shape_string(a.shape()));
      }
      Shape shape = a.shape();
      const std::size_t w = n.end - n.begin;
      shape.back() = w;
      Tensor out(shape);
      for (std::size_t r = 0; r < a.outer(); ++r) {
        std::copy_n(a.data().data() + r * a.last_dim() + n.begin, w,
                    out.data().data() + r * w);
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kTranspose: {
      const Tensor& a = in(0);
      require_rank2(a, "transpose");
      Tensor out({a.cols(), a.rows()});
      for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
      n.value = std::move(out);
      break;
    }
    case OpKind::kReshape: {
      const Tensor& a = in(0);
      if (shape_size(n.target_shape) != a.size()) {
        throw ShapeError("reshape " + shape_string(a.shape()) + " -> " +
                         shape_string(n.target_shape) +
                         " changes the element count");
      }
      n.value = Tensor(n.target_shape, a.values());
      break;
    }
    case OpKind::kTileRows: {
      const Tensor& a = in(0);
      if (a.rows() != 1 || n.begin == 0) {
        throw ShapeError("tile_rows expects a single row and a positive count");
      }
      Tensor out({n.begin, a.cols()});
      for (std::size_t r = 0; r < n.begin; ++r)
        std::copy_n(a.data().data(), a.cols(), out.data().data() + r * a.cols());
      n.value = std::move(out);
      break;
    }
    case OpKind::kRelu:
    case OpKind::kTanh: {
      Tensor out = in(0);
      out.set_requires_grad(false);
      for (double& v : out.data()) {
        v = n.kind == OpKind::kRelu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kSoftmax: {
      Tensor out = in(0);
      out.set_requires_grad(false);
      const std::size_t w = out.last_dim();
      for (std::size_t r = 0; r < out.outer(); ++r) {
        double* row = out.data().data() + r * w;
        const double mx = *std::max_element(row, row + w);
        double total = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          row[j] = std::exp(row[j] - mx);
          total += row[j];
        }
        for (std::size_t j = 0; j < w; ++j) row[j] /= total;
      }
      n.value = std::move(out);
      break;
    }
    case OpKind::kLayerNorm: {
      Tensor out = in(0);
      out.set_requires_grad(false);
      const std::size_t w = out.last_dim();
      Tensor inv_std({out.outer()});
      for (std::size_t r = 0; r < out.outer(); ++r) {
        double* row = out.data().data() + r * w;
        double mu = 0.0;
        for (std::size_t j = 0; j < w; ++j) mu += row[j];
        mu /= static_cast<double>(w);
        double var = 0.0;
        for (std::size_t j = 0; j < w; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(w);
        const double is = 1.0 / std::sqrt(var + kLayerNormEpsilon);
        for (std::size_t j = 0; j < w; ++j) row[j] = (row[j] - mu) * is;
        inv_std[r] = is;
      }
      n.saved = std::move(inv_std);
      n.value = std::move(out);
      break;
    }
    case OpKind::kMean:
    case OpKind::kSum: {
      const Tensor& a = in(0);
      double total = 0.0;
      for (double v : a.data()) total += v;
      if (n.kind == OpKind::kMean) total /= static_cast<double>(a.size());
      n.value = Tensor::scalar(total);
      break;
    }
    case OpKind::kL2Norm: {
      double total = 0.0;
      for (double v : in(0).data()) total += v * v;
      n.value = Tensor::scalar(std::sqrt(total));
      break;
    }
    case OpKind::kNormalize: {
      Tensor out = in(0);
      out.set_requires_grad(false);
      const std::size_t w = out.last_dim();
      Tensor norms({out.outer()});
      for (std::size_t r = 0; r < out.outer(); ++r) {
        double* row = out.data().data() + r * w;
        double total = 0.0;
        for (std::size_t j = 0; j < w; ++j) total += row[j] * row[j];
        const double norm = std::sqrt(total);
        if (!(norm > 0.0)) throw NumericError("normalize of a zero vector");
        for (std::size_t j = 0; j < w; ++j) row[j] /= norm;
        norms[r] = norm;
      }
      n.saved = std::move(norms);
      n.value = std::move(out);
      break;
    }
    case OpKind::kScale:
    case OpKind::kShift: {
      Tensor out = in(0);
      out.set_requires_grad(false);
      for (double& v : out.data()) {
        v = n.kind == OpKind::kScale ? v * n.constant : v + n.constant;
      }
      n.value = std::move(out);
      break;
    }
  }
  if (!n.value.all_finite()) {
    throw NumericError("non-finite result from " + std::string(op_name(n.kind)));
  }
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.kind = OpKind::kMatmul;
  n.inputs = {a.id, b.id};
  return record(std::move(n));
}

Var Tape::add(Var a, Var b) {
  Node n;
  n.kind = OpKind::kAdd;
  n.inputs = {a.id, b.id};
  return record(std::move(n));
}

Var Tape::subtract(Var a, Var b) {
  Node n;
  n.kind = OpKind::kSubtract;
  n.inputs = {a.id, b.id};
  return record(std::move(n));
}

Var Tape::multiply(Var a, Var b) {
  Node n;
  n.kind = OpKind::kMultiply;
  n.inputs = {a.id, b.id};
  return record(std::move(n));
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  Node n;
  n.kind = OpKind::kConcat;
  for (Var v : parts) n.inputs.push_back(v.id);
  return record(std::move(n));
}

Var Tape::slice(Var a, std::size_t begin, std::size_t end) {
  Node n;
  n.kind = OpKind::kSlice;
  n.inputs = {a.id};
  n.begin = begin;
  n.end = end;
  return record(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.kind = OpKind::kTranspose;
  n.inputs = {a.id};
  return record(std::move(n));
}

Var Tape::reshape(Var a, Shape shape) {
  Node n;
  n.kind = OpKind::kReshape;
  n.inputs = {a.id};
  n.target_shape = std::move(shape);
  return record(std::move(n));
}

Var Tape::tile_rows(Var a, std::size_t rows) {
  Node n;
  n.kind = OpKind::kTileRows;
  n.inputs = {a.id};
  n.begin = rows;
  return record(std::move(n));
}

#define DEPSCREEN_UNARY(method, op)  \
  Var Tape::method(Var a) {          \
    Node n;                          \
    n.kind = op;                     \
    n.inputs = {a.id};               \
    return record(std::move(n));     \
  }

DEPSCREEN_UNARY(relu, OpKind::kRelu)
DEPSCREEN_UNARY(tanh, OpKind::kTanh)
DEPSCREEN_UNARY(softmax, OpKind::kSoftmax)
DEPSCREEN_UNARY(layer_norm, OpKind::kLayerNorm)
DEPSCREEN_UNARY(mean, OpKind::kMean)
DEPSCREEN_UNARY(sum, OpKind::kSum)
DEPSCREEN_UNARY(l2_norm, OpKind::kL2Norm)
DEPSCREEN_UNARY(normalize, OpKind::kNormalize)

#undef DEPSCREEN_UNARY

Var Tape::scale(Var a, double factor) {
  Node n;
  n.kind = OpKind::kScale;
  n.inputs = {a.id};
  n.constant = factor;
  return record(std::move(n));
}

Var Tape::shift(Var a, double offset) {
  Node n;
  n.kind = OpKind::kShift;
  n.inputs = {a.id};
  n.constant = offset;
  return record(std::move(n));
}

void Tape::set_leaf(Var v, Tensor value) {
  const Node& n = node(v);
  if (n.kind != OpKind::kLeaf) throw ValidationError("set_leaf on a non-leaf");
  if (value.shape() != n.value.shape()) {
    throw ShapeError("set_leaf shape mismatch: " + shape_string(value.shape()) +
                     " vs " + shape_string(n.value.shape()));
  }
  if (!value.all_finite()) throw NumericError("non-finite leaf value");
  value.set_requires_grad(n.requires_grad);
  nodes_[v.id].value = std::move(value);
}

void Tape::replay() {
  for (Node& n : nodes_) compute(n);
  consumed_ = false;
}

void Tape::accumulate_input_grads(const Node& n, const Tensor& g,
                                  std::vector<Tensor>& grads,
                                  std::vector<bool>& has_grad) const {
  auto in = [&](std::size_t i) -> const Tensor& {
    return nodes_[n.inputs[i]].value;
  };
  auto wants = [&](std::size_t i) {
    return nodes_[n.inputs[i]].requires_grad;
  };
  auto emit = [&](std::size_t i, Tensor delta) {
    const std::size_t id = n.inputs[i];
    if (!has_grad[id]) {
      grads[id] = std::move(delta);
      has_grad[id] = true;
    } else {
      add_into(grads[id], delta);
    }
  };

  switch (n.kind) {
    case OpKind::kLeaf:
      return;
    case OpKind::kMatmul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (wants(0)) {
        Tensor da(a.shape());
        gemm_nt(g.data().data(), b.data().data(), da.data().data(), a.rows(),
                b.cols(), a.cols());
        emit(0, std::move(da));
      }
      if (wants(1)) {
        Tensor db(b.shape());
        gemm_tn(a.data().data(), g.data().data(), db.data().data(), a.rows(),
                a.cols(), b.cols());
        emit(1, std::move(db));
      }
      return;
    }
    case OpKind::kAdd:
      if (wants(0)) emit(0, g);
      if (wants(1)) emit(1, g);
      return;
    case OpKind::kSubtract:
      if (wants(0)) emit(0, g);
      if (wants(1)) {
        Tensor d = g;
        for (double& v : d.data()) v = -v;
        emit(1, std::move(d));
      }
      return;
    case OpKind::kMultiply:
      for (std::size_t k = 0; k < 2; ++k) {
        if (!wants(k)) continue;
        const Tensor& other = in(1 - k);
        Tensor d = g;
        for (std::size_t i = 0; i < d.size(); ++i) d[i] *= other[i];
        emit(k, std::move(d));
      }
      return;
    case OpKind::kConcat: {
      const std::size_t total = g.last_dim();
      const std::size_t outer = g.outer();
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Tensor& p = in(k);
        const std::size_t w = p.last_dim();
        if (wants(k)) {
          Tensor d(p.shape());
          for (std::size_t r = 0; r < outer; ++r) {
            std::copy_n(g.data().data() + r * total + offset, w,
                        d.data().data() + r * w);
          }
          emit(k, std::move(d));
        }
        offset += w;
      }
      return;
    }
    case OpKind::kSlice: {
      if (!wants(0)) return;
      const Tensor& a = in(0);
      Tensor d(a.shape());
      const std::size_t w = n.end - n.begin;
      for (std::size_t r = 0; r < a.outer(); ++r) {
        std::copy_n(g.data().data() + r * w, w,
                    d.data().data() + r * a.last_dim() + n.begin);
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kTranspose: {
      if (!wants(0)) return;
      Tensor d({g.cols(), g.rows()});
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d.at(c, r) = g.at(r, c);
      emit(0, std::move(d));
      return;
    }
    case OpKind::kReshape:
      if (wants(0)) emit(0, Tensor(in(0).shape(), g.values()));
      return;
    case OpKind::kTileRows: {
      if (!wants(0)) return;
      Tensor d(in(0).shape());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) d[c] += g.at(r, c);
      emit(0, std::move(d));
      return;
    }
    case OpKind::kRelu: {
      if (!wants(0)) return;
      const Tensor& a = in(0);
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        if (!(a[i] > 0.0)) d[i] = 0.0;
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kTanh: {
      if (!wants(0)) return;
      Tensor d = g;
      for (std::size_t i = 0; i < d.size(); ++i) {
        d[i] *= 1.0 - n.value[i] * n.value[i];
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kSoftmax: {
      if (!wants(0)) return;
      const Tensor& y = n.value;
      const std::size_t w = y.last_dim();
      Tensor d(y.shape());
      for (std::size_t r = 0; r < y.outer(); ++r) {
        const double* yr = y.data().data() + r * w;
        const double* gr = g.data().data() + r * w;
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j) dot += yr[j] * gr[j];
        double* dr = d.data().data() + r * w;
        for (std::size_t j = 0; j < w; ++j) dr[j] = yr[j] * (gr[j] - dot);
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kLayerNorm: {
      if (!wants(0)) return;
      const Tensor& y = n.value;
      const std::size_t w = y.last_dim();
      const double inv_w = 1.0 / static_cast<double>(w);
      Tensor d(y.shape());
      for (std::size_t r = 0; r < y.outer(); ++r) {
        const double* yr = y.data().data() + r * w;
        const double* gr = g.data().data() + r * w;
        double mean_g = 0.0;
        double mean_gy = 0.0;
        for (std::size_t j = 0; j < w; ++j) {
          mean_g += gr[j];
          mean_gy += gr[j] * yr[j];
        }
        mean_g *= inv_w;
        mean_gy *= inv_w;
        double* dr = d.data().data() + r * w;
        for (std::size_t j = 0; j < w; ++j) {
          dr[j] = n.saved[r] * (gr[j] - mean_g - yr[j] * mean_gy);
        }
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kMean:
    case OpKind::kSum: {
      if (!wants(0)) return;
      const Tensor& a = in(0);
      double v = g[0];
      if (n.kind == OpKind::kMean) v /= static_cast<double>(a.size());
      emit(0, Tensor::filled(a.shape(), v));
      return;
    }
    case OpKind::kL2Norm: {
      if (!wants(0)) return;
      const Tensor& a = in(0);
      const double norm = n.value[0];
      Tensor d(a.shape());
      // Subgradient 0 at the origin.
      if (norm > 0.0) {
        for (std::size_t i = 0; i < a.size(); ++i) d[i] = g[0] * a[i] / norm;
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kNormalize: {
      if (!wants(0)) return;
      const Tensor& y = n.value;
      const std::size_t w = y.last_dim();
      Tensor d(y.shape());
      for (std::size_t r = 0; r < y.outer(); ++r) {
        const double* yr = y.data().data() + r * w;
        const double* gr = g.data().data() + r * w;
        double dot = 0.0;
        for (std::size_t j = 0; j < w; ++j) dot += yr[j] * gr[j];
        double* dr = d.data().data() + r * w;
        for (std::size_t j = 0; j < w; ++j) {
          dr[j] = (gr[j] - yr[j] * dot) / n.saved[r];
        }
      }
      emit(0, std::move(d));
      return;
    }
    case OpKind::kScale: {
      if (!wants(0)) return;
      Tensor d = g;
      for (double& v : d.data()) v *= n.constant;
      emit(0, std::move(d));
      return;
    }
    case OpKind::kShift:
      if (wants(0)) emit(0, g);
      return;
  }
}

GradientMap Tape::backward(Var loss) {
  const Node& root = node(loss);
  if (!root.value.is_scalar()) {
    throw ShapeError("backward requires a scalar loss, got shape " +
                     shape_string(root.value.shape()));
  }
  if (consumed_) {
    throw ValidationError("tape already differentiated; replay() first");
  }
  consumed_ = true;

  std::vector<Tensor> grads(nodes_.size());
  std::vector<bool> has_grad(nodes_.size(), false);
  grads[loss.id] = Tensor::filled(root.value.shape(), 1.0);
  has_grad[loss.id] = true;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!has_grad[i] || !nodes_[i].requires_grad) continue;
    accumulate_input_grads(nodes_[i], grads[i], grads, has_grad);
  }

  GradientMap out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind != OpKind::kLeaf || !n.requires_grad) continue;
    out.emplace(i, has_grad[i] ? std::move(grads[i]) : Tensor(n.value.shape()));
  }
  return out;
}

}  // namespace depscreen
