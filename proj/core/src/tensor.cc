/*
 * Copyright 2026 The Faithbench Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faithbench/tensor.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <utility>

#include <Eigen/Core>

#include "faithbench/errors.h"

namespace faithbench {
namespace {

using RowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

ConstMap AsMatrix(const Tensor& t) {
  return ConstMap(t.data().data(), t.rows(), t.cols());
}

MutMap AsMatrix(Tensor& t) { return MutMap(t.data().data(), t.rows(), t.cols()); }

[[noreturn]] void ShapeMismatch(const char* op, const Tensor& a,
                                const Tensor& b) {
  throw InvalidArgument(std::string(op) + ": incompatible shapes " +
                        ShapeString(a.shape()) + " and " +
                        ShapeString(b.shape()));
}

void RequireSameShape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) ShapeMismatch(op, a, b);
}

Tape& Mutable(Var v) {
  if (v.tape() == nullptr) throw InvalidArgument("variable is not on a tape");
  return const_cast<Tape&>(*v.tape());
}

Tape& SameTape(Var a, Var b) {
  if (a.tape() != b.tape()) {
    throw InvalidArgument("operands belong to different tapes");
  }
  return Mutable(a);
}

template <typename F>
Var Unary(Var a, Tensor out, F&& backward) {
  return Mutable(a).Record(std::move(out), {a.id()},
                           std::forward<F>(backward));
}

constexpr double kGeluScale = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluCubic = 0.044715;

}  // namespace

std::string ShapeString(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : shape_(std::move(shape)),
      data_(std::move(data)),
      requires_grad_(requires_grad) {
  const size_t expected = std::accumulate(shape_.begin(), shape_.end(),
                                          size_t{1}, std::multiplies<>());
  if (expected != data_.size()) {
    throw InvalidArgument("tensor of shape " + ShapeString(shape_) +
                          " needs " + std::to_string(expected) +
                          " values, got " + std::to_string(data_.size()));
  }
  if (shape_.size() > 2) {
    throw InvalidArgument("only rank <= 2 tensors are supported, got " +
                          ShapeString(shape_));
  }
}

Tensor Tensor::Zeros(size_t rows, size_t cols, bool requires_grad) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, 0.0),
                requires_grad);
}

Tensor Tensor::Filled(size_t rows, size_t cols, double value) {
  return Tensor({rows, cols}, std::vector<double>(rows * cols, value));
}

Tensor Tensor::Scalar(double value) { return Tensor({1, 1}, {value}); }

Tensor Tensor::RowVector(std::vector<double> values) {
  const size_t n = values.size();
  return Tensor({1, n}, std::move(values));
}

size_t Tensor::rows() const {
  return shape_.size() == 2 ? shape_[0] : 1;
}

size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw InvalidArgument("item() on non-scalar tensor " +
                          ShapeString(shape_));
  }
  return data_[0];
}

const Tensor& Var::value() const { return tape_->value(id_); }

Tensor Gradients::operator[](Var v) const {
  if (v.id() < grads_.size() && !grads_[v.id()].empty()) {
    return grads_[v.id()];
  }
  const Shape& s = shapes_.at(v.id());
  const size_t n =
      std::accumulate(s.begin(), s.end(), size_t{1}, std::multiplies<>());
  return Tensor(s, std::vector<double>(n, 0.0));
}

const Tensor* Gradients::Find(Var v) const {
  if (v.id() < grads_.size() && !grads_[v.id()].empty()) {
    return &grads_[v.id()];
  }
  return nullptr;
}

Var Tape::Constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  node.owned.set_requires_grad(false);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Input(Tensor value) {
  Node node;
  node.requires_grad = value.requires_grad();
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Parameter(const Tensor& weights, bool differentiable) {
  Node node;
  node.borrowed = &weights;
  node.requires_grad = differentiable;
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Tensor value, std::vector<size_t> parents,
                 BackwardFn backward) {
  Node node;
  node.owned = std::move(value);
  for (size_t p : parents) {
    if (p >= nodes_.size()) throw InvalidArgument("parent not on tape");
    node.requires_grad = node.requires_grad || nodes_[p].requires_grad;
  }
  if (node.requires_grad) {
    node.parents = std::move(parents);
    node.backward = std::move(backward);
  }
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

const Tensor& Tape::value(size_t id) const {
  const Node& node = nodes_.at(id);
  return node.borrowed != nullptr ? *node.borrowed : node.owned;
}

Gradients Tape::Backward(Var loss) const {
  if (loss.tape() != this) throw InvalidArgument("loss is not on this tape");
  const Tensor& loss_value = value(loss.id());
  if (loss_value.size() != 1) {
    throw InvalidArgument("backward needs a scalar loss, got " +
                          ShapeString(loss_value.shape()));
  }
  Gradients out;
  out.shapes_.reserve(nodes_.size());
  for (size_t i = 0; i < nodes_.size(); ++i) {
    out.shapes_.push_back(value(i).shape());
  }
  out.grads_.resize(nodes_.size());
  if (!nodes_[loss.id()].requires_grad) return out;
  out.grads_[loss.id()] = Tensor(loss_value.shape(), {1.0});
  for (size_t i = loss.id() + 1; i-- > 0;) {
    const Node& node = nodes_[i];
    if (!node.backward || out.grads_[i].empty()) continue;
    node.backward(*this, out.grads_[i], out.grads_);
  }
  return out;
}

void AccumulateGrad(const Tape& tape, std::vector<Tensor>& grads, size_t id,
                    std::span<const double> delta) {
  if (!tape.requires_grad(id)) return;
  Tensor& g = grads[id];
  if (g.empty()) {
    g = Tensor(tape.value(id).shape(), std::vector<double>(delta.size(), 0.0));
  }
  std::span<double> dst = g.data();
  for (size_t i = 0; i < delta.size(); ++i) dst[i] += delta[i];
}

namespace ops {

Var MatMul(Var a, Var b) {
  Tape& tape = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) ShapeMismatch("MatMul", av, bv);
  Tensor out = Tensor::Zeros(av.rows(), bv.cols());
  AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv);
  const size_t ia = a.id(), ib = b.id();
  return tape.Record(
      std::move(out), {ia, ib},
      [ia, ib](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor da = Tensor::Zeros(av.rows(), av.cols());
          AsMatrix(da).noalias() = AsMatrix(g) * AsMatrix(bv).transpose();
          AccumulateGrad(t, grads, ia, da.data());
        }
        if (t.requires_grad(ib)) {
          Tensor db = Tensor::Zeros(bv.rows(), bv.cols());
          AsMatrix(db).noalias() = AsMatrix(av).transpose() * AsMatrix(g);
          AccumulateGrad(t, grads, ib, db.data());
        }
      });
}

Var MatMulTransposeB(Var a, Var b) {
  Tape& tape = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) ShapeMismatch("MatMulTransposeB", av, bv);
  Tensor out = Tensor::Zeros(av.rows(), bv.rows());
  AsMatrix(out).noalias() = AsMatrix(av) * AsMatrix(bv).transpose();
  const size_t ia = a.id(), ib = b.id();
  return tape.Record(
      std::move(out), {ia, ib},
      [ia, ib](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor da = Tensor::Zeros(av.rows(), av.cols());
          AsMatrix(da).noalias() = AsMatrix(g) * AsMatrix(bv);
          AccumulateGrad(t, grads, ia, da.data());
        }
        if (t.requires_grad(ib)) {
          Tensor db = Tensor::Zeros(bv.rows(), bv.cols());
          AsMatrix(db).noalias() = AsMatrix(g).transpose() * AsMatrix(av);
          AccumulateGrad(t, grads, ib, db.data());
        }
      });
}

Var Transpose(Var a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::Zeros(av.cols(), av.rows());
  AsMatrix(out) = AsMatrix(av).transpose();
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 Tensor d = Tensor::Zeros(g.cols(), g.rows());
                 AsMatrix(d) = AsMatrix(g).transpose();
                 AccumulateGrad(t, grads, ia, d.data());
               });
}

namespace {

template <typename Combine, typename DA, typename DB>
Var Binary(const char* name, Var a, Var b, Combine combine, DA da, DB db) {
  Tape& tape = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireSameShape(name, av, bv);
  Tensor out = Tensor::Zeros(av.rows(), av.cols());
  for (size_t i = 0; i < out.size(); ++i) {
    out.data()[i] = combine(av.data()[i], bv.data()[i]);
  }
  const size_t ia = a.id(), ib = b.id();
  return tape.Record(
      std::move(out), {ia, ib},
      [ia, ib, da, db](const Tape& t, const Tensor& g,
                       std::vector<Tensor>& grads) {
        const Tensor& av = t.value(ia);
        const Tensor& bv = t.value(ib);
        std::vector<double> buf(g.size());
        if (t.requires_grad(ia)) {
          for (size_t i = 0; i < g.size(); ++i) {
            buf[i] = da(av.data()[i], bv.data()[i], g.data()[i]);
          }
          AccumulateGrad(t, grads, ia, buf);
        }
        if (t.requires_grad(ib)) {
          for (size_t i = 0; i < g.size(); ++i) {
            buf[i] = db(av.data()[i], bv.data()[i], g.data()[i]);
          }
          AccumulateGrad(t, grads, ib, buf);
        }
      });
}

}  // namespace

Var Add(Var a, Var b) {
  return Binary(
      "Add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return g; });
}

Var Sub(Var a, Var b) {
  return Binary(
      "Sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double g) { return g; },
      [](double, double, double g) { return -g; });
}

Var Mul(Var a, Var b) {
  return Binary(
      "Mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y, double g) { return g * y; },
      [](double x, double, double g) { return g * x; });
}

Var Scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out = av;
  out.set_requires_grad(false);
  for (double& v : out.data()) v *= factor;
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia, factor](const Tape& t, const Tensor& g,
                            std::vector<Tensor>& grads) {
                 std::vector<double> d(g.data().begin(), g.data().end());
                 for (double& v : d) v *= factor;
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var AddRowVector(Var a, Var row) {
  Tape& tape = SameTape(a, row);
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    ShapeMismatch("AddRowVector", av, rv);
  }
  Tensor out = av;
  out.set_requires_grad(false);
  AsMatrix(out).rowwise() += AsMatrix(rv).row(0);
  const size_t ia = a.id(), ir = row.id();
  return tape.Record(
      std::move(out), {ia, ir},
      [ia, ir](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
        AccumulateGrad(t, grads, ia, g.data());
        if (t.requires_grad(ir)) {
          Tensor d = Tensor::Zeros(1, g.cols());
          AsMatrix(d) = AsMatrix(g).colwise().sum();
          AccumulateGrad(t, grads, ir, d.data());
        }
      });
}

Var Tanh(Var a) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (double& v : out.data()) v = std::tanh(v);
  const size_t ia = a.id();
  const size_t io = a.tape()->size();  // id this node will receive
  return Unary(a, std::move(out),
               [ia, io](const Tape& t, const Tensor& g,
                        std::vector<Tensor>& grads) {
                 const Tensor& y = t.value(io);
                 std::vector<double> d(g.size());
                 for (size_t i = 0; i < d.size(); ++i) {
                   d[i] = g.data()[i] * (1.0 - y.data()[i] * y.data()[i]);
                 }
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var Gelu(Var a) {
  Tensor out = a.value();
  out.set_requires_grad(false);
  for (double& v : out.data()) {
    const double inner = kGeluScale * (v + kGeluCubic * v * v * v);
    v = 0.5 * v * (1.0 + std::tanh(inner));
  }
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 const Tensor& x = t.value(ia);
                 std::vector<double> d(g.size());
                 for (size_t i = 0; i < d.size(); ++i) {
                   const double v = x.data()[i];
                   const double inner = kGeluScale * (v + kGeluCubic * v * v * v);
                   const double th = std::tanh(inner);
                   const double dinner =
                       kGeluScale * (1.0 + 3.0 * kGeluCubic * v * v);
                   d[i] = g.data()[i] *
                          (0.5 * (1.0 + th) + 0.5 * v * (1.0 - th * th) * dinner);
                 }
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var Square(Var a) { return Mul(a, a); }

Var MaskedSoftmaxRows(Var a, std::vector<char> allowed) {
  const Tensor& av = a.value();
  if (!allowed.empty() && allowed.size() != av.size()) {
    throw InvalidArgument("MaskedSoftmaxRows: mask has " +
                          std::to_string(allowed.size()) +
                          " entries for shape " + ShapeString(av.shape()));
  }
  const size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::Zeros(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    double max = -std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < cols; ++c) {
      if (allowed.empty() || allowed[r * cols + c]) max = std::max(max, av.at(r, c));
    }
    if (!std::isfinite(max)) continue;  // nothing allowed in this row
    double total = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      if (allowed.empty() || allowed[r * cols + c]) {
        const double e = std::exp(av.at(r, c) - max);
        out.at(r, c) = e;
        total += e;
      }
    }
    for (size_t c = 0; c < cols; ++c) out.at(r, c) /= total;
  }
  const size_t ia = a.id();
  const size_t io = a.tape()->size();
  return Unary(a, std::move(out),
               [ia, io](const Tape& t, const Tensor& g,
                        std::vector<Tensor>& grads) {
                 const Tensor& p = t.value(io);
                 const size_t rows = p.rows(), cols = p.cols();
                 std::vector<double> d(p.size());
                 for (size_t r = 0; r < rows; ++r) {
                   double dot = 0.0;
                   for (size_t c = 0; c < cols; ++c) {
                     dot += g.at(r, c) * p.at(r, c);
                   }
                   for (size_t c = 0; c < cols; ++c) {
                     d[r * cols + c] = p.at(r, c) * (g.at(r, c) - dot);
                   }
                 }
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var SoftmaxRows(Var a) { return MaskedSoftmaxRows(a, {}); }

Var LogSoftmaxRows(Var a) {
  const Tensor& av = a.value();
  const size_t rows = av.rows(), cols = av.cols();
  Tensor out = Tensor::Zeros(rows, cols);
  for (size_t r = 0; r < rows; ++r) {
    auto row = av.Row(r);
    const double max = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (double v : row) total += std::exp(v - max);
    const double lse = max + std::log(total);
    for (size_t c = 0; c < cols; ++c) out.at(r, c) = row[c] - lse;
  }
  const size_t ia = a.id();
  const size_t io = a.tape()->size();
  return Unary(a, std::move(out),
               [ia, io](const Tape& t, const Tensor& g,
                        std::vector<Tensor>& grads) {
                 const Tensor& y = t.value(io);
                 const size_t rows = y.rows(), cols = y.cols();
                 std::vector<double> d(y.size());
                 for (size_t r = 0; r < rows; ++r) {
                   double gsum = 0.0;
                   for (size_t c = 0; c < cols; ++c) gsum += g.at(r, c);
                   for (size_t c = 0; c < cols; ++c) {
                     d[r * cols + c] = g.at(r, c) - std::exp(y.at(r, c)) * gsum;
                   }
                 }
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var LayerNormRows(Var x, Var gain, Var bias, double epsilon) {
  Tape& tape = SameTape(x, gain);
  SameTape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = bias.value();
  const size_t rows = xv.rows(), cols = xv.cols();
  if (gv.rows() != 1 || gv.cols() != cols) ShapeMismatch("LayerNormRows", xv, gv);
  if (bv.rows() != 1 || bv.cols() != cols) ShapeMismatch("LayerNormRows", xv, bv);
  Tensor out = Tensor::Zeros(rows, cols);
  // Normalised activations and inverse std, kept for the backward pass.
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (size_t r = 0; r < rows; ++r) {
    auto row = xv.Row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(cols);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[r] = is;
    for (size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mean) * is;
      (*xhat)[r * cols + c] = h;
      out.at(r, c) = h * gv.data()[c] + bv.data()[c];
    }
  }
  const size_t ix = x.id(), ig = gain.id(), ib = bias.id();
  return tape.Record(
      std::move(out), {ix, ig, ib},
      [ix, ig, ib, xhat, inv_std](const Tape& t, const Tensor& g,
                                  std::vector<Tensor>& grads) {
        const Tensor& gv = t.value(ig);
        const size_t rows = g.rows(), cols = g.cols();
        if (t.requires_grad(ig) || t.requires_grad(ib)) {
          std::vector<double> dg(cols, 0.0), db(cols, 0.0);
          for (size_t r = 0; r < rows; ++r) {
            for (size_t c = 0; c < cols; ++c) {
              dg[c] += g.at(r, c) * (*xhat)[r * cols + c];
              db[c] += g.at(r, c);
            }
          }
          AccumulateGrad(t, grads, ig, dg);
          AccumulateGrad(t, grads, ib, db);
        }
        if (t.requires_grad(ix)) {
          std::vector<double> dx(g.size());
          std::vector<double> dh(cols);
          for (size_t r = 0; r < rows; ++r) {
            double mean_dh = 0.0, mean_dh_h = 0.0;
            for (size_t c = 0; c < cols; ++c) {
              dh[c] = g.at(r, c) * gv.data()[c];
              mean_dh += dh[c];
              mean_dh_h += dh[c] * (*xhat)[r * cols + c];
            }
            mean_dh /= static_cast<double>(cols);
            mean_dh_h /= static_cast<double>(cols);
            for (size_t c = 0; c < cols; ++c) {
              dx[r * cols + c] =
                  (*inv_std)[r] *
                  (dh[c] - mean_dh - (*xhat)[r * cols + c] * mean_dh_h);
            }
          }
          AccumulateGrad(t, grads, ix, dx);
        }
      });
}

Var EmbeddingLookup(Var table, std::span<const int> ids) {
  const Tensor& tv = table.value();
  const size_t width = tv.cols();
  Tensor out = Tensor::Zeros(ids.size(), width);
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<size_t>(ids[r]) >= tv.rows()) {
      throw InvalidArgument("EmbeddingLookup: id " + std::to_string(ids[r]) +
                            " outside table " + ShapeString(tv.shape()));
    }
    auto src = tv.Row(static_cast<size_t>(ids[r]));
    std::copy(src.begin(), src.end(), out.Row(r).begin());
  }
  const size_t it = table.id();
  std::vector<int> id_copy(ids.begin(), ids.end());
  return Unary(table, std::move(out),
               [it, id_copy = std::move(id_copy)](
                   const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 if (!t.requires_grad(it)) return;
                 const Tensor& tv = t.value(it);
                 Tensor& dst = grads[it];
                 if (dst.empty()) dst = Tensor(tv.shape(), std::vector<double>(tv.size(), 0.0));
                 for (size_t r = 0; r < id_copy.size(); ++r) {
                   auto row = dst.Row(static_cast<size_t>(id_copy[r]));
                   auto src = g.Row(r);
                   for (size_t c = 0; c < row.size(); ++c) row[c] += src[c];
                 }
               });
}

Var SliceRows(Var a, size_t begin, size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.rows()) {
    throw InvalidArgument("SliceRows: rows [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") outside " +
                          ShapeString(av.shape()));
  }
  const size_t cols = av.cols();
  Tensor out({count, cols},
             std::vector<double>(av.data().begin() + begin * cols,
                                 av.data().begin() + (begin + count) * cols));
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia, begin](const Tape& t, const Tensor& g,
                           std::vector<Tensor>& grads) {
                 if (!t.requires_grad(ia)) return;
                 const Tensor& av = t.value(ia);
                 Tensor& dst = grads[ia];
                 if (dst.empty()) dst = Tensor(av.shape(), std::vector<double>(av.size(), 0.0));
                 const size_t offset = begin * av.cols();
                 for (size_t i = 0; i < g.size(); ++i) {
                   dst.data()[offset + i] += g.data()[i];
                 }
               });
}

Var SliceCols(Var a, size_t begin, size_t count) {
  const Tensor& av = a.value();
  if (begin + count > av.cols()) {
    throw InvalidArgument("SliceCols: cols [" + std::to_string(begin) + ", " +
                          std::to_string(begin + count) + ") outside " +
                          ShapeString(av.shape()));
  }
  Tensor out = Tensor::Zeros(av.rows(), count);
  AsMatrix(out) = AsMatrix(av).middleCols(begin, count);
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia, begin, count](const Tape& t, const Tensor& g,
                                  std::vector<Tensor>& grads) {
                 if (!t.requires_grad(ia)) return;
                 const Tensor& av = t.value(ia);
                 Tensor& dst = grads[ia];
                 if (dst.empty()) dst = Tensor(av.shape(), std::vector<double>(av.size(), 0.0));
                 AsMatrix(dst).middleCols(begin, count) += AsMatrix(g);
               });
}

Var ConcatCols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidArgument("ConcatCols: no operands");
  Tape& tape = Mutable(parts[0]);
  const size_t rows = parts[0].rows();
  size_t cols = 0;
  std::vector<size_t> ids, offsets;
  for (const Var& p : parts) {
    if (p.tape() != &tape) throw InvalidArgument("operands belong to different tapes");
    if (p.rows() != rows) ShapeMismatch("ConcatCols", parts[0].value(), p.value());
    ids.push_back(p.id());
    offsets.push_back(cols);
    cols += p.cols();
  }
  Tensor out = Tensor::Zeros(rows, cols);
  for (size_t i = 0; i < parts.size(); ++i) {
    AsMatrix(out).middleCols(offsets[i], parts[i].cols()) =
        AsMatrix(parts[i].value());
  }
  std::vector<size_t> parents = ids;
  return tape.Record(
      std::move(out), std::move(parents),
      [ids, offsets](const Tape& t, const Tensor& g,
                     std::vector<Tensor>& grads) {
        for (size_t i = 0; i < ids.size(); ++i) {
          if (!t.requires_grad(ids[i])) continue;
          const Tensor& pv = t.value(ids[i]);
          Tensor d = Tensor::Zeros(pv.rows(), pv.cols());
          AsMatrix(d) = AsMatrix(g).middleCols(offsets[i], pv.cols());
          AccumulateGrad(t, grads, ids[i], d.data());
        }
      });
}

Var Element(Var a, size_t row, size_t col) {
  const Tensor& av = a.value();
  if (row >= av.rows() || col >= av.cols()) {
    throw InvalidArgument("Element: (" + std::to_string(row) + ", " +
                          std::to_string(col) + ") outside " +
                          ShapeString(av.shape()));
  }
  const size_t index = row * av.cols() + col;
  const size_t ia = a.id();
  return Unary(a, Tensor::Scalar(av.data()[index]),
               [ia, index](const Tape& t, const Tensor& g,
                           std::vector<Tensor>& grads) {
                 if (!t.requires_grad(ia)) return;
                 const Tensor& av = t.value(ia);
                 Tensor& dst = grads[ia];
                 if (dst.empty()) dst = Tensor(av.shape(), std::vector<double>(av.size(), 0.0));
                 dst.data()[index] += g.item();
               });
}

Var Sum(Var a) {
  const Tensor& av = a.value();
  const double total = std::accumulate(av.data().begin(), av.data().end(), 0.0);
  const size_t ia = a.id();
  return Unary(a, Tensor::Scalar(total),
               [ia](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 std::vector<double> d(t.value(ia).size(), g.item());
                 AccumulateGrad(t, grads, ia, d);
               });
}

Var SumRows(Var a) {
  const Tensor& av = a.value();
  Tensor out = Tensor::Zeros(1, av.cols());
  AsMatrix(out) = AsMatrix(av).colwise().sum();
  const size_t ia = a.id();
  return Unary(a, std::move(out),
               [ia](const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 const Tensor& av = t.value(ia);
                 Tensor d = Tensor::Zeros(av.rows(), av.cols());
                 AsMatrix(d).rowwise() = AsMatrix(g).row(0);
                 AccumulateGrad(t, grads, ia, d.data());
               });
}

Var MeanRows(Var a) {
  const size_t rows = a.rows();
  if (rows == 0) throw InvalidArgument("MeanRows: empty tensor");
  return Scale(SumRows(a), 1.0 / static_cast<double>(rows));
}

Var CrossEntropyRows(Var logits, std::span<const int> targets) {
  const Tensor& lv = logits.value();
  const size_t rows = lv.rows(), cols = lv.cols();
  if (targets.size() != rows) {
    throw InvalidArgument("CrossEntropyRows: " + std::to_string(targets.size()) +
                          " targets for logits " + ShapeString(lv.shape()));
  }
  auto probs = std::make_shared<std::vector<double>>(lv.size(), 0.0);
  double loss = 0.0;
  size_t counted = 0;
  for (size_t r = 0; r < rows; ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<size_t>(targets[r]) >= cols) {
      throw InvalidArgument("CrossEntropyRows: target " +
                            std::to_string(targets[r]) + " outside " +
                            std::to_string(cols) + " classes");
    }
    auto row = lv.Row(r);
    const double max = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (size_t c = 0; c < cols; ++c) {
      const double e = std::exp(row[c] - max);
      (*probs)[r * cols + c] = e;
      total += e;
    }
    for (size_t c = 0; c < cols; ++c) (*probs)[r * cols + c] /= total;
    loss += -(row[static_cast<size_t>(targets[r])] - max - std::log(total));
    ++counted;
  }
  const double denom = counted == 0 ? 1.0 : static_cast<double>(counted);
  const size_t il = logits.id();
  std::vector<int> target_copy(targets.begin(), targets.end());
  return Unary(logits, Tensor::Scalar(loss / denom),
               [il, probs, denom, target_copy = std::move(target_copy)](
                   const Tape& t, const Tensor& g, std::vector<Tensor>& grads) {
                 const Tensor& lv = t.value(il);
                 const size_t cols = lv.cols();
                 std::vector<double> d(lv.size(), 0.0);
                 const double scale = g.item() / denom;
                 for (size_t r = 0; r < target_copy.size(); ++r) {
                   if (target_copy[r] < 0) continue;
                   for (size_t c = 0; c < cols; ++c) {
                     d[r * cols + c] = (*probs)[r * cols + c] * scale;
                   }
                   d[r * cols + static_cast<size_t>(target_copy[r])] -= scale;
                 }
                 AccumulateGrad(t, grads, il, d);
               });
}

}  // namespace ops

Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double epsilon) {
  if (!(epsilon > 0.0)) {
    throw InvalidArgument("finite-difference epsilon must be positive");
  }
  Tensor grad(x.shape(), std::vector<double>(x.size(), 0.0));
  Tensor probe = x;
  for (size_t i = 0; i < x.size(); ++i) {
    const double original = probe.data()[i];
    probe.data()[i] = original + epsilon;
    const double plus = f(probe);
    probe.data()[i] = original - epsilon;
    const double minus = f(probe);
    probe.data()[i] = original;
    grad.data()[i] = (plus - minus) / (2.0 * epsilon);
  }
  return grad;
}

}  // namespace faithbench
