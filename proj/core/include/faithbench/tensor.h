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

// Dense rank-2 tensors and a define-by-run reverse-mode tape.
//
// Every tensor is a row-major matrix; scalars are 1x1 and row vectors are
// 1xN. A Tape records primitive operations as they execute and replays them
// backwards to produce gradients. Tapes are cheap and meant to be rebuilt on
// every forward pass.

#ifndef FAITHBENCH_TENSOR_H_
#define FAITHBENCH_TENSOR_H_

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace faithbench {

using Shape = std::vector<size_t>;

std::string ShapeString(const Shape& shape);

class Tensor {
 public:
  Tensor() = default;
  // Throws InvalidArgument if product(shape) != data.size().
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor Zeros(size_t rows, size_t cols, bool requires_grad = false);
  static Tensor Filled(size_t rows, size_t cols, double value);
  static Tensor Scalar(double value);
  static Tensor RowVector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  // Rank-2 view: rank-0/1 tensors are treated as a single row.
  size_t rows() const;
  size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::vector<double>& storage() { return data_; }

  double& at(size_t r, size_t c) { return data_[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool value) { requires_grad_ = value; }

  std::span<const double> Row(size_t r) const {
    return std::span<const double>(data_).subspan(r * cols(), cols());
  }
  std::span<double> Row(size_t r) {
    return std::span<double>(data_).subspan(r * cols(), cols());
  }

 private:
  Shape shape_;
  std::vector<double> data_;
  bool requires_grad_ = false;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(const Tape* tape, size_t id) : tape_(tape), id_(id) {}

  size_t id() const { return id_; }
  const Tape* tape() const { return tape_; }
  const Tensor& value() const;
  size_t rows() const { return value().rows(); }
  size_t cols() const { return value().cols(); }

 private:
  const Tape* tape_ = nullptr;
  size_t id_ = 0;
};

// Result of a backward pass, indexed by tape node.
class Gradients {
 public:
  // Gradient with the same shape as `v`. Nodes off the path to the loss, or
  // not requiring gradients, yield zeros.
  Tensor operator[](Var v) const;
  // Direct access; nullptr when the node received no gradient.
  const Tensor* Find(Var v) const;

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
};

class Tape {
 public:
  // Receives the upstream gradient of the node and accumulates into parents.
  using BackwardFn =
      std::function<void(const Tape&, const Tensor& grad, std::vector<Tensor>&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaf that is never differentiated.
  Var Constant(Tensor value);
  // Leaf owned by the tape; differentiated iff value.requires_grad().
  Var Input(Tensor value);
  // Leaf that aliases external storage (model weights). The tensor must
  // outlive the tape.
  Var Parameter(const Tensor& weights, bool differentiable);

  // Records an interior node. Called by primitives.
  Var Record(Tensor value, std::vector<size_t> parents, BackwardFn backward);

  // Reverse sweep from a 1x1 loss. Does not mutate the tape, so calling it
  // twice yields identical results.
  Gradients Backward(Var loss) const;

  const Tensor& value(size_t id) const;
  bool requires_grad(size_t id) const { return nodes_[id].requires_grad; }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    bool requires_grad = false;
    std::vector<size_t> parents;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
};

// Adds `delta` into grads[id], allocating on first touch. No-op when the node
// does not require gradients.
void AccumulateGrad(const Tape& tape, std::vector<Tensor>& grads, size_t id,
                    std::span<const double> delta);

// Primitives. Each throws InvalidArgument naming both shapes on mismatch.
namespace ops {

Var MatMul(Var a, Var b);            // [m,k] x [k,n]
Var MatMulTransposeB(Var a, Var b);  // [m,k] x [n,k]^T
Var Transpose(Var a);
Var Add(Var a, Var b);
Var Sub(Var a, Var b);
Var Mul(Var a, Var b);  // elementwise
Var Scale(Var a, double factor);
Var AddRowVector(Var a, Var row);  // broadcast [1,n] over rows of [m,n]
Var Tanh(Var a);
Var Gelu(Var a);  // tanh approximation
Var Square(Var a);
Var SoftmaxRows(Var a);
Var LogSoftmaxRows(Var a);
// Softmax over entries where allowed[r * cols + c] != 0; other entries get
// probability 0. A row with no allowed entries is all zeros.
Var MaskedSoftmaxRows(Var a, std::vector<char> allowed);
Var LayerNormRows(Var x, Var gain, Var bias, double epsilon = 1e-5);
Var EmbeddingLookup(Var table, std::span<const int> ids);
Var SliceRows(Var a, size_t begin, size_t count);
Var SliceCols(Var a, size_t begin, size_t count);
Var ConcatCols(std::span<const Var> parts);
Var Element(Var a, size_t row, size_t col);  // -> 1x1
Var Sum(Var a);                              // -> 1x1
Var MeanRows(Var a);                         // [m,n] -> [1,n]
Var SumRows(Var a);                          // [m,n] -> [1,n]
// Mean over rows with target >= 0 of -log softmax(logits)[r, target[r]].
// Rows with target < 0 are ignored; if all are ignored the loss is 0.
Var CrossEntropyRows(Var logits, std::span<const int> targets);

}  // namespace ops

// Central differences (f(x + eps e_i) - f(x - eps e_i)) / 2 eps.
Tensor FiniteDifferenceGradient(const std::function<double(const Tensor&)>& f,
                                const Tensor& x, double epsilon);

}  // namespace faithbench

#endif  // FAITHBENCH_TENSOR_H_
