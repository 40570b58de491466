#pragma once

// Minimal reverse-mode automatic differentiation over dense matrices.
//
// A Tape records every operation applied to Var handles; backward() walks the
// record in reverse and accumulates gradients into every node that depends on
// a leaf. Constants never receive gradients and their subgraphs skip the
// backward work entirely.

#include "style3d/tensor.hpp"

#include <Eigen/SparseCore>

#include <functional>
#include <span>
#include <vector>

namespace style3d::ad {

class Tape;

class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  // Zero-sized until backward() has run and reached this node.
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

class Tape {
 public:
  // Called with the gradient of the node's output; must add into parent grads
  // through accumulate().
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value);

  // Records a node. `parents` decide whether the node needs a gradient; the
  // backward closure is dropped when none of them do.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);

  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  void accumulate(const Var& v, const Matrix& g);

  // Seeds d(out)/d(out) = 1 for a 1x1 output and propagates.
  void backward(const Var& out);

  const Matrix& value(int id) const { return nodes_[id].value; }
  const Matrix& grad(int id) const { return nodes_[id].grad; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Elementwise and broadcasting arithmetic.
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);  // elementwise
Var operator/(const Var& a, const Var& b);  // elementwise
Var operator-(const Var& a);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);  // a[n x m] + row[1 x m]
Var mul_col(const Var& a, const Var& col);  // a[n x m] * col[n x 1] per row
Var mul_row(const Var& a, const Var& row);  // a[n x m] * row[1 x m] per column

Var matmul(const Var& a, const Var& b);
Var matmul_transposed(const Var& a, const Var& b);  // a * b^T
Var sparse_left(const SparseMatrix& s, const Var& a);  // s * a, s constant

Var relu(const Var& a);
Var softplus(const Var& a, double beta = 1.0);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var sqrt(const Var& a);
Var square(const Var& a);
Var abs(const Var& a);

Var sum(const Var& a);  // 1x1
Var mean(const Var& a);  // 1x1
Var row_sum(const Var& a);  // n x 1
Var col_mean(const Var& a);  // 1 x m

Var softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, double eps = 1e-5);
// Exclusive prefix sum along each row: out[i][j] = sum_{k<j} a[i][k].
Var exclusive_cumsum_rows(const Var& a);

Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
// Row-major reinterpretation; element order is unchanged.
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
Var transpose(const Var& a);

}  // namespace style3d::ad
