#include "style3d/autodiff.hpp"

#include "style3d/error.hpp"

#include <cmath>

namespace style3d::ad {

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.tape_ != this) throw ValidationError("autodiff: mixing variables from different tapes");
    needs = needs || nodes_[p.id_].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs ? std::move(backward) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(const Var& v, const Matrix& g) {
  Node& n = nodes_[v.id_];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Var& out) {
  if (out.rows() != 1 || out.cols() != 1) throw ValidationError("backward() needs a 1x1 output");
  for (Node& n : nodes_) n.grad.resize(0, 0);
  nodes_[out.id_].grad = Matrix::Ones(1, 1);
  for (int i = out.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    // The closure may touch other nodes, never this one.
    const Matrix g = n.grad;
    n.backward(*this, g);
  }
}

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ValidationError(std::string("autodiff ") + op + ": shape mismatch " + shape_string(a.value()) +
                          " vs " + shape_string(b.value()));
  }
}

template <typename F, typename D>
Var unary(const Var& a, F f, D derivative) {
  Matrix y = a.value().unaryExpr(f);
  return a.tape()->record(std::move(y), std::array{a}, [a, derivative](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.array() * a.value().unaryExpr(derivative).array()).matrix());
  });
}

}  // namespace

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Var operator*(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix v = (a.value().array() * b.value().array()).matrix();
  return a.tape()->record(std::move(v), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, (g.array() * b.value().array()).matrix());
    if (t.requires_grad(b)) t.accumulate(b, (g.array() * a.value().array()).matrix());
  });
}

Var operator/(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  Matrix v = (a.value().array() / b.value().array()).matrix();
  return a.tape()->record(std::move(v), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    const auto& bv = b.value().array();
    if (t.requires_grad(a)) t.accumulate(a, (g.array() / bv).matrix());
    if (t.requires_grad(b)) t.accumulate(b, (-g.array() * a.value().array() / (bv * bv)).matrix());
  });
}

Var operator-(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double s) {
  return a.tape()->record(a.value() * s, std::array{a}, [a, s](Tape& t, const Matrix& g) { t.accumulate(a, g * s); });
}

Var add_scalar(const Var& a, double s) {
  Matrix v = (a.value().array() + s).matrix();
  return a.tape()->record(std::move(v), std::array{a}, [a](Tape& t, const Matrix& g) { t.accumulate(a, g); });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ValidationError("autodiff add_row: shape mismatch");
  Matrix v = a.value().rowwise() + row.value().row(0);
  return a.tape()->record(std::move(v), std::array{a, row}, [a, row](Tape& t, const Matrix& g) {
    t.accumulate(a, g);
    if (t.requires_grad(row)) t.accumulate(row, g.colwise().sum());
  });
}

Var mul_col(const Var& a, const Var& col) {
  if (col.cols() != 1 || col.rows() != a.rows()) throw ValidationError("autodiff mul_col: shape mismatch");
  Matrix v = a.value().array().colwise() * col.value().col(0).array();
  return a.tape()->record(std::move(v), std::array{a, col}, [a, col](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, (g.array().colwise() * col.value().col(0).array()).matrix());
    if (t.requires_grad(col)) t.accumulate(col, (g.array() * a.value().array()).rowwise().sum().matrix());
  });
}

Var mul_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) throw ValidationError("autodiff mul_row: shape mismatch");
  Matrix v = a.value().array().rowwise() * row.value().row(0).array();
  return a.tape()->record(std::move(v), std::array{a, row}, [a, row](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, (g.array().rowwise() * row.value().row(0).array()).matrix());
    if (t.requires_grad(row)) t.accumulate(row, (g.array() * a.value().array()).colwise().sum().matrix());
  });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ValidationError("autodiff matmul: inner dimension mismatch " + shape_string(a.value()) + " * " +
                          shape_string(b.value()));
  }
  return a.tape()->record(a.value() * b.value(), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * g);
  });
}

Var matmul_transposed(const Var& a, const Var& b) {
  if (a.cols() != b.cols()) {
    throw ValidationError("autodiff matmul_transposed: inner dimension mismatch " + shape_string(a.value()) +
                          " * " + shape_string(b.value()) + "^T");
  }
  return a.tape()->record(a.value() * b.value().transpose(), std::array{a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.requires_grad(a)) t.accumulate(a, g * b.value());
    if (t.requires_grad(b)) t.accumulate(b, g.transpose() * a.value());
  });
}

Var sparse_left(const SparseMatrix& s, const Var& a) {
  if (s.cols() != a.rows()) throw ValidationError("autodiff sparse_left: dimension mismatch");
  Matrix v = s * a.value();
  return a.tape()->record(std::move(v), std::array{a}, [s, a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix(s.transpose() * g));
  });
}

Var relu(const Var& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x) { return x > 0 ? 1.0 : 0.0; });
}

Var softplus(const Var& a, double beta) {
  return unary(
      a,
      [beta](double x) {
        const double z = beta * x;
        return (z > 30 ? z : std::log1p(std::exp(z))) / beta;
      },
      [beta](double x) { return 1.0 / (1.0 + std::exp(-beta * x)); });
}

Var sigmoid(const Var& a) {
  return unary(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double x) {
        const double s = 1.0 / (1.0 + std::exp(-x));
        return s * (1.0 - s);
      });
}

Var tanh(const Var& a) {
  return unary(
      a, [](double x) { return std::tanh(x); },
      [](double x) {
        const double th = std::tanh(x);
        return 1.0 - th * th;
      });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var sqrt(const Var& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double x) { return 0.5 / std::sqrt(x); });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var abs(const Var& a) {
  return unary(
      a, [](double x) { return std::abs(x); }, [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
}

Var sum(const Var& a) {
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->record(std::move(v), std::array{a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(const Var& a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var row_sum(const Var& a) {
  Matrix v = a.value().rowwise().sum();
  return a.tape()->record(std::move(v), std::array{a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.col(0).replicate(1, a.cols()));
  });
}

Var col_mean(const Var& a) {
  Matrix v = a.value().colwise().mean();
  const double n = static_cast<double>(a.rows());
  return a.tape()->record(std::move(v), std::array{a}, [a, n](Tape& t, const Matrix& g) {
    t.accumulate(a, (g.row(0) / n).replicate(a.rows(), 1));
  });
}

Var softmax_rows(const Var& a) {
  Matrix y = a.value();
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    const double m = y.row(r).maxCoeff();
    y.row(r) = (y.row(r).array() - m).exp().matrix();
    y.row(r) /= y.row(r).sum();
  }
  Matrix y_copy = y;
  return a.tape()->record(std::move(y), std::array{a}, [a, y = std::move(y_copy)](Tape& t, const Matrix& g) {
    const Eigen::VectorXd dot = (g.array() * y.array()).rowwise().sum();
    Matrix d = y.array() * (g.array().colwise() - dot.array());
    t.accumulate(a, d);
  });
}

Var layer_norm_rows(const Var& a, double eps) {
  const Matrix& x = a.value();
  const Eigen::Index n = x.cols();
  Eigen::VectorXd mu = x.rowwise().mean();
  Matrix centered = x.colwise() - mu;
  Eigen::VectorXd inv_std =
      ((centered.array().square().rowwise().sum() / static_cast<double>(n)) + eps).rsqrt().matrix();
  Matrix xhat = centered.array().colwise() * inv_std.array();
  return a.tape()->record(xhat, std::array{a}, [a, xhat, inv_std](Tape& t, const Matrix& g) {
    const Eigen::VectorXd g_mean = g.rowwise().mean();
    const Eigen::VectorXd gx_mean = (g.array() * xhat.array()).rowwise().mean();
    Matrix d = g.colwise() - g_mean;
    d -= (xhat.array().colwise() * gx_mean.array()).matrix();
    d = d.array().colwise() * inv_std.array();
    t.accumulate(a, d);
  });
}

Var exclusive_cumsum_rows(const Var& a) {
  const Matrix& x = a.value();
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 1; c < x.cols(); ++c) y(r, c) = y(r, c - 1) + x(r, c - 1);
  return a.tape()->record(std::move(y), std::array{a}, [a](Tape& t, const Matrix& g) {
    // d out[j] / d a[k] = 1 for j > k: gradient is the exclusive suffix sum.
    Matrix d = Matrix::Zero(g.rows(), g.cols());
    for (Eigen::Index r = 0; r < g.rows(); ++r)
      for (Eigen::Index c = g.cols() - 2; c >= 0; --c) d(r, c) = d(r, c + 1) + g(r, c + 1);
    t.accumulate(a, d);
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("autodiff concat_cols: no inputs");
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const Var& p : parts) {
    if (p.rows() != rows) throw ValidationError("autodiff concat_cols: row mismatch");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ValidationError("autodiff concat_rows: no inputs");
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& p : parts) {
    if (p.cols() != cols) throw ValidationError("autodiff concat_rows: column mismatch");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  Eigen::Index at = 0;
  for (const Var& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return parts[0].tape()->record(std::move(v), parts, [ps](Tape& t, const Matrix& g) {
    Eigen::Index off = 0;
    for (const Var& p : ps) {
      if (t.requires_grad(p)) t.accumulate(p, g.middleRows(off, p.rows()));
      off += p.rows();
    }
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) throw ValidationError("autodiff slice_cols: out of range");
  Matrix v = a.value().middleCols(start, count);
  return a.tape()->record(std::move(v), std::array{a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleCols(start, count) = g;
    t.accumulate(a, d);
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) throw ValidationError("autodiff slice_rows: out of range");
  Matrix v = a.value().middleRows(start, count);
  return a.tape()->record(std::move(v), std::array{a}, [a, start, count](Tape& t, const Matrix& g) {
    Matrix d = Matrix::Zero(a.rows(), a.cols());
    d.middleRows(start, count) = g;
    t.accumulate(a, d);
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.value().size()) throw ValidationError("autodiff reshape: element count mismatch");
  Matrix v = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Eigen::Index r0 = a.rows(), c0 = a.cols();
  return a.tape()->record(std::move(v), std::array{a}, [a, r0, c0](Tape& t, const Matrix& g) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), r0, c0));
  });
}

Var transpose(const Var& a) {
  Matrix v = a.value().transpose();
  return a.tape()->record(std::move(v), std::array{a}, [a](Tape& t, const Matrix& g) {
    t.accumulate(a, g.transpose());
  });
}

}  // namespace style3d::ad
