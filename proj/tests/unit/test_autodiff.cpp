#include "oracles/finite_difference.hpp"
#include "style3d/autodiff.hpp"
#include "style3d/rng.hpp"

#include <doctest.h>

using namespace style3d;
namespace ad = style3d::ad;

namespace {

using Builder = std::function<ad::Var(ad::Tape&, const ad::Var&)>;

// Reduces the op output against fixed random weights so every output element
// contributes to the checked scalar.
double check_op(const Builder& build, const Matrix& x0, double h = 1e-6) {
  Matrix weights;
  {
    ad::Tape probe;
    const ad::Var y = build(probe, probe.constant(x0));
    Rng rng(99);
    weights = rng.normal_matrix(y.rows(), y.cols(), 1.0);
  }
  auto scalar = [&](ad::Tape& t, const ad::Var& x) { return ad::sum(build(t, x) * t.constant(weights)); };

  ad::Tape tape;
  const ad::Var x = tape.leaf(x0);
  tape.backward(scalar(tape, x));
  const Matrix analytic = x.grad();

  const Matrix numeric = oracle::central_difference(
      [&](const Matrix& xv) {
        ad::Tape t;
        return scalar(t, t.constant(xv)).scalar();
      },
      x0, h);
  return oracle::gradient_mismatch(analytic, numeric);
}

}  // namespace

TEST_CASE("elementwise and reduction ops match finite differences") {
  Rng rng(1);
  const Matrix x = rng.uniform_matrix(3, 4, 0.2, 1.5);  // positive for log/sqrt
  const Matrix other = rng.normal_matrix(3, 4, 1.0);
  const Matrix row = rng.normal_matrix(1, 4, 1.0);
  const Matrix col = rng.normal_matrix(3, 1, 1.0);

  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return a + t.constant(other); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return t.constant(other) - a; }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return a * t.constant(other); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return t.constant(other) / a; }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return a / (a + t.constant(Matrix::Ones(3, 4))); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::scale(a, -2.5); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::add_scalar(a, 3.0); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::add_row(a, t.constant(row)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::add_row(t.constant(other), ad::slice_rows(a, 0, 1)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::mul_col(a, t.constant(col)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::mul_col(t.constant(other), ad::slice_cols(a, 1, 1)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::mul_row(a, t.constant(row)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::mul_row(t.constant(other), ad::slice_rows(a, 2, 1)); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::softplus(a, 3.0); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::sigmoid(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::tanh(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::exp(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::log(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::sqrt(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::square(a); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::abs(a - t.constant(other)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::relu(a - t.constant(other)); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::row_sum(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::col_mean(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::mean(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::exclusive_cumsum_rows(a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::reshape(a, 2, 6); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::transpose(a); }, x) < 1e-6);
}

TEST_CASE("matrix ops match finite differences") {
  Rng rng(2);
  const Matrix x = rng.normal_matrix(4, 5, 1.0);
  const Matrix b = rng.normal_matrix(5, 3, 1.0);
  const Matrix c = rng.normal_matrix(6, 5, 1.0);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::matmul(a, t.constant(b)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::matmul(t.constant(c.transpose() * c), ad::transpose(a)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::matmul_transposed(a, t.constant(c)); }, x) < 1e-6);
  CHECK(check_op([&](ad::Tape& t, const ad::Var& a) { return ad::matmul_transposed(t.constant(c), a); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::softmax_rows(ad::scale(a, 2.0)); }, x) < 1e-6);
  CHECK(check_op([](ad::Tape&, const ad::Var& a) { return ad::layer_norm_rows(a); }, x) < 1e-5);
  CHECK(check_op(
            [](ad::Tape&, const ad::Var& a) {
              const std::array parts{a, ad::square(a)};
              return ad::concat_cols(parts);
            },
            x) < 1e-6);
  CHECK(check_op(
            [](ad::Tape&, const ad::Var& a) {
              const std::array parts{ad::tanh(a), a};
              return ad::concat_rows(parts);
            },
            x) < 1e-6);

  ad::SparseMatrix s(3, 4);
  s.insert(0, 1) = 0.5;
  s.insert(1, 0) = -1.0;
  s.insert(1, 3) = 2.0;
  s.insert(2, 2) = 0.25;
  s.makeCompressed();
  CHECK(check_op([&](ad::Tape&, const ad::Var& a) { return ad::sparse_left(s, a); }, x) < 1e-6);
}

TEST_CASE("a value reused along several paths accumulates its gradient") {
  ad::Tape t;
  Matrix v(1, 1);
  v(0, 0) = 3.0;
  const ad::Var x = t.leaf(v);
  const ad::Var y = x * x + ad::scale(x, 2.0);  // x^2 + 2x
  t.backward(ad::sum(y));
  CHECK(x.grad()(0, 0) == doctest::Approx(8.0));
}

TEST_CASE("constants receive no gradient") {
  ad::Tape t;
  const ad::Var c = t.constant(Matrix::Ones(2, 2));
  const ad::Var x = t.leaf(Matrix::Ones(2, 2));
  t.backward(ad::sum(c * x));
  CHECK(c.grad().size() == 0);
  CHECK(x.grad().isApprox(Matrix::Ones(2, 2)));
  CHECK_THROWS(t.backward(c));
}
