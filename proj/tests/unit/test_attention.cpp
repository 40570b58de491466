#include "style3d/attention.hpp"
#include "style3d/diffusion/backend.hpp"
#include "style3d/error.hpp"
#include "style3d/rng.hpp"
#include "test_support.hpp"

#include <doctest.h>

using namespace style3d;
using namespace style3d::attn;
using test_support::bit_equal;
using test_support::max_rel_error;
using test_support::to_grid;

namespace {

FeatureTensor ft(Matrix m, FeatureKind kind = FeatureKind::query) { return FeatureTensor(std::move(m), "l", 1, kind); }

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

AttnConfig cfg_with(double lambda, Beta beta) { return AttnConfig(lambda, beta, default_fusion_layers()); }

}  // namespace

TEST_CASE("feature tensors reject empty and non-finite data") {
  CHECK_THROWS_AS(FeatureTensor(Matrix(0, 3)), ValidationError);
  Matrix bad = Matrix::Ones(2, 2);
  bad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(FeatureTensor{bad}, ValidationError);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(FeatureTensor{bad}, ValidationError);
}

TEST_CASE("attention config validation and defaults") {
  const AttnConfig def;
  CHECK(def.lambda() == 1.5);
  CHECK(def.beta() == Beta{0.4, 0.6});
  CHECK(def.target_layers() == default_fusion_layers());
  CHECK(def.target_layers().size() == 5);
  CHECK_FALSE(def.has_lambda_schedule());
  CHECK(def.lambda_at(17) == 1.5);

  CHECK_THROWS_AS(AttnConfig(0.0, Beta{0.5, 0.5}, {}), ValidationError);
  CHECK_THROWS_AS(AttnConfig(-1.0, Beta{0.5, 0.5}, {}), ValidationError);
  CHECK_THROWS_AS(AttnConfig(1.0, Beta{0.5, 0.6}, {}), ValidationError);
  CHECK_THROWS_AS(AttnConfig(1.0, Beta{1.2, -0.2}, {}), ValidationError);

  AttnConfig scheduled = def;
  scheduled.set_lambda_schedule([](int t) { return t < 10 ? 2.0 : 1.0; });
  CHECK(scheduled.lambda_at(3) == 2.0);
  CHECK(scheduled.lambda_at(30) == 1.0);
  scheduled.set_lambda_schedule([](int) { return 0.0; });
  CHECK_THROWS_AS(scheduled.lambda_at(1), ValidationError);
}

TEST_CASE("blend_queries") {
  Rng rng(1);
  const FeatureTensor a = ft(rng.normal_matrix(8, 16, 1.0));
  const FeatureTensor b = ft(rng.normal_matrix(8, 16, 1.0));

  SUBCASE("endpoints select one input exactly") {
    CHECK(bit_equal(blend_queries(a, b, {1.0, 0.0}).data(), a.data()));
    CHECK(bit_equal(blend_queries(a, b, {0.0, 1.0}).data(), b.data()));
  }
  SUBCASE("midpoint") {
    const Matrix out = blend_queries(ft(mat({{2, 0}})), ft(mat({{0, 2}})), {0.5, 0.5}).data();
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == 1.0);
  }
  SUBCASE("matches an elementwise loop at the default weights") {
    const Matrix out = blend_queries(a, b, {0.4, 0.6}).data();
    double worst = 0.0;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 16; ++c) worst = std::max(worst, std::abs(out(r, c) - (0.4 * a.data()(r, c) + 0.6 * b.data()(r, c))));
    CHECK(worst <= 1e-15);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(blend_queries(a, ft(Matrix::Ones(8, 15)), {0.5, 0.5}), ValidationError);
    CHECK_THROWS_AS(blend_queries(a, b, {0.5, 0.4}), ValidationError);
  }
}

TEST_CASE("standard_attention") {
  SUBCASE("identity inputs give row-stochastic weights") {
    const Matrix eye = Matrix::Identity(2, 2);
    const Matrix w = attention_weights(eye, eye, 1.0 / std::sqrt(2.0));
    for (int r = 0; r < 2; ++r) {
      CHECK(w.row(r).sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(w.row(r).minCoeff() >= 0.0);
    }
    const Matrix out = standard_attention(ft(eye), ft(eye), ft(eye)).data();
    // Rows are convex combinations of the rows of v = I.
    for (int r = 0; r < 2; ++r) CHECK(out.row(r).sum() == doctest::Approx(1.0));
  }
  SUBCASE("single key returns v exactly") {
    const Matrix out = standard_attention(ft(mat({{5.0, -3.0}})), ft(mat({{-7.0, 2.0}})), ft(mat({{0.25, 9.5, -1.0}}))).data();
    CHECK(out(0, 0) == 0.25);
    CHECK(out(0, 1) == 9.5);
    CHECK(out(0, 2) == -1.0);
  }
  SUBCASE("matches the loop oracle on random 4x8 inputs") {
    Rng rng(2);
    for (int trial = 0; trial < 20; ++trial) {
      const Matrix q = rng.normal_matrix(4, 8, 1.0), k = rng.normal_matrix(4, 8, 1.0), v = rng.normal_matrix(4, 8, 1.0);
      const Matrix out = standard_attention(ft(q), ft(k), ft(v)).data();
      CHECK(max_rel_error(out, oracle::attention(to_grid(q), to_grid(k), to_grid(v))) <= 1e-6);
    }
  }
  SUBCASE("inner dimension mismatch") {
    CHECK_THROWS_AS(standard_attention(ft(Matrix::Ones(2, 3)), ft(Matrix::Ones(2, 4)), ft(Matrix::Ones(2, 4))),
                    ValidationError);
    CHECK_THROWS_AS(standard_attention(ft(Matrix::Ones(2, 3)), ft(Matrix::Ones(2, 3)), ft(Matrix::Ones(3, 4))),
                    ValidationError);
  }
}

TEST_CASE("fuse_attention") {
  Rng rng(3);
  SUBCASE("fusion disabled reduces to standard attention bit for bit") {
    const Matrix q = rng.normal_matrix(6, 8, 1.0), qp = rng.normal_matrix(6, 8, 1.0);
    const Matrix k = rng.normal_matrix(5, 8, 1.0), v = rng.normal_matrix(5, 3, 1.0);
    const Matrix fused = fuse_attention(ft(q), ft(qp), ft(k), ft(v), cfg_with(1.0, {1.0, 0.0}), 1).data();
    const Matrix base = standard_attention(ft(q), ft(k), ft(v)).data();
    CHECK(bit_equal(fused, base));
  }
  SUBCASE("default configuration") {
    const AttnConfig cfg;
    const Matrix q = rng.normal_matrix(4, 8, 1.0), qp = rng.normal_matrix(4, 8, 1.0);
    const Matrix k = rng.normal_matrix(6, 8, 1.0), v = rng.normal_matrix(6, 8, 1.0);
    const Matrix out = fuse_attention(ft(q), ft(qp), ft(k), ft(v), cfg, 1).data();
    const auto expect = oracle::fused_attention(to_grid(q), to_grid(qp), to_grid(k), to_grid(v), 0.4, 0.6, 1.5);
    CHECK(max_rel_error(out, expect) <= 1e-6);
  }
  SUBCASE("scalar example") {
    // Blended query (0.5, 0.5) scores both keys equally, so the output is the
    // mean of the value rows: (2, 3).
    const Matrix out = fuse_attention(ft(mat({{1, 0}})), ft(mat({{0, 1}})), ft(mat({{1, 0}, {0, 1}})),
                                      ft(mat({{1, 2}, {3, 4}})), cfg_with(1.0, {0.5, 0.5}), 1)
                           .data();
    CHECK(out.rows() == 1);
    CHECK(out.cols() == 2);
    CHECK(out(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(out(0, 1) == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("output shape is tokens(q) x dim(v)") {
    const Matrix out = fuse_attention(ft(rng.normal_matrix(7, 4, 1.0)), ft(rng.normal_matrix(7, 4, 1.0)),
                                      ft(rng.normal_matrix(3, 4, 1.0)), ft(rng.normal_matrix(3, 5, 1.0)), AttnConfig(), 2)
                           .data();
    CHECK(out.rows() == 7);
    CHECK(out.cols() == 5);
  }
  SUBCASE("linear in values") {
    const AttnConfig cfg;
    const Matrix q = rng.normal_matrix(5, 6, 1.0), qp = rng.normal_matrix(5, 6, 1.0), k = rng.normal_matrix(4, 6, 1.0);
    const Matrix v1 = rng.normal_matrix(4, 3, 1.0), v2 = rng.normal_matrix(4, 3, 1.0);
    const double a = 1.7, b = -0.4;
    const Matrix lhs = fuse_attention(ft(q), ft(qp), ft(k), ft(Matrix(a * v1 + b * v2)), cfg, 1).data();
    const Matrix rhs = a * fuse_attention(ft(q), ft(qp), ft(k), ft(v1), cfg, 1).data() +
                       b * fuse_attention(ft(q), ft(qp), ft(k), ft(v2), cfg, 1).data();
    CHECK(max_rel_error(lhs, rhs) <= 1e-6);
  }
  SUBCASE("errors") {
    const FeatureTensor q = ft(Matrix::Ones(2, 4));
    CHECK_THROWS_AS(fuse_attention(q, ft(Matrix::Ones(3, 4)), q, q, AttnConfig(), 1), ValidationError);
    CHECK_THROWS_AS(fuse_attention(q, q, ft(Matrix::Ones(2, 5)), ft(Matrix::Ones(2, 5)), AttnConfig(), 1),
                    ValidationError);
    const AttnConfig limited(1.0, {0.5, 0.5}, {}, TimestepRange{3, 5});
    CHECK_THROWS_AS(fuse_attention(q, q, q, q, limited, 2), ValidationError);
    CHECK_NOTHROW(fuse_attention(q, q, q, q, limited, 4));
  }
}

TEST_CASE("select_target_layers") {
  const auto& backbone = diffusion::default_toy_layers();
  SUBCASE("default config picks the five fusion layers in backbone order") {
    const auto sel = select_target_layers(backbone, AttnConfig());
    CHECK(sel == default_fusion_layers());
  }
  SUBCASE("empty target set") {
    CHECK(select_target_layers(backbone, AttnConfig(1.0, {1, 0}, {})).empty());
  }
  SUBCASE("glob over the last up-block attention") {
    const auto sel = select_target_layers(default_fusion_layers(), AttnConfig(1.0, {1, 0}, {"up_blocks.3.attentions.2.*"}));
    REQUIRE(sel.size() == 2);
    CHECK(sel[0] == "up_blocks.3.attentions.2.transformer_blocks.0.attn1");
    CHECK(sel[1] == "up_blocks.3.attentions.2.transformer_blocks.0.attn2");
  }
  SUBCASE("missing layers are reported by name") {
    const AttnConfig cfg(1.0, {1, 0}, {"up_blocks.3.attentions.0.transformer_blocks.0.attn2", "nope.attn1", "zz.*"});
    try {
      select_target_layers(backbone, cfg);
      FAIL("expected an error");
    } catch (const ValidationError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("nope.attn1") != std::string::npos);
      CHECK(msg.find("zz.*") != std::string::npos);
    }
  }
  SUBCASE("empty backbone") {
    CHECK_THROWS_AS(select_target_layers(std::vector<std::string>{}, AttnConfig()), ValidationError);
  }
}

TEST_CASE("attention weight properties on random inputs") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform() * 8), m = 1 + static_cast<int>(rng.uniform() * 8);
    const int d = 1 + static_cast<int>(rng.uniform() * 8);
    const Matrix q = rng.normal_matrix(n, d, 2.0), qp = rng.normal_matrix(n, d, 2.0), k = rng.normal_matrix(m, d, 2.0);
    const double lambda = rng.uniform(0.1, 3.0);
    const double bc = rng.uniform();
    const AttnConfig cfg = cfg_with(lambda, {bc, 1.0 - bc});

    const Matrix w = fused_attention_weights(ft(q), ft(qp), ft(k), cfg, 1);
    for (int r = 0; r < n; ++r) {
      CHECK(std::abs(w.row(r).sum() - 1.0) <= 1e-6);
      CHECK(w.row(r).minCoeff() >= 0.0);
      CHECK(w.row(r).maxCoeff() <= 1.0);
    }

    // Translating every logit of a row by a constant leaves the weights alone.
    const double shift = rng.uniform(-50.0, 50.0), scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix q_aug(n, d + 1), k_aug(m, d + 1);
    q_aug << q, Matrix::Constant(n, 1, shift / scale);
    k_aug << k, Matrix::Ones(m, 1);
    CHECK(max_rel_error(attention_weights(q_aug, k_aug, scale), attention_weights(q, k, scale)) <= 1e-6);

    // Larger lambda sharpens every row.
    const AttnConfig sharper = cfg_with(lambda * rng.uniform(1.01, 3.0), {bc, 1.0 - bc});
    const Eigen::VectorXd h1 = row_entropy(w);
    const Eigen::VectorXd h2 = row_entropy(fused_attention_weights(ft(q), ft(qp), ft(k), sharper, 1));
    for (int r = 0; r < n; ++r) CHECK(h2(r) <= h1(r) + 1e-12);
  }
}

TEST_CASE("blend endpoints ignore the unused query") {
  Rng rng(5);
  const Matrix q = rng.normal_matrix(4, 6, 1.0), qp = rng.normal_matrix(4, 6, 1.0);
  const Matrix k = rng.normal_matrix(5, 6, 1.0), v = rng.normal_matrix(5, 2, 1.0);
  const Matrix noise = rng.normal_matrix(4, 6, 10.0);
  const AttnConfig content_only = cfg_with(1.5, {1.0, 0.0});
  const AttnConfig preserve_only = cfg_with(1.5, {0.0, 1.0});
  CHECK(bit_equal(fuse_attention(ft(q), ft(qp), ft(k), ft(v), content_only, 1).data(),
                  fuse_attention(ft(q), ft(Matrix(qp + noise)), ft(k), ft(v), content_only, 1).data()));
  CHECK(bit_equal(fuse_attention(ft(q), ft(qp), ft(k), ft(v), preserve_only, 1).data(),
                  fuse_attention(ft(Matrix(q + noise)), ft(qp), ft(k), ft(v), preserve_only, 1).data()));
}
