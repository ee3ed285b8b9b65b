#include <cmath>

#include <doctest.h>

#include "nqreader/adam.hpp"
#include "nqreader/tensor.hpp"
#include "helpers.hpp"

using namespace nqreader;
using nqreader::testing::check_op_gradients;
using nqreader::testing::random_matrix;

namespace {

Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
  Matrix c = Matrix::Zero(a.rows(), b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < b.cols(); ++j)
      for (Index k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

// exp-normalize over unmasked entries only
Matrix masked_softmax_oracle(const Matrix& s, const Matrix& mask) {
  Matrix out = Matrix::Zero(s.rows(), s.cols());
  for (Index i = 0; i < s.rows(); ++i) {
    Scalar sum = 0.0;
    for (Index j = 0; j < s.cols(); ++j)
      if (mask(i, j) == 0.0) sum += std::exp(s(i, j));
    if (sum == 0.0) continue;
    for (Index j = 0; j < s.cols(); ++j)
      if (mask(i, j) == 0.0) out(i, j) = std::exp(s(i, j)) / sum;
  }
  return out;
}

}  // namespace

TEST_CASE("matmul identity and scalar cases") {
  Rng rng(1);
  Matrix m = random_matrix(rng, 2, 2);
  Tensor identity = Tensor::leaf(Matrix::Identity(2, 2));
  Tensor t = Tensor::leaf(m);
  CHECK(matmul(identity, t).value() == m);

  Tensor a = Tensor::leaf(Matrix::Constant(1, 1, 2.0));
  Tensor b = Tensor::leaf(Matrix::Constant(1, 1, 3.0));
  CHECK(matmul(a, b).item() == 6.0);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  Rng rng(2);
  Matrix a = random_matrix(rng, 3, 4);
  Matrix b = random_matrix(rng, 4, 2);
  Matrix got = matmul(Tensor::leaf(a), Tensor::leaf(b)).value();
  Matrix want = matmul_oracle(a, b);
  CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("matmul rejects mismatched inner dimensions naming both shapes") {
  Tensor a = Tensor::zeros(2, 3);
  Tensor b = Tensor::zeros(4, 2);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("2x3"), ShapeError);
  try {
    matmul(a, b);
  } catch (const ShapeError& e) {
    CHECK(std::string(e.what()).find("4x2") != std::string::npos);
  }
}

TEST_CASE("matmul is associative within floating tolerance") {
  Rng rng(3);
  for (int round = 0; round < 20; ++round) {
    Matrix a = random_matrix(rng, 3, 5);
    Matrix b = random_matrix(rng, 5, 4);
    Matrix c = random_matrix(rng, 4, 2);
    Matrix left = matmul(matmul(Tensor::leaf(a), Tensor::leaf(b)), Tensor::leaf(c)).value();
    Matrix right = matmul(Tensor::leaf(a), matmul(Tensor::leaf(b), Tensor::leaf(c))).value();
    CHECK((left - right).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("ops are deterministic for identical inputs") {
  auto run = [] {
    Rng rng(11);
    Tensor x = Tensor::leaf(random_matrix(rng, 4, 6));
    Tensor w = Tensor::leaf(random_matrix(rng, 6, 3));
    Tensor b = Tensor::leaf(random_matrix(rng, 1, 3));
    Tensor g = Tensor::leaf(Matrix::Ones(1, 3));
    Tensor z = Tensor::leaf(Matrix::Zero(1, 3));
    return layer_norm(dense(x, w, b, Activation::kGelu), g, z).value();
  };
  Matrix first = run();
  Matrix second = run();
  CHECK(first == second);
}

TEST_CASE("masked_softmax uniform and fully masked rows") {
  Tensor s = Tensor::zeros(2, 2);
  Matrix got = masked_softmax(s, {}).value();
  CHECK(got == Matrix::Constant(2, 2, 0.5));

  Matrix mask_entries = Matrix::Zero(2, 2);
  mask_entries(1, 0) = kNegInf;
  mask_entries(1, 1) = kNegInf;
  Matrix with_mask = masked_softmax(s, {AdditiveMask(mask_entries)}).value();
  CHECK(with_mask(1, 0) == 0.0);
  CHECK(with_mask(1, 1) == 0.0);
  CHECK(with_mask(0, 0) == 0.5);
}

TEST_CASE("masked_softmax matches the exp-normalize oracle") {
  Rng rng(4);
  for (int round = 0; round < 25; ++round) {
    Matrix s = random_matrix(rng, 4, 4);
    Matrix mask_entries = Matrix::Zero(4, 4);
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        if (rng.uniform() < 0.4) mask_entries(i, j) = kNegInf;
    Matrix got = masked_softmax(Tensor::leaf(s), {AdditiveMask(mask_entries)}).value();
    Matrix want = masked_softmax_oracle(s, mask_entries);
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12);

    // unmasked rows sum to 1, masked entries are exactly zero
    for (Index i = 0; i < 4; ++i) {
      bool any_open = (mask_entries.row(i).array() == 0.0).any();
      if (any_open) CHECK(std::abs(got.row(i).sum() - 1.0) < 1e-12);
      for (Index j = 0; j < 4; ++j)
        if (mask_entries(i, j) != 0.0) CHECK(got(i, j) == 0.0);
    }
  }
}

TEST_CASE("masked_softmax rejects mask shape mismatch") {
  Tensor s = Tensor::zeros(2, 3);
  CHECK_THROWS_AS(masked_softmax(s, {AdditiveMask(2, 2)}), ShapeError);
}

TEST_CASE("additive masks accept only 0 and the sentinel") {
  Matrix ok(2, 2);
  ok << 0.0, kNegInf, kNegInf, 0.0;
  CHECK_NOTHROW(AdditiveMask{ok});

  Matrix bad(2, 2);
  bad << 0.0, -1.0, 0.0, 0.0;
  CHECK_THROWS_AS(AdditiveMask{bad}, DataError);
}

TEST_CASE("paragraph maps must be contiguous runs from zero") {
  CHECK_NOTHROW(ParagraphMap({0, 0, 1, 1, 2}));
  CHECK_THROWS_AS(ParagraphMap(std::vector<Index>{}), DataError);
  CHECK_THROWS_AS(ParagraphMap({1, 1, 2}), DataError);
  CHECK_THROWS_AS(ParagraphMap({0, 2}), DataError);      // skips paragraph 1
  CHECK_THROWS_AS(ParagraphMap({0, 1, 0}), DataError);   // non-adjacent run
  ParagraphMap seg({0, 0, 1});
  CHECK(seg.paragraphs() == 2);
  CHECK(seg.counts() == std::vector<Index>{2, 1});
}

TEST_CASE("layer_norm trivial rows") {
  Tensor gamma = Tensor::leaf(Matrix::Ones(1, 4));
  Tensor beta = Tensor::zeros(1, 4);
  Tensor constant_row = Tensor::leaf(Matrix::Constant(1, 4, 3.5));
  CHECK(layer_norm(constant_row, gamma, beta).value() == Matrix::Zero(1, 4));

  Matrix two(1, 2);
  two << 1.0, 3.0;
  Tensor g2 = Tensor::leaf(Matrix::Ones(1, 2));
  Tensor b2 = Tensor::zeros(1, 2);
  Matrix out = layer_norm(Tensor::leaf(two), g2, b2, 1e-12).value();
  CHECK(out(0, 0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(out(0, 1) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("layer_norm output statistics") {
  Rng rng(5);
  const Scalar eps = 1e-5;
  Matrix x = random_matrix(rng, 3, 8);
  Tensor gamma = Tensor::leaf(Matrix::Ones(1, 8));
  Tensor beta = Tensor::zeros(1, 8);
  Matrix out = layer_norm(Tensor::leaf(x), gamma, beta, eps).value();
  for (Index i = 0; i < 3; ++i) {
    CHECK(std::abs(out.row(i).mean()) < 1e-10);
    Scalar var = (out.row(i).array() - out.row(i).mean()).square().mean();
    Scalar raw_var = (x.row(i).array() - x.row(i).mean()).square().mean();
    Scalar expected = raw_var / (raw_var + eps);  // eps shrinks the unit variance slightly
    CHECK(std::abs(var - expected) < 1e-6);
  }
}

TEST_CASE("dense trivial cases and scalar-loop oracle") {
  Tensor x = Tensor::leaf(Matrix::Constant(2, 3, 0.7));
  Tensor w0 = Tensor::zeros(3, 2);
  Tensor b0 = Tensor::zeros(1, 2);
  CHECK(dense(x, w0, b0, Activation::kTanh).value() == Matrix::Zero(2, 2));
  CHECK(dense(Tensor::zeros(1, 3), w0, b0, Activation::kSigmoid).value() ==
        Matrix::Constant(1, 2, 0.5));

  Rng rng(6);
  Matrix xm = random_matrix(rng, 3, 4);
  Matrix wm = random_matrix(rng, 4, 2);
  Matrix bm = random_matrix(rng, 1, 2);
  for (Activation act : {Activation::kLinear, Activation::kTanh, Activation::kSigmoid,
                         Activation::kGelu}) {
    Matrix got = dense(Tensor::leaf(xm), Tensor::leaf(wm), Tensor::leaf(bm), act).value();
    for (Index i = 0; i < 3; ++i)
      for (Index j = 0; j < 2; ++j) {
        Scalar pre = bm(0, j);
        for (Index k = 0; k < 4; ++k) pre += xm(i, k) * wm(k, j);
        Scalar want = pre;
        if (act == Activation::kTanh) want = std::tanh(pre);
        if (act == Activation::kSigmoid) want = 1.0 / (1.0 + std::exp(-pre));
        if (act == Activation::kGelu) want = 0.5 * pre * (1.0 + std::erf(pre / std::sqrt(2.0)));
        CHECK(std::abs(got(i, j) - want) < 1e-12);
      }
  }
}

TEST_CASE("row pooling trivial and oracle cases") {
  Matrix single(1, 3);
  single << 1.0, -2.0, 0.5;
  CHECK(mean_pool_rows(Tensor::leaf(single)).value() == single);
  CHECK(max_pool_rows(Tensor::leaf(single)).value() == single);

  Matrix two(2, 2);
  two << 1.0, 4.0, 3.0, 2.0;
  Matrix mean = mean_pool_rows(Tensor::leaf(two)).value();
  Matrix mx = max_pool_rows(Tensor::leaf(two)).value();
  CHECK(mean(0, 0) == 2.0);
  CHECK(mean(0, 1) == 3.0);
  CHECK(mx(0, 0) == 3.0);
  CHECK(mx(0, 1) == 4.0);

  Rng rng(7);
  Matrix x = random_matrix(rng, 5, 3);
  Matrix got_mean = mean_pool_rows(Tensor::leaf(x)).value();
  Matrix got_max = max_pool_rows(Tensor::leaf(x)).value();
  for (Index j = 0; j < 3; ++j) {
    Scalar s = 0.0, m = x(0, j);
    for (Index i = 0; i < 5; ++i) {
      s += x(i, j);
      m = std::max(m, x(i, j));
    }
    CHECK(got_mean(0, j) == s / 5.0);
    CHECK(got_max(0, j) == m);
  }
}

TEST_CASE("row pooling rejects empty input") {
  Tensor empty = Tensor::leaf(Matrix(0, 3));
  CHECK_THROWS_AS(mean_pool_rows(empty), ShapeError);
  CHECK_THROWS_AS(max_pool_rows(empty), ShapeError);
}

TEST_CASE("max pooling routes ties to the first row") {
  Matrix x(3, 2);
  x << 2.0, 1.0, 2.0, 5.0, 0.0, 5.0;  // column ties at rows {0,1} and {1,2}
  Tensor leaf = Tensor::leaf(x, true);
  backward(sum_all(max_pool_rows(leaf)));
  Matrix want = Matrix::Zero(3, 2);
  want(0, 0) = 1.0;  // first of the tied rows
  want(1, 1) = 1.0;
  CHECK(leaf.grad() == want);
}

TEST_CASE("segment_mean_pool cases") {
  Matrix x3 = Matrix::Zero(3, 2);
  x3 << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0;
  Matrix pooled = segment_mean_pool(Tensor::leaf(x3), ParagraphMap({0, 0, 0})).value();
  CHECK(pooled.rows() == 1);
  CHECK(pooled(0, 0) == 3.0);
  CHECK(pooled(0, 1) == 4.0);

  Matrix x2(2, 2);
  x2 << 1.0, 1.0, 3.0, 3.0;
  CHECK(segment_mean_pool(Tensor::leaf(x2), ParagraphMap({0, 1})).value() == x2);

  Rng rng(8);
  Matrix x = random_matrix(rng, 12, 3);
  std::vector<Index> seg = {0, 0, 0, 1, 1, 2, 2, 2, 2, 3, 3, 3};
  Matrix got = segment_mean_pool(Tensor::leaf(x), ParagraphMap(seg)).value();
  Matrix want = Matrix::Zero(4, 3);
  std::vector<int> counts(4, 0);
  for (std::size_t i = 0; i < seg.size(); ++i) {
    want.row(seg[i]) += x.row(static_cast<Index>(i));
    ++counts[static_cast<std::size_t>(seg[i])];
  }
  for (Index p = 0; p < 4; ++p) want.row(p) /= counts[static_cast<std::size_t>(p)];
  CHECK(got == want);

  CHECK_THROWS_AS(segment_mean_pool(Tensor::zeros(5, 2), ParagraphMap({0, 0, 1})), ShapeError);
}

TEST_CASE("cross_entropy cases") {
  CHECK(cross_entropy(Tensor::zeros(1, 4), 2).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Matrix probs = Matrix::Zero(1, 3);
  probs(0, 0) = 1.0;
  Scalar near_zero = cross_entropy(Tensor::leaf(probs), 0, true).item();
  CHECK(near_zero == 0.0);

  Rng rng(9);
  for (int round = 0; round < 20; ++round) {
    Matrix z = random_matrix(rng, 1, 6);
    Index target = static_cast<Index>(rng.integer(6));
    Scalar got = cross_entropy(Tensor::leaf(z), target).item();
    Scalar lse = std::log(z.array().exp().sum());
    CHECK(std::abs(got - (lse - z(0, target))) < 1e-12);
  }

  CHECK_THROWS_AS(cross_entropy(Tensor::zeros(1, 3), 3), std::out_of_range);
  Matrix bad(1, 2);
  bad << 1.0, std::numeric_limits<Scalar>::quiet_NaN();
  Tensor bad_leaf = Tensor::zeros(1, 2);
  bad_leaf.value() = bad;
  CHECK_THROWS_AS(cross_entropy(bad_leaf, 0), DataError);
}

TEST_CASE("backward on simple analytic cases") {
  Rng rng(12);
  Tensor w = Tensor::leaf(random_matrix(rng, 2, 2), true);
  backward(sum_all(w));
  CHECK(w.grad() == Matrix::Ones(2, 2));

  Tensor a = Tensor::leaf(random_matrix(rng, 2, 2), true);
  Tensor b = Tensor::leaf(random_matrix(rng, 2, 2), true);
  a.reset_grad();
  backward(sum_all(matmul(a, b)));
  Matrix want_a = Matrix::Ones(2, 2) * b.value().transpose();
  Matrix want_b = a.value().transpose() * Matrix::Ones(2, 2);
  CHECK((a.grad() - want_a).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((b.grad() - want_b).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backward accumulates until reset") {
  Tensor w = Tensor::leaf(Matrix::Ones(2, 2), true);
  backward(sum_all(w));
  backward(sum_all(w));
  CHECK(w.grad() == Matrix::Constant(2, 2, 2.0));
  w.reset_grad();
  backward(sum_all(w));
  CHECK(w.grad() == Matrix::Ones(2, 2));
}

TEST_CASE("backward rejects non-scalar losses") {
  Tensor w = Tensor::leaf(Matrix::Ones(2, 2), true);
  CHECK_THROWS_AS(backward(scale(w, 2.0)), ShapeError);
  CHECK_THROWS_AS(backward(Tensor::zeros(1, 1)), std::invalid_argument);
}

TEST_CASE("per-op gradients match central finite differences") {
  Rng rng(13);

  SUBCASE("matmul") {
    Tensor a = Tensor::leaf(random_matrix(rng, 3, 4), true);
    Tensor b = Tensor::leaf(random_matrix(rng, 4, 2), true);
    check_op_gradients([&] { return matmul(a, b); }, {a, b});
  }
  SUBCASE("transpose+scale+sub") {
    Tensor a = Tensor::leaf(random_matrix(rng, 3, 4), true);
    Tensor b = Tensor::leaf(random_matrix(rng, 4, 3), true);
    check_op_gradients([&] { return sub(transpose(a), scale(b, 1.7)); }, {a, b});
  }
  SUBCASE("hadamard+add") {
    Tensor a = Tensor::leaf(random_matrix(rng, 3, 3), true);
    Tensor b = Tensor::leaf(random_matrix(rng, 3, 3), true);
    check_op_gradients([&] { return hadamard(add(a, b), b); }, {a, b});
  }
  SUBCASE("dense with every activation") {
    for (Activation act : {Activation::kLinear, Activation::kTanh, Activation::kSigmoid,
                           Activation::kGelu}) {
      Tensor x = Tensor::leaf(random_matrix(rng, 3, 4), true);
      Tensor w = Tensor::leaf(random_matrix(rng, 4, 2), true);
      Tensor b = Tensor::leaf(random_matrix(rng, 1, 2), true);
      check_op_gradients([&] { return dense(x, w, b, act); }, {x, w, b});
    }
  }
  SUBCASE("concat and slices") {
    Tensor a = Tensor::leaf(random_matrix(rng, 3, 2), true);
    Tensor b = Tensor::leaf(random_matrix(rng, 3, 3), true);
    check_op_gradients([&] { return slice_cols(concat_cols(a, b), 1, 3); }, {a, b});
    Tensor c = Tensor::leaf(random_matrix(rng, 2, 3), true);
    Tensor d = Tensor::leaf(random_matrix(rng, 4, 3), true);
    check_op_gradients([&] { return slice_rows(concat_rows(c, d), 1, 4); }, {c, d});
  }
  SUBCASE("gather_rows") {
    Tensor x = Tensor::leaf(random_matrix(rng, 4, 3), true);
    std::vector<Index> idx = {2, 0, 2, 3, 1, 2};
    check_op_gradients([&] { return gather_rows(x, idx); }, {x});
  }
  SUBCASE("masked_softmax") {
    Matrix mask_entries = Matrix::Zero(4, 4);
    mask_entries(0, 1) = kNegInf;
    mask_entries(2, 0) = kNegInf;
    mask_entries(3, 0) = mask_entries(3, 1) = mask_entries(3, 2) = mask_entries(3, 3) = kNegInf;
    AdditiveMask mask(mask_entries);
    Tensor s = Tensor::leaf(random_matrix(rng, 4, 4), true);
    check_op_gradients([&] { return masked_softmax(s, {mask}); }, {s});
  }
  SUBCASE("layer_norm") {
    Tensor x = Tensor::leaf(random_matrix(rng, 3, 6), true);
    Tensor gamma = Tensor::leaf(random_matrix(rng, 1, 6), true);
    Tensor beta = Tensor::leaf(random_matrix(rng, 1, 6), true);
    check_op_gradients([&] { return layer_norm(x, gamma, beta); }, {x, gamma, beta});
  }
  SUBCASE("pooling") {
    Tensor x = Tensor::leaf(random_matrix(rng, 5, 3), true);
    check_op_gradients([&] { return mean_pool_rows(x); }, {x});
    check_op_gradients([&] { return max_pool_rows(x); }, {x});
    check_op_gradients([&] { return segment_mean_pool(x, ParagraphMap({0, 0, 1, 2, 2})); }, {x});
  }
  SUBCASE("cross_entropy on logits and on probabilities") {
    Tensor z = Tensor::leaf(random_matrix(rng, 1, 5), true);
    check_op_gradients([&] { return cross_entropy(z, 3); }, {z});
    Tensor probs = Tensor::leaf(softmax_rows(Tensor::leaf(random_matrix(rng, 1, 5))).value(), true);
    check_op_gradients([&] { return cross_entropy(probs, 2, true); }, {probs});
  }
}

TEST_CASE("adam leaves parameters unchanged on zero gradients") {
  Rng rng(14);
  std::vector<Tensor> params = {Tensor::leaf(random_matrix(rng, 2, 3), true)};
  Matrix before = params[0].value();
  AdamState state = adam_init(params, 0.1);
  backward(scale(sum_all(params[0]), 0.0));
  adam_step(params, state);
  CHECK(params[0].value() == before);
}

TEST_CASE("adam first step moves by about lr in the gradient sign direction") {
  Rng rng(15);
  std::vector<Tensor> params = {Tensor::leaf(random_matrix(rng, 3, 3), true)};
  Matrix before = params[0].value();
  AdamState state = adam_init(params, 0.01);
  backward(sum_all(hadamard(params[0], params[0])));  // grad 2W, no zeros in practice
  Matrix grad = params[0].grad();
  adam_step(params, state);
  Matrix step = before - params[0].value();
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) {
      CHECK(step(i, j) * grad(i, j) > 0.0);  // moved against the gradient
      CHECK(std::abs(step(i, j)) == doctest::Approx(0.01).epsilon(1e-4));
    }
}

TEST_CASE("adam drives the squared norm down monotonically after warmup") {
  Rng rng(16);
  Matrix init = random_matrix(rng, 4, 4);
  // keep every coordinate well away from zero so no oscillation shows up
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 4; ++j)
      if (std::abs(init(i, j)) < 0.8) init(i, j) = init(i, j) < 0 ? -0.8 : 0.8;
  std::vector<Tensor> params = {Tensor::leaf(init, true)};
  AdamState state = adam_init(params, 0.005);
  Scalar previous = params[0].value().norm();
  for (int step = 1; step <= 100; ++step) {
    params[0].reset_grad();
    backward(sum_all(hadamard(params[0], params[0])));
    adam_step(params, state);
    Scalar current = params[0].value().norm();
    if (step > 5) CHECK(current < previous);
    previous = current;
  }
}
