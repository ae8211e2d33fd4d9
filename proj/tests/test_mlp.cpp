#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "mvl/gradcheck.hpp"
#include "mvl/mlp.hpp"
#include "mvl/rng.hpp"

using namespace mvl;

TEST_CASE("zero weights give logit zero, probability one half") {
  Rng rng(1);
  MlpParams p = init_mlp({4, 3, 1}, 0.0, rng);
  for (Tensor* t : p.tensors()) t->value.zero();
  Matrix x = Matrix::uniform(5, 4, rng, -1, 1);
  Matrix logits = mlp_forward(p, x, false, nullptr, nullptr);
  CHECK(logits.max_abs() == 0.0);
}

TEST_CASE("single linear layer reproduces the affine map") {
  Rng rng(2);
  MlpParams p = init_mlp({3, 1}, 0.0, rng);
  p.layers[0].weight.value = Matrix(3, 1, {1, 2, 3});
  p.layers[0].bias.value(0, 0) = 0.5;
  Matrix x(1, 3, {1, 1, 1});
  Matrix logits = mlp_forward(p, x, false, nullptr, nullptr);
  CHECK(logits(0, 0) == doctest::Approx(6.5).epsilon(1e-15));
}

TEST_CASE("dropout rate zero in train mode equals eval mode exactly") {
  Rng rng(3);
  MlpParams p = init_mlp({4, 6, 1}, 0.0, rng);
  Matrix x = Matrix::uniform(8, 4, rng, -1, 1);
  Rng drop(99);
  Matrix train = mlp_forward(p, x, true, &drop, nullptr);
  Matrix eval = mlp_forward(p, x, false, nullptr, nullptr);
  CHECK((train - eval).max_abs() == 0.0);
}

TEST_CASE("dropout draws are seeded and reproducible") {
  Rng rng(4);
  MlpParams p = init_mlp({4, 6, 1}, 0.4, rng);
  Matrix x = Matrix::uniform(8, 4, rng, -1, 1);
  Rng d1(7), d2(7);
  Matrix a = mlp_forward(p, x, true, &d1, nullptr);
  Matrix b = mlp_forward(p, x, true, &d2, nullptr);
  CHECK((a - b).max_abs() == 0.0);
}

TEST_CASE("bce with logits at zero is log 2") {
  Matrix logits(2, 1);
  Matrix d(2, 1);
  double loss = bce_with_logits(logits, {0, 1}, &d);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(d(0, 0) == doctest::Approx(0.25).epsilon(1e-12));   // (0.5 - 0)/2
  CHECK(d(1, 0) == doctest::Approx(-0.25).epsilon(1e-12));  // (0.5 - 1)/2
}

TEST_CASE("mlp gradients match finite differences through bce") {
  Rng rng(5);
  MlpParams p = init_mlp({4, 5, 1}, 0.0, rng);
  Matrix x = Matrix::uniform(3, 4, rng, -1, 1);
  std::vector<int> labels{1, 0, 1};

  TensorRefs refs = p.tensors();
  zero_grads(refs);
  MlpCache cache;
  Matrix logits = mlp_forward(p, x, true, nullptr, &cache);
  Matrix d_logits(3, 1);
  bce_with_logits(logits, labels, &d_logits);
  mlp_backward(p, cache, d_logits);
  auto analytic = flatten_grads(refs);
  auto x0 = flatten_values(refs);

  auto f = [&](const std::vector<double>& flat) {
    assign_values(refs, flat);
    Matrix z = mlp_forward(p, x, true, nullptr, nullptr);
    return bce_with_logits(z, labels, nullptr);
  };
  CHECK(grad_check(f, x0, analytic) <= 1e-6);
  assign_values(refs, x0);
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(6);
  MlpParams p = init_mlp({3, 4, 1}, 0.0, rng);
  Matrix x = Matrix::uniform(2, 3, rng, -1, 1);
  std::vector<int> labels{0, 1};

  MlpCache cache;
  Matrix logits = mlp_forward(p, x, false, nullptr, &cache);
  Matrix d_logits(2, 1);
  bce_with_logits(logits, labels, &d_logits);
  zero_grads(p.tensors());
  Matrix dx = mlp_backward(p, cache, d_logits);

  std::vector<double> flat(x.data(), x.data() + x.size());
  std::vector<double> analytic(dx.data(), dx.data() + dx.size());
  auto f = [&](const std::vector<double>& v) {
    Matrix xx(2, 3, v);
    Matrix z = mlp_forward(p, xx, false, nullptr, nullptr);
    return bce_with_logits(z, labels, nullptr);
  };
  CHECK(grad_check(f, flat, analytic) <= 1e-6);
}

TEST_CASE("init rejects bad shapes") {
  Rng rng(7);
  CHECK_THROWS_AS(init_mlp({4, 2}, 0.0, rng), std::invalid_argument);   // output dim must be 1
  CHECK_THROWS_AS(init_mlp({4, 1}, 1.0, rng), std::invalid_argument);   // dropout < 1
  MlpParams p = init_mlp({4, 1}, 0.0, rng);
  Matrix x(2, 5);
  CHECK_THROWS_AS(mlp_forward(p, x, false, nullptr, nullptr), std::invalid_argument);
}
