#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "mvl/gradcheck.hpp"
#include "mvl/linalg.hpp"
#include "mvl/matrix.hpp"
#include "mvl/rng.hpp"

using mvl::Matrix;
using mvl::Rng;

namespace {

Matrix random_symmetric(int n, Rng& rng, double scale = 1.0) {
  Matrix a(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double v = rng.uniform(-scale, scale);
      a(i, j) = v;
      a(j, i) = v;
    }
  }
  return a;
}

Matrix random_spd(int n, Rng& rng) {
  Matrix b = Matrix::uniform(n + 3, n, rng, -1, 1);
  Matrix a = matmul(b, b, true, false);
  for (int i = 0; i < n; ++i) a(i, i) += 0.1;
  return a;
}

}  // namespace

TEST_CASE("eig of a diagonal matrix sorts descending with axis vectors") {
  Matrix a(3, 3, {3, 0, 0, 0, 1, 0, 0, 0, 2});
  auto eig = mvl::symm_eig(a);
  CHECK(eig.values[0] == doctest::Approx(3).epsilon(1e-12));
  CHECK(eig.values[1] == doctest::Approx(2).epsilon(1e-12));
  CHECK(eig.values[2] == doctest::Approx(1).epsilon(1e-12));
  // eigenvector of 3 is e0, of 2 is e2, of 1 is e1
  CHECK(std::fabs(eig.vectors(0, 0)) == doctest::Approx(1).epsilon(1e-12));
  CHECK(std::fabs(eig.vectors(2, 1)) == doctest::Approx(1).epsilon(1e-12));
  CHECK(std::fabs(eig.vectors(1, 2)) == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("2x2 eigenvalues from the characteristic polynomial") {
  Matrix a(2, 2, {2, 1, 1, 2});
  auto eig = mvl::symm_eig(a);
  CHECK(eig.values[0] == doctest::Approx(3).epsilon(1e-12));
  CHECK(eig.values[1] == doctest::Approx(1).epsilon(1e-12));
}

TEST_CASE("random symmetric reconstructs and Q is orthonormal") {
  Rng rng(31);
  Matrix a = random_symmetric(10, rng, 2.0);
  auto eig = mvl::symm_eig(a);

  Matrix lam(10, 10);
  for (int i = 0; i < 10; ++i) lam(i, i) = eig.values[i];
  Matrix recon = matmul(matmul(eig.vectors, lam), eig.vectors, false, true);
  CHECK((recon - a).max_abs() <= 1e-8);

  Matrix qtq = matmul(eig.vectors, eig.vectors, true, false);
  CHECK((qtq - Matrix::identity(10)).max_abs() <= 1e-10);
}

TEST_CASE("eig output is deterministic, including eigenvector signs") {
  Rng rng(77);
  Matrix a = random_symmetric(8, rng);
  auto e1 = mvl::symm_eig(a);
  auto e2 = mvl::symm_eig(a);
  CHECK((e1.vectors - e2.vectors).max_abs() == 0.0);
  for (int k = 0; k < 8; ++k) {
    for (int r = 0; r < 8; ++r) {
      if (std::fabs(e1.vectors(r, k)) > 1e-12) {
        CHECK(e1.vectors(r, k) > 0.0);
        break;
      }
    }
  }
}

TEST_CASE("non-symmetric input is rejected") {
  Matrix a(2, 2, {1, 2, 0, 1});
  CHECK_THROWS_AS(mvl::symm_eig(a), std::invalid_argument);
}

TEST_CASE("inv_sqrt_psd of identity is identity") {
  Matrix b = mvl::inv_sqrt_psd(Matrix::identity(4));
  CHECK((b - Matrix::identity(4)).max_abs() <= 1e-12);
}

TEST_CASE("inv_sqrt_psd of diag(4,9)") {
  Matrix a(2, 2, {4, 0, 0, 9});
  Matrix b = mvl::inv_sqrt_psd(a);
  CHECK(b(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(std::fabs(b(0, 1)) <= 1e-14);
}

TEST_CASE("inv_sqrt_psd whitens a random SPD matrix") {
  Rng rng(41);
  Matrix a = random_spd(12, rng);
  Matrix b = mvl::inv_sqrt_psd(a);
  Matrix bab = matmul(matmul(b, a), b);
  CHECK((bab - Matrix::identity(12)).max_abs() <= 1e-8);
}

TEST_CASE("inv_sqrt_psd rejects strongly negative eigenvalues") {
  Matrix a(2, 2, {1, 0, 0, -0.5});
  CHECK_THROWS_AS(mvl::inv_sqrt_psd(a), std::invalid_argument);
}

TEST_CASE("singular values of diag(2,-3)") {
  Matrix a(2, 2, {2, 0, 0, -3});
  auto s = mvl::singular_values(a);
  CHECK(s[0] == doctest::Approx(3).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(2).epsilon(1e-12));
}

TEST_CASE("rank-1 outer product has one singular value") {
  Matrix u(3, 1, {1, 2, 2});
  Matrix v(1, 4, {0, 3, 0, 4});
  Matrix a = matmul(u, v);
  auto s = mvl::singular_values(a);
  CHECK(s[0] == doctest::Approx(15.0).epsilon(1e-10));  // |u|=3, |v|=5
  for (size_t i = 1; i < s.size(); ++i) CHECK(s[i] <= 1e-8);
}

TEST_CASE("singular values match the Gram eigen oracle and transpose") {
  Rng rng(53);
  Matrix a = Matrix::uniform(6, 4, rng, -1, 1);
  auto s = mvl::singular_values(a);
  auto eig = mvl::symm_eig(matmul(a, a, true, false));
  for (int i = 0; i < 4; ++i) CHECK(s[i] == doctest::Approx(std::sqrt(std::max(eig.values[i], 0.0))).epsilon(1e-9));
  auto st = mvl::singular_values(a.transposed());
  for (int i = 0; i < 4; ++i) CHECK(std::fabs(s[i] - st[i]) <= 1e-10);
}

TEST_CASE("thin_svd reconstructs a random matrix") {
  Rng rng(59);
  Matrix a = Matrix::uniform(7, 5, rng, -1, 1);
  auto svd = mvl::thin_svd(a);
  Matrix us = svd.u;
  for (int i = 0; i < 5; ++i) {
    for (int r = 0; r < 7; ++r) us(r, i) *= svd.s[i];
  }
  CHECK((matmul(us, svd.v, false, true) - a).max_abs() <= 1e-9);
  // and for the wide orientation
  Matrix b = a.transposed();
  auto svdb = mvl::thin_svd(b);
  Matrix us2 = svdb.u;
  for (int i = 0; i < 5; ++i) {
    for (int r = 0; r < 5; ++r) us2(r, i) *= svdb.s[i];
  }
  CHECK((matmul(us2, svdb.v, false, true) - b).max_abs() <= 1e-9);
}

TEST_CASE("grad_check accepts a correct gradient of x'x") {
  std::vector<double> x{0.3, -0.7, 1.1};
  auto f = [](const std::vector<double>& p) {
    double s = 0;
    for (double v : p) s += v * v;
    return s;
  };
  std::vector<double> g{2 * 0.3, 2 * -0.7, 2 * 1.1};
  CHECK(mvl::grad_check(f, x, g) <= 1e-8);
}

TEST_CASE("grad_check accepts the tanh gradient") {
  std::vector<double> x{0.2, -0.5, 0.9, -1.3};
  auto f = [](const std::vector<double>& p) {
    double s = 0;
    for (double v : p) s += std::tanh(v);
    return s;
  };
  std::vector<double> g;
  for (double v : x) g.push_back(1.0 - std::tanh(v) * std::tanh(v));
  CHECK(mvl::grad_check(f, x, g) <= 1e-7);
}

TEST_CASE("grad_check flags a doubled gradient") {
  std::vector<double> x{1.0, 2.0};
  auto f = [](const std::vector<double>& p) { return p[0] * p[0] + p[1] * p[1]; };
  std::vector<double> wrong{4.0, 8.0};  // 2x the true gradient
  double err = mvl::grad_check(f, x, wrong);
  CHECK(err > 0.4);
  CHECK(err < 0.6);
}
