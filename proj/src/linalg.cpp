#include "mvl/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mvl {

namespace {

double off_diag_norm(const Matrix& a) {
  double s = 0.0;
  for (int p = 0; p < a.rows(); ++p) {
    for (int q = p + 1; q < a.cols(); ++q) s += 2.0 * a(p, q) * a(p, q);
  }
  return std::sqrt(s);
}

void check_symmetric(const Matrix& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("symm_eig: matrix is not square: " + a.shape_str());
  const double tol = 1e-10 * std::max(1.0, a.max_abs());
  for (int p = 0; p < a.rows(); ++p) {
    for (int q = p + 1; q < a.cols(); ++q) {
      if (std::fabs(a(p, q) - a(q, p)) > tol) {
        throw std::invalid_argument("symm_eig: matrix is not symmetric to tolerance");
      }
    }
  }
}

}  // namespace

SymmEig symm_eig(const Matrix& a) {
  check_symmetric(a);
  const int n = a.rows();

  // Work on the symmetrized copy so tiny asymmetries cannot bias rotations.
  Matrix w(n, n);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q < n; ++q) w(p, q) = 0.5 * (a(p, q) + a(q, p));
  }
  Matrix v = Matrix::identity(n);

  const double frob = std::max(w.frob_norm(), 1e-300);
  const int max_sweeps = 64;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    if (off_diag_norm(w) <= 1e-15 * frob) break;
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = w(p, q);
        if (std::fabs(apq) <= 1e-300) continue;
        const double app = w(p, p);
        const double aqq = w(q, q);
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int r = 0; r < n; ++r) {
          const double wrp = w(r, p);
          const double wrq = w(r, q);
          w(r, p) = c * wrp - s * wrq;
          w(r, q) = s * wrp + c * wrq;
        }
        for (int r = 0; r < n; ++r) {
          const double wpr = w(p, r);
          const double wqr = w(q, r);
          w(p, r) = c * wpr - s * wqr;
          w(q, r) = s * wpr + c * wqr;
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = c * vrp - s * vrq;
          v(r, q) = s * vrp + c * vrq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return w(i, i) > w(j, j); });

  SymmEig out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    out.values[k] = w(src, src);
    // Sign convention: first component with magnitude above 1e-12 positive.
    double sign = 1.0;
    for (int r = 0; r < n; ++r) {
      if (std::fabs(v(r, src)) > 1e-12) {
        sign = v(r, src) > 0.0 ? 1.0 : -1.0;
        break;
      }
    }
    for (int r = 0; r < n; ++r) out.vectors(r, k) = sign * v(r, src);
  }
  return out;
}

Matrix inv_sqrt_psd(const Matrix& a, double floor) {
  SymmEig eig = symm_eig(a);
  for (double lam : eig.values) {
    if (lam < -1e-6) throw std::invalid_argument("inv_sqrt_psd: strongly negative eigenvalue");
  }
  const int n = a.rows();
  Matrix scaled = eig.vectors;  // columns scaled by lambda^{-1/2}
  for (int k = 0; k < n; ++k) {
    const double lam = std::max(eig.values[k], floor);
    const double f = 1.0 / std::sqrt(lam);
    for (int r = 0; r < n; ++r) scaled(r, k) *= f;
  }
  Matrix b = matmul(scaled, eig.vectors, false, true);
  // Exact symmetry keeps downstream eigen calls happy.
  for (int p = 0; p < n; ++p) {
    for (int q = p + 1; q < n; ++q) {
      const double m = 0.5 * (b(p, q) + b(q, p));
      b(p, q) = m;
      b(q, p) = m;
    }
  }
  return b;
}

std::vector<double> singular_values(const Matrix& a) {
  const bool tall = a.rows() >= a.cols();
  Matrix gram = tall ? matmul(a, a, true, false) : matmul(a, a, false, true);
  SymmEig eig = symm_eig(gram);
  std::vector<double> s(eig.values.size());
  for (size_t i = 0; i < s.size(); ++i) s[i] = std::sqrt(std::max(eig.values[i], 0.0));
  return s;
}

Svd thin_svd(const Matrix& a, double tiny) {
  const int m = a.rows();
  const int n = a.cols();
  const int k = std::min(m, n);
  Svd out;
  out.s.resize(k);
  out.u = Matrix(m, k);
  out.v = Matrix(n, k);

  const bool gram_right = n <= m;  // eigendecompose the smaller Gram matrix
  Matrix gram = gram_right ? matmul(a, a, true, false) : matmul(a, a, false, true);
  SymmEig eig = symm_eig(gram);

  for (int i = 0; i < k; ++i) out.s[i] = std::sqrt(std::max(eig.values[i], 0.0));

  Matrix& small_side = gram_right ? out.v : out.u;
  for (int i = 0; i < k; ++i) {
    for (int r = 0; r < small_side.rows(); ++r) small_side(r, i) = eig.vectors(r, i);
  }

  // Other factor: column i = op(A) * w_i / s_i, left zero when s_i is tiny.
  Matrix& big_side = gram_right ? out.u : out.v;
  Matrix prod = gram_right ? matmul(a, small_side) : matmul(a, small_side, true, false);
  for (int i = 0; i < k; ++i) {
    if (out.s[i] > tiny) {
      const double f = 1.0 / out.s[i];
      for (int r = 0; r < big_side.rows(); ++r) big_side(r, i) = prod(r, i) * f;
    }
  }
  return out;
}

}  // namespace mvl
