#pragma once

#include <vector>

#include "mvl/matrix.hpp"

namespace mvl {

struct SymmEig {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are the matching orthonormal eigenvectors
};

// Cyclic Jacobi on a symmetric matrix. Input must be symmetric to 1e-10
// (relative to its scale); eigenvalues come back descending and every
// eigenvector is normalized with its first nonzero component positive, so
// identical input bits give identical output bits.
SymmEig symm_eig(const Matrix& a);

// B with B*A*B ~ I on the non-degenerate subspace of a PSD matrix.
// Eigenvalues are clamped below at `floor`; anything under -1e-6 throws.
Matrix inv_sqrt_psd(const Matrix& a, double floor = 1e-12);

// Singular values (descending, length min(rows, cols)) via the Gram matrix
// of the smaller side.
std::vector<double> singular_values(const Matrix& a);

struct Svd {
  Matrix u;               // rows x k
  std::vector<double> s;  // descending, k = min(rows, cols)
  Matrix v;               // cols x k
};

// Thin SVD derived from the Gram-side eigendecomposition. Columns whose
// singular value falls below `tiny` are left as zero vectors; callers that
// need those directions must gate on s.
Svd thin_svd(const Matrix& a, double tiny = 1e-12);

}  // namespace mvl
