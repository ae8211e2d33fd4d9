#pragma once

#include <string>
#include <vector>

#include "mvl/matrix.hpp"

namespace mvl {

// One mini-batch of paired per-admission embeddings, one row per record.
struct ViewBatch {
  Matrix code_view;  // N x d_C, stacked graph-encoder outputs
  Matrix text_view;  // N x d_A, stacked text-encoder outputs
};

// Fixed linear maps to the L maximally correlated dimensions, solved once
// from the full training set and frozen afterwards.
struct DccaProjection {
  Matrix u;             // d_C x L
  Matrix v;             // d_A x L
  Matrix code_mean;     // 1 x d_C centering vector
  Matrix text_mean;     // 1 x d_A
  double r_code = 0.0;
  double r_text = 0.0;
  int dims = 0;         // L
};

struct DccaOptions {
  double r_code = 1e-4;
  double r_text = 1e-4;
  int dims = 20;         // L
  bool center = true;    // column centering before covariances
};

// Sum of the top-L singular values of Sigma_CC^{-1/2} Sigma_CA Sigma_AA^{-1/2},
// the optimum of the constrained trace objective.
double total_correlation(const ViewBatch& batch, const DccaOptions& opt);

struct DccaGradient {
  double correlation = 0.0;
  Matrix d_code;  // N x d_C
  Matrix d_text;  // N x d_A
};

// Analytic gradient of total_correlation with respect to both stacked views.
// Requires a singular-value gap at index L; on a degenerate gap the
// regularizers are jittered by (1 + 1e-6) and the solve retried before
// giving up.
DccaGradient dcca_gradient(const ViewBatch& batch, const DccaOptions& opt);

// U = Sigma_CC^{-1/2} P_L, V = Sigma_AA^{-1/2} Q_L with the centering vectors
// stored for later projection. Throws when the views are rank deficient
// below L after regularization.
DccaProjection compute_projections(const ViewBatch& full_train, const DccaOptions& opt);

enum class View { kCode, kText };

// (g_out - stored mean) * U (or V). Accepts a single row or a batch of rows.
Matrix project(const Matrix& g_out, const DccaProjection& proj, View view);

// Classical CCA oracle: center, whiten each view's data explicitly, full SVD
// of the whitened cross-covariance. Shares only numeric primitives with
// total_correlation.
std::vector<double> cca_oracle(const Matrix& x, const Matrix& y, double r);

void save_projection(const DccaProjection& proj, const std::string& path);
DccaProjection load_projection(const std::string& path);

}  // namespace mvl
