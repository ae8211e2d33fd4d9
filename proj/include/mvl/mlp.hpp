#pragma once

#include <vector>

#include "mvl/matrix.hpp"
#include "mvl/rng.hpp"

namespace mvl {

struct MlpLayer {
  Tensor weight;  // in x out
  Tensor bias;    // 1 x out
};

// Affine -> relu -> dropout stack ending in a single linear logit.
struct MlpParams {
  std::vector<MlpLayer> layers;
  double dropout = 0.0;

  int input_dim() const { return layers.front().weight.value.rows(); }
  TensorRefs tensors();
};

// dims runs input, hidden..., and the final entry must be 1.
MlpParams init_mlp(const std::vector<int>& dims, double dropout, Rng& rng);

struct MlpCache {
  std::vector<Matrix> inputs;  // activation fed to each layer
  std::vector<Matrix> masks;   // dropout masks (empty when unused)
};

// x is N x input_dim; returns N x 1 logits. Dropout draws from `dropout_rng`
// only in train mode with a positive rate, so rate 0 in train mode matches
// eval output exactly.
Matrix mlp_forward(const MlpParams& p, const Matrix& x, bool train_mode, Rng* dropout_rng,
                   MlpCache* cache);

// Accumulates parameter gradients, returns d(loss)/dx.
Matrix mlp_backward(MlpParams& p, const MlpCache& cache, const Matrix& d_logits);

// Mean binary cross-entropy of sigmoid(logit) against 0/1 labels, the
// numerically stable way. Fills d_logits (dL/dz, including the 1/N) when
// non-null.
double bce_with_logits(const Matrix& logits, const std::vector<int>& labels, Matrix* d_logits);

}  // namespace mvl
