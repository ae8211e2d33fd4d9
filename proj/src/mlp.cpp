#include "mvl/mlp.hpp"

#include <cmath>
#include <stdexcept>

namespace mvl {

TensorRefs MlpParams::tensors() {
  TensorRefs refs;
  for (MlpLayer& l : layers) {
    refs.push_back(&l.weight);
    refs.push_back(&l.bias);
  }
  return refs;
}

MlpParams init_mlp(const std::vector<int>& dims, double dropout, Rng& rng) {
  if (dims.size() < 2 || dims.back() != 1) throw std::invalid_argument("init_mlp: dims must end in 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("init_mlp: dropout outside [0, 1)");
  MlpParams p;
  p.dropout = dropout;
  for (size_t i = 0; i + 1 < dims.size(); ++i) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(dims[i]));
    MlpLayer layer;
    layer.weight = Tensor(Matrix::uniform(dims[i], dims[i + 1], rng, -bound, bound));
    layer.bias = Tensor(Matrix(1, dims[i + 1]));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

Matrix mlp_forward(const MlpParams& p, const Matrix& x, bool train_mode, Rng* dropout_rng,
                   MlpCache* cache) {
  if (x.cols() != p.input_dim()) {
    throw std::invalid_argument("mlp_forward: input width " + x.shape_str() + " does not match first layer");
  }
  if (cache) {
    cache->inputs.clear();
    cache->masks.clear();
  }
  const bool use_dropout = train_mode && p.dropout > 0.0;
  if (use_dropout && !dropout_rng) throw std::invalid_argument("mlp_forward: dropout needs an rng");

  Matrix h = x;
  for (size_t i = 0; i < p.layers.size(); ++i) {
    if (cache) cache->inputs.push_back(h);
    Matrix z = matmul(h, p.layers[i].weight.value);
    const double* bias = p.layers[i].bias.value.row(0);
    for (int r = 0; r < z.rows(); ++r) {
      double* row = z.row(r);
      for (int c = 0; c < z.cols(); ++c) row[c] += bias[c];
    }
    const bool last = (i + 1 == p.layers.size());
    if (!last) {
      for (int r = 0; r < z.rows(); ++r) {
        double* row = z.row(r);
        for (int c = 0; c < z.cols(); ++c) row[c] = row[c] > 0.0 ? row[c] : 0.0;
      }
      if (use_dropout) {
        Matrix mask(z.rows(), z.cols());
        const double keep = 1.0 - p.dropout;
        for (int r = 0; r < z.rows(); ++r) {
          for (int c = 0; c < z.cols(); ++c) {
            mask(r, c) = dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
            z(r, c) *= mask(r, c);
          }
        }
        if (cache) cache->masks.push_back(std::move(mask));
      } else if (cache) {
        cache->masks.emplace_back();
      }
    }
    h = std::move(z);
  }
  return h;
}

Matrix mlp_backward(MlpParams& p, const MlpCache& cache, const Matrix& d_logits) {
  if (cache.inputs.size() != p.layers.size()) {
    throw std::invalid_argument("mlp_backward: cache does not match forward");
  }
  Matrix d = d_logits;
  for (int i = static_cast<int>(p.layers.size()) - 1; i >= 0; --i) {
    const bool last = (i + 1 == static_cast<int>(p.layers.size()));
    if (!last) {
      // Through dropout, then relu; the cached input to layer i+1 is the
      // post-relu (pre-dropout-scale) activation times the mask.
      const Matrix& act = cache.inputs[i + 1];
      const Matrix& mask = cache.masks[i];
      for (int r = 0; r < d.rows(); ++r) {
        for (int c = 0; c < d.cols(); ++c) {
          if (!mask.empty()) d(r, c) *= mask(r, c);
          if (act(r, c) == 0.0) d(r, c) = 0.0;
        }
      }
    }
    matmul_acc(p.layers[i].weight.grad, cache.inputs[i], d, true, false);
    for (int r = 0; r < d.rows(); ++r) {
      const double* src = d.row(r);
      double* dst = p.layers[i].bias.grad.row(0);
      for (int c = 0; c < d.cols(); ++c) dst[c] += src[c];
    }
    d = matmul(d, p.layers[i].weight.value, false, true);
  }
  return d;
}

double bce_with_logits(const Matrix& logits, const std::vector<int>& labels, Matrix* d_logits) {
  const int n = logits.rows();
  if (logits.cols() != 1 || static_cast<int>(labels.size()) != n) {
    throw std::invalid_argument("bce_with_logits: need N x 1 logits and N labels");
  }
  if (n == 0) throw std::invalid_argument("bce_with_logits: empty batch");
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const double z = logits(r, 0);
    const double y = labels[r] ? 1.0 : 0.0;
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::fabs(z)));
    if (d_logits) {
      const double sig = 1.0 / (1.0 + std::exp(-z));
      (*d_logits)(r, 0) = (sig - y) / n;
    }
  }
  return loss / n;
}

}  // namespace mvl
