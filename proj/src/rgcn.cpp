#include "mvl/rgcn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvl {

TensorRefs GraphEncoderParams::tensors() {
  TensorRefs refs{&node_init};
  for (RgcnLayer& layer : layers) {
    refs.push_back(&layer.self_weight);
    for (Tensor& t : layer.rel_weight) refs.push_back(&t);
  }
  return refs;
}

GraphEncoderParams init_graph_encoder(const OntologyGraph& g, int hidden, int layer_count, int input_dim,
                                      Rng& rng) {
  if (layer_count < 1) throw std::invalid_argument("init_graph_encoder: need at least one layer");
  if (input_dim < hidden) throw std::invalid_argument("init_graph_encoder: input_dim below hidden");
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  GraphEncoderParams p;
  p.hidden = hidden;
  p.node_init = Tensor(Matrix::uniform(g.node_count(), hidden, rng, -bound, bound));
  for (int k = 0; k < layer_count; ++k) {
    const int in = (k == 0) ? input_dim : hidden;
    RgcnLayer layer;
    layer.self_weight = Tensor(Matrix::uniform(in, hidden, rng, -bound, bound));
    layer.rel_weight.reserve(g.relation_count());
    for (int r = 0; r < g.relation_count(); ++r) {
      layer.rel_weight.emplace_back(Matrix::uniform(in, hidden, rng, -bound, bound));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

namespace {

// Mean of neighbour rows per node for one relation; zero row when empty.
Matrix relation_aggregate(const OntologyGraph& g, const Matrix& h, int relation) {
  Matrix agg(h.rows(), h.cols());
  for (int u = 0; u < g.node_count(); ++u) {
    const auto& nbrs = g.neighbors_by_relation(u, relation);
    if (nbrs.empty()) continue;
    double* dst = agg.row(u);
    for (int v : nbrs) {
      const double* src = h.row(v);
      for (int c = 0; c < h.cols(); ++c) dst[c] += src[c];
    }
    const double inv = 1.0 / static_cast<double>(nbrs.size());
    for (int c = 0; c < h.cols(); ++c) dst[c] *= inv;
  }
  return agg;
}

}  // namespace

Matrix rgcn_forward_cached(const OntologyGraph& g, const GraphEncoderParams& p, const Matrix& initial,
                           RgcnCache& cache) {
  if (initial.rows() != g.node_count() || initial.cols() != p.input_dim()) {
    throw std::invalid_argument("rgcn_forward: initial embedding shape " + initial.shape_str() +
                                " does not match graph/layer-0");
  }
  cache.inputs.clear();
  cache.aggregates.clear();
  cache.outputs.clear();

  Matrix h = initial;
  for (const RgcnLayer& layer : p.layers) {
    cache.inputs.push_back(h);
    Matrix pre = matmul(h, layer.self_weight.value);
    std::vector<Matrix> aggs;
    aggs.reserve(layer.rel_weight.size());
    for (size_t r = 0; r < layer.rel_weight.size(); ++r) {
      Matrix agg = relation_aggregate(g, h, static_cast<int>(r) + 1);
      matmul_acc(pre, agg, layer.rel_weight[r].value);
      aggs.push_back(std::move(agg));
    }
    for (int i = 0; i < pre.rows(); ++i) {
      double* row = pre.row(i);
      for (int c = 0; c < pre.cols(); ++c) row[c] = row[c] > 0.0 ? row[c] : 0.0;
    }
    if (!pre.all_finite()) throw std::runtime_error("rgcn_forward: non-finite intermediate");
    cache.aggregates.push_back(std::move(aggs));
    cache.outputs.push_back(pre);
    h = cache.outputs.back();
  }
  return h;
}

Matrix rgcn_forward(const OntologyGraph& g, const GraphEncoderParams& p, const Matrix& initial) {
  RgcnCache cache;
  return rgcn_forward_cached(g, p, initial, cache);
}

Matrix rgcn_backward(const OntologyGraph& g, GraphEncoderParams& p, const RgcnCache& cache,
                     const Matrix& d_output) {
  const int layer_count = p.layer_count();
  if (static_cast<int>(cache.outputs.size()) != layer_count) {
    throw std::invalid_argument("rgcn_backward: cache does not match a forward call");
  }
  Matrix d_h = d_output;
  for (int k = layer_count - 1; k >= 0; --k) {
    const RgcnLayer& layer = p.layers[k];
    const Matrix& out = cache.outputs[k];
    const Matrix& in = cache.inputs[k];

    Matrix d_pre = d_h;
    for (int i = 0; i < d_pre.rows(); ++i) {
      double* drow = d_pre.row(i);
      const double* orow = out.row(i);
      for (int c = 0; c < d_pre.cols(); ++c) {
        if (orow[c] <= 0.0) drow[c] = 0.0;
      }
    }

    RgcnLayer& lp = p.layers[k];
    matmul_acc(lp.self_weight.grad, in, d_pre, true, false);
    Matrix d_in = matmul(d_pre, layer.self_weight.value, false, true);

    for (size_t r = 0; r < layer.rel_weight.size(); ++r) {
      matmul_acc(lp.rel_weight[r].grad, cache.aggregates[k][r], d_pre, true, false);
      Matrix d_agg = matmul(d_pre, layer.rel_weight[r].value, false, true);
      for (int u = 0; u < g.node_count(); ++u) {
        const auto& nbrs = g.neighbors_by_relation(u, static_cast<int>(r) + 1);
        if (nbrs.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nbrs.size());
        const double* src = d_agg.row(u);
        for (int v : nbrs) {
          double* dst = d_in.row(v);
          for (int c = 0; c < d_in.cols(); ++c) dst[c] += src[c] * inv;
        }
      }
    }
    d_h = std::move(d_in);
  }
  return d_h;
}

std::vector<double> pool_codes(const OntologyGraph& g, const Matrix& node_vecs,
                               const std::vector<int>& code_ids) {
  if (code_ids.empty()) throw std::invalid_argument("pool_codes: empty code set");
  const int h = node_vecs.cols();
  std::vector<double> pooled(2 * h);
  bool first = true;
  for (int id : code_ids) {
    if (id < 0 || id >= g.node_count() || !g.node(id).is_leaf) {
      throw std::invalid_argument("pool_codes: node " + std::to_string(id) + " is not a leaf");
    }
    const double* row = node_vecs.row(id);
    for (int c = 0; c < h; ++c) {
      pooled[c] += row[c];
      if (first || row[c] > pooled[h + c]) pooled[h + c] = row[c];
    }
    first = false;
  }
  return pooled;
}

void pool_backward(const OntologyGraph& g, const Matrix& node_vecs, const std::vector<int>& code_ids,
                   const double* d_pooled, Matrix& d_node_vecs) {
  if (code_ids.empty()) throw std::invalid_argument("pool_backward: empty code set");
  const int h = node_vecs.cols();
  // Max half routes to the first argmax in ascending id order.
  std::vector<int> sorted_ids = code_ids;
  std::sort(sorted_ids.begin(), sorted_ids.end());
  std::vector<int> argmax(h, sorted_ids.front());
  for (int c = 0; c < h; ++c) {
    double best = node_vecs(sorted_ids.front(), c);
    for (size_t i = 1; i < sorted_ids.size(); ++i) {
      const double v = node_vecs(sorted_ids[i], c);
      if (v > best) {
        best = v;
        argmax[c] = sorted_ids[i];
      }
    }
  }
  for (int id : sorted_ids) {
    double* dst = d_node_vecs.row(id);
    for (int c = 0; c < h; ++c) dst[c] += d_pooled[c];
  }
  for (int c = 0; c < h; ++c) d_node_vecs(argmax[c], c) += d_pooled[h + c];
}

}  // namespace mvl
