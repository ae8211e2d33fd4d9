#pragma once

#include <vector>

#include "mvl/matrix.hpp"
#include "mvl/ontology.hpp"
#include "mvl/rng.hpp"

namespace mvl {

// Per-layer weights of the relational graph encoder: one transform per
// relation plus a self transform. Layer 0 accepts input_dim columns
// (hidden+1 when the seen/unseen label column is attached), later layers
// are hidden x hidden.
struct RgcnLayer {
  Tensor self_weight;                // in x h
  std::vector<Tensor> rel_weight;    // relation_count entries, in x h
};

struct GraphEncoderParams {
  Tensor node_init;                  // node_count x hidden, trainable h^0
  std::vector<RgcnLayer> layers;
  int hidden = 0;

  TensorRefs tensors();
  int layer_count() const { return static_cast<int>(layers.size()); }
  int input_dim() const { return layers.front().self_weight.value.rows(); }
};

// Weights uniform(-1/sqrt(h), 1/sqrt(h)). input_dim is the layer-0 width:
// pass hidden for the plain encoder, hidden+1 when label augmentation is on.
GraphEncoderParams init_graph_encoder(const OntologyGraph& g, int hidden, int layer_count, int input_dim,
                                      Rng& rng);

struct RgcnCache {
  std::vector<Matrix> inputs;        // H_k fed to layer k
  std::vector<std::vector<Matrix>> aggregates;  // [layer][relation] mean-pooled neighbours
  std::vector<Matrix> outputs;       // post-ReLU H_{k+1}
};

// h^{k+1}_u = relu(sum_r mean_{v in N_u^r} h^k_v W_r + h^k_u W_self).
// `initial` must have input_dim columns; relations with no neighbours
// contribute nothing.
Matrix rgcn_forward(const OntologyGraph& g, const GraphEncoderParams& p, const Matrix& initial);
Matrix rgcn_forward_cached(const OntologyGraph& g, const GraphEncoderParams& p, const Matrix& initial,
                           RgcnCache& cache);

// Accumulates parameter gradients into p and returns d(loss)/d(initial).
Matrix rgcn_backward(const OntologyGraph& g, GraphEncoderParams& p, const RgcnCache& cache,
                     const Matrix& d_output);

// Sum-and-max pooling over a code set's node vectors: [sum | max], 2h wide.
// Rejects empty sets and non-leaf ids.
std::vector<double> pool_codes(const OntologyGraph& g, const Matrix& node_vecs,
                               const std::vector<int>& code_ids);

// Scatter the pooled gradient back onto the member rows. Max half follows
// the first argmax in ascending id order, matching pool_codes.
void pool_backward(const OntologyGraph& g, const Matrix& node_vecs, const std::vector<int>& code_ids,
                   const double* d_pooled, Matrix& d_node_vecs);

}  // namespace mvl
