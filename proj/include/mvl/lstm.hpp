#pragma once

#include <vector>

#include "mvl/matrix.hpp"
#include "mvl/rng.hpp"

namespace mvl {

// Gate order inside the fused 4h dimension: input, forget, cell, output.
struct LstmCell {
  Tensor w_ih;  // in x 4h
  Tensor w_hh;  // h x 4h
  Tensor bias;  // 1 x 4h
  int input = 0;
  int hidden = 0;
};

// Uniform(-1/sqrt(h), 1/sqrt(h)) weights, zero bias except forget gate +1.
LstmCell init_lstm_cell(int input, int hidden, Rng& rng);

struct LstmCache {
  std::vector<Matrix> gates;    // per step: N x 4h, post-activation
  std::vector<Matrix> cells;    // per step: N x h
  std::vector<Matrix> hiddens;  // per step: N x h
};

// Batched recurrence over time-major step inputs (each N x in), zero initial
// state. Rows whose length (when `lengths` is non-empty) is exhausted carry
// their state through unchanged, so the final state equals the state after
// the last active step. Returns the final hidden N x h.
Matrix lstm_forward(const LstmCell& cell, const std::vector<Matrix>& x_steps,
                    const std::vector<int>& lengths, LstmCache* cache);

// BPTT from a gradient at the final hidden state only. Accumulates parameter
// gradients and returns per-step input gradients; masked-off steps get zero.
std::vector<Matrix> lstm_backward(LstmCell& cell, const std::vector<Matrix>& x_steps,
                                  const std::vector<int>& lengths, const LstmCache& cache,
                                  const Matrix& d_final);

// Two-stage text encoder: a block-level recurrence over fixed-size token
// windows, then a document-level recurrence over the block summaries.
struct TextEncoderParams {
  // vocab rows plus UNK; PAD has no row and embeds to the zero vector, so it
  // is structurally outside the trainable parameters.
  Tensor token_embed;  // (vocab+1) x embed_dim
  LstmCell s1_fwd, s1_bwd;
  LstmCell s2_fwd, s2_bwd;
  int vocab = 0;
  int block_size = 30;
  bool bidirectional = true;

  int unk_id() const { return vocab; }
  int pad_id() const { return vocab + 1; }
  int embed_dim() const { return token_embed.value.cols(); }
  int block_dim() const { return bidirectional ? 2 * s1_fwd.hidden : s1_fwd.hidden; }
  int output_dim() const { return bidirectional ? 2 * s2_fwd.hidden : s2_fwd.hidden; }

  TensorRefs tensors();
};

TextEncoderParams init_text_encoder(int vocab, int embed_dim, int hidden, int block_size,
                                    bool bidirectional, Rng& rng);

// ceil(len/b) blocks of exactly b ids, right-padded with pad_id; empty input
// becomes one all-pad block. b < 1 throws.
std::vector<std::vector<int>> split_blocks(const std::vector<int>& tokens, int block_size, int pad_id);

struct TextCache {
  std::vector<std::vector<int>> blocks;  // all docs' blocks, b ids each
  std::vector<int> doc_offset;           // first block of each doc
  std::vector<int> doc_blocks;           // K_i
  Matrix block_emb;                      // B_tot x block_dim
  std::vector<Matrix> s2_fwd_x, s2_bwd_x;
  LstmCache s2_fwd_cache, s2_bwd_cache;
};

// Encode a batch of documents (token ids; out-of-vocabulary ids map to UNK).
// Stage-1 work runs in chunks of `chunk_blocks` blocks; only block summaries
// are kept, the per-step activations are recomputed during backward.
Matrix encode_text_batch(const TextEncoderParams& p, const std::vector<std::vector<int>>& docs,
                         TextCache* cache, int chunk_blocks = 1024);

Matrix encode_text(const TextEncoderParams& p, const std::vector<int>& tokens);

// Accumulates gradients for every tensor (PAD embedding row excluded).
void text_backward(TextEncoderParams& p, const TextCache& cache, const Matrix& d_output,
                   int chunk_blocks = 1024);

}  // namespace mvl
