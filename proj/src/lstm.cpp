#include "mvl/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvl {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

LstmCell init_lstm_cell(int input, int hidden, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  LstmCell cell;
  cell.input = input;
  cell.hidden = hidden;
  cell.w_ih = Tensor(Matrix::uniform(input, 4 * hidden, rng, -bound, bound));
  cell.w_hh = Tensor(Matrix::uniform(hidden, 4 * hidden, rng, -bound, bound));
  cell.bias = Tensor(Matrix(1, 4 * hidden));
  for (int c = hidden; c < 2 * hidden; ++c) cell.bias.value(0, c) = 1.0;  // forget gate
  return cell;
}

Matrix lstm_forward(const LstmCell& cell, const std::vector<Matrix>& x_steps,
                    const std::vector<int>& lengths, LstmCache* cache) {
  const int steps = static_cast<int>(x_steps.size());
  if (steps == 0) throw std::invalid_argument("lstm_forward: no steps");
  const int n = x_steps.front().rows();
  const int h = cell.hidden;
  if (!lengths.empty() && static_cast<int>(lengths.size()) != n) {
    throw std::invalid_argument("lstm_forward: lengths size mismatch");
  }
  if (cache) {
    cache->gates.assign(steps, Matrix());
    cache->cells.assign(steps, Matrix());
    cache->hiddens.assign(steps, Matrix());
  }

  Matrix h_prev(n, h), c_prev(n, h);
  for (int t = 0; t < steps; ++t) {
    if (x_steps[t].rows() != n || x_steps[t].cols() != cell.input) {
      throw std::invalid_argument("lstm_forward: step input shape mismatch");
    }
    Matrix z = matmul(x_steps[t], cell.w_ih.value);
    matmul_acc(z, h_prev, cell.w_hh.value);
    Matrix c(n, h), hidden(n, h);
    for (int r = 0; r < n; ++r) {
      const bool active = lengths.empty() || t < lengths[r];
      double* zr = z.row(r);
      if (!active) {
        for (int c2 = 0; c2 < 4 * h; ++c2) zr[c2] = 0.0;
        for (int c2 = 0; c2 < h; ++c2) {
          c(r, c2) = c_prev(r, c2);
          hidden(r, c2) = h_prev(r, c2);
        }
        continue;
      }
      const double* bias = cell.bias.value.row(0);
      for (int c2 = 0; c2 < 4 * h; ++c2) zr[c2] += bias[c2];
      for (int c2 = 0; c2 < h; ++c2) {
        const double gi = sigmoid(zr[c2]);
        const double gf = sigmoid(zr[h + c2]);
        const double gg = std::tanh(zr[2 * h + c2]);
        const double go = sigmoid(zr[3 * h + c2]);
        zr[c2] = gi;
        zr[h + c2] = gf;
        zr[2 * h + c2] = gg;
        zr[3 * h + c2] = go;
        const double cv = gf * c_prev(r, c2) + gi * gg;
        c(r, c2) = cv;
        hidden(r, c2) = go * std::tanh(cv);
      }
    }
    if (cache) {
      cache->gates[t] = std::move(z);
      cache->cells[t] = c;
      cache->hiddens[t] = hidden;
    }
    h_prev = std::move(hidden);
    c_prev = std::move(c);
  }
  return h_prev;
}

std::vector<Matrix> lstm_backward(LstmCell& cell, const std::vector<Matrix>& x_steps,
                                  const std::vector<int>& lengths, const LstmCache& cache,
                                  const Matrix& d_final) {
  const int steps = static_cast<int>(x_steps.size());
  if (static_cast<int>(cache.gates.size()) != steps) {
    throw std::invalid_argument("lstm_backward: cache does not match forward");
  }
  const int n = x_steps.front().rows();
  const int h = cell.hidden;

  std::vector<Matrix> d_inputs(steps);
  Matrix dh = d_final;
  Matrix dc(n, h);

  for (int t = steps - 1; t >= 0; --t) {
    const Matrix& gates = cache.gates[t];
    const Matrix& c_t = cache.cells[t];
    const Matrix* c_prev = (t > 0) ? &cache.cells[t - 1] : nullptr;
    const Matrix* h_prev = (t > 0) ? &cache.hiddens[t - 1] : nullptr;

    Matrix dz(n, 4 * h);
    Matrix dh_pass(n, h), dc_pass(n, h);
    for (int r = 0; r < n; ++r) {
      const bool active = lengths.empty() || t < lengths[r];
      if (!active) {
        // State was carried through; gradients pass straight to step t-1.
        for (int c2 = 0; c2 < h; ++c2) {
          dh_pass(r, c2) = dh(r, c2);
          dc_pass(r, c2) = dc(r, c2);
        }
        continue;
      }
      const double* g = gates.row(r);
      for (int c2 = 0; c2 < h; ++c2) {
        const double gi = g[c2];
        const double gf = g[h + c2];
        const double gg = g[2 * h + c2];
        const double go = g[3 * h + c2];
        const double tanh_c = std::tanh(c_t(r, c2));
        const double dho = dh(r, c2);
        double dcv = dc(r, c2) + dho * go * (1.0 - tanh_c * tanh_c);
        const double cprev = c_prev ? (*c_prev)(r, c2) : 0.0;
        dz(r, c2) = dcv * gg * gi * (1.0 - gi);                    // input gate
        dz(r, h + c2) = dcv * cprev * gf * (1.0 - gf);             // forget gate
        dz(r, 2 * h + c2) = dcv * gi * (1.0 - gg * gg);            // cell candidate
        dz(r, 3 * h + c2) = dho * tanh_c * go * (1.0 - go);        // output gate
        dc_pass(r, c2) = dcv * gf;
      }
    }

    matmul_acc(cell.w_ih.grad, x_steps[t], dz, true, false);
    if (h_prev) matmul_acc(cell.w_hh.grad, *h_prev, dz, true, false);
    for (int r = 0; r < n; ++r) {
      const double* src = dz.row(r);
      double* dst = cell.bias.grad.row(0);
      for (int c2 = 0; c2 < 4 * h; ++c2) dst[c2] += src[c2];
    }
    d_inputs[t] = matmul(dz, cell.w_ih.value, false, true);
    Matrix dh_next = matmul(dz, cell.w_hh.value, false, true);
    dh_next.add(dh_pass);
    dh = std::move(dh_next);
    dc = std::move(dc_pass);
  }
  return d_inputs;
}

TensorRefs TextEncoderParams::tensors() {
  TensorRefs refs{&token_embed};
  for (LstmCell* cell : {&s1_fwd, &s1_bwd, &s2_fwd, &s2_bwd}) {
    if (!bidirectional && (cell == &s1_bwd || cell == &s2_bwd)) continue;
    refs.push_back(&cell->w_ih);
    refs.push_back(&cell->w_hh);
    refs.push_back(&cell->bias);
  }
  return refs;
}

TextEncoderParams init_text_encoder(int vocab, int embed_dim, int hidden, int block_size,
                                    bool bidirectional, Rng& rng) {
  if (vocab < 1 || block_size < 1) throw std::invalid_argument("init_text_encoder: bad vocab/block size");
  TextEncoderParams p;
  p.vocab = vocab;
  p.block_size = block_size;
  p.bidirectional = bidirectional;
  const double bound = 1.0 / std::sqrt(static_cast<double>(embed_dim));
  p.token_embed = Tensor(Matrix::uniform(vocab + 1, embed_dim, rng, -bound, bound));
  p.s1_fwd = init_lstm_cell(embed_dim, hidden, rng);
  p.s1_bwd = init_lstm_cell(embed_dim, hidden, rng);
  const int block_dim = bidirectional ? 2 * hidden : hidden;
  p.s2_fwd = init_lstm_cell(block_dim, hidden, rng);
  p.s2_bwd = init_lstm_cell(block_dim, hidden, rng);
  return p;
}

std::vector<std::vector<int>> split_blocks(const std::vector<int>& tokens, int block_size, int pad_id) {
  if (block_size < 1) throw std::invalid_argument("split_blocks: block size must be >= 1");
  const size_t b = static_cast<size_t>(block_size);
  const size_t count = tokens.empty() ? 1 : (tokens.size() + b - 1) / b;
  std::vector<std::vector<int>> blocks(count, std::vector<int>(b, pad_id));
  for (size_t i = 0; i < tokens.size(); ++i) blocks[i / b][i % b] = tokens[i];
  return blocks;
}

namespace {

// Time-major embedded inputs for a chunk of blocks; reversed=true feeds the
// block right-to-left for the backward direction.
std::vector<Matrix> embed_chunk(const TextEncoderParams& p, const std::vector<std::vector<int>>& blocks,
                                int begin, int end, bool reversed) {
  const int b = p.block_size;
  const int e = p.embed_dim();
  std::vector<Matrix> x(b, Matrix(end - begin, e));
  for (int t = 0; t < b; ++t) {
    Matrix& xt = x[t];
    for (int i = begin; i < end; ++i) {
      const int pos = reversed ? b - 1 - t : t;
      const int id = blocks[i][pos];
      if (id == p.pad_id()) continue;  // PAD embeds to zero
      const double* src = p.token_embed.value.row(id);
      double* dst = xt.row(i - begin);
      for (int c = 0; c < e; ++c) dst[c] = src[c];
    }
  }
  return x;
}

void copy_cols(Matrix& dst, const Matrix& src, int col_offset) {
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < src.cols(); ++c) dst(r, col_offset + c) = src(r, c);
  }
}

Matrix slice_cols(const Matrix& src, int begin, int width) {
  Matrix out(src.rows(), width);
  for (int r = 0; r < src.rows(); ++r) {
    for (int c = 0; c < width; ++c) out(r, c) = src(r, begin + c);
  }
  return out;
}

int sanitize_token(const TextEncoderParams& p, int token) {
  if (token == p.pad_id()) return token;  // explicit trailing padding is allowed
  return (token >= 0 && token < p.vocab) ? token : p.unk_id();
}

}  // namespace

Matrix encode_text_batch(const TextEncoderParams& p, const std::vector<std::vector<int>>& docs,
                         TextCache* cache, int chunk_blocks) {
  if (chunk_blocks < 1) throw std::invalid_argument("encode_text_batch: bad chunk size");
  const int n = static_cast<int>(docs.size());
  if (n == 0) return Matrix(0, p.output_dim());
  TextCache local;
  TextCache& tc = cache ? *cache : local;
  tc.blocks.clear();
  tc.s2_fwd_x.clear();
  tc.s2_bwd_x.clear();
  tc.doc_offset.assign(n, 0);
  tc.doc_blocks.assign(n, 0);

  for (int i = 0; i < n; ++i) {
    std::vector<int> clean(docs[i].size());
    for (size_t j = 0; j < docs[i].size(); ++j) clean[j] = sanitize_token(p, docs[i][j]);
    auto blocks = split_blocks(clean, p.block_size, p.pad_id());
    tc.doc_offset[i] = static_cast<int>(tc.blocks.size());
    tc.doc_blocks[i] = static_cast<int>(blocks.size());
    for (auto& blk : blocks) tc.blocks.push_back(std::move(blk));
  }
  const int total_blocks = static_cast<int>(tc.blocks.size());
  const int h1 = p.s1_fwd.hidden;

  // Stage 1 in chunks; only the block summaries are kept.
  tc.block_emb = Matrix(total_blocks, p.block_dim());
  for (int begin = 0; begin < total_blocks; begin += chunk_blocks) {
    const int end = std::min(total_blocks, begin + chunk_blocks);
    auto x_fwd = embed_chunk(p, tc.blocks, begin, end, false);
    Matrix fin_f = lstm_forward(p.s1_fwd, x_fwd, {}, nullptr);
    for (int i = 0; i < end - begin; ++i) {
      for (int c = 0; c < h1; ++c) tc.block_emb(begin + i, c) = fin_f(i, c);
    }
    if (p.bidirectional) {
      auto x_bwd = embed_chunk(p, tc.blocks, begin, end, true);
      Matrix fin_b = lstm_forward(p.s1_bwd, x_bwd, {}, nullptr);
      for (int i = 0; i < end - begin; ++i) {
        for (int c = 0; c < h1; ++c) tc.block_emb(begin + i, h1 + c) = fin_b(i, c);
      }
    }
  }

  // Stage 2 over block summaries, masked by each document's block count.
  int k_max = 0;
  for (int k : tc.doc_blocks) k_max = std::max(k_max, k);
  tc.s2_fwd_x.assign(k_max, Matrix(n, p.block_dim()));
  for (int t = 0; t < k_max; ++t) {
    for (int i = 0; i < n; ++i) {
      if (t >= tc.doc_blocks[i]) continue;
      const double* src = tc.block_emb.row(tc.doc_offset[i] + t);
      double* dst = tc.s2_fwd_x[t].row(i);
      for (int c = 0; c < p.block_dim(); ++c) dst[c] = src[c];
    }
  }
  Matrix fin_f = lstm_forward(p.s2_fwd, tc.s2_fwd_x, tc.doc_blocks, &tc.s2_fwd_cache);

  Matrix out(n, p.output_dim());
  copy_cols(out, fin_f, 0);
  if (p.bidirectional) {
    tc.s2_bwd_x.assign(k_max, Matrix(n, p.block_dim()));
    for (int t = 0; t < k_max; ++t) {
      for (int i = 0; i < n; ++i) {
        if (t >= tc.doc_blocks[i]) continue;
        const double* src = tc.block_emb.row(tc.doc_offset[i] + tc.doc_blocks[i] - 1 - t);
        double* dst = tc.s2_bwd_x[t].row(i);
        for (int c = 0; c < p.block_dim(); ++c) dst[c] = src[c];
      }
    }
    Matrix fin_b = lstm_forward(p.s2_bwd, tc.s2_bwd_x, tc.doc_blocks, &tc.s2_bwd_cache);
    copy_cols(out, fin_b, p.s2_fwd.hidden);
  }
  if (!out.all_finite()) throw std::runtime_error("encode_text: non-finite output");
  return out;
}

Matrix encode_text(const TextEncoderParams& p, const std::vector<int>& tokens) {
  return encode_text_batch(p, {tokens}, nullptr);
}

void text_backward(TextEncoderParams& p, const TextCache& cache, const Matrix& d_output,
                   int chunk_blocks) {
  const int n = static_cast<int>(cache.doc_offset.size());
  const int h1 = p.s1_fwd.hidden;
  const int h2 = p.s2_fwd.hidden;
  const int total_blocks = static_cast<int>(cache.blocks.size());

  // Stage 2 backward, scattering step gradients onto the block summaries.
  Matrix d_block_emb(total_blocks, p.block_dim());
  {
    Matrix d_fin_f = slice_cols(d_output, 0, h2);
    auto d_x = lstm_backward(p.s2_fwd, cache.s2_fwd_x, cache.doc_blocks, cache.s2_fwd_cache, d_fin_f);
    for (size_t t = 0; t < d_x.size(); ++t) {
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(t) >= cache.doc_blocks[i]) continue;
        const double* src = d_x[t].row(i);
        double* dst = d_block_emb.row(cache.doc_offset[i] + static_cast<int>(t));
        for (int c = 0; c < p.block_dim(); ++c) dst[c] += src[c];
      }
    }
  }
  if (p.bidirectional) {
    Matrix d_fin_b = slice_cols(d_output, h2, h2);
    auto d_x = lstm_backward(p.s2_bwd, cache.s2_bwd_x, cache.doc_blocks, cache.s2_bwd_cache, d_fin_b);
    for (size_t t = 0; t < d_x.size(); ++t) {
      for (int i = 0; i < n; ++i) {
        if (static_cast<int>(t) >= cache.doc_blocks[i]) continue;
        const double* src = d_x[t].row(i);
        double* dst = d_block_emb.row(cache.doc_offset[i] + cache.doc_blocks[i] - 1 - static_cast<int>(t));
        for (int c = 0; c < p.block_dim(); ++c) dst[c] += src[c];
      }
    }
  }

  // Stage 1 backward, recomputing each chunk's activations.
  const int b = p.block_size;
  for (int begin = 0; begin < total_blocks; begin += chunk_blocks) {
    const int end = std::min(total_blocks, begin + chunk_blocks);
    const int rows = end - begin;
    {
      auto x_fwd = embed_chunk(p, cache.blocks, begin, end, false);
      LstmCache s1_cache;
      lstm_forward(p.s1_fwd, x_fwd, {}, &s1_cache);
      Matrix d_fin(rows, h1);
      for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < h1; ++c) d_fin(i, c) = d_block_emb(begin + i, c);
      }
      auto d_x = lstm_backward(p.s1_fwd, x_fwd, {}, s1_cache, d_fin);
      for (int t = 0; t < b; ++t) {
        for (int i = 0; i < rows; ++i) {
          const int id = cache.blocks[begin + i][t];
          if (id == p.pad_id()) continue;
          const double* src = d_x[t].row(i);
          double* dst = p.token_embed.grad.row(id);
          for (int c = 0; c < p.embed_dim(); ++c) dst[c] += src[c];
        }
      }
    }
    if (p.bidirectional) {
      auto x_bwd = embed_chunk(p, cache.blocks, begin, end, true);
      LstmCache s1_cache;
      lstm_forward(p.s1_bwd, x_bwd, {}, &s1_cache);
      Matrix d_fin(rows, h1);
      for (int i = 0; i < rows; ++i) {
        for (int c = 0; c < h1; ++c) d_fin(i, c) = d_block_emb(begin + i, h1 + c);
      }
      auto d_x = lstm_backward(p.s1_bwd, x_bwd, {}, s1_cache, d_fin);
      for (int t = 0; t < b; ++t) {
        for (int i = 0; i < rows; ++i) {
          const int id = cache.blocks[begin + i][b - 1 - t];
          if (id == p.pad_id()) continue;
          const double* src = d_x[t].row(i);
          double* dst = p.token_embed.grad.row(id);
          for (int c = 0; c < p.embed_dim(); ++c) dst[c] += src[c];
        }
      }
    }
  }
}

}  // namespace mvl
