#include "mvl/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "mvl/adam.hpp"
#include "mvl/metrics.hpp"

namespace mvl {

namespace {

// Fixed sub-stream ids so every random draw is a pure function of
// (seed, purpose); adding a consumer never perturbs the others.
enum Stream : uint64_t {
  kStreamGraphInit = 1,
  kStreamTextInit = 2,
  kStreamMlpInit = 3,
  kStreamShuffle = 4,
  kStreamDropout = 5,
  kStreamSplit = 6,
};

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

std::vector<int> iota_vec(int n) {
  std::vector<int> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

IndexedDataset index_dataset(const std::vector<AdmissionRecord>& records, const OntologyGraph& g) {
  IndexedDataset ds;
  ds.code_ids.reserve(records.size());
  ds.tokens.reserve(records.size());
  ds.labels.reserve(records.size());
  for (const AdmissionRecord& rec : records) {
    std::vector<int> ids;
    ids.reserve(rec.codes.size());
    for (const std::string& code : rec.codes) ids.push_back(g.leaf_id(code));
    std::sort(ids.begin(), ids.end());
    ds.code_ids.push_back(std::move(ids));
    ds.tokens.push_back(rec.tokens);
    ds.labels.push_back(rec.label);
  }
  return ds;
}

IndexedDataset take(const IndexedDataset& ds, const std::vector<int>& indices) {
  IndexedDataset out;
  for (int i : indices) {
    out.code_ids.push_back(ds.code_ids[i]);
    out.tokens.push_back(ds.tokens[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

namespace {

int max_token_id(const IndexedDataset& ds) {
  int m = -1;
  for (const auto& doc : ds.tokens) {
    for (int t : doc) m = std::max(m, t);
  }
  return m;
}

// Text vocabulary: the configured size, widened if the data holds larger ids
// so both phases build identically shaped embedding tables.
int out_vocab_for(const ExperimentConfig& cfg, const IndexedDataset& a, const IndexedDataset& b) {
  return std::max({cfg.gen.vocab, max_token_id(a) + 1, max_token_id(b) + 1, 2});
}

Matrix graph_initial(const GraphEncoderParams& p, bool labeled, const SeenSet& seen,
                     bool label_internals, const OntologyGraph& g) {
  if (!labeled) return p.node_init.value;
  return augment_labels(p.node_init.value, seen, g, label_internals);
}

struct CodeBatchCache {
  RgcnCache rgcn;
  Matrix node_out;
  std::vector<int> batch;
};

Matrix encode_code_batch(const OntologyGraph& g, const GraphEncoderParams& p, const Matrix& initial,
                         const IndexedDataset& ds, const std::vector<int>& batch, CodeBatchCache* cache) {
  CodeBatchCache local;
  CodeBatchCache& cc = cache ? *cache : local;
  cc.batch = batch;
  cc.node_out = rgcn_forward_cached(g, p, initial, cc.rgcn);
  const int h = cc.node_out.cols();
  Matrix pooled(static_cast<int>(batch.size()), 2 * h);
  for (size_t r = 0; r < batch.size(); ++r) {
    auto vec = pool_codes(g, cc.node_out, ds.code_ids[batch[r]]);
    std::copy(vec.begin(), vec.end(), pooled.row(static_cast<int>(r)));
  }
  return pooled;
}

// Scatters pooled gradients onto nodes, runs the graph backward pass, and
// folds the result into node_init (dropping the label column when present).
void code_batch_backward(const OntologyGraph& g, GraphEncoderParams& p, const CodeBatchCache& cache,
                         const IndexedDataset& ds, const Matrix& d_pooled, bool labeled) {
  const int h = cache.node_out.cols();
  Matrix d_nodes(cache.node_out.rows(), h);
  for (size_t r = 0; r < cache.batch.size(); ++r) {
    pool_backward(g, cache.node_out, ds.code_ids[cache.batch[r]], d_pooled.row(static_cast<int>(r)), d_nodes);
  }
  Matrix d_init = rgcn_backward(g, p, cache.rgcn, d_nodes);
  const int hidden = p.hidden;
  for (int u = 0; u < d_init.rows(); ++u) {
    const double* src = d_init.row(u);
    double* dst = p.node_init.grad.row(u);
    for (int c = 0; c < hidden; ++c) dst[c] += src[c];
  }
  (void)labeled;  // the label column, when present, simply has no parameter behind it
}

std::vector<std::vector<int>> gather_docs(const IndexedDataset& ds, const std::vector<int>& batch) {
  std::vector<std::vector<int>> docs;
  docs.reserve(batch.size());
  for (int i : batch) docs.push_back(ds.tokens[i]);
  return docs;
}

std::vector<int> gather_labels(const IndexedDataset& ds, const std::vector<int>& batch) {
  std::vector<int> labels;
  labels.reserve(batch.size());
  for (int i : batch) labels.push_back(ds.labels[i]);
  return labels;
}

}  // namespace

TrainedDcca train_dcca(const OntologyGraph& g, const IndexedDataset& train, const IndexedDataset& valid,
                       const ExperimentConfig& cfg, uint64_t seed, const SeenSet* labeling) {
  if (train.size() < 2 || valid.size() < 2) {
    throw std::invalid_argument("train_dcca: need at least two train and two valid records");
  }
  Rng master(seed);
  Rng graph_rng = master.split(kStreamGraphInit);
  Rng text_rng = master.split(kStreamTextInit);
  Rng shuffle_rng = master.split(kStreamShuffle);

  TrainedDcca out;
  out.labeled = labeling != nullptr;
  if (labeling) out.seen = *labeling;

  const int input_dim = cfg.hidden + (labeling ? 1 : 0);
  out.graph = init_graph_encoder(g, cfg.hidden, cfg.rgcn_layers, input_dim, graph_rng);
  const int vocab = out_vocab_for(cfg, train, valid);
  out.text = init_text_encoder(vocab, cfg.hidden, cfg.hidden, cfg.block_size, cfg.bidirectional, text_rng);

  DccaOptions opt;
  opt.r_code = cfg.r_code;
  opt.r_text = cfg.r_text;
  opt.dims = cfg.corr_dims;
  opt.center = cfg.center;

  TensorRefs all = out.graph.tensors();
  for (Tensor* t : out.text.tensors()) all.push_back(t);
  Adam adam(cfg.dcca_lr);

  int batch_size = cfg.dcca_batch;
  if (batch_size > train.size()) {
    std::cerr << "train_dcca: batch size " << batch_size << " clamped to training size " << train.size()
              << "\n";
    batch_size = train.size();
  }

  const std::vector<int> valid_idx = iota_vec(valid.size());
  auto validation_corr = [&]() {
    ViewBatch vb;
    const Matrix initial = graph_initial(out.graph, out.labeled, out.seen, cfg.label_internal_nodes, g);
    vb.code_view = encode_code_batch(g, out.graph, initial, valid, valid_idx, nullptr);
    vb.text_view = encode_text_batch(out.text, gather_docs(valid, valid_idx), nullptr);
    return total_correlation(vb, opt);
  };

  GraphEncoderParams best_graph = out.graph;
  TextEncoderParams best_text = out.text;
  double best_corr = -1.0;
  int best_epoch = -1;
  int stale = 0;

  std::vector<int> order = iota_vec(train.size());
  for (int epoch = 0; epoch < cfg.dcca_epochs; ++epoch) {
    Rng erng = shuffle_rng.split(static_cast<uint64_t>(epoch));
    erng.shuffle(order);
    // Ragged tails are dropped; covariance estimates from a short batch are
    // not worth the noise.
    for (int start = 0; start + batch_size <= train.size(); start += batch_size) {
      std::vector<int> batch(order.begin() + start, order.begin() + start + batch_size);

      CodeBatchCache code_cache;
      const Matrix initial = graph_initial(out.graph, out.labeled, out.seen, cfg.label_internal_nodes, g);
      ViewBatch vb;
      vb.code_view = encode_code_batch(g, out.graph, initial, train, batch, &code_cache);
      TextCache text_cache;
      vb.text_view = encode_text_batch(out.text, gather_docs(train, batch), &text_cache);

      DccaGradient grad = dcca_gradient(vb, opt);
      if (!std::isfinite(grad.correlation)) {
        throw std::runtime_error("train_dcca: objective diverged at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(start / batch_size));
      }

      zero_grads(all);
      grad.d_code.scale(-1.0);  // ascend the correlation
      grad.d_text.scale(-1.0);
      code_batch_backward(g, out.graph, code_cache, train, grad.d_code, out.labeled);
      text_backward(out.text, text_cache, grad.d_text);
      adam.step(all);
    }

    const double corr = validation_corr();
    out.valid_history.push_back(corr);
    if (corr > best_corr) {
      best_corr = corr;
      best_epoch = epoch;
      best_graph = out.graph;
      best_text = out.text;
      stale = 0;
    } else {
      ++stale;
    }
    if (stale > cfg.dcca_patience) break;
  }

  out.graph = std::move(best_graph);
  out.text = std::move(best_text);
  out.best_valid_corr = best_corr;
  out.best_epoch = best_epoch;

  // Projection from the full training set through the winning encoders.
  const std::vector<int> train_idx = iota_vec(train.size());
  ViewBatch full;
  const Matrix initial = graph_initial(out.graph, out.labeled, out.seen, cfg.label_internal_nodes, g);
  full.code_view = encode_code_batch(g, out.graph, initial, train, train_idx, nullptr);
  full.text_view = encode_text_batch(out.text, gather_docs(train, train_idx), nullptr);
  out.proj = compute_projections(full, opt);
  return out;
}

namespace {

// The three fine-tune pipelines share one loop; adapters hide which encoder
// (or pair of encoders) sits under the MLP head.
struct CodeAdapter {
  const OntologyGraph* g;
  const IndexedDataset* ds = nullptr;
  GraphEncoderParams params;
  bool labeled = false;
  SeenSet seen;
  bool label_internals = false;
  const DccaProjection* proj = nullptr;

  CodeBatchCache cache;
  GraphEncoderParams best;

  int input_dim() const { return proj ? proj->dims : 2 * params.hidden; }
  TensorRefs tensors() { return params.tensors(); }
  void save_best() { best = params; }
  void restore_best() { params = best; }

  Matrix forward(const IndexedDataset& data, const std::vector<int>& batch, bool train_mode) {
    ds = &data;
    const Matrix initial = graph_initial(params, labeled, seen, label_internals, *g);
    Matrix emb = encode_code_batch(*g, params, initial, data, batch, train_mode ? &cache : nullptr);
    return proj ? project(emb, *proj, View::kCode) : emb;
  }

  void backward(const Matrix& d_input) {
    Matrix d_emb = proj ? matmul(d_input, proj->u, false, true) : d_input;
    code_batch_backward(*g, params, cache, *ds, d_emb, labeled);
  }
};

struct TextAdapter {
  TextEncoderParams params;
  const DccaProjection* proj = nullptr;

  TextCache cache;
  TextEncoderParams best;

  int input_dim() const { return proj ? proj->dims : params.output_dim(); }
  TensorRefs tensors() { return params.tensors(); }
  void save_best() { best = params; }
  void restore_best() { params = best; }

  Matrix forward(const IndexedDataset& data, const std::vector<int>& batch, bool train_mode) {
    Matrix emb = encode_text_batch(params, gather_docs(data, batch), train_mode ? &cache : nullptr);
    return proj ? project(emb, *proj, View::kText) : emb;
  }

  void backward(const Matrix& d_input) {
    Matrix d_emb = proj ? matmul(d_input, proj->v, false, true) : d_input;
    text_backward(params, cache, d_emb);
  }
};

struct BothAdapter {
  CodeAdapter code;
  TextAdapter text;

  int input_dim() const { return code.input_dim() + text.input_dim(); }
  TensorRefs tensors() {
    TensorRefs refs = code.tensors();
    for (Tensor* t : text.tensors()) refs.push_back(t);
    return refs;
  }
  void save_best() {
    code.save_best();
    text.save_best();
  }
  void restore_best() {
    code.restore_best();
    text.restore_best();
  }

  Matrix forward(const IndexedDataset& data, const std::vector<int>& batch, bool train_mode) {
    Matrix a = code.forward(data, batch, train_mode);
    Matrix b = text.forward(data, batch, train_mode);
    Matrix out(a.rows(), a.cols() + b.cols());
    for (int r = 0; r < a.rows(); ++r) {
      std::copy(a.row(r), a.row(r) + a.cols(), out.row(r));
      std::copy(b.row(r), b.row(r) + b.cols(), out.row(r) + a.cols());
    }
    return out;
  }

  void backward(const Matrix& d_input) {
    const int ca = code.input_dim();
    const int cb = text.input_dim();
    Matrix da(d_input.rows(), ca), db(d_input.rows(), cb);
    for (int r = 0; r < d_input.rows(); ++r) {
      std::copy(d_input.row(r), d_input.row(r) + ca, da.row(r));
      std::copy(d_input.row(r) + ca, d_input.row(r) + ca + cb, db.row(r));
    }
    code.backward(da);
    text.backward(db);
  }
};

std::vector<int> mlp_dims(int input, const ExperimentConfig& cfg) {
  std::vector<int> dims{input};
  for (int i = 0; i + 1 < cfg.mlp_layers; ++i) dims.push_back(cfg.hidden);
  dims.push_back(1);
  return dims;
}

struct FitOutcome {
  MlpParams mlp;
  double best_metric = 0.0;
  int best_epoch = -1;
  std::vector<double> history;
};

template <typename Adapter>
FitOutcome fit_classifier(Adapter& adapter, const IndexedDataset& train, const IndexedDataset& valid,
                          const ExperimentConfig& cfg, uint64_t seed) {
  if (train.size() < 1 || valid.size() < 1) throw std::invalid_argument("finetune: empty train or valid set");
  Rng master(seed);
  Rng mlp_rng = master.split(kStreamMlpInit);
  Rng dropout_rng = master.split(kStreamDropout);
  Rng shuffle_rng = master.split(kStreamShuffle);

  FitOutcome out;
  out.mlp = init_mlp(mlp_dims(adapter.input_dim(), cfg), cfg.mlp_dropout, mlp_rng);

  TensorRefs all = adapter.tensors();
  for (Tensor* t : out.mlp.tensors()) all.push_back(t);
  Adam adam(cfg.task_lr);

  const int batch_size = std::min(cfg.task_batch, train.size());
  const std::vector<int> valid_idx = iota_vec(valid.size());
  const bool valid_two_class = [&] {
    bool has0 = false, has1 = false;
    for (int l : valid.labels) (l ? has1 : has0) = true;
    return has0 && has1;
  }();

  MlpParams best_mlp = out.mlp;
  adapter.save_best();
  double best_metric = -1e300;
  int stale = 0;

  std::vector<int> order = iota_vec(train.size());
  for (int epoch = 0; epoch < cfg.task_epochs; ++epoch) {
    Rng erng = shuffle_rng.split(static_cast<uint64_t>(epoch));
    erng.shuffle(order);
    for (int start = 0; start < train.size(); start += batch_size) {
      const int end = std::min(train.size(), start + batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + end);

      Matrix input = adapter.forward(train, batch, true);
      MlpCache mlp_cache;
      Matrix logits = mlp_forward(out.mlp, input, true, &dropout_rng, &mlp_cache);
      Matrix d_logits(logits.rows(), 1);
      const double loss = bce_with_logits(logits, gather_labels(train, batch), &d_logits);
      if (!std::isfinite(loss)) {
        throw std::runtime_error("finetune: loss diverged at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(start / batch_size));
      }
      zero_grads(all);
      Matrix d_input = mlp_backward(out.mlp, mlp_cache, d_logits);
      adapter.backward(d_input);
      adam.step(all);
    }

    Matrix input = adapter.forward(valid, valid_idx, false);
    Matrix logits = mlp_forward(out.mlp, input, false, nullptr, nullptr);
    double metric;
    if (valid_two_class) {
      std::vector<double> scores(logits.data(), logits.data() + logits.size());
      metric = auroc(scores, valid.labels);
    } else {
      metric = -bce_with_logits(logits, valid.labels, nullptr);
    }
    out.history.push_back(metric);
    if (metric > best_metric) {
      best_metric = metric;
      out.best_epoch = epoch;
      best_mlp = out.mlp;
      adapter.save_best();
      stale = 0;
    } else {
      ++stale;
    }
    if (stale > cfg.task_patience) break;
  }

  adapter.restore_best();
  out.mlp = std::move(best_mlp);
  out.best_metric = best_metric;
  return out;
}

}  // namespace

CodeClassifier finetune_code(const OntologyGraph& g, GraphEncoderParams encoder, bool labeled,
                             const SeenSet& seen, const DccaProjection* proj, const IndexedDataset& train,
                             const IndexedDataset& valid, const ExperimentConfig& cfg, uint64_t seed) {
  CodeAdapter adapter;
  adapter.g = &g;
  adapter.params = std::move(encoder);
  adapter.labeled = labeled;
  adapter.seen = seen;
  adapter.label_internals = cfg.label_internal_nodes;
  adapter.proj = proj;

  FitOutcome fit = fit_classifier(adapter, train, valid, cfg, seed);
  CodeClassifier model;
  model.graph = std::move(adapter.params);
  model.labeled = labeled;
  model.seen = seen;
  model.label_internal_nodes = cfg.label_internal_nodes;
  if (proj) model.proj = *proj;
  model.mlp = std::move(fit.mlp);
  model.best_valid_metric = fit.best_metric;
  model.best_epoch = fit.best_epoch;
  model.valid_history = std::move(fit.history);
  return model;
}

TextClassifier finetune_text(TextEncoderParams encoder, const DccaProjection* proj,
                             const IndexedDataset& train, const IndexedDataset& valid,
                             const ExperimentConfig& cfg, uint64_t seed) {
  TextAdapter adapter;
  adapter.params = std::move(encoder);
  adapter.proj = proj;

  FitOutcome fit = fit_classifier(adapter, train, valid, cfg, seed);
  TextClassifier model;
  model.text = std::move(adapter.params);
  if (proj) model.proj = *proj;
  model.mlp = std::move(fit.mlp);
  model.best_valid_metric = fit.best_metric;
  model.best_epoch = fit.best_epoch;
  model.valid_history = std::move(fit.history);
  return model;
}

BothClassifier finetune_both(const OntologyGraph& g, GraphEncoderParams graph_encoder, bool labeled,
                             const SeenSet& seen, TextEncoderParams text_encoder,
                             const DccaProjection* proj, const IndexedDataset& train,
                             const IndexedDataset& valid, const ExperimentConfig& cfg, uint64_t seed) {
  BothAdapter adapter;
  adapter.code.g = &g;
  adapter.code.params = std::move(graph_encoder);
  adapter.code.labeled = labeled;
  adapter.code.seen = seen;
  adapter.code.label_internals = cfg.label_internal_nodes;
  adapter.code.proj = proj;
  adapter.text.params = std::move(text_encoder);
  adapter.text.proj = proj;

  FitOutcome fit = fit_classifier(adapter, train, valid, cfg, seed);
  BothClassifier model;
  model.graph = std::move(adapter.code.params);
  model.labeled = labeled;
  model.seen = seen;
  model.label_internal_nodes = cfg.label_internal_nodes;
  model.text = std::move(adapter.text.params);
  if (proj) model.proj = *proj;
  model.mlp = std::move(fit.mlp);
  model.best_valid_metric = fit.best_metric;
  model.best_epoch = fit.best_epoch;
  model.valid_history = std::move(fit.history);
  return model;
}

namespace {

IndexedDataset codes_only_dataset(const std::vector<std::vector<int>>& code_id_sets) {
  IndexedDataset ds;
  ds.code_ids = code_id_sets;
  ds.tokens.assign(code_id_sets.size(), {});
  ds.labels.assign(code_id_sets.size(), 0);
  return ds;
}

IndexedDataset texts_only_dataset(const std::vector<std::vector<int>>& docs) {
  IndexedDataset ds;
  ds.code_ids.assign(docs.size(), {});
  ds.tokens = docs;
  ds.labels.assign(docs.size(), 0);
  return ds;
}

std::vector<double> logits_to_scores(const Matrix& logits) {
  return std::vector<double>(logits.data(), logits.data() + logits.size());
}

}  // namespace

std::vector<double> score_codes(const CodeClassifier& model, const OntologyGraph& g,
                                const std::vector<std::vector<int>>& code_id_sets) {
  IndexedDataset ds = codes_only_dataset(code_id_sets);
  const Matrix initial =
      graph_initial(model.graph, model.labeled, model.seen, model.label_internal_nodes, g);
  Matrix emb = encode_code_batch(g, model.graph, initial, ds, iota_vec(ds.size()), nullptr);
  Matrix input = model.proj ? project(emb, *model.proj, View::kCode) : emb;
  return logits_to_scores(mlp_forward(model.mlp, input, false, nullptr, nullptr));
}

std::vector<double> score_texts(const TextClassifier& model, const std::vector<std::vector<int>>& docs) {
  Matrix emb = encode_text_batch(model.text, docs, nullptr);
  Matrix input = model.proj ? project(emb, *model.proj, View::kText) : emb;
  return logits_to_scores(mlp_forward(model.mlp, input, false, nullptr, nullptr));
}

std::vector<double> score_both(const BothClassifier& model, const OntologyGraph& g,
                               const std::vector<std::vector<int>>& code_id_sets,
                               const std::vector<std::vector<int>>& docs) {
  if (code_id_sets.size() != docs.size()) throw std::invalid_argument("score_both: view sizes differ");
  IndexedDataset cds = codes_only_dataset(code_id_sets);
  const Matrix initial =
      graph_initial(model.graph, model.labeled, model.seen, model.label_internal_nodes, g);
  Matrix a = encode_code_batch(g, model.graph, initial, cds, iota_vec(cds.size()), nullptr);
  if (model.proj) a = project(a, *model.proj, View::kCode);
  Matrix b = encode_text_batch(model.text, docs, nullptr);
  if (model.proj) b = project(b, *model.proj, View::kText);
  Matrix input(a.rows(), a.cols() + b.cols());
  for (int r = 0; r < a.rows(); ++r) {
    std::copy(a.row(r), a.row(r) + a.cols(), input.row(r));
    std::copy(b.row(r), b.row(r) + b.cols(), input.row(r) + a.cols());
  }
  return logits_to_scores(mlp_forward(model.mlp, input, false, nullptr, nullptr));
}

std::string metrics_csv_header() { return "task,view,variant,fold,seed,auroc,ap,corr,seconds"; }

std::string metrics_csv_line(const MetricsRow& row) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%s,%s,%s,%s,%llu,%.6f,%.6f,%.6f,%.3f", row.task.c_str(), row.view.c_str(),
                row.variant.c_str(), row.fold.c_str(), static_cast<unsigned long long>(row.seed), row.auroc,
                row.ap, row.corr, row.seconds);
  return buf;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics csv: " + path);
  out << metrics_csv_header() << "\n";
  for (const MetricsRow& row : rows) out << metrics_csv_line(row) << "\n";
}

std::vector<MetricsRow> summarize_metrics(const std::vector<MetricsRow>& rows) {
  // Group by (view, variant) preserving first-appearance order.
  std::vector<std::pair<std::string, std::string>> keys;
  std::map<std::pair<std::string, std::string>, std::vector<const MetricsRow*>> groups;
  for (const MetricsRow& row : rows) {
    auto key = std::make_pair(row.view, row.variant);
    if (!groups.count(key)) keys.push_back(key);
    groups[key].push_back(&row);
  }
  std::vector<MetricsRow> out;
  for (const auto& key : keys) {
    const auto& members = groups[key];
    const int n = static_cast<int>(members.size());
    MetricsRow mean, sd;
    mean.task = sd.task = members.front()->task;
    mean.view = sd.view = key.first;
    mean.variant = sd.variant = key.second;
    mean.fold = "mean";
    sd.fold = "std";
    mean.seed = sd.seed = static_cast<uint64_t>(n);
    for (const MetricsRow* row : members) {
      mean.auroc += row->auroc;
      mean.ap += row->ap;
      mean.corr += row->corr;
      mean.seconds += row->seconds;
    }
    mean.auroc /= n;
    mean.ap /= n;
    mean.corr /= n;
    mean.seconds /= n;
    if (n > 1) {
      for (const MetricsRow* row : members) {
        sd.auroc += (row->auroc - mean.auroc) * (row->auroc - mean.auroc);
        sd.ap += (row->ap - mean.ap) * (row->ap - mean.ap);
        sd.corr += (row->corr - mean.corr) * (row->corr - mean.corr);
        sd.seconds += (row->seconds - mean.seconds) * (row->seconds - mean.seconds);
      }
      sd.auroc = std::sqrt(sd.auroc / (n - 1));
      sd.ap = std::sqrt(sd.ap / (n - 1));
      sd.corr = std::sqrt(sd.corr / (n - 1));
      sd.seconds = std::sqrt(sd.seconds / (n - 1));
    }
    out.push_back(mean);
    out.push_back(sd);
  }
  return out;
}

namespace {

struct LoadedExperiment {
  OntologyGraph graph;
  std::vector<AdmissionRecord> records;
};

LoadedExperiment load_experiment_inputs(const ExperimentConfig& cfg) {
  LoadedExperiment ex;
  if (cfg.ontology_path.empty()) throw std::invalid_argument("run_experiment: ontology_path is required");
  ex.graph = add_jump_connections(build_tree(load_code_file(cfg.ontology_path)));
  if (!cfg.data_path.empty()) {
    ex.records = load_dataset(cfg.data_path, &ex.graph);
  } else {
    GeneratorSpec gen = cfg.gen;
    gen.seed = cfg.gen.seed ? cfg.gen.seed : cfg.seed;
    ex.records = gen_admissions(ex.graph, gen, cfg.gen_records);
  }
  if (ex.records.empty()) throw std::runtime_error("run_experiment: no records");
  return ex;
}

bool view_selected(const ExperimentConfig& cfg, const std::string& view) {
  return cfg.views.find(view) != std::string::npos;
}

struct EvalResult {
  double auroc = 0.0;
  double ap = 0.0;
};

EvalResult eval_scores(const std::vector<double>& scores, const std::vector<int>& labels) {
  EvalResult r;
  r.auroc = auroc(scores, labels);
  r.ap = average_precision(scores, labels);
  return r;
}

}  // namespace

std::vector<MetricsRow> run_unseen_pairing(const ExperimentConfig& cfg, const OntologyGraph& g,
                                           const std::vector<AdmissionRecord>& records,
                                           const std::vector<std::vector<int>>& folds, int eval_fold,
                                           int dcca_fold, uint64_t seed) {
  UnseenExperimentSplit split = build_unseen_experiment(records, folds, eval_fold, dcca_fold, g, seed);
  IndexedDataset dcca_train = index_dataset(split.dcca_train, g);
  IndexedDataset full_train = index_dataset(split.full_train, g);
  IndexedDataset valid = index_dataset(split.valid, g);
  IndexedDataset test = index_dataset(split.test, g);

  const std::string fold_tag = std::to_string(eval_fold) + "-" + std::to_string(dcca_fold);
  std::vector<MetricsRow> rows;

  auto eval_code_model = [&](const CodeClassifier& model, const std::string& variant, double corr,
                             double seconds) {
    EvalResult r = eval_scores(score_codes(model, g, test.code_ids), test.labels);
    MetricsRow row;
    row.task = cfg.task_name;
    row.view = "code";
    row.variant = variant;
    row.fold = fold_tag;
    row.seed = seed;
    row.auroc = r.auroc;
    row.ap = r.ap;
    row.corr = corr;
    row.seconds = seconds;
    rows.push_back(row);
  };

  Rng master(seed);
  Rng graph_rng = master.split(kStreamGraphInit);

  // Plain graph encoder, no labels, no projection.
  {
    const double t0 = now_seconds();
    Rng init = graph_rng.split(0);
    GraphEncoderParams enc = init_graph_encoder(g, cfg.hidden, cfg.rgcn_layers, cfg.hidden, init);
    CodeClassifier model = finetune_code(g, std::move(enc), false, {}, nullptr, full_train, valid, cfg, seed);
    eval_code_model(model, "rgcn", 0.0, cfg.record_walltime ? now_seconds() - t0 : 0.0);
  }
  // Labeling only: the seen column marks dcca_train leaves but no DCCA runs.
  {
    const double t0 = now_seconds();
    Rng init = graph_rng.split(1);
    GraphEncoderParams enc = init_graph_encoder(g, cfg.hidden, cfg.rgcn_layers, cfg.hidden + 1, init);
    CodeClassifier model =
        finetune_code(g, std::move(enc), true, split.seen, nullptr, full_train, valid, cfg, seed);
    eval_code_model(model, "rgcn+labeling", 0.0, cfg.record_walltime ? now_seconds() - t0 : 0.0);
  }
  // DCCA on the seen subset, then task fine-tune on everything.
  {
    const double t0 = now_seconds();
    TrainedDcca dcca = train_dcca(g, dcca_train, valid, cfg, seed, nullptr);
    CodeClassifier model =
        finetune_code(g, dcca.graph, false, {}, &dcca.proj, full_train, valid, cfg, seed);
    eval_code_model(model, "dcca+rgcn", dcca.best_valid_corr, cfg.record_walltime ? now_seconds() - t0 : 0.0);
  }
  // DCCA plus the 1-0 labeling scheme.
  {
    const double t0 = now_seconds();
    TrainedDcca dcca = train_dcca(g, dcca_train, valid, cfg, seed, &split.seen);
    CodeClassifier model =
        finetune_code(g, dcca.graph, true, split.seen, &dcca.proj, full_train, valid, cfg, seed);
    eval_code_model(model, "dcca+rgcn+labeling", dcca.best_valid_corr,
                    cfg.record_walltime ? now_seconds() - t0 : 0.0);
  }
  return rows;
}

std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, ExperimentMode mode,
                                       const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  LoadedExperiment ex = load_experiment_inputs(cfg);
  std::vector<MetricsRow> rows;

  if (mode == ExperimentMode::kStandard) {
    IndexedDataset all = index_dataset(ex.records, ex.graph);
    for (int run = 0; run < cfg.num_seeds; ++run) {
      const uint64_t seed = cfg.seed + static_cast<uint64_t>(run);
      std::vector<int> order = iota_vec(all.size());
      Rng split_rng = Rng(seed).split(kStreamSplit);
      split_rng.shuffle(order);
      const int n = all.size();
      const int n_train = static_cast<int>(n * 0.8);
      const int n_valid = static_cast<int>(n * 0.1);
      IndexedDataset train = take(all, {order.begin(), order.begin() + n_train});
      IndexedDataset valid = take(all, {order.begin() + n_train, order.begin() + n_train + n_valid});
      IndexedDataset test = take(all, {order.begin() + n_train + n_valid, order.end()});

      const std::string fold_tag = std::to_string(run);
      auto push_row = [&](const std::string& view, const std::string& variant, const EvalResult& r,
                          double corr, double seconds) {
        MetricsRow row;
        row.task = cfg.task_name;
        row.view = view;
        row.variant = variant;
        row.fold = fold_tag;
        row.seed = seed;
        row.auroc = r.auroc;
        row.ap = r.ap;
        row.corr = corr;
        row.seconds = seconds;
        rows.push_back(row);
      };

      TrainedDcca dcca = train_dcca(ex.graph, train, valid, cfg, seed, nullptr);
      Rng master(seed);
      Rng graph_rng = master.split(kStreamGraphInit);
      Rng text_rng = master.split(kStreamTextInit);

      if (view_selected(cfg, "code")) {
        double t0 = now_seconds();
        Rng ginit = graph_rng.split(100);
        GraphEncoderParams fresh =
            init_graph_encoder(ex.graph, cfg.hidden, cfg.rgcn_layers, cfg.hidden, ginit);
        CodeClassifier base =
            finetune_code(ex.graph, std::move(fresh), false, {}, nullptr, train, valid, cfg, seed);
        push_row("code", "base", eval_scores(score_codes(base, ex.graph, test.code_ids), test.labels), 0.0,
                 cfg.record_walltime ? now_seconds() - t0 : 0.0);

        t0 = now_seconds();
        CodeClassifier tuned =
            finetune_code(ex.graph, dcca.graph, false, {}, &dcca.proj, train, valid, cfg, seed);
        push_row("code", "dcca", eval_scores(score_codes(tuned, ex.graph, test.code_ids), test.labels),
                 dcca.best_valid_corr, cfg.record_walltime ? now_seconds() - t0 : 0.0);
      }
      if (view_selected(cfg, "text")) {
        double t0 = now_seconds();
        const int vocab = out_vocab_for(cfg, train, valid);
        Rng tinit = text_rng.split(100);
        TextEncoderParams fresh =
            init_text_encoder(vocab, cfg.hidden, cfg.hidden, cfg.block_size, cfg.bidirectional, tinit);
        TextClassifier base = finetune_text(std::move(fresh), nullptr, train, valid, cfg, seed);
        push_row("text", "base", eval_scores(score_texts(base, test.tokens), test.labels), 0.0,
                 cfg.record_walltime ? now_seconds() - t0 : 0.0);

        t0 = now_seconds();
        TextClassifier tuned = finetune_text(dcca.text, &dcca.proj, train, valid, cfg, seed);
        push_row("text", "dcca", eval_scores(score_texts(tuned, test.tokens), test.labels),
                 dcca.best_valid_corr, cfg.record_walltime ? now_seconds() - t0 : 0.0);
      }
      if (view_selected(cfg, "both")) {
        double t0 = now_seconds();
        Rng ginit = graph_rng.split(200);
        Rng tinit = text_rng.split(200);
        const int vocab = out_vocab_for(cfg, train, valid);
        GraphEncoderParams gfresh =
            init_graph_encoder(ex.graph, cfg.hidden, cfg.rgcn_layers, cfg.hidden, ginit);
        TextEncoderParams tfresh =
            init_text_encoder(vocab, cfg.hidden, cfg.hidden, cfg.block_size, cfg.bidirectional, tinit);
        BothClassifier base = finetune_both(ex.graph, std::move(gfresh), false, {}, std::move(tfresh),
                                            nullptr, train, valid, cfg, seed);
        push_row("both", "base",
                 eval_scores(score_both(base, ex.graph, test.code_ids, test.tokens), test.labels), 0.0,
                 cfg.record_walltime ? now_seconds() - t0 : 0.0);

        t0 = now_seconds();
        BothClassifier tuned = finetune_both(ex.graph, dcca.graph, false, {}, dcca.text, &dcca.proj, train,
                                             valid, cfg, seed);
        push_row("both", "dcca",
                 eval_scores(score_both(tuned, ex.graph, test.code_ids, test.tokens), test.labels),
                 dcca.best_valid_corr, cfg.record_walltime ? now_seconds() - t0 : 0.0);
      }
    }
    std::vector<MetricsRow> summary = summarize_metrics(rows);
    std::vector<MetricsRow> all_rows = rows;
    all_rows.insert(all_rows.end(), summary.begin(), summary.end());
    write_metrics_csv(all_rows, out_dir + "/metrics.csv");
    return all_rows;
  }

  // Unseen mode: fold pairings (i, (i+1) mod k), one run each.
  std::set<int> used_leaves;
  for (const AdmissionRecord& rec : ex.records) {
    for (const std::string& code : rec.codes) used_leaves.insert(ex.graph.leaf_id(code));
  }
  std::vector<int> unique_codes(used_leaves.begin(), used_leaves.end());
  const auto folds = kfold_code_split(unique_codes, cfg.folds, cfg.seed);
  for (int i = 0; i < cfg.folds; ++i) {
    const int j = (i + 1) % cfg.folds;
    const uint64_t seed = cfg.seed + static_cast<uint64_t>(i);
    std::vector<MetricsRow> fold_rows = run_unseen_pairing(cfg, ex.graph, ex.records, folds, i, j, seed);
    write_metrics_csv(fold_rows,
                      out_dir + "/metrics_fold_" + std::to_string(i) + "_" + std::to_string(j) + ".csv");
    rows.insert(rows.end(), fold_rows.begin(), fold_rows.end());
  }
  std::vector<MetricsRow> summary = summarize_metrics(rows);
  std::vector<MetricsRow> with_summary = rows;
  with_summary.insert(with_summary.end(), summary.begin(), summary.end());
  write_metrics_csv(with_summary, out_dir + "/summary.csv");
  return with_summary;
}

namespace {

void pack_graph(Snapshot& snap, const GraphEncoderParams& p, const std::string& prefix) {
  snap.meta[prefix + "hidden"] = std::to_string(p.hidden);
  snap.meta[prefix + "layers"] = std::to_string(p.layer_count());
  snap.meta[prefix + "relations"] = std::to_string(p.layers.front().rel_weight.size());
  snap.add(prefix + "node_init", p.node_init.value);
  for (int k = 0; k < p.layer_count(); ++k) {
    const std::string lp = prefix + "layer" + std::to_string(k) + "/";
    snap.add(lp + "self", p.layers[k].self_weight.value);
    for (size_t r = 0; r < p.layers[k].rel_weight.size(); ++r) {
      snap.add(lp + "rel" + std::to_string(r), p.layers[k].rel_weight[r].value);
    }
  }
}

GraphEncoderParams unpack_graph(const Snapshot& snap, const std::string& prefix) {
  GraphEncoderParams p;
  p.hidden = snap.meta_int(prefix + "hidden");
  const int layers = snap.meta_int(prefix + "layers");
  const int relations = snap.meta_int(prefix + "relations");
  p.node_init = Tensor(snap.get(prefix + "node_init"));
  for (int k = 0; k < layers; ++k) {
    const std::string lp = prefix + "layer" + std::to_string(k) + "/";
    RgcnLayer layer;
    layer.self_weight = Tensor(snap.get(lp + "self"));
    for (int r = 0; r < relations; ++r) layer.rel_weight.emplace_back(snap.get(lp + "rel" + std::to_string(r)));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void pack_cell(Snapshot& snap, const LstmCell& cell, const std::string& prefix) {
  snap.add(prefix + "w_ih", cell.w_ih.value);
  snap.add(prefix + "w_hh", cell.w_hh.value);
  snap.add(prefix + "bias", cell.bias.value);
}

LstmCell unpack_cell(const Snapshot& snap, const std::string& prefix) {
  LstmCell cell;
  cell.w_ih = Tensor(snap.get(prefix + "w_ih"));
  cell.w_hh = Tensor(snap.get(prefix + "w_hh"));
  cell.bias = Tensor(snap.get(prefix + "bias"));
  cell.input = cell.w_ih.value.rows();
  cell.hidden = cell.w_hh.value.rows();
  return cell;
}

void pack_text(Snapshot& snap, const TextEncoderParams& p, const std::string& prefix) {
  snap.meta[prefix + "vocab"] = std::to_string(p.vocab);
  snap.meta[prefix + "block_size"] = std::to_string(p.block_size);
  snap.meta[prefix + "bidirectional"] = p.bidirectional ? "1" : "0";
  snap.add(prefix + "embed", p.token_embed.value);
  pack_cell(snap, p.s1_fwd, prefix + "s1_fwd/");
  pack_cell(snap, p.s1_bwd, prefix + "s1_bwd/");
  pack_cell(snap, p.s2_fwd, prefix + "s2_fwd/");
  pack_cell(snap, p.s2_bwd, prefix + "s2_bwd/");
}

TextEncoderParams unpack_text(const Snapshot& snap, const std::string& prefix) {
  TextEncoderParams p;
  p.vocab = snap.meta_int(prefix + "vocab");
  p.block_size = snap.meta_int(prefix + "block_size");
  p.bidirectional = snap.meta_int(prefix + "bidirectional") != 0;
  p.token_embed = Tensor(snap.get(prefix + "embed"));
  p.s1_fwd = unpack_cell(snap, prefix + "s1_fwd/");
  p.s1_bwd = unpack_cell(snap, prefix + "s1_bwd/");
  p.s2_fwd = unpack_cell(snap, prefix + "s2_fwd/");
  p.s2_bwd = unpack_cell(snap, prefix + "s2_bwd/");
  return p;
}

void pack_mlp(Snapshot& snap, const MlpParams& p, const std::string& prefix) {
  snap.meta[prefix + "layers"] = std::to_string(p.layers.size());
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", p.dropout);
  snap.meta[prefix + "dropout"] = buf;
  for (size_t i = 0; i < p.layers.size(); ++i) {
    snap.add(prefix + "w" + std::to_string(i), p.layers[i].weight.value);
    snap.add(prefix + "b" + std::to_string(i), p.layers[i].bias.value);
  }
}

MlpParams unpack_mlp(const Snapshot& snap, const std::string& prefix) {
  MlpParams p;
  const int layers = snap.meta_int(prefix + "layers");
  p.dropout = std::stod(snap.meta_at(prefix + "dropout"));
  for (int i = 0; i < layers; ++i) {
    MlpLayer layer;
    layer.weight = Tensor(snap.get(prefix + "w" + std::to_string(i)));
    layer.bias = Tensor(snap.get(prefix + "b" + std::to_string(i)));
    p.layers.push_back(std::move(layer));
  }
  return p;
}

void pack_projection(Snapshot& snap, const DccaProjection& proj, const std::string& prefix) {
  snap.meta[prefix + "dims"] = std::to_string(proj.dims);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", proj.r_code);
  snap.meta[prefix + "r_code"] = buf;
  std::snprintf(buf, sizeof(buf), "%.17g", proj.r_text);
  snap.meta[prefix + "r_text"] = buf;
  snap.add(prefix + "u", proj.u);
  snap.add(prefix + "v", proj.v);
  snap.add(prefix + "code_mean", proj.code_mean);
  snap.add(prefix + "text_mean", proj.text_mean);
}

DccaProjection unpack_projection(const Snapshot& snap, const std::string& prefix) {
  DccaProjection proj;
  proj.dims = snap.meta_int(prefix + "dims");
  proj.r_code = std::stod(snap.meta_at(prefix + "r_code"));
  proj.r_text = std::stod(snap.meta_at(prefix + "r_text"));
  proj.u = snap.get(prefix + "u");
  proj.v = snap.get(prefix + "v");
  proj.code_mean = snap.get(prefix + "code_mean");
  proj.text_mean = snap.get(prefix + "text_mean");
  return proj;
}

void pack_seen(Snapshot& snap, const SeenSet& seen, const std::string& name) {
  Matrix ids(1, static_cast<int>(seen.seen_leaves.size()));
  int c = 0;
  for (int id : seen.seen_leaves) ids(0, c++) = id;
  snap.add(name, ids);
}

SeenSet unpack_seen(const Snapshot& snap, const std::string& name) {
  SeenSet seen;
  const Matrix& ids = snap.get(name);
  for (int c = 0; c < ids.cols(); ++c) seen.seen_leaves.insert(static_cast<int>(ids(0, c)));
  return seen;
}

std::string hash_hex(uint64_t h) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace

void save_code_classifier(const CodeClassifier& model, uint64_t cfg_hash, const std::string& path) {
  Snapshot snap;
  snap.meta["kind"] = "code-classifier";
  snap.meta["config_hash"] = hash_hex(cfg_hash);
  snap.meta["labeled"] = model.labeled ? "1" : "0";
  snap.meta["label_internal_nodes"] = model.label_internal_nodes ? "1" : "0";
  snap.meta["has_proj"] = model.proj ? "1" : "0";
  pack_graph(snap, model.graph, "graph/");
  pack_mlp(snap, model.mlp, "mlp/");
  if (model.proj) pack_projection(snap, *model.proj, "proj/");
  pack_seen(snap, model.seen, "seen");
  save_snapshot(snap, path);
}

CodeClassifier load_code_classifier(const std::string& path) {
  Snapshot snap = load_snapshot(path);
  if (snap.meta_at("kind") != "code-classifier") {
    throw std::runtime_error("snapshot is not a code classifier: " + path);
  }
  CodeClassifier model;
  model.graph = unpack_graph(snap, "graph/");
  model.mlp = unpack_mlp(snap, "mlp/");
  model.labeled = snap.meta_int("labeled") != 0;
  model.label_internal_nodes = snap.meta_int("label_internal_nodes") != 0;
  if (snap.meta_int("has_proj")) model.proj = unpack_projection(snap, "proj/");
  model.seen = unpack_seen(snap, "seen");
  return model;
}

void save_text_classifier(const TextClassifier& model, uint64_t cfg_hash, const std::string& path) {
  Snapshot snap;
  snap.meta["kind"] = "text-classifier";
  snap.meta["config_hash"] = hash_hex(cfg_hash);
  snap.meta["has_proj"] = model.proj ? "1" : "0";
  pack_text(snap, model.text, "text/");
  pack_mlp(snap, model.mlp, "mlp/");
  if (model.proj) pack_projection(snap, *model.proj, "proj/");
  save_snapshot(snap, path);
}

TextClassifier load_text_classifier(const std::string& path) {
  Snapshot snap = load_snapshot(path);
  if (snap.meta_at("kind") != "text-classifier") {
    throw std::runtime_error("snapshot is not a text classifier: " + path);
  }
  TextClassifier model;
  model.text = unpack_text(snap, "text/");
  model.mlp = unpack_mlp(snap, "mlp/");
  if (snap.meta_int("has_proj")) model.proj = unpack_projection(snap, "proj/");
  return model;
}

void save_dcca_encoders(const TrainedDcca& trained, uint64_t cfg_hash, const std::string& path) {
  Snapshot snap;
  snap.meta["kind"] = "dcca-encoders";
  snap.meta["config_hash"] = hash_hex(cfg_hash);
  snap.meta["labeled"] = trained.labeled ? "1" : "0";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", trained.best_valid_corr);
  snap.meta["best_valid_corr"] = buf;
  snap.meta["best_epoch"] = std::to_string(trained.best_epoch);
  pack_graph(snap, trained.graph, "graph/");
  pack_text(snap, trained.text, "text/");
  pack_projection(snap, trained.proj, "proj/");
  pack_seen(snap, trained.seen, "seen");
  save_snapshot(snap, path);
}

TrainedDcca load_dcca_encoders(const std::string& path) {
  Snapshot snap = load_snapshot(path);
  if (snap.meta_at("kind") != "dcca-encoders") {
    throw std::runtime_error("snapshot is not a dcca encoder pair: " + path);
  }
  TrainedDcca trained;
  trained.graph = unpack_graph(snap, "graph/");
  trained.text = unpack_text(snap, "text/");
  trained.proj = unpack_projection(snap, "proj/");
  trained.labeled = snap.meta_int("labeled") != 0;
  trained.best_valid_corr = std::stod(snap.meta_at("best_valid_corr"));
  trained.best_epoch = snap.meta_int("best_epoch");
  trained.seen = unpack_seen(snap, "seen");
  return trained;
}

}  // namespace mvl
