#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mvl/config.hpp"
#include "mvl/data.hpp"
#include "mvl/dcca.hpp"
#include "mvl/lstm.hpp"
#include "mvl/mlp.hpp"
#include "mvl/ontology.hpp"
#include "mvl/rgcn.hpp"
#include "mvl/snapshot.hpp"
#include "mvl/unseen.hpp"

namespace mvl {

// Records with code strings resolved to leaf ids, ready for batching.
struct IndexedDataset {
  std::vector<std::vector<int>> code_ids;  // sorted leaf ids per record
  std::vector<std::vector<int>> tokens;
  std::vector<int> labels;

  int size() const { return static_cast<int>(labels.size()); }
};

IndexedDataset index_dataset(const std::vector<AdmissionRecord>& records, const OntologyGraph& g);
IndexedDataset take(const IndexedDataset& ds, const std::vector<int>& indices);

struct TrainedDcca {
  GraphEncoderParams graph;
  TextEncoderParams text;
  DccaProjection proj;
  double best_valid_corr = 0.0;
  int best_epoch = -1;
  std::vector<double> valid_history;  // correlation after each epoch
  bool labeled = false;  // graph input carries the seen/unseen column
  SeenSet seen;
};

// Mini-batch ascent on the correlation objective with Adam; the snapshot with
// the best validation correlation wins, then the projection is solved from
// the full training set through those encoders. `labeling`, when given,
// augments the graph input with the 1-0 seen column.
TrainedDcca train_dcca(const OntologyGraph& g, const IndexedDataset& train, const IndexedDataset& valid,
                       const ExperimentConfig& cfg, uint64_t seed, const SeenSet* labeling);

struct CodeClassifier {
  GraphEncoderParams graph;
  bool labeled = false;
  SeenSet seen;
  bool label_internal_nodes = false;
  std::optional<DccaProjection> proj;
  MlpParams mlp;
  double best_valid_metric = 0.0;
  int best_epoch = -1;
  std::vector<double> valid_history;
};

struct TextClassifier {
  TextEncoderParams text;
  std::optional<DccaProjection> proj;
  MlpParams mlp;
  double best_valid_metric = 0.0;
  int best_epoch = -1;
  std::vector<double> valid_history;
};

struct BothClassifier {
  GraphEncoderParams graph;
  bool labeled = false;
  SeenSet seen;
  bool label_internal_nodes = false;
  TextEncoderParams text;
  std::optional<DccaProjection> proj;
  MlpParams mlp;
  double best_valid_metric = 0.0;
  int best_epoch = -1;
  std::vector<double> valid_history;
};

// End-to-end task training of one view plus its MLP head; the projection,
// when given, stays frozen. Early stopping tracks validation AUROC (falling
// back to negative loss when the validation labels are single-class).
CodeClassifier finetune_code(const OntologyGraph& g, GraphEncoderParams encoder, bool labeled,
                             const SeenSet& seen, const DccaProjection* proj, const IndexedDataset& train,
                             const IndexedDataset& valid, const ExperimentConfig& cfg, uint64_t seed);

TextClassifier finetune_text(TextEncoderParams encoder, const DccaProjection* proj,
                             const IndexedDataset& train, const IndexedDataset& valid,
                             const ExperimentConfig& cfg, uint64_t seed);

BothClassifier finetune_both(const OntologyGraph& g, GraphEncoderParams graph_encoder, bool labeled,
                             const SeenSet& seen, TextEncoderParams text_encoder,
                             const DccaProjection* proj, const IndexedDataset& train,
                             const IndexedDataset& valid, const ExperimentConfig& cfg, uint64_t seed);

// Inference entry points accept exactly one view's data, so a code model can
// never read tokens and a text model can never read codes.
std::vector<double> score_codes(const CodeClassifier& model, const OntologyGraph& g,
                                const std::vector<std::vector<int>>& code_id_sets);
std::vector<double> score_texts(const TextClassifier& model, const std::vector<std::vector<int>>& docs);
std::vector<double> score_both(const BothClassifier& model, const OntologyGraph& g,
                               const std::vector<std::vector<int>>& code_id_sets,
                               const std::vector<std::vector<int>>& docs);

struct MetricsRow {
  std::string task;
  std::string view;     // code | text | both
  std::string variant;  // base | dcca | rgcn | rgcn+labeling | dcca+rgcn | dcca+rgcn+labeling
  std::string fold;     // run index, or mean/std for summary rows
  uint64_t seed = 0;
  double auroc = 0.0;
  double ap = 0.0;
  double corr = 0.0;
  double seconds = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path);

// mean and std rows per (view, variant), sample std over runs.
std::vector<MetricsRow> summarize_metrics(const std::vector<MetricsRow>& rows);

enum class ExperimentMode { kStandard, kUnseen };

// Standard mode: per seed an 8:1:1 split, base and dcca variants for both
// views plus the combined model. Unseen mode: per fold pairing
// (i, (i+1) mod k) the four code-view variants. Writes CSVs under out_dir
// (metrics.csv / metrics_fold_i_j.csv + summary.csv) and returns all rows.
std::vector<MetricsRow> run_experiment(const ExperimentConfig& cfg, ExperimentMode mode,
                                       const std::string& out_dir);

// One unseen pairing; exposed for the CLI's --folds i,j form.
std::vector<MetricsRow> run_unseen_pairing(const ExperimentConfig& cfg, const OntologyGraph& g,
                                           const std::vector<AdmissionRecord>& records,
                                           const std::vector<std::vector<int>>& folds, int eval_fold,
                                           int dcca_fold, uint64_t seed);

// Classifier artifacts: a snapshot with the embedded config hash, encoder and
// head tensors, and the projection when present.
void save_code_classifier(const CodeClassifier& model, uint64_t cfg_hash, const std::string& path);
CodeClassifier load_code_classifier(const std::string& path);
void save_text_classifier(const TextClassifier& model, uint64_t cfg_hash, const std::string& path);
TextClassifier load_text_classifier(const std::string& path);

// Paired encoder artifact produced by the DCCA phase.
void save_dcca_encoders(const TrainedDcca& trained, uint64_t cfg_hash, const std::string& path);
TrainedDcca load_dcca_encoders(const std::string& path);

}  // namespace mvl
