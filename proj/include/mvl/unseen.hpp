#pragma once

#include <set>
#include <vector>

#include "mvl/data.hpp"
#include "mvl/matrix.hpp"
#include "mvl/ontology.hpp"

namespace mvl {

// Leaves treated as seen during the DCCA phase; everything else (internal
// hierarchy nodes included) carries the 0 label.
struct SeenSet {
  std::set<int> seen_leaves;
};

// Appends a non-trainable 1/0 membership column to every node's initial
// embedding: h^{0+} is (node_count) x (h+1). With label_internal_nodes set,
// an internal node whose leaf descendants are all seen inherits a 1.
Matrix augment_labels(const Matrix& node_init, const SeenSet& seen, const OntologyGraph& g,
                      bool label_internal_nodes = false);

// Seeded shuffle then near-even partition; deterministic per seed.
std::vector<std::vector<int>> kfold_code_split(const std::vector<int>& codes, int k, uint64_t seed);

struct UnseenExperimentSplit {
  std::vector<AdmissionRecord> dcca_train;  // train records with no dcca-fold code
  std::vector<AdmissionRecord> full_train;
  std::vector<AdmissionRecord> valid;       // half of the eval records
  std::vector<AdmissionRecord> test;
  SeenSet seen;                             // leaves appearing in dcca_train
  int eval_fold = 0;
  int dcca_fold = 0;
  int k = 0;
};

// Eval set = records containing any fold-i code, halved into valid/test by a
// seeded shuffle (odd size favours valid); train = the rest; dcca_train drops
// train records containing any fold-j code. Throws on a degenerate pairing
// (empty eval set or empty dcca_train).
UnseenExperimentSplit build_unseen_experiment(const std::vector<AdmissionRecord>& data,
                                              const std::vector<std::vector<int>>& folds, int eval_fold,
                                              int dcca_fold, const OntologyGraph& g, uint64_t seed);

}  // namespace mvl
