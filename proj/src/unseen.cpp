#include "mvl/unseen.hpp"

#include <algorithm>
#include <stdexcept>

#include "mvl/rng.hpp"

namespace mvl {

Matrix augment_labels(const Matrix& node_init, const SeenSet& seen, const OntologyGraph& g,
                      bool label_internal_nodes) {
  if (node_init.rows() != g.node_count()) {
    throw std::invalid_argument("augment_labels: node_init rows do not match the graph");
  }
  const int h = node_init.cols();
  Matrix out(node_init.rows(), h + 1);
  for (int u = 0; u < node_init.rows(); ++u) {
    const double* src = node_init.row(u);
    double* dst = out.row(u);
    for (int c = 0; c < h; ++c) dst[c] = src[c];
    dst[h] = seen.seen_leaves.count(u) ? 1.0 : 0.0;
  }
  if (label_internal_nodes) {
    // Bottom-up: an internal node is seen when every leaf below it is seen.
    // Node ids are breadth-first, so a reverse scan visits children first.
    std::vector<int> leaf_total(g.node_count(), 0), leaf_seen(g.node_count(), 0);
    for (int u = g.node_count() - 1; u >= 0; --u) {
      const CodeNode& n = g.node(u);
      if (n.is_leaf) {
        leaf_total[u] = 1;
        leaf_seen[u] = seen.seen_leaves.count(u) ? 1 : 0;
      }
      if (n.parent >= 0) {
        leaf_total[n.parent] += leaf_total[u];
        leaf_seen[n.parent] += leaf_seen[u];
      }
    }
    for (int u = 0; u < g.node_count(); ++u) {
      if (!g.node(u).is_leaf && leaf_total[u] > 0 && leaf_seen[u] == leaf_total[u]) out(u, h) = 1.0;
    }
  }
  return out;
}

std::vector<std::vector<int>> kfold_code_split(const std::vector<int>& codes, int k, uint64_t seed) {
  if (k < 2 || k > static_cast<int>(codes.size())) {
    throw std::invalid_argument("kfold_code_split: k outside [2, |codes|]");
  }
  std::vector<int> shuffled = codes;
  Rng rng(seed, 11);
  rng.shuffle(shuffled);
  std::vector<std::vector<int>> folds(k);
  for (size_t i = 0; i < shuffled.size(); ++i) folds[i % k].push_back(shuffled[i]);
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

UnseenExperimentSplit build_unseen_experiment(const std::vector<AdmissionRecord>& data,
                                              const std::vector<std::vector<int>>& folds, int eval_fold,
                                              int dcca_fold, const OntologyGraph& g, uint64_t seed) {
  const int k = static_cast<int>(folds.size());
  if (eval_fold < 0 || eval_fold >= k || dcca_fold < 0 || dcca_fold >= k || eval_fold == dcca_fold) {
    throw std::invalid_argument("build_unseen_experiment: bad fold pairing");
  }

  std::set<int> eval_codes(folds[eval_fold].begin(), folds[eval_fold].end());
  std::set<int> dcca_codes(folds[dcca_fold].begin(), folds[dcca_fold].end());

  auto contains_any = [&](const AdmissionRecord& rec, const std::set<int>& fold) {
    for (const std::string& code : rec.codes) {
      if (fold.count(g.leaf_id(code))) return true;
    }
    return false;
  };

  UnseenExperimentSplit split;
  split.eval_fold = eval_fold;
  split.dcca_fold = dcca_fold;
  split.k = k;

  std::vector<AdmissionRecord> eval_set;
  for (const AdmissionRecord& rec : data) {
    if (contains_any(rec, eval_codes)) {
      eval_set.push_back(rec);
    } else {
      split.full_train.push_back(rec);
    }
  }
  if (eval_set.empty() ) {
    throw std::runtime_error("build_unseen_experiment: degenerate fold pairing (no eval records)");
  }

  // Halve the eval set; odd sizes give valid the extra record.
  std::vector<int> order(eval_set.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(seed, 13);
  rng.shuffle(order);
  const size_t valid_count = (eval_set.size() + 1) / 2;
  for (size_t i = 0; i < order.size(); ++i) {
    if (i < valid_count) {
      split.valid.push_back(eval_set[order[i]]);
    } else {
      split.test.push_back(eval_set[order[i]]);
    }
  }

  for (const AdmissionRecord& rec : split.full_train) {
    if (!contains_any(rec, dcca_codes)) split.dcca_train.push_back(rec);
  }
  if (split.dcca_train.empty()) {
    throw std::runtime_error("build_unseen_experiment: degenerate fold pairing (empty dcca train)");
  }
  for (const AdmissionRecord& rec : split.dcca_train) {
    for (const std::string& code : rec.codes) split.seen.seen_leaves.insert(g.leaf_id(code));
  }
  return split;
}

}  // namespace mvl
