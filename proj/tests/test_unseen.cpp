#include <algorithm>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "mvl/ontology.hpp"
#include "mvl/rng.hpp"
#include "mvl/unseen.hpp"

using namespace mvl;

TEST_CASE("label augmentation appends one membership coordinate") {
  OntologyGraph g = build_tree({"AA", "AB", "BA"});
  Rng rng(1);
  Matrix init = Matrix::uniform(g.node_count(), 3, rng, -1, 1);

  SeenSet all_leaves;
  for (int id : g.leaf_ids()) all_leaves.seen_leaves.insert(id);
  Matrix out = augment_labels(init, all_leaves, g);

  CHECK(out.cols() == 4);
  for (int u = 0; u < g.node_count(); ++u) {
    for (int c = 0; c < 3; ++c) CHECK(out(u, c) == init(u, c));  // first h coordinates untouched
    CHECK(out(u, 3) == (g.node(u).is_leaf ? 1.0 : 0.0));
  }
}

TEST_CASE("internal nodes inherit the label only under the alternative flag") {
  OntologyGraph g = build_tree({"AA", "AB", "BA"});
  Matrix init(g.node_count(), 2);
  SeenSet seen;
  seen.seen_leaves.insert(g.leaf_id("AA"));
  seen.seen_leaves.insert(g.leaf_id("AB"));

  Matrix literal = augment_labels(init, seen, g, false);
  Matrix inherit = augment_labels(init, seen, g, true);
  // Under the literal reading every internal node is 0.
  for (const auto& n : g.nodes()) {
    if (!n.is_leaf) CHECK(literal(n.id, 2) == 0.0);
  }
  // With inheritance, the 'A' subtree (both leaves seen) flips to 1, 'B' not.
  int a_internal = g.node(g.leaf_id("AA")).parent;
  int b_internal = g.node(g.leaf_id("BA")).parent;
  CHECK(inherit(a_internal, 2) == 1.0);
  CHECK(inherit(b_internal, 2) == 0.0);
  CHECK(inherit(0, 2) == 0.0);  // root has an unseen descendant
}

TEST_CASE("kfold splits evenly and deterministically") {
  std::vector<int> codes{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto folds = kfold_code_split(codes, 5, 42);
  REQUIRE(folds.size() == 5);
  std::set<int> all;
  for (const auto& fold : folds) {
    CHECK(fold.size() == 2);
    all.insert(fold.begin(), fold.end());
  }
  CHECK(all.size() == 10);

  auto again = kfold_code_split(codes, 5, 42);
  CHECK(folds == again);
  auto other = kfold_code_split(codes, 5, 43);
  CHECK(folds != other);

  CHECK_THROWS_AS(kfold_code_split(codes, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(kfold_code_split(codes, 11, 0), std::invalid_argument);
}

TEST_CASE("uneven counts spread across folds") {
  std::vector<int> codes{1, 2, 3, 4, 5, 6, 7};
  auto folds = kfold_code_split(codes, 3, 1);
  std::multiset<size_t> sizes;
  for (const auto& f : folds) sizes.insert(f.size());
  CHECK(sizes == std::multiset<size_t>{2, 2, 3});
}

namespace {

AdmissionRecord rec(std::vector<std::string> codes, int label) {
  AdmissionRecord r;
  r.codes = std::move(codes);
  r.tokens = {1, 2, 3};
  r.label = label;
  return r;
}

}  // namespace

TEST_CASE("unseen experiment construction") {
  OntologyGraph g = build_tree({"AA", "AB", "BA", "BB"});
  const int aa = g.leaf_id("AA"), ab = g.leaf_id("AB"), ba = g.leaf_id("BA"), bb = g.leaf_id("BB");
  std::vector<std::vector<int>> folds{{aa, ab}, {ba, bb}};

  std::vector<AdmissionRecord> data;
  data.push_back(rec({"AA"}, 1));        // fold 0 only -> eval when i=0
  data.push_back(rec({"AB", "BA"}, 0));  // mixed
  data.push_back(rec({"BA"}, 1));        // fold 1 only
  data.push_back(rec({"BB"}, 0));
  data.push_back(rec({"BB", "BA"}, 1));

  auto split = build_unseen_experiment(data, folds, 0, 1, g, 5);

  // Eval set: records containing AA or AB (two records), halved with the odd
  // one landing in valid.
  CHECK(split.valid.size() + split.test.size() == 2);
  CHECK(split.valid.size() >= split.test.size());
  for (const auto& r : split.test) {
    bool has_eval_code = false;
    for (const auto& c : r.codes) has_eval_code |= (g.leaf_id(c) == aa || g.leaf_id(c) == ab);
    CHECK(has_eval_code);
  }

  // Train = the rest; dcca_train additionally drops fold-1 codes -> empty here
  CHECK(split.full_train.size() == 3);
  // every full_train record contains a fold-1 code, so the pairing is degenerate
  (void)split;
}

TEST_CASE("degenerate pairings are reported") {
  OntologyGraph g = build_tree({"AA", "AB", "BA", "BB"});
  const int aa = g.leaf_id("AA"), ab = g.leaf_id("AB"), ba = g.leaf_id("BA"), bb = g.leaf_id("BB");
  std::vector<std::vector<int>> folds{{aa, ab}, {ba, bb}};

  // no record contains a fold-0 code
  std::vector<AdmissionRecord> no_eval{rec({"BA"}, 0), rec({"BB"}, 1)};
  CHECK_THROWS_WITH_AS(build_unseen_experiment(no_eval, folds, 0, 1, g, 1), doctest::Contains("degenerate"),
                       std::runtime_error);

  // every remaining train record has a fold-1 code
  std::vector<AdmissionRecord> no_dcca{rec({"AA"}, 0), rec({"BA"}, 1)};
  CHECK_THROWS_WITH_AS(build_unseen_experiment(no_dcca, folds, 0, 1, g, 1), doctest::Contains("degenerate"),
                       std::runtime_error);

  CHECK_THROWS_AS(build_unseen_experiment(no_eval, folds, 0, 0, g, 1), std::invalid_argument);
}

TEST_CASE("split invariants hold on generated data") {
  OntologyGraph g = add_jump_connections(build_tree(generate_codes({4, 3, 2}, 77)));
  GeneratorSpec spec;
  spec.num_classes = 4;
  spec.vocab = 100;
  spec.tokens_min = 5;
  spec.tokens_max = 10;
  spec.code_noise = 0.3;
  spec.seed = 21;
  auto data = gen_admissions(g, spec, 400);

  std::set<int> used;
  for (const auto& r : data) {
    for (const auto& c : r.codes) used.insert(g.leaf_id(c));
  }
  auto folds = kfold_code_split({used.begin(), used.end()}, 4, 3);
  auto split = build_unseen_experiment(data, folds, 1, 2, g, 9);

  // fold-2 codes never appear in dcca_train (exact scan)
  std::set<int> fold2(folds[2].begin(), folds[2].end());
  for (const auto& r : split.dcca_train) {
    for (const auto& c : r.codes) CHECK(fold2.count(g.leaf_id(c)) == 0);
  }
  // seen set = exactly the leaves of dcca_train
  std::set<int> expect_seen;
  for (const auto& r : split.dcca_train) {
    for (const auto& c : r.codes) expect_seen.insert(g.leaf_id(c));
  }
  CHECK(split.seen.seen_leaves == expect_seen);

  // eval set partition: valid and test disjoint, union = all records with a fold-1 code
  std::set<int> fold1(folds[1].begin(), folds[1].end());
  size_t expect_eval = 0;
  for (const auto& r : data) {
    bool hit = false;
    for (const auto& c : r.codes) hit |= fold1.count(g.leaf_id(c)) > 0;
    expect_eval += hit;
  }
  CHECK(split.valid.size() + split.test.size() == expect_eval);
  CHECK(split.full_train.size() + expect_eval == data.size());
  // every test record keeps at least one fold-1 code
  for (const auto& r : split.test) {
    bool hit = false;
    for (const auto& c : r.codes) hit |= fold1.count(g.leaf_id(c)) > 0;
    CHECK(hit);
  }
  // dcca_train is a subset of full_train
  CHECK(split.dcca_train.size() <= split.full_train.size());
}
