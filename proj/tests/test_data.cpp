#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "doctest.h"
#include "mvl/data.hpp"
#include "mvl/dcca.hpp"
#include "mvl/ontology.hpp"

using namespace mvl;

namespace {

OntologyGraph two_class_graph() {
  // Four top-level subtrees so auto-assignment gives each of two classes two.
  return add_jump_connections(build_tree(generate_codes({4, 3, 2}, 101)));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Which class generated this record, recovered from the views directly.
int class_from_codes(const OntologyGraph& g, const GeneratorSpec& spec,
                     const std::vector<std::vector<int>>& hot, const AdmissionRecord& rec) {
  std::vector<int> votes(spec.num_classes, 0);
  for (const std::string& code : rec.codes) {
    const int id = g.leaf_id(code);
    for (int z = 0; z < spec.num_classes; ++z) {
      if (std::binary_search(hot[z].begin(), hot[z].end(), id)) ++votes[z];
    }
  }
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

int class_from_tokens(const GeneratorSpec& spec, const AdmissionRecord& rec) {
  std::vector<int> votes(spec.num_classes, 0);
  for (int t : rec.tokens) {
    const int z = static_cast<int>(static_cast<long>(t) * spec.num_classes / spec.vocab);
    ++votes[std::min(z, spec.num_classes - 1)];
  }
  return static_cast<int>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

}  // namespace

TEST_CASE("noise-free views identify the class and hit the Bayes rate") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.code_noise = 0.0;
  spec.token_noise = 0.0;
  spec.vocab = 400;
  spec.tokens_min = 20;
  spec.tokens_max = 40;
  spec.class_logit = {2.0, -2.0};
  spec.seed = 7;

  const int n = 20000;
  auto records = gen_admissions(g, spec, n);
  auto hot = resolve_hot_leaves(g, spec);

  int code_correct = 0, token_correct = 0, bayes_correct = 0;
  for (const auto& rec : records) {
    const int zc = class_from_codes(g, spec, hot, rec);
    const int zt = class_from_tokens(spec, rec);
    CHECK(zc == zt);  // both views carry the class exactly
    // Bayes rule: predict 1 iff sigmoid(beta_z) > 0.5.
    const int pred = spec.class_logit[zc] > 0.0 ? 1 : 0;
    bayes_correct += (pred == rec.label);
    (void)code_correct;
    (void)token_correct;
  }
  const double bayes_acc = static_cast<double>(bayes_correct) / n;
  const double expect = sigmoid(2.0);  // 0.8808
  CHECK(std::fabs(bayes_acc - expect) < 0.01);
}

TEST_CASE("full noise erases the signal") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.code_noise = 1.0;
  spec.token_noise = 1.0;
  spec.vocab = 400;
  spec.tokens_min = 20;
  spec.tokens_max = 40;
  spec.class_logit = {2.0, -2.0};
  spec.seed = 8;

  const int n = 8000;
  auto records = gen_admissions(g, spec, n);
  auto hot = resolve_hot_leaves(g, spec);

  // The code-view Bayes rule from the clean regime is now a coin flip.
  int agree = 0;
  int positives = 0;
  for (const auto& rec : records) {
    const int zc = class_from_codes(g, spec, hot, rec);
    const int pred = spec.class_logit[zc] > 0.0 ? 1 : 0;
    agree += (pred == rec.label);
    positives += rec.label;
  }
  const double acc = static_cast<double>(agree) / n;
  CHECK(acc > 0.45);
  CHECK(acc < 0.55);
  CHECK(positives > 0);
  CHECK(positives < n);
}

TEST_CASE("identical seed and spec give a byte-identical dataset") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.vocab = 100;
  spec.tokens_min = 5;
  spec.tokens_max = 15;
  spec.seed = 9;

  auto a = gen_admissions(g, spec, 200);
  auto b = gen_admissions(g, spec, 200);
  save_dataset(a, "gen_a_tmp.jsonl");
  save_dataset(b, "gen_b_tmp.jsonl");
  std::ifstream fa("gen_a_tmp.jsonl"), fb("gen_b_tmp.jsonl");
  std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
  std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
  CHECK(sa == sb);
  CHECK(!sa.empty());
  std::remove("gen_a_tmp.jsonl");
  std::remove("gen_b_tmp.jsonl");
}

TEST_CASE("label base rate tracks the class logits") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.vocab = 100;
  spec.tokens_min = 5;
  spec.tokens_max = 10;
  spec.class_logit = {1.0, -0.5};
  spec.seed = 10;

  const int n = 10000;
  auto records = gen_admissions(g, spec, n);
  double rate = 0.0;
  for (const auto& rec : records) rate += rec.label;
  rate /= n;
  const double expect = 0.5 * (sigmoid(1.0) + sigmoid(-0.5));
  const double se = std::sqrt(expect * (1 - expect) / n);
  CHECK(std::fabs(rate - expect) <= 3.0 * se + 0.01);
}

TEST_CASE("dataset file round-trips exactly") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  spec.vocab = 150;
  spec.tokens_min = 3;
  spec.tokens_max = 30;
  spec.seed = 11;
  auto records = gen_admissions(g, spec, 1000);

  save_dataset(records, "roundtrip_tmp.jsonl");
  auto loaded = load_dataset("roundtrip_tmp.jsonl", &g);
  REQUIRE(loaded.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(loaded[i].codes == records[i].codes);
    CHECK(loaded[i].tokens == records[i].tokens);
    CHECK(loaded[i].label == records[i].label);
  }
  std::remove("roundtrip_tmp.jsonl");
}

TEST_CASE("dataset errors carry line numbers and code names") {
  {
    std::ofstream out("bad1_tmp.jsonl");
    out << R"({"codes":["AAA"],"label":0,"tokens":[1]})" << "\n";
    out << R"({"codes":["AAA"],"label":)" << "\n";  // truncated
  }
  CHECK_THROWS_WITH_AS(load_dataset("bad1_tmp.jsonl"), doctest::Contains("line 2"), std::runtime_error);
  std::remove("bad1_tmp.jsonl");

  {
    std::ofstream out("bad2_tmp.jsonl");
    out << R"({"codes":["ZZZ9"],"label":0,"tokens":[1]})" << "\n";
  }
  OntologyGraph g = build_tree({"AB", "BA"});
  CHECK_THROWS_WITH_AS(load_dataset("bad2_tmp.jsonl", &g), doctest::Contains("ZZZ9"), std::runtime_error);
  std::remove("bad2_tmp.jsonl");

  {
    std::ofstream out("empty_tmp.jsonl");
  }
  CHECK(load_dataset("empty_tmp.jsonl").empty());
  std::remove("empty_tmp.jsonl");
}

TEST_CASE("cross-view correlation degrades monotonically with noise") {
  OntologyGraph g = two_class_graph();
  const int n = 4000;
  std::vector<double> corr_at_noise;
  for (double rho : {0.0, 0.4, 0.8}) {
    GeneratorSpec spec;
    spec.num_classes = 4;
    spec.code_noise = rho;
    spec.token_noise = rho;
    spec.vocab = 400;
    spec.tokens_min = 20;
    spec.tokens_max = 40;
    spec.seed = 12;
    auto records = gen_admissions(g, spec, n);

    // Sufficient statistics per view: top-subtree counts and vocab-slice counts.
    std::set<char> tops;
    for (const auto& [code, id] : g.leaf_index()) tops.insert(code[0]);
    std::vector<char> top_list(tops.begin(), tops.end());
    Matrix x(n, static_cast<int>(top_list.size()));
    Matrix y(n, spec.num_classes);
    for (int i = 0; i < n; ++i) {
      for (const std::string& code : records[i].codes) {
        const int idx =
            static_cast<int>(std::find(top_list.begin(), top_list.end(), code[0]) - top_list.begin());
        x(i, idx) += 1.0;
      }
      for (int t : records[i].tokens) {
        const int z = std::min(static_cast<int>(static_cast<long>(t) * spec.num_classes / spec.vocab),
                               spec.num_classes - 1);
        y(i, z) += 1.0;
      }
    }
    auto corr = cca_oracle(x, y, 1e-4);
    double total = 0.0;
    for (double c : corr) total += c;
    corr_at_noise.push_back(total);
  }
  CHECK(corr_at_noise[0] > corr_at_noise[1]);
  CHECK(corr_at_noise[1] > corr_at_noise[2]);
}

TEST_CASE("generator spec file round-trips") {
  GeneratorSpec spec;
  spec.num_classes = 3;
  spec.code_noise = 0.25;
  spec.class_logit = {1.5, -1.5, 0.5};
  spec.hot_prefixes = {{"A", "B"}, {"C"}, {"D"}};
  spec.seed = 99;
  save_generator_spec(spec, "spec_tmp.txt");
  GeneratorSpec back = load_generator_spec("spec_tmp.txt");
  CHECK(back.num_classes == 3);
  CHECK(back.code_noise == doctest::Approx(0.25));
  CHECK(back.class_logit == spec.class_logit);
  CHECK(back.hot_prefixes == spec.hot_prefixes);
  CHECK(back.seed == 99);
  std::remove("spec_tmp.txt");

  {
    std::ofstream out("badspec_tmp.txt");
    out << "not_a_key=3\n";
  }
  CHECK_THROWS_AS(load_generator_spec("badspec_tmp.txt"), std::runtime_error);
  std::remove("badspec_tmp.txt");
}

TEST_CASE("generator validates its ranges") {
  OntologyGraph g = two_class_graph();
  GeneratorSpec spec;
  spec.num_classes = 2;
  CHECK_THROWS_AS(gen_admissions(g, spec, 0), std::invalid_argument);
  spec.code_noise = 1.5;
  CHECK_THROWS_AS(gen_admissions(g, spec, 10), std::invalid_argument);
  spec.code_noise = 0.0;
  spec.num_classes = 99;  // more classes than top-level subtrees
  CHECK_THROWS_AS(gen_admissions(g, spec, 10), std::invalid_argument);
}
