#pragma once

#include <string>
#include <vector>

#include "mvl/ontology.hpp"
#include "mvl/rng.hpp"

namespace mvl {

// One admission: a set of leaf codes, a token sequence, a binary label.
struct AdmissionRecord {
  std::vector<std::string> codes;  // sorted, unique, non-empty
  std::vector<int> tokens;
  int label = 0;
};

// Latent-class mixture with controllable cross-view signal. Each class owns
// hot subtrees (code prefixes) and a disjoint slice of the vocabulary; the
// noise rates replace class-conditional draws with uniform ones.
struct GeneratorSpec {
  int num_classes = 4;
  std::vector<std::vector<std::string>> hot_prefixes;  // per class; empty = auto-assign
  int codes_min = 3;
  int codes_max = 8;
  double code_noise = 0.0;   // rho_c in [0, 1)
  int tokens_min = 60;
  int tokens_max = 200;
  int vocab = 2000;
  double topic_concentration = 0.5;  // symmetric Dirichlet over the class slice
  double token_noise = 0.0;  // rho_t in [0, 1)
  std::vector<double> class_logit;   // beta_z; empty = alternating +2 / -2
  uint64_t seed = 0;
};

// Key = value lines; unknown keys are rejected. hot_prefixes uses
// ';' between classes and ',' within a class.
GeneratorSpec load_generator_spec(const std::string& path);
void save_generator_spec(const GeneratorSpec& spec, const std::string& path);

// Record i is derived from stream split(seed, i): identical (seed, spec)
// gives a byte-identical dataset no matter how generation is scheduled.
std::vector<AdmissionRecord> gen_admissions(const OntologyGraph& g, const GeneratorSpec& spec,
                                            int n_records);

// Line-delimited JSON objects {"codes": [...], "label": 0/1, "tokens": [...]}.
// Parse errors name the line; unknown codes (when a graph is given) name the
// code. An empty file is an empty dataset.
void save_dataset(const std::vector<AdmissionRecord>& records, const std::string& path);
std::vector<AdmissionRecord> load_dataset(const std::string& path, const OntologyGraph* validate = nullptr);

// Resolved per-class hot leaf sets (auto-assignment applied), used by the
// generator and handy for Bayes-oracle checks in tests.
std::vector<std::vector<int>> resolve_hot_leaves(const OntologyGraph& g, const GeneratorSpec& spec);

}  // namespace mvl
