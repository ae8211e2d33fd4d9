#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "mvl/data.hpp"

namespace mvl {

// Every tunable of the pipeline as a flat key=value set. Defaults follow the
// reference configuration; any key can be overridden by file or CLI flag.
struct ExperimentConfig {
  // model
  int hidden = 32;          // all hidden dimensions
  int rgcn_layers = 3;      // T
  int block_size = 30;      // b
  int mlp_layers = 2;       // affine layers including the logit layer
  double mlp_dropout = 0.2;
  bool bidirectional = true;

  // dcca phase
  double dcca_lr = 1e-3;
  int dcca_batch = 1024;    // 400 in the small-batch configuration
  int dcca_epochs = 100;
  int dcca_patience = 10;
  int corr_dims = 20;       // L
  double r_code = 1e-4;
  double r_text = 1e-4;
  bool center = true;       // column centering inside the objective

  // task fine-tune phase
  double task_lr = 1e-3;
  int task_batch = 256;     // 32 in the small-batch configuration
  int task_epochs = 100;
  int task_patience = 10;

  // experiment control
  uint64_t seed = 0;
  int num_seeds = 5;
  int folds = 5;                     // k in unseen mode
  bool label_internal_nodes = false; // alternative reading of the 1-0 labels
  bool record_walltime = false;      // off keeps CSV output byte-reproducible
  std::string task_name = "synthetic";
  std::string views = "code,text,both";  // which standard-mode pipelines run
  std::string ontology_path;
  std::string data_path;

  // generator settings (used when data_path is empty and for gen-data)
  GeneratorSpec gen;
  int gen_records = 8000;
};

// Unknown keys throw with the key name.
void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg);

// key=value lines, '#' comments. Keys may appear in any order.
ExperimentConfig load_config(const std::string& path);
void save_config(const ExperimentConfig& cfg, const std::string& path);

// Sorted key=value serialization; the FNV-1a hash of it stamps artifacts.
std::string canonical_config(const ExperimentConfig& cfg);
uint64_t config_hash(const ExperimentConfig& cfg);

}  // namespace mvl
