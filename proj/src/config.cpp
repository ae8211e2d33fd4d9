#include "mvl/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mvl {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::string join_logits(const std::vector<double>& xs) {
  std::string out;
  for (size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ",";
    out += fmt_double(xs[i]);
  }
  return out;
}

std::string join_prefixes(const std::vector<std::vector<std::string>>& groups) {
  std::string out;
  for (size_t z = 0; z < groups.size(); ++z) {
    if (z) out += ";";
    for (size_t i = 0; i < groups[z].size(); ++i) {
      if (i) out += ",";
      out += groups[z][i];
    }
  }
  return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  return parts;
}

}  // namespace

void apply_config_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  try {
    if (key == "hidden") cfg.hidden = std::stoi(value);
    else if (key == "rgcn_layers") cfg.rgcn_layers = std::stoi(value);
    else if (key == "block_size") cfg.block_size = std::stoi(value);
    else if (key == "mlp_layers") cfg.mlp_layers = std::stoi(value);
    else if (key == "mlp_dropout") cfg.mlp_dropout = std::stod(value);
    else if (key == "bidirectional") cfg.bidirectional = parse_bool(value);
    else if (key == "dcca_lr") cfg.dcca_lr = std::stod(value);
    else if (key == "dcca_batch") cfg.dcca_batch = std::stoi(value);
    else if (key == "dcca_epochs") cfg.dcca_epochs = std::stoi(value);
    else if (key == "dcca_patience") cfg.dcca_patience = std::stoi(value);
    else if (key == "corr_dims") cfg.corr_dims = std::stoi(value);
    else if (key == "r_code") cfg.r_code = std::stod(value);
    else if (key == "r_text") cfg.r_text = std::stod(value);
    else if (key == "center") cfg.center = parse_bool(value);
    else if (key == "task_lr") cfg.task_lr = std::stod(value);
    else if (key == "task_batch") cfg.task_batch = std::stoi(value);
    else if (key == "task_epochs") cfg.task_epochs = std::stoi(value);
    else if (key == "task_patience") cfg.task_patience = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "num_seeds") cfg.num_seeds = std::stoi(value);
    else if (key == "folds") cfg.folds = std::stoi(value);
    else if (key == "label_internal_nodes") cfg.label_internal_nodes = parse_bool(value);
    else if (key == "record_walltime") cfg.record_walltime = parse_bool(value);
    else if (key == "task_name") cfg.task_name = value;
    else if (key == "views") cfg.views = value;
    else if (key == "ontology_path") cfg.ontology_path = value;
    else if (key == "data_path") cfg.data_path = value;
    else if (key == "gen_records") cfg.gen_records = std::stoi(value);
    else if (key == "gen_classes") cfg.gen.num_classes = std::stoi(value);
    else if (key == "gen_codes_min") cfg.gen.codes_min = std::stoi(value);
    else if (key == "gen_codes_max") cfg.gen.codes_max = std::stoi(value);
    else if (key == "gen_code_noise") cfg.gen.code_noise = std::stod(value);
    else if (key == "gen_tokens_min") cfg.gen.tokens_min = std::stoi(value);
    else if (key == "gen_tokens_max") cfg.gen.tokens_max = std::stoi(value);
    else if (key == "gen_vocab") cfg.gen.vocab = std::stoi(value);
    else if (key == "gen_topic_concentration") cfg.gen.topic_concentration = std::stod(value);
    else if (key == "gen_token_noise") cfg.gen.token_noise = std::stod(value);
    else if (key == "gen_seed") cfg.gen.seed = std::stoull(value);
    else if (key == "gen_class_logits") {
      cfg.gen.class_logit.clear();
      if (!value.empty()) {
        for (const std::string& part : split_on(value, ',')) cfg.gen.class_logit.push_back(std::stod(part));
      }
    } else if (key == "gen_hot_prefixes") {
      cfg.gen.hot_prefixes.clear();
      if (!value.empty()) {
        for (const std::string& cls : split_on(value, ';')) cfg.gen.hot_prefixes.push_back(split_on(cls, ','));
      }
    } else {
      throw std::invalid_argument("unknown config key '" + key + "'");
    }
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for config key '" + key + "': '" + value + "'");
  }
}

std::map<std::string, std::string> config_to_map(const ExperimentConfig& cfg) {
  std::map<std::string, std::string> m;
  m["hidden"] = std::to_string(cfg.hidden);
  m["rgcn_layers"] = std::to_string(cfg.rgcn_layers);
  m["block_size"] = std::to_string(cfg.block_size);
  m["mlp_layers"] = std::to_string(cfg.mlp_layers);
  m["mlp_dropout"] = fmt_double(cfg.mlp_dropout);
  m["bidirectional"] = cfg.bidirectional ? "1" : "0";
  m["dcca_lr"] = fmt_double(cfg.dcca_lr);
  m["dcca_batch"] = std::to_string(cfg.dcca_batch);
  m["dcca_epochs"] = std::to_string(cfg.dcca_epochs);
  m["dcca_patience"] = std::to_string(cfg.dcca_patience);
  m["corr_dims"] = std::to_string(cfg.corr_dims);
  m["r_code"] = fmt_double(cfg.r_code);
  m["r_text"] = fmt_double(cfg.r_text);
  m["center"] = cfg.center ? "1" : "0";
  m["task_lr"] = fmt_double(cfg.task_lr);
  m["task_batch"] = std::to_string(cfg.task_batch);
  m["task_epochs"] = std::to_string(cfg.task_epochs);
  m["task_patience"] = std::to_string(cfg.task_patience);
  m["seed"] = std::to_string(cfg.seed);
  m["num_seeds"] = std::to_string(cfg.num_seeds);
  m["folds"] = std::to_string(cfg.folds);
  m["label_internal_nodes"] = cfg.label_internal_nodes ? "1" : "0";
  m["record_walltime"] = cfg.record_walltime ? "1" : "0";
  m["task_name"] = cfg.task_name;
  m["views"] = cfg.views;
  m["ontology_path"] = cfg.ontology_path;
  m["data_path"] = cfg.data_path;
  m["gen_records"] = std::to_string(cfg.gen_records);
  m["gen_classes"] = std::to_string(cfg.gen.num_classes);
  m["gen_codes_min"] = std::to_string(cfg.gen.codes_min);
  m["gen_codes_max"] = std::to_string(cfg.gen.codes_max);
  m["gen_code_noise"] = fmt_double(cfg.gen.code_noise);
  m["gen_tokens_min"] = std::to_string(cfg.gen.tokens_min);
  m["gen_tokens_max"] = std::to_string(cfg.gen.tokens_max);
  m["gen_vocab"] = std::to_string(cfg.gen.vocab);
  m["gen_topic_concentration"] = fmt_double(cfg.gen.topic_concentration);
  m["gen_token_noise"] = fmt_double(cfg.gen.token_noise);
  m["gen_seed"] = std::to_string(cfg.gen.seed);
  m["gen_class_logits"] = join_logits(cfg.gen.class_logit);
  m["gen_hot_prefixes"] = join_prefixes(cfg.gen.hot_prefixes);
  return m;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  ExperimentConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": expected key=value");
    }
    try {
      apply_config_key(cfg, line.substr(0, eq), line.substr(eq + 1));
    } catch (const std::exception& e) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

void save_config(const ExperimentConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path);
  out << canonical_config(cfg);
}

std::string canonical_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  for (const auto& [key, value] : config_to_map(cfg)) os << key << "=" << value << "\n";
  return os.str();
}

uint64_t config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical_config(cfg);
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mvl
