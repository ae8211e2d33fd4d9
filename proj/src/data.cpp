#include "mvl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace mvl {

namespace {

using nlohmann::json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Marsaglia-Tsang, boosted for shape < 1; deterministic per stream.
double gamma_draw(Rng& rng, double alpha) {
  if (alpha < 1.0) {
    const double u = 1.0 - rng.uniform();
    return gamma_draw(rng, alpha + 1.0) * std::pow(u, 1.0 / alpha);
  }
  const double d = alpha - 1.0 / 3.0;
  const double c = 1.0 / (3.0 * std::sqrt(d));
  for (;;) {
    const double x = rng.normal();
    const double v = 1.0 + c * x;
    if (v <= 0.0) continue;
    const double v3 = v * v * v;
    const double u = 1.0 - rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v3;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v3 + std::log(v3))) return d * v3;
  }
}

void validate_spec(const GeneratorSpec& spec) {
  if (spec.num_classes < 1) throw std::invalid_argument("generator: num_classes must be >= 1");
  if (spec.code_noise < 0.0 || spec.code_noise > 1.0 || spec.token_noise < 0.0 || spec.token_noise > 1.0) {
    throw std::invalid_argument("generator: noise rates must lie in [0, 1]");
  }
  if (spec.codes_min < 1 || spec.codes_max < spec.codes_min) {
    throw std::invalid_argument("generator: bad codes-per-admission range");
  }
  if (spec.tokens_min < 0 || spec.tokens_max < spec.tokens_min) {
    throw std::invalid_argument("generator: bad tokens-per-admission range");
  }
  if (spec.vocab < spec.num_classes) throw std::invalid_argument("generator: vocab smaller than class count");
  if (spec.topic_concentration <= 0.0) throw std::invalid_argument("generator: concentration must be positive");
  if (!spec.class_logit.empty() && static_cast<int>(spec.class_logit.size()) != spec.num_classes) {
    throw std::invalid_argument("generator: class_logits length does not match num_classes");
  }
  if (!spec.hot_prefixes.empty() && static_cast<int>(spec.hot_prefixes.size()) != spec.num_classes) {
    throw std::invalid_argument("generator: hot_prefixes class count mismatch");
  }
}

}  // namespace

std::vector<std::vector<int>> resolve_hot_leaves(const OntologyGraph& g, const GeneratorSpec& spec) {
  validate_spec(spec);
  std::vector<std::vector<int>> hot(spec.num_classes);
  if (!spec.hot_prefixes.empty()) {
    for (int z = 0; z < spec.num_classes; ++z) {
      std::set<int> ids;
      for (const std::string& prefix : spec.hot_prefixes[z]) {
        for (int id : g.leaves_under_prefix(prefix)) ids.insert(id);
      }
      if (ids.empty()) {
        throw std::invalid_argument("generator: class " + std::to_string(z) + " has no hot leaves");
      }
      hot[z].assign(ids.begin(), ids.end());
    }
    return hot;
  }

  // Auto-assignment: round-robin the top-level subtrees across classes.
  std::set<std::string> tops;
  for (const auto& [code, id] : g.leaf_index()) tops.insert(code.substr(0, 1));
  std::vector<std::string> top_list(tops.begin(), tops.end());
  if (static_cast<int>(top_list.size()) < spec.num_classes) {
    throw std::invalid_argument("generator: fewer top-level subtrees than classes; give hot_prefixes");
  }
  for (size_t i = 0; i < top_list.size(); ++i) {
    const int z = static_cast<int>(i) % spec.num_classes;
    for (int id : g.leaves_under_prefix(top_list[i])) hot[z].push_back(id);
  }
  for (auto& ids : hot) std::sort(ids.begin(), ids.end());
  return hot;
}

std::vector<AdmissionRecord> gen_admissions(const OntologyGraph& g, const GeneratorSpec& spec,
                                            int n_records) {
  if (n_records < 1) throw std::invalid_argument("gen_admissions: n_records must be >= 1");
  validate_spec(spec);
  const auto hot = resolve_hot_leaves(g, spec);
  const auto leaves = g.leaf_ids();

  std::vector<double> logits = spec.class_logit;
  if (logits.empty()) {
    logits.resize(spec.num_classes);
    for (int z = 0; z < spec.num_classes; ++z) logits[z] = (z % 2 == 0) ? 2.0 : -2.0;
  }

  // Class topics: a Dirichlet draw over each class's disjoint vocab slice.
  Rng topic_rng = Rng(spec.seed, 1);
  std::vector<std::vector<double>> topic_cum(spec.num_classes);
  std::vector<int> slice_begin(spec.num_classes), slice_size(spec.num_classes);
  for (int z = 0; z < spec.num_classes; ++z) {
    slice_begin[z] = static_cast<int>(static_cast<long>(spec.vocab) * z / spec.num_classes);
    const int end = static_cast<int>(static_cast<long>(spec.vocab) * (z + 1) / spec.num_classes);
    slice_size[z] = end - slice_begin[z];
    std::vector<double>& cum = topic_cum[z];
    cum.resize(slice_size[z]);
    double total = 0.0;
    for (int i = 0; i < slice_size[z]; ++i) {
      cum[i] = gamma_draw(topic_rng, spec.topic_concentration);
      total += cum[i];
    }
    double run = 0.0;
    for (int i = 0; i < slice_size[z]; ++i) {
      run += cum[i] / total;
      cum[i] = run;
    }
    cum.back() = 1.0;
  }

  auto sample_topic_token = [&](int z, double u) {
    const auto& cum = topic_cum[z];
    const auto it = std::lower_bound(cum.begin(), cum.end(), u);
    const int offset = static_cast<int>(it - cum.begin());
    return slice_begin[z] + std::min(offset, slice_size[z] - 1);
  };

  Rng base(spec.seed, 0);
  std::vector<AdmissionRecord> records(n_records);
  for (int i = 0; i < n_records; ++i) {
    Rng rng = base.split(static_cast<uint64_t>(i));
    AdmissionRecord& rec = records[i];

    const int z = static_cast<int>(rng.below(static_cast<uint64_t>(spec.num_classes)));
    const int want = spec.codes_min + static_cast<int>(rng.below(spec.codes_max - spec.codes_min + 1));
    std::set<std::string> code_set;
    for (int attempt = 0; static_cast<int>(code_set.size()) < want && attempt < 50 * want; ++attempt) {
      int leaf;
      if (!rng.bernoulli(spec.code_noise)) {
        leaf = hot[z][rng.below(hot[z].size())];
      } else {
        leaf = leaves[rng.below(leaves.size())];
      }
      code_set.insert(g.node(leaf).code);
    }
    rec.codes.assign(code_set.begin(), code_set.end());

    const int n_tokens = spec.tokens_min + static_cast<int>(rng.below(spec.tokens_max - spec.tokens_min + 1));
    rec.tokens.reserve(n_tokens);
    for (int t = 0; t < n_tokens; ++t) {
      if (!rng.bernoulli(spec.token_noise)) {
        rec.tokens.push_back(sample_topic_token(z, rng.uniform()));
      } else {
        rec.tokens.push_back(static_cast<int>(rng.below(spec.vocab)));
      }
    }

    rec.label = rng.bernoulli(sigmoid(logits[z])) ? 1 : 0;
  }
  return records;
}

void save_dataset(const std::vector<AdmissionRecord>& records, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  for (const AdmissionRecord& rec : records) {
    json j;
    j["codes"] = rec.codes;
    j["label"] = rec.label;
    j["tokens"] = rec.tokens;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("failed writing dataset file: " + path);
}

std::vector<AdmissionRecord> load_dataset(const std::string& path, const OntologyGraph* validate) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  std::vector<AdmissionRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    AdmissionRecord rec;
    try {
      rec.codes = j.at("codes").get<std::vector<std::string>>();
      rec.tokens = j.at("tokens").get<std::vector<int>>();
      rec.label = j.at("label").get<int>();
    } catch (const json::exception& e) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": " + e.what());
    }
    if (rec.codes.empty()) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": empty code set");
    }
    if (rec.label != 0 && rec.label != 1) {
      throw std::runtime_error("dataset line " + std::to_string(line_no) + ": label must be 0 or 1");
    }
    if (validate) {
      for (const std::string& code : rec.codes) {
        if (validate->leaf_index().find(code) == validate->leaf_index().end()) {
          throw std::runtime_error("dataset line " + std::to_string(line_no) + ": unknown code " + code);
        }
      }
    }
    records.push_back(std::move(rec));
  }
  return records;
}

namespace {

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

GeneratorSpec load_generator_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open generator spec: " + path);
  GeneratorSpec spec;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("generator spec line " + std::to_string(line_no) + ": expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    try {
      if (key == "classes") {
        spec.num_classes = std::stoi(value);
      } else if (key == "codes_min") {
        spec.codes_min = std::stoi(value);
      } else if (key == "codes_max") {
        spec.codes_max = std::stoi(value);
      } else if (key == "code_noise") {
        spec.code_noise = std::stod(value);
      } else if (key == "tokens_min") {
        spec.tokens_min = std::stoi(value);
      } else if (key == "tokens_max") {
        spec.tokens_max = std::stoi(value);
      } else if (key == "vocab") {
        spec.vocab = std::stoi(value);
      } else if (key == "topic_concentration") {
        spec.topic_concentration = std::stod(value);
      } else if (key == "token_noise") {
        spec.token_noise = std::stod(value);
      } else if (key == "seed") {
        spec.seed = std::stoull(value);
      } else if (key == "class_logits") {
        spec.class_logit.clear();
        for (const std::string& part : split_on(value, ',')) spec.class_logit.push_back(std::stod(part));
      } else if (key == "hot_prefixes") {
        spec.hot_prefixes.clear();
        for (const std::string& cls : split_on(value, ';')) spec.hot_prefixes.push_back(split_on(cls, ','));
      } else {
        throw std::runtime_error("unknown key '" + key + "'");
      }
    } catch (const std::runtime_error&) {
      throw;
    } catch (const std::exception& e) {
      throw std::runtime_error("generator spec line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return spec;
}

void save_generator_spec(const GeneratorSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write generator spec: " + path);
  out << "classes=" << spec.num_classes << "\n";
  out << "codes_min=" << spec.codes_min << "\n";
  out << "codes_max=" << spec.codes_max << "\n";
  out << "code_noise=" << spec.code_noise << "\n";
  out << "tokens_min=" << spec.tokens_min << "\n";
  out << "tokens_max=" << spec.tokens_max << "\n";
  out << "vocab=" << spec.vocab << "\n";
  out << "topic_concentration=" << spec.topic_concentration << "\n";
  out << "token_noise=" << spec.token_noise << "\n";
  out << "seed=" << spec.seed << "\n";
  if (!spec.class_logit.empty()) {
    out << "class_logits=";
    for (size_t i = 0; i < spec.class_logit.size(); ++i) {
      if (i) out << ",";
      out << spec.class_logit[i];
    }
    out << "\n";
  }
  if (!spec.hot_prefixes.empty()) {
    out << "hot_prefixes=";
    for (size_t z = 0; z < spec.hot_prefixes.size(); ++z) {
      if (z) out << ";";
      for (size_t i = 0; i < spec.hot_prefixes[z].size(); ++i) {
        if (i) out << ",";
        out << spec.hot_prefixes[z][i];
      }
    }
    out << "\n";
  }
}

}  // namespace mvl
