#include "mvl/ontology.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include "mvl/rng.hpp"

namespace mvl {

std::vector<int> OntologyGraph::leaf_ids() const {
  std::vector<int> ids;
  ids.reserve(leaf_index_.size());
  for (const CodeNode& n : nodes_) {
    if (n.is_leaf) ids.push_back(n.id);
  }
  return ids;
}

int OntologyGraph::leaf_id(const std::string& code) const {
  auto it = leaf_index_.find(code);
  if (it == leaf_index_.end()) throw std::invalid_argument("unknown code: " + code);
  return it->second;
}

std::vector<int> OntologyGraph::leaves_under_prefix(const std::string& prefix) const {
  std::vector<int> ids;
  for (const auto& [code, id] : leaf_index_) {
    if (code.compare(0, prefix.size(), prefix) == 0) ids.push_back(id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

const std::vector<int>& OntologyGraph::neighbors_by_relation(int u, int relation) const {
  if (u < 0 || u >= node_count()) throw std::invalid_argument("neighbors_by_relation: invalid node id");
  if (relation < 1 || relation > relation_count()) {
    throw std::invalid_argument("neighbors_by_relation: relation outside [1, 2*depth]");
  }
  return adj_[u][relation - 1];
}

void OntologyGraph::rebuild_adjacency() {
  adj_.assign(nodes_.size(), std::vector<std::vector<int>>(relation_count()));
  for (const TypedEdge& e : edges_) {
    adj_[e.src][e.relation - 1].push_back(e.dst);
    adj_[e.dst][e.relation - 1].push_back(e.src);
  }
  for (auto& per_node : adj_) {
    for (auto& list : per_node) std::sort(list.begin(), list.end());
  }
}

OntologyGraph build_tree(const std::vector<std::string>& codes) {
  if (codes.empty()) throw std::invalid_argument("build_tree: empty code list");
  const size_t depth = codes.front().size();
  std::set<std::string> seen;
  for (const std::string& c : codes) {
    if (c.empty() || c.size() != depth) {
      throw std::invalid_argument("build_tree: inconsistent code length for \"" + c + "\"");
    }
    if (!seen.insert(c).second) throw std::invalid_argument("build_tree: duplicate code \"" + c + "\"");
  }

  // Prefix closure, level by level. seen is already the sorted leaf set.
  std::vector<std::set<std::string>> by_len(depth + 1);
  by_len[0].insert("");
  for (const std::string& c : codes) {
    for (size_t len = 1; len < depth; ++len) by_len[len].insert(c.substr(0, len));
  }
  by_len[depth] = std::move(seen);

  OntologyGraph g;
  g.depth_ = static_cast<int>(depth);
  std::map<std::string, int> id_of_prefix;
  for (size_t len = 0; len <= depth; ++len) {
    for (const std::string& prefix : by_len[len]) {
      CodeNode n;
      n.id = static_cast<int>(g.nodes_.size());
      n.level = static_cast<int>(len) + 1;
      n.is_leaf = (len == depth);
      if (n.is_leaf) {
        n.code = prefix;
        g.leaf_index_[prefix] = n.id;
      }
      if (len > 0) {
        n.parent = id_of_prefix.at(prefix.substr(0, len - 1));
        g.edges_.push_back({n.parent, n.id, static_cast<int>(len)});
      }
      id_of_prefix[prefix] = n.id;
      g.nodes_.push_back(std::move(n));
    }
  }
  g.rebuild_adjacency();
  return g;
}

OntologyGraph add_jump_connections(const OntologyGraph& g) {
  if (g.has_jumps_) throw std::invalid_argument("add_jump_connections: jumps already present");
  OntologyGraph out = g;
  const int d = out.depth_;
  for (const CodeNode& n : out.nodes_) {
    if (!n.is_leaf) continue;
    // Predecessors from the direct parent (level d) up to the root (level 1).
    int pred = n.parent;
    while (pred >= 0) {
      const int level = out.nodes_[pred].level;
      out.edges_.push_back({n.id, pred, d + level});
      pred = out.nodes_[pred].parent;
    }
  }
  out.has_jumps_ = true;
  out.rebuild_adjacency();
  return out;
}

std::vector<std::string> generate_codes(const std::vector<int>& branching, uint64_t seed) {
  if (branching.empty()) throw std::invalid_argument("generate_codes: branching list is empty");
  static const std::string alphabet =
      "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";
  for (int b : branching) {
    if (b < 1 || b > static_cast<int>(alphabet.size())) {
      throw std::invalid_argument("generate_codes: branching factor outside [1, 62]");
    }
  }

  Rng rng(seed, 7001);
  std::vector<std::string> frontier = {""};
  for (int b : branching) {
    std::vector<std::string> next;
    next.reserve(frontier.size() * b);
    for (const std::string& prefix : frontier) {
      // Partial Fisher-Yates: first b symbols become the children, sorted.
      std::string pool = alphabet;
      for (int i = 0; i < b; ++i) {
        const size_t j = i + static_cast<size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
      }
      std::string chosen = pool.substr(0, b);
      std::sort(chosen.begin(), chosen.end());
      for (char c : chosen) next.push_back(prefix + c);
    }
    frontier = std::move(next);
  }
  return frontier;
}

std::vector<std::string> load_code_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ontology file: " + path);
  std::vector<std::string> codes;
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    size_t start = line.find_first_not_of(" \t");
    if (start == std::string::npos) continue;
    if (line[start] == '#') continue;
    codes.push_back(line.substr(start));
  }
  return codes;
}

void save_code_file(const std::string& path, const std::vector<std::string>& codes,
                    const std::string& header_comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write ontology file: " + path);
  if (!header_comment.empty()) out << "# " << header_comment << "\n";
  for (const std::string& c : codes) out << c << "\n";
}

}  // namespace mvl
