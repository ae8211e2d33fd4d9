#pragma once

#include <map>
#include <string>
#include <vector>

namespace mvl {

struct CodeNode {
  int id = -1;
  std::string code;  // full code for leaves, empty for synthetic internal nodes
  int level = 0;     // root = 1
  bool is_leaf = false;
  int parent = -1;   // -1 for the root
};

struct TypedEdge {
  int src = -1;
  int dst = -1;
  int relation = 0;  // tree: level of the parent endpoint; jump: depth + predecessor level
};

// Relation-typed hierarchy over fixed-width code strings. Tree edges between
// level k and k+1 carry relation k; jump edges from a leaf to its level-l
// predecessor carry relation depth+l, so relation ids span [1, 2*depth].
// Immutable once built; message passing treats each edge as bidirectional
// within its relation.
class OntologyGraph {
 public:
  int depth() const { return depth_; }
  int relation_count() const { return 2 * depth_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  bool has_jumps() const { return has_jumps_; }

  const std::vector<CodeNode>& nodes() const { return nodes_; }
  const CodeNode& node(int id) const { return nodes_.at(id); }
  const std::vector<TypedEdge>& edges() const { return edges_; }
  const std::map<std::string, int>& leaf_index() const { return leaf_index_; }

  std::vector<int> leaf_ids() const;
  int leaf_id(const std::string& code) const;  // throws on unknown code

  // Leaves whose code starts with the given prefix, ascending by id.
  std::vector<int> leaves_under_prefix(const std::string& prefix) const;

  // N_u^r with edges symmetrized, ascending node ids. Throws on invalid
  // node id or relation outside [1, 2*depth].
  const std::vector<int>& neighbors_by_relation(int u, int relation) const;

  friend OntologyGraph build_tree(const std::vector<std::string>& codes);
  friend OntologyGraph add_jump_connections(const OntologyGraph& g);

 private:
  void rebuild_adjacency();

  std::vector<CodeNode> nodes_;
  std::vector<TypedEdge> edges_;
  int depth_ = 0;
  bool has_jumps_ = false;
  std::map<std::string, int> leaf_index_;
  std::vector<std::vector<std::vector<int>>> adj_;  // [node][relation-1]
};

// Prefix-closure tree over the code list. Node ids are assigned breadth-first
// with each level's prefixes sorted, so identical input gives identical ids.
// Rejects empty input, duplicate codes and codes of differing length, naming
// the offending code.
OntologyGraph build_tree(const std::vector<std::string>& codes);

// One extra edge from every leaf to each of its predecessors, typed
// depth + predecessor level. Calling on a graph that already has jumps
// throws.
OntologyGraph add_jump_connections(const OntologyGraph& g);

// Random fixed-width code list: every node at level k gets branching[k]
// children drawn as distinct symbols. Deterministic per seed.
std::vector<std::string> generate_codes(const std::vector<int>& branching, uint64_t seed);

// One leaf code per line; '#' lines and blank lines are ignored.
std::vector<std::string> load_code_file(const std::string& path);
void save_code_file(const std::string& path, const std::vector<std::string>& codes,
                    const std::string& header_comment = "");

}  // namespace mvl
