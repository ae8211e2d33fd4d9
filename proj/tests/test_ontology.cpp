#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>

#include "doctest.h"
#include "mvl/ontology.hpp"

using mvl::add_jump_connections;
using mvl::build_tree;
using mvl::OntologyGraph;

namespace {

// Plain BFS over the symmetrized edge list, ignoring relations.
int bfs_distance(const OntologyGraph& g, int from, int to) {
  std::vector<std::vector<int>> adj(g.node_count());
  for (const auto& e : g.edges()) {
    adj[e.src].push_back(e.dst);
    adj[e.dst].push_back(e.src);
  }
  std::vector<int> dist(g.node_count(), -1);
  std::queue<int> q;
  dist[from] = 0;
  q.push(from);
  while (!q.empty()) {
    int u = q.front();
    q.pop();
    if (u == to) return dist[u];
    for (int v : adj[u]) {
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
    }
  }
  return -1;
}

}  // namespace

TEST_CASE("prefix closure of {AA, AB, BA}") {
  OntologyGraph g = build_tree({"AA", "AB", "BA"});
  CHECK(g.node_count() == 6);  // root, A, B, AA, AB, BA
  CHECK(g.edges().size() == 5);
  std::multiset<int> rel;
  for (const auto& e : g.edges()) rel.insert(e.relation);
  CHECK(rel == std::multiset<int>{1, 1, 2, 2, 2});
  CHECK(g.depth() == 2);
  CHECK(g.relation_count() == 4);
  CHECK(g.leaf_index().size() == 3);
}

TEST_CASE("seven-character codes give eight levels") {
  OntologyGraph g = build_tree({"AAAAAAA", "AAAAAAB", "BAAAAAA"});
  int max_level = 0;
  for (const auto& n : g.nodes()) max_level = std::max(max_level, n.level);
  CHECK(max_level == 8);
  CHECK(g.depth() == 7);
}

TEST_CASE("single one-character code") {
  OntologyGraph g = build_tree({"X"});
  CHECK(g.node_count() == 2);
  CHECK(g.edges().size() == 1);
  CHECK(g.edges()[0].relation == 1);
}

TEST_CASE("build_tree input validation names the offender") {
  CHECK_THROWS_AS(build_tree({}), std::invalid_argument);
  CHECK_THROWS_WITH_AS(build_tree({"AA", "AA"}), doctest::Contains("AA"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(build_tree({"AA", "ABC"}), doctest::Contains("ABC"), std::invalid_argument);
}

TEST_CASE("node levels and parents are consistent") {
  OntologyGraph g = build_tree({"AA", "AB", "BA"});
  for (const auto& n : g.nodes()) {
    if (n.parent < 0) {
      CHECK(n.level == 1);
    } else {
      CHECK(n.level == g.node(n.parent).level + 1);
    }
    CHECK(n.is_leaf == !n.code.empty());
  }
}

TEST_CASE("jump relations at depth 7 match the level formula") {
  OntologyGraph g = add_jump_connections(build_tree({"AAAAAAA", "AAAAAAB", "BAAAAAA"}));
  const int leaf = g.leaf_id("AAAAAAA");
  // walk predecessors: direct parent is level 7, root is level 1
  std::map<int, int> jump_relation_by_level;
  for (const auto& e : g.edges()) {
    if (e.src == leaf && e.relation > g.depth()) {
      jump_relation_by_level[g.node(e.dst).level] = e.relation;
    }
  }
  CHECK(jump_relation_by_level.size() == 7);
  CHECK(jump_relation_by_level[1] == 8);   // root jump
  CHECK(jump_relation_by_level[3] == 10);  // third-level predecessor
  CHECK(jump_relation_by_level[7] == 14);  // direct parent duplicate edge
}

TEST_CASE("depth-2 leaves gain exactly the two jump edges") {
  OntologyGraph g = add_jump_connections(build_tree({"AA", "AB", "BA", "BB", "CA", "CB", "CC"}));
  for (int leaf : g.leaf_ids()) {
    std::multiset<int> rels;
    for (const auto& e : g.edges()) {
      if (e.src == leaf && e.relation > g.depth()) rels.insert(e.relation);
    }
    CHECK(rels == std::multiset<int>{3, 4});
  }
}

TEST_CASE("any two leaves are at distance two after jumps") {
  OntologyGraph g = add_jump_connections(build_tree({"AAA", "ABB", "BAA", "CCC"}));
  auto leaves = g.leaf_ids();
  for (size_t i = 0; i < leaves.size(); ++i) {
    for (size_t j = i + 1; j < leaves.size(); ++j) {
      CHECK(bfs_distance(g, leaves[i], leaves[j]) == 2);
    }
  }
}

TEST_CASE("double jump insertion is rejected") {
  OntologyGraph g = add_jump_connections(build_tree({"AA", "BB"}));
  CHECK_THROWS_WITH_AS(add_jump_connections(g), doctest::Contains("already present"), std::invalid_argument);
}

TEST_CASE("neighbors by relation") {
  OntologyGraph g = add_jump_connections(build_tree({"AA", "AB", "BA"}));
  const int d = g.depth();

  // root (id 0) under relation 1: all level-2 nodes
  auto lvl2 = g.neighbors_by_relation(0, 1);
  CHECK(lvl2.size() == 2);
  for (int v : lvl2) CHECK(g.node(v).level == 2);

  // root under relation d+1: every leaf
  auto leaf_nbrs = g.neighbors_by_relation(0, d + 1);
  CHECK(leaf_nbrs == g.leaf_ids());

  // a leaf under relation d+l: its single level-l predecessor
  const int leaf = g.leaf_id("AB");
  for (int l = 1; l <= d; ++l) {
    auto preds = g.neighbors_by_relation(leaf, d + l);
    REQUIRE(preds.size() == 1);
    CHECK(g.node(preds[0]).level == l);
  }

  CHECK_THROWS_AS(g.neighbors_by_relation(-1, 1), std::invalid_argument);
  CHECK_THROWS_AS(g.neighbors_by_relation(0, 2 * d + 1), std::invalid_argument);

  // results are sorted ascending
  for (int u = 0; u < g.node_count(); ++u) {
    for (int r = 1; r <= g.relation_count(); ++r) {
      auto nb = g.neighbors_by_relation(u, r);
      CHECK(std::is_sorted(nb.begin(), nb.end()));
    }
  }
}

TEST_CASE("relation histogram matches level populations") {
  auto codes = mvl::generate_codes({3, 2, 4}, 99);
  OntologyGraph g = add_jump_connections(build_tree(codes));
  const int d = g.depth();

  std::map<int, int> edge_count;
  for (const auto& e : g.edges()) ++edge_count[e.relation];
  std::map<int, int> level_count;
  for (const auto& n : g.nodes()) ++level_count[n.level];
  const int n_leaves = static_cast<int>(g.leaf_index().size());

  for (int k = 1; k <= d; ++k) CHECK(edge_count[k] == level_count[k + 1]);
  for (int l = 1; l <= d; ++l) CHECK(edge_count[d + l] == n_leaves);
}

TEST_CASE("construction is deterministic") {
  auto codes = mvl::generate_codes({2, 3}, 7);
  OntologyGraph a = add_jump_connections(build_tree(codes));
  OntologyGraph b = add_jump_connections(build_tree(codes));
  REQUIRE(a.node_count() == b.node_count());
  REQUIRE(a.edges().size() == b.edges().size());
  for (int i = 0; i < a.node_count(); ++i) {
    CHECK(a.node(i).code == b.node(i).code);
    CHECK(a.node(i).level == b.node(i).level);
  }
  for (size_t i = 0; i < a.edges().size(); ++i) {
    CHECK(a.edges()[i].src == b.edges()[i].src);
    CHECK(a.edges()[i].dst == b.edges()[i].dst);
    CHECK(a.edges()[i].relation == b.edges()[i].relation);
  }
}

TEST_CASE("generate_codes honors branching counts") {
  auto codes = mvl::generate_codes({3, 2}, 5);
  CHECK(codes.size() == 6);
  for (const auto& c : codes) CHECK(c.size() == 2);
  CHECK(mvl::generate_codes({3, 2}, 5) == codes);   // same seed
  CHECK(mvl::generate_codes({3, 2}, 6) != codes);   // different seed
}

TEST_CASE("leaves_under_prefix selects the right subtree") {
  OntologyGraph g = build_tree({"AA", "AB", "BA"});
  auto under_a = g.leaves_under_prefix("A");
  CHECK(under_a.size() == 2);
  for (int id : under_a) CHECK(g.node(id).code[0] == 'A');
  CHECK(g.leaves_under_prefix("").size() == 3);
}

TEST_CASE("code file round trip with comments") {
  const std::string path = "test_codes_tmp.txt";
  std::vector<std::string> codes{"AA", "AB", "ZZ"};
  mvl::save_code_file(path, codes, "three codes");
  auto loaded = mvl::load_code_file(path);
  CHECK(loaded == codes);
  std::remove(path.c_str());
}
