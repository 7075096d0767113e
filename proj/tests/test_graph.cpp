#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "regd/errors.hpp"
#include "regd/graph.hpp"

using namespace regd;

namespace {

std::filesystem::path write_edges(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "regd_graph_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

Dag dag_from(const std::vector<std::pair<std::string, std::string>>& edges) {
  Dag dag;
  for (const auto& [p, c] : edges) {
    const int parent = dag.add_node(p);
    const int child = dag.add_node(c);
    dag.add_edge(parent, child);
  }
  verify_acyclic(dag);
  return dag;
}

template <typename Error, typename Fn>
std::string message_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  FAIL("expected exception");
  return {};
}

// O(n^3) reachability by repeated squaring of the adjacency matrix; the
// reference the Floyd-Warshall closure is checked against.
std::vector<std::vector<bool>> brute_reach(const Dag& dag) {
  const int n = dag.num_nodes();
  std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
  for (const auto& [u, v] : dag.edges) reach[u][v] = true;
  for (bool changed = true; changed;) {
    changed = false;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (reach[u][v])
          for (int w = 0; w < n; ++w)
            if (reach[v][w] && !reach[u][w]) {
              reach[u][w] = true;
              changed = true;
            }
  }
  return reach;
}

Dag random_dag(std::mt19937_64& rng, int max_nodes) {
  std::uniform_int_distribution<int> n_dist(2, max_nodes);
  const int n = n_dist(rng);
  Dag dag;
  for (int i = 0; i < n; ++i) dag.add_node("n" + std::to_string(i));
  // Edges only from a lower to a higher index, so the graph is acyclic by
  // construction.
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int u = 0; u < n; ++u)
    for (int v = u + 1; v < n; ++v)
      if (coin(rng) < 0.15) dag.add_edge(u, v);
  return dag;
}

}  // namespace

TEST_CASE("edge files accept comments and reject malformed rows") {
  SUBCASE("comments, blank lines, and CRLF endings") {
    const auto path = write_edges("ok.tsv", "# taxonomy\na\tb\r\n\nb\tc\n");
    const Dag dag = load_edges_tsv(path);
    CHECK(dag.num_nodes() == 3);
    REQUIRE(dag.edges.size() == 2);
    CHECK(dag.ids[dag.edges[0].first] == "a");
    CHECK(dag.ids[dag.edges[1].second] == "c");
  }
  SUBCASE("missing tab names the line") {
    const auto path = write_edges("bad.tsv", "a\tb\nnot an edge\n");
    const std::string msg = message_of<DataError>([&] { load_edges_tsv(path); });
    CHECK(msg.find(":2: expected 'parent<TAB>child'") != std::string::npos);
  }
  SUBCASE("extra tab is rejected") {
    const auto path = write_edges("wide.tsv", "a\tb\tc\n");
    CHECK_THROWS_AS(load_edges_tsv(path), DataError);
  }
  SUBCASE("self loop is a cycle") {
    const auto path = write_edges("self.tsv", "a\ta\n");
    CHECK_THROWS_AS(load_edges_tsv(path), CycleError);
  }
  SUBCASE("two-node cycle reports a witness") {
    const auto path = write_edges("cycle.tsv", "a\tb\nb\ta\n");
    try {
      load_edges_tsv(path);
      FAIL("expected CycleError");
    } catch (const CycleError& e) {
      CHECK(std::string(e.what()).find("cycle detected") != std::string::npos);
      CHECK_FALSE(e.cycle.empty());
    }
  }
}

TEST_CASE("closure and basic edges on hand graphs") {
  SUBCASE("chain gains the skip pair") {
    const Dag dag = dag_from({{"a", "b"}, {"b", "c"}});
    const EdgeList closure = transitive_closure(dag);
    REQUIRE(closure.size() == 3);
    CHECK(std::count(closure.begin(), closure.end(), std::pair{0, 2}) == 1);
    CHECK(basic_edges(dag).size() == 2);
  }
  SUBCASE("redundant edge is dropped from the basic set") {
    Dag dag = dag_from({{"a", "b"}, {"b", "c"}});
    dag.add_edge(0, 2);
    const EdgeList basic = basic_edges(dag);
    REQUIRE(basic.size() == 2);
    CHECK(std::count(basic.begin(), basic.end(), std::pair{0, 2}) == 0);
  }
  SUBCASE("tree edges are all basic") {
    const Dag dag = dag_from({{"r", "a"}, {"r", "b"}, {"a", "c"}});
    CHECK(basic_edges(dag) == dag.edges);
    CHECK(transitive_closure(dag).size() == 4);
  }
  SUBCASE("descendant sets are sorted and exclude the node") {
    const Dag dag = dag_from({{"r", "a"}, {"r", "b"}, {"a", "b"}});
    const auto desc = descendant_sets(dag);
    CHECK(desc[0] == std::vector<int>{1, 2});
    CHECK(desc[1] == std::vector<int>{2});
    CHECK(desc[2].empty());
  }
}

TEST_CASE("closure and minimality on random dags") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    const Dag dag = random_dag(rng, 25);
    const auto reach = brute_reach(dag);
    const int n = dag.num_nodes();

    EdgeList expected;
    for (int u = 0; u < n; ++u)
      for (int v = 0; v < n; ++v)
        if (reach[u][v]) expected.emplace_back(u, v);
    CHECK(transitive_closure(dag) == expected);

    // An edge is basic iff no intermediate node sits strictly between its
    // endpoints.
    const EdgeList basic = basic_edges(dag);
    std::set<std::pair<int, int>> basic_set(basic.begin(), basic.end());
    for (const auto& [u, v] : expected) {
      bool has_mid = false;
      for (int w = 0; w < n && !has_mid; ++w) {
        if (w != u && w != v && reach[u][w] && reach[w][v]) has_mid = true;
      }
      CHECK(basic_set.count({u, v}) == (has_mid ? 0u : 1u));
    }

    // Rebuilding the graph from the basic edges preserves the closure.
    Dag reduced;
    for (const auto& id : dag.ids) reduced.add_node(id);
    for (const auto& [u, v] : basic) reduced.add_edge(u, v);
    CHECK(transitive_closure(reduced) == expected);
  }
}

TEST_CASE("splits sample the non-basic closure edges") {
  SUBCASE("chain of four") {
    const Dag dag = dag_from({{"a", "b"}, {"b", "c"}, {"c", "d"}});
    SplitSpec spec;
    spec.valid_fraction = 1.0 / 3.0;
    spec.test_fraction = 1.0 / 3.0;
    spec.seed = 11;
    const SplitResult split = split_edges(dag, spec);
    CHECK(split.closure.size() == 6);
    CHECK(split.basic.size() == 3);
    CHECK(split.train == split.basic);
    CHECK(split.valid.size() == 1);
    CHECK(split.test.size() == 1);
    CHECK(split.valid != split.test);
    CHECK(std::is_sorted(split.valid.begin(), split.valid.end()));
    const SplitResult again = split_edges(dag, spec);
    CHECK(again.valid == split.valid);
    CHECK(again.test == split.test);
  }
  SUBCASE("zero fractions are empty") {
    const Dag dag = dag_from({{"r", "a"}, {"r", "b"}});
    SplitSpec spec;
    spec.valid_fraction = 0.0;
    spec.test_fraction = 0.0;
    const SplitResult split = split_edges(dag, spec);
    CHECK(split.valid.empty());
    CHECK(split.test.empty());
    CHECK(split.train == split.basic);
  }
  SUBCASE("asking for more held-out edges than exist") {
    const Dag dag = dag_from({{"a", "b"}, {"b", "c"}});  // one non-basic edge
    SplitSpec spec;
    spec.valid_fraction = 1.0;
    spec.test_fraction = 1.0;
    const std::string msg = message_of<DataError>([&] { split_edges(dag, spec); });
    CHECK(msg.find("not enough non-basic edges") != std::string::npos);
  }
  SUBCASE("held-out sets are disjoint from each other and from train") {
    std::mt19937_64 rng(7);
    const Dag dag = random_dag(rng, 20);
    SplitSpec spec;
    spec.valid_fraction = 0.2;
    spec.test_fraction = 0.2;
    spec.train_nonbasic_fraction = 0.2;
    spec.seed = 3;
    const SplitResult split = split_edges(dag, spec);
    std::set<std::pair<int, int>> seen(split.train.begin(), split.train.end());
    for (const auto& e : split.valid) CHECK(seen.insert(e).second);
    for (const auto& e : split.test) CHECK(seen.insert(e).second);
    for (const auto& e : split.basic) CHECK(seen.count(e) == 1);
  }
}

TEST_CASE("negative sampler corrupts the child slot") {
  // Closure of r -> {a, b}: forbid (r, a), (r, b) so only the self slot and
  // other parents remain.
  const Dag dag = dag_from({{"r", "a"}, {"r", "b"}});
  std::unordered_set<std::int64_t> forbidden;
  for (const auto& [u, v] : transitive_closure(dag)) {
    forbidden.insert(pair_key(u, v, dag.num_nodes()));
  }
  const NegativeSampler sampler(dag.num_nodes(), std::move(forbidden));

  SUBCASE("fully forbidden parent has no corruption") {
    CHECK_FALSE(sampler.can_corrupt(0));
    std::mt19937_64 rng(1);
    std::vector<int> out;
    CHECK_THROWS_AS(sampler.sample(0, 1, rng, out), DataError);
  }
  SUBCASE("leaf parents can corrupt and never emit forbidden pairs") {
    CHECK(sampler.can_corrupt(1));
    std::mt19937_64 rng(5);
    std::vector<int> out;
    sampler.sample(1, 200, rng, out);
    REQUIRE(out.size() == 200);
    for (int v : out) {
      CHECK(v != 1);  // never the parent itself
      CHECK((v == 0 || v == 2));
    }
  }
  SUBCASE("same seed reproduces the same draws") {
    std::mt19937_64 r1(9), r2(9);
    std::vector<int> a, b;
    sampler.sample(2, 50, r1, a);
    sampler.sample(2, 50, r2, b);
    CHECK(a == b);
  }
}
