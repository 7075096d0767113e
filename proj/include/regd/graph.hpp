#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "regd/errors.hpp"

namespace regd {

using EdgeList = std::vector<std::pair<int, int>>;

// Directed acyclic graph over string node ids; edges run parent -> child.
struct Dag {
  std::vector<std::string> ids;
  std::unordered_map<std::string, int> index;
  EdgeList edges;
  std::vector<std::vector<int>> children;

  int add_node(const std::string& id);
  // Returns false when the edge is a duplicate.
  bool add_edge(int parent, int child);
  int num_nodes() const { return static_cast<int>(ids.size()); }
};

// Tab-separated `parent<TAB>child` lines; '#' starts a comment line. Throws
// CycleError when the edges contain a cycle.
Dag load_edges_tsv(const std::filesystem::path& path);
void save_edges_tsv(const std::filesystem::path& path, const Dag& dag, const EdgeList& edges);

// Throws CycleError with a witness cycle when the graph is not acyclic.
void verify_acyclic(const Dag& dag);

// Per-node descendant sets (sorted, excluding the node itself).
std::vector<std::vector<int>> descendant_sets(const Dag& dag);

// All ordered pairs (u, w) with a directed path u to w, u != w, sorted.
EdgeList transitive_closure(const Dag& dag);

// Unique minimal edge set with the same closure: a closure edge survives iff
// no intermediate node v has both u ~> v and v ~> w.
EdgeList basic_edges(const Dag& dag);

struct SplitSpec {
  double valid_fraction = 0.05;
  double test_fraction = 0.05;
  // Extra share of non-basic edges appended to the training set.
  double train_nonbasic_fraction = 0.0;
  std::uint64_t seed = 42;
};

struct SplitResult {
  EdgeList train;  // basic edges plus any sampled non-basic extras
  EdgeList valid;
  EdgeList test;
  EdgeList closure;
  EdgeList basic;
};

// Valid and test are disjoint uniform samples of the non-basic closure edges;
// re-running with the same seed reproduces the same split.
SplitResult split_edges(const Dag& dag, const SplitSpec& spec);

std::int64_t pair_key(int u, int v, int num_nodes);

// Uniform corruptions of the child side of a positive pair: candidates are
// rejected while (u, v') is a forbidden pair or v' == u; duplicates among the
// k draws are allowed.
class NegativeSampler {
 public:
  NegativeSampler(int num_nodes, std::unordered_set<std::int64_t> forbidden_pairs);

  // Appends k corrupted children for parent u to `out`. Throws DataError when
  // no valid corruption exists.
  void sample(int u, int k, std::mt19937_64& rng, std::vector<int>& out) const;

  // True when some corruption (u, v') with v' != u is allowed.
  bool can_corrupt(int u) const;

 private:
  int num_nodes_;
  std::unordered_set<std::int64_t> forbidden_;
};

}  // namespace regd
