#include "regd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace regd {

int Dag::add_node(const std::string& id) {
  auto it = index.find(id);
  if (it != index.end()) return it->second;
  const int node = num_nodes();
  ids.push_back(id);
  index.emplace(id, node);
  children.emplace_back();
  return node;
}

bool Dag::add_edge(int parent, int child) {
  auto& adj = children[parent];
  if (std::find(adj.begin(), adj.end(), child) != adj.end()) return false;
  adj.push_back(child);
  edges.emplace_back(parent, child);
  return true;
}

Dag load_edges_tsv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open edge list: " + path.string());
  Dag dag;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
        line.find('\t', tab + 1) != std::string::npos)
      throw DataError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 'parent<TAB>child', got '" + line + "'");
    const int parent = dag.add_node(line.substr(0, tab));
    const int child = dag.add_node(line.substr(tab + 1));
    dag.add_edge(parent, child);
  }
  verify_acyclic(dag);
  return dag;
}

void save_edges_tsv(const std::filesystem::path& path, const Dag& dag, const EdgeList& edges) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write edge list: " + path.string());
  for (const auto& [u, v] : edges) out << dag.ids[u] << '\t' << dag.ids[v] << '\n';
  if (!out) throw DataError("write failed: " + path.string());
}

void verify_acyclic(const Dag& dag) {
  enum : unsigned char { White, Grey, Black };
  std::vector<unsigned char> color(dag.num_nodes(), White);
  // Iterative DFS; `path` holds the grey chain for cycle reconstruction.
  std::vector<std::pair<int, std::size_t>> stack;
  std::vector<int> path;
  for (int root = 0; root < dag.num_nodes(); ++root) {
    if (color[root] != White) continue;
    stack.emplace_back(root, 0);
    color[root] = Grey;
    path.push_back(root);
    while (!stack.empty()) {
      auto& [node, next] = stack.back();
      if (next < dag.children[node].size()) {
        const int child = dag.children[node][next++];
        if (color[child] == Grey) {
          std::vector<std::string> witness;
          auto it = std::find(path.begin(), path.end(), child);
          for (; it != path.end(); ++it) witness.push_back(dag.ids[*it]);
          throw CycleError(std::move(witness));
        }
        if (color[child] == White) {
          color[child] = Grey;
          stack.emplace_back(child, 0);
          path.push_back(child);
        }
      } else {
        color[node] = Black;
        stack.pop_back();
        path.pop_back();
      }
    }
  }
}

std::vector<std::vector<int>> descendant_sets(const Dag& dag) {
  verify_acyclic(dag);
  const int n = dag.num_nodes();
  std::vector<std::vector<int>> desc(n);
  std::vector<unsigned char> seen(n, 0);
  std::vector<int> stack;
  for (int u = 0; u < n; ++u) {
    std::fill(seen.begin(), seen.end(), 0);
    seen[u] = 1;
    stack.assign(dag.children[u].begin(), dag.children[u].end());
    while (!stack.empty()) {
      const int w = stack.back();
      stack.pop_back();
      if (seen[w]) continue;
      seen[w] = 1;
      desc[u].push_back(w);
      for (int c : dag.children[w]) {
        if (!seen[c]) stack.push_back(c);
      }
    }
    std::sort(desc[u].begin(), desc[u].end());
  }
  return desc;
}

EdgeList transitive_closure(const Dag& dag) {
  const auto desc = descendant_sets(dag);
  EdgeList closure;
  for (int u = 0; u < dag.num_nodes(); ++u) {
    for (int w : desc[u]) closure.emplace_back(u, w);
  }
  return closure;
}

EdgeList basic_edges(const Dag& dag) {
  const auto desc = descendant_sets(dag);
  EdgeList basic;
  for (int u = 0; u < dag.num_nodes(); ++u) {
    for (int w : desc[u]) {
      bool redundant = false;
      // Any path u ~> w longer than one edge passes through a direct child.
      for (int v : dag.children[u]) {
        if (v != w && std::binary_search(desc[v].begin(), desc[v].end(), w)) {
          redundant = true;
          break;
        }
      }
      if (!redundant) basic.emplace_back(u, w);
    }
  }
  return basic;
}

SplitResult split_edges(const Dag& dag, const SplitSpec& spec) {
  if (!(spec.valid_fraction >= 0.0) || !(spec.test_fraction >= 0.0) ||
      !(spec.train_nonbasic_fraction >= 0.0) || spec.valid_fraction > 1.0 ||
      spec.test_fraction > 1.0 || spec.train_nonbasic_fraction > 1.0)
    throw std::invalid_argument("split fractions must lie in [0, 1]");

  SplitResult result;
  result.closure = transitive_closure(dag);
  result.basic = basic_edges(dag);

  std::unordered_set<std::int64_t> basic_set;
  basic_set.reserve(result.basic.size());
  for (const auto& [u, v] : result.basic) basic_set.insert(pair_key(u, v, dag.num_nodes()));
  EdgeList non_basic;
  for (const auto& [u, v] : result.closure) {
    if (!basic_set.count(pair_key(u, v, dag.num_nodes()))) non_basic.emplace_back(u, v);
  }

  const auto count = [&](double frac) {
    return static_cast<std::size_t>(std::llround(frac * static_cast<double>(non_basic.size())));
  };
  const std::size_t n_valid = count(spec.valid_fraction);
  const std::size_t n_test = count(spec.test_fraction);
  const std::size_t n_extra = count(spec.train_nonbasic_fraction);
  if (n_valid + n_test + n_extra > non_basic.size())
    throw DataError("not enough non-basic edges: need " +
                    std::to_string(n_valid + n_test + n_extra) + ", have " +
                    std::to_string(non_basic.size()));

  std::mt19937_64 rng(spec.seed);
  std::shuffle(non_basic.begin(), non_basic.end(), rng);
  result.valid.assign(non_basic.begin(), non_basic.begin() + n_valid);
  result.test.assign(non_basic.begin() + n_valid, non_basic.begin() + n_valid + n_test);
  result.train = result.basic;
  result.train.insert(result.train.end(), non_basic.begin() + n_valid + n_test,
                      non_basic.begin() + n_valid + n_test + n_extra);
  std::sort(result.valid.begin(), result.valid.end());
  std::sort(result.test.begin(), result.test.end());
  std::sort(result.train.begin(), result.train.end());
  return result;
}

std::int64_t pair_key(int u, int v, int num_nodes) {
  return static_cast<std::int64_t>(u) * num_nodes + v;
}

NegativeSampler::NegativeSampler(int num_nodes, std::unordered_set<std::int64_t> forbidden_pairs)
    : num_nodes_(num_nodes), forbidden_(std::move(forbidden_pairs)) {}

void NegativeSampler::sample(int u, int k, std::mt19937_64& rng, std::vector<int>& out) const {
  std::uniform_int_distribution<int> pick(0, num_nodes_ - 1);
  for (int drawn = 0; drawn < k; ++drawn) {
    int v = -1;
    for (int attempt = 0; attempt < 64 * num_nodes_; ++attempt) {
      const int cand = pick(rng);
      if (cand == u || forbidden_.count(pair_key(u, cand, num_nodes_))) continue;
      v = cand;
      break;
    }
    if (v < 0) {
      // Rejection stalled; confirm exhaustively before giving up.
      std::vector<int> valid;
      for (int cand = 0; cand < num_nodes_; ++cand) {
        if (cand != u && !forbidden_.count(pair_key(u, cand, num_nodes_))) valid.push_back(cand);
      }
      if (valid.empty())
        throw DataError("no valid corruption exists for node index " + std::to_string(u));
      std::uniform_int_distribution<std::size_t> pick_valid(0, valid.size() - 1);
      v = valid[pick_valid(rng)];
    }
    out.push_back(v);
  }
}

bool NegativeSampler::can_corrupt(int u) const {
  for (int cand = 0; cand < num_nodes_; ++cand) {
    if (cand != u && !forbidden_.count(pair_key(u, cand, num_nodes_))) return true;
  }
  return false;
}

}  // namespace regd
