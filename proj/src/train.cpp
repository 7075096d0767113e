#include "regd/train.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <ostream>
#include <set>
#include <utility>

#include "json.hpp"
#include "regd/optim.hpp"

namespace regd {

namespace {

// splitmix64 finalizer; decorrelates the per-purpose rng streams drawn from
// one run seed.
std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void write_jsonl(std::ostream* os, const EpochLog& el) {
  if (os == nullptr) {
    return;
  }
  nlohmann::json j;
  j["epoch"] = el.epoch;
  j["loss"] = el.loss;
  if (el.evaluated) {
    j["valid_f1"] = el.valid_f1;
    j["threshold"] = el.threshold;
  } else {
    j["valid_f1"] = nullptr;
    j["threshold"] = nullptr;
  }
  (*os) << j.dump() << '\n';
}

void check_edges(const EdgeList& edges, int num_nodes, const char* which) {
  for (const auto& [u, v] : edges) {
    if (u < 0 || u >= num_nodes || v < 0 || v >= num_nodes) {
      throw DataError(std::string(which) + " edge references a node out of range");
    }
    if (u == v) {
      throw DataError(std::string(which) + " edge is a self-loop");
    }
  }
}

}  // namespace

std::uint64_t train_stream_seed(std::uint64_t seed) { return mix_seed(seed + 1); }
std::uint64_t valid_stream_seed(std::uint64_t seed) { return mix_seed(seed + 2); }
std::uint64_t test_stream_seed(std::uint64_t seed) { return mix_seed(seed + 3); }

EnergyConfig TrainConfig::energy_config() const {
  EnergyConfig e;
  e.lambda = lambda;
  const int pp = p != 0 ? p : (kind == RegionKind::Box ? 1 : 2);
  e.depth = DepthConfig::linear(kind, pp);
  e.boundary = boundary;
  e.gamma1 = gamma1;
  e.gamma2 = gamma2;
  return e;
}

OntologyConfig TrainConfig::ontology_config() const {
  OntologyConfig o;
  o.base = base;
  o.use_regd = use_regd;
  o.elem_center_regularizer = elem_center_regularizer;
  o.reg_weight = reg_weight;
  o.base_margin = base_margin;
  const RegionKind k = o.region_kind();
  o.energy.lambda = lambda;
  const int pp = p != 0 ? p : (k == RegionKind::Box ? 1 : 2);
  o.energy.depth = DepthConfig::linear(k, pp);
  o.energy.boundary = boundary;
  o.energy.gamma1 = gamma1;
  o.energy.gamma2 = gamma2;
  return o;
}

void TrainConfig::validate() const {
  if (dim < 1) {
    throw DataError("dim must be at least 1");
  }
  if (!(lr > 0.0)) {
    throw DataError("lr must be positive");
  }
  if (batch_size < 1) {
    throw DataError("batch_size must be at least 1");
  }
  if (epochs < 1) {
    throw DataError("epochs must be at least 1");
  }
  if (negatives < 1) {
    throw DataError("negatives must be at least 1");
  }
  if (eval_every < 0) {
    throw DataError("eval_every must not be negative");
  }
  if (p != 0 && p != 1 && p != 2) {
    throw DataError("p must be 0 (auto), 1, or 2");
  }
  if (!(reg_weight >= 0.0)) {
    throw DataError("reg_weight must not be negative");
  }
  if (!std::isfinite(log_size_floor)) {
    throw DataError("log_size_floor must be finite");
  }
}

DagTask make_dag_task(std::vector<std::string> ids, EdgeList train, EdgeList valid,
                      EdgeList test) {
  if (ids.empty()) {
    throw DataError("node id list is empty");
  }
  const int n = static_cast<int>(ids.size());
  check_edges(train, n, "train");
  check_edges(valid, n, "valid");
  check_edges(test, n, "test");

  DagTask task;
  task.ids = std::move(ids);
  task.train = std::move(train);
  task.valid = std::move(valid);
  task.test = std::move(test);

  for (const auto& [u, v] : task.train) {
    task.train_pairs.insert(pair_key(u, v, n));
  }

  // Known pairs are the closure of everything supplied, so evaluation never
  // scores a reachable pair as a corruption.
  Dag all;
  for (const std::string& id : task.ids) {
    all.add_node(id);
  }
  for (const EdgeList* edges : {&task.train, &task.valid, &task.test}) {
    for (const auto& [u, v] : *edges) {
      all.add_edge(u, v);
    }
  }
  verify_acyclic(all);
  for (const auto& [u, v] : transitive_closure(all)) {
    task.known_pairs.insert(pair_key(u, v, n));
  }
  return task;
}

DagTask dag_task_from_split(const Dag& dag, const SplitResult& split) {
  return make_dag_task(dag.ids, split.train, split.valid, split.test);
}

PairPool build_eval_pool(const EdgeList& positives, const NegativeSampler& sampler, int k,
                         std::uint64_t seed) {
  if (k < 1) {
    throw DataError("eval pool needs at least one corruption per pair");
  }
  PairPool pool;
  pool.positives = positives;
  pool.negatives.resize(positives.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    // A parent that reaches every node has no legal corruption; keep the
    // positive and score it without negatives.
    if (!sampler.can_corrupt(positives[i].first)) continue;
    sampler.sample(positives[i].first, k, rng, pool.negatives[i]);
  }
  return pool;
}

std::vector<ScoredPair> score_pool(const EmbeddingTable& table, const EnergyConfig& cfg,
                                   const PairPool& pool) {
  if (pool.negatives.size() != pool.positives.size()) {
    throw DataError("pool corruption sets do not match its positives");
  }
  std::vector<ScoredPair> scored;
  scored.reserve(pool.positives.size() * 2);
  for (std::size_t i = 0; i < pool.positives.size(); ++i) {
    const auto [u, v] = pool.positives[i];
    scored.push_back({energy(table, u, v, cfg), true});
    for (const int w : pool.negatives[i]) {
      scored.push_back({energy(table, u, w, cfg), false});
    }
  }
  return scored;
}

namespace {

struct DagPools {
  PairPool valid;
  PairPool test;
};

// Shared by training and standalone evaluation so both draw identical pools.
DagPools make_dag_pools(const DagTask& task, const TrainConfig& cfg) {
  DagPools pools;
  const int n = static_cast<int>(task.ids.size());
  const NegativeSampler eval_sampler(n, task.known_pairs);
  if (!task.valid.empty()) {
    pools.valid = build_eval_pool(task.valid, eval_sampler, cfg.negatives,
                                  valid_stream_seed(cfg.seed));
  }
  if (!task.test.empty()) {
    pools.test =
        build_eval_pool(task.test, eval_sampler, cfg.negatives, test_stream_seed(cfg.seed));
  }
  return pools;
}

}  // namespace

TrainOutcome train_dag(const DagTask& task, const TrainConfig& cfg, std::ostream* jsonl) {
  cfg.validate();
  const EnergyConfig ecfg = cfg.energy_config();
  ecfg.validate(cfg.kind);
  if (task.train.empty()) {
    throw DataError("no training edges");
  }

  TrainOutcome out{.table = EmbeddingTable(cfg.kind, cfg.dim, task.ids)};
  out.table.init_random(cfg.seed);
  const int n = out.table.num_nodes();
  check_edges(task.train, n, "train");
  check_edges(task.valid, n, "valid");
  check_edges(task.test, n, "test");

  const NegativeSampler train_sampler(n, task.train_pairs);
  DagPools pools = make_dag_pools(task, cfg);
  PairPool& valid_pool = pools.valid;
  PairPool& test_pool = pools.test;

  AdamState adam(out.table.num_params(), cfg.lr);
  std::vector<double> grad(out.table.num_params());
  std::vector<std::size_t> order(task.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(train_stream_seed(cfg.seed));
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  out.log.reserve(static_cast<std::size_t>(cfg.epochs));
  Batch batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch.positives.clear();
      batch.negative_children.assign(stop - start, {});
      for (std::size_t i = start; i < stop; ++i) {
        const auto [u, v] = task.train[order[i]];
        batch.positives.emplace_back(u, v);
        train_sampler.sample(u, cfg.negatives, rng, batch.negative_children[i - start]);
      }
      loss_sum += batch_loss_grad(out.table, batch, ecfg, grad);
      adam_step(adam, out.table.params(), grad);
      out.table.clamp_log_sizes(cfg.log_size_floor);
    }

    EpochLog el;
    el.epoch = epoch;
    el.loss = loss_sum / static_cast<double>(task.train.size());
    const bool due =
        epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (due && !valid_pool.positives.empty()) {
      const auto scored = score_pool(out.table, ecfg, valid_pool);
      const ThresholdResult best = best_threshold_f1(scored);
      el.evaluated = true;
      el.valid_f1 = best.f1;
      el.threshold = best.threshold;
      out.valid_f1 = best.f1;
      out.threshold = best.threshold;
    }
    out.log.push_back(el);
    write_jsonl(jsonl, el);
  }

  if (!test_pool.positives.empty() && std::isfinite(out.threshold)) {
    const auto scored = score_pool(out.table, ecfg, test_pool);
    out.test_prf = f1_at_threshold(scored, out.threshold);
    out.has_test = true;
  }
  return out;
}

EvalOutcome evaluate_dag(const DagTask& task, const TrainConfig& cfg, const EmbeddingTable& table,
                         std::optional<double> threshold) {
  cfg.validate();
  if (cfg.kind != table.kind() || cfg.dim != table.dim()) {
    throw DataError("config kind or dim does not match the stored embeddings");
  }
  const EnergyConfig ecfg = cfg.energy_config();
  ecfg.validate(cfg.kind);

  // Pools are drawn in task index space first so the rng streams match the
  // trainer's, then every id is looked up in the stored table.
  DagPools pools = make_dag_pools(task, cfg);
  std::vector<int> idx(task.ids.size());
  for (std::size_t i = 0; i < task.ids.size(); ++i) {
    idx[i] = table.node_index(task.ids[i]);
  }
  const auto remap = [&](PairPool& pool) {
    for (auto& [u, v] : pool.positives) {
      u = idx[static_cast<std::size_t>(u)];
      v = idx[static_cast<std::size_t>(v)];
    }
    for (auto& negs : pool.negatives) {
      for (int& w : negs) w = idx[static_cast<std::size_t>(w)];
    }
  };
  remap(pools.valid);
  remap(pools.test);

  EvalOutcome out;
  std::vector<ScoredPair> valid_scored;
  if (!pools.valid.positives.empty()) valid_scored = score_pool(table, ecfg, pools.valid);
  if (threshold.has_value()) {
    out.threshold = *threshold;
    if (!valid_scored.empty()) out.valid_f1 = f1_at_threshold(valid_scored, *threshold).f1;
  } else {
    if (valid_scored.empty()) {
      throw DataError("threshold sweep needs validation pairs; pass a threshold instead");
    }
    const ThresholdResult best = best_threshold_f1(valid_scored);
    out.threshold = best.threshold;
    out.valid_f1 = best.f1;
  }
  if (!pools.test.positives.empty()) {
    out.test_prf = f1_at_threshold(score_pool(table, ecfg, pools.test), out.threshold);
    out.has_test = true;
  }
  return out;
}

namespace {

using AxiomKey = std::array<int, 5>;
using AxiomSet = std::set<AxiomKey>;

AxiomKey axiom_key(const NormalizedAxiom& ax) {
  return {static_cast<int>(ax.nf), ax.a, ax.b, ax.c, ax.role};
}

int& axiom_slot(NormalizedAxiom& ax, int slot) {
  if (ax.nf == NormalForm::NF2) {
    return slot == 0 ? ax.a : (slot == 1 ? ax.b : ax.c);
  }
  return slot == 0 ? ax.a : ax.b;
}

int num_axiom_slots(const NormalizedAxiom& ax) {
  return ax.nf == NormalForm::NF2 ? 3 : 2;
}

// Replaces one uniformly chosen concept slot with a uniform concept so that
// the result is not a forbidden (asserted) axiom. Falls back to enumerating
// every slot replacement before giving up.
NormalizedAxiom corrupt_axiom(const NormalizedAxiom& ax, int num_concepts,
                              const AxiomSet& forbidden, std::mt19937_64& rng) {
  const int slots = num_axiom_slots(ax);
  std::uniform_int_distribution<int> slot_dist(0, slots - 1);
  std::uniform_int_distribution<int> concept_dist(0, num_concepts - 1);
  const long attempts = 64L * num_concepts * slots;
  for (long it = 0; it < attempts; ++it) {
    NormalizedAxiom cand = ax;
    int& field = axiom_slot(cand, slot_dist(rng));
    const int pick = concept_dist(rng);
    if (pick == field) {
      continue;
    }
    field = pick;
    if (forbidden.find(axiom_key(cand)) == forbidden.end()) {
      return cand;
    }
  }
  for (int slot = 0; slot < slots; ++slot) {
    for (int pick = 0; pick < num_concepts; ++pick) {
      NormalizedAxiom cand = ax;
      int& field = axiom_slot(cand, slot);
      if (pick == field) {
        continue;
      }
      field = pick;
      if (forbidden.find(axiom_key(cand)) == forbidden.end()) {
        return cand;
      }
    }
  }
  throw DataError("no corruption available for an axiom");
}

// Early-exits on the first allowed mutation, so the scan is O(1) unless the
// axiom is fully surrounded by forbidden neighbours.
bool axiom_has_corruption(const NormalizedAxiom& ax, int num_concepts, const AxiomSet& forbidden) {
  const int slots = num_axiom_slots(ax);
  for (int slot = 0; slot < slots; ++slot) {
    for (int pick = 0; pick < num_concepts; ++pick) {
      NormalizedAxiom cand = ax;
      int& field = axiom_slot(cand, slot);
      if (pick == field) {
        continue;
      }
      field = pick;
      if (forbidden.find(axiom_key(cand)) == forbidden.end()) {
        return true;
      }
    }
  }
  return false;
}

struct AxiomPool {
  std::vector<NormalizedAxiom> positives;
  std::vector<std::vector<NormalizedAxiom>> negatives;  // per positive
  std::vector<NormalizedAxiom> extra_negatives;         // flat, explicit lists
};

std::vector<ScoredPair> score_axiom_pool(const EmbeddingTable& table, const OntologyConfig& cfg,
                                         const AxiomPool& pool) {
  std::vector<ScoredPair> scored;
  scored.reserve(pool.positives.size() * 2 + pool.extra_negatives.size());
  for (std::size_t i = 0; i < pool.positives.size(); ++i) {
    scored.push_back({axiom_energy(pool.positives[i], table, cfg), true});
    if (i < pool.negatives.size()) {
      for (const NormalizedAxiom& neg : pool.negatives[i]) {
        scored.push_back({axiom_energy(neg, table, cfg), false});
      }
    }
  }
  for (const NormalizedAxiom& neg : pool.extra_negatives) {
    scored.push_back({axiom_energy(neg, table, cfg), false});
  }
  return scored;
}

NormalizedAxiom subsumption_axiom(int sub, int sup) {
  NormalizedAxiom ax;
  ax.nf = NormalForm::NF1;
  ax.a = sub;
  ax.b = sup;
  return ax;
}

// Inference-mode pool over (sub, sup) pairs. Explicit negatives win; sampling
// corrupts the sub side against every known subsumption.
AxiomPool build_pair_pool(const std::vector<std::pair<int, int>>& pairs,
                          const std::vector<std::pair<int, int>>& explicit_negs,
                          const NegativeSampler& sampler, int k, std::uint64_t seed) {
  AxiomPool pool;
  for (const auto& [sub, sup] : pairs) {
    pool.positives.push_back(subsumption_axiom(sub, sup));
  }
  if (!explicit_negs.empty()) {
    for (const auto& [sub, sup] : explicit_negs) {
      pool.extra_negatives.push_back(subsumption_axiom(sub, sup));
    }
    return pool;
  }
  pool.negatives.resize(pool.positives.size());
  std::mt19937_64 rng(seed);
  std::vector<int> subs;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!sampler.can_corrupt(pairs[i].second)) continue;
    subs.clear();
    sampler.sample(pairs[i].second, k, rng, subs);
    for (const int sub : subs) {
      pool.negatives[i].push_back(subsumption_axiom(sub, pairs[i].second));
    }
  }
  return pool;
}

AxiomPool build_axiom_pool(const std::vector<NormalizedAxiom>& positives, int num_concepts,
                           const AxiomSet& forbidden, int k, std::uint64_t seed) {
  AxiomPool pool;
  pool.positives = positives;
  pool.negatives.resize(positives.size());
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < positives.size(); ++i) {
    if (!axiom_has_corruption(positives[i], num_concepts, forbidden)) continue;
    for (int j = 0; j < k; ++j) {
      pool.negatives[i].push_back(corrupt_axiom(positives[i], num_concepts, forbidden, rng));
    }
  }
  return pool;
}

void check_axiom_ids(const std::vector<NormalizedAxiom>& axioms, int num_concepts, int num_roles,
                     const char* which) {
  for (const NormalizedAxiom& ax : axioms) {
    const bool needs_c = ax.nf == NormalForm::NF2;
    const bool needs_role = ax.nf == NormalForm::NF3 || ax.nf == NormalForm::NF4;
    if (ax.a < 0 || ax.a >= num_concepts || ax.b < 0 || ax.b >= num_concepts ||
        (needs_c && (ax.c < 0 || ax.c >= num_concepts)) ||
        (needs_role && (ax.role < 0 || ax.role >= num_roles))) {
      throw DataError(std::string(which) + " axiom references an unknown concept or role");
    }
  }
}

void check_pairs(const std::vector<std::pair<int, int>>& pairs, int num_concepts,
                 const char* which) {
  for (const auto& [sub, sup] : pairs) {
    if (sub < 0 || sub >= num_concepts || sup < 0 || sup >= num_concepts) {
      throw DataError(std::string(which) + " pair references an unknown concept");
    }
  }
}

struct OntologyPools {
  AxiomPool valid;
  AxiomPool test;
};

// Shared by training and standalone evaluation so both draw identical pools.
OntologyPools make_ontology_pools(const OntologyTask& task, const TrainConfig& cfg) {
  OntologyPools pools;
  const int nc = static_cast<int>(task.data.concepts.size());
  AxiomSet train_set;
  for (const NormalizedAxiom& ax : task.train) {
    train_set.insert(axiom_key(ax));
  }
  if (task.prediction) {
    AxiomSet all_axioms = train_set;
    for (const NormalizedAxiom& ax : task.valid_axioms) {
      all_axioms.insert(axiom_key(ax));
    }
    for (const NormalizedAxiom& ax : task.test_axioms) {
      all_axioms.insert(axiom_key(ax));
    }
    if (!task.valid_axioms.empty()) {
      pools.valid = build_axiom_pool(task.valid_axioms, nc, all_axioms, cfg.negatives,
                                     valid_stream_seed(cfg.seed));
    }
    if (!task.test_axioms.empty()) {
      pools.test = build_axiom_pool(task.test_axioms, nc, all_axioms, cfg.negatives,
                                    test_stream_seed(cfg.seed));
    }
    return pools;
  }
  std::unordered_set<std::int64_t> known;
  for (const NormalizedAxiom& ax : task.train) {
    if (ax.nf == NormalForm::NF1) {
      known.insert(pair_key(ax.b, ax.a, nc));
    }
  }
  for (const auto* pairs : {&task.valid_pairs, &task.test_pairs}) {
    for (const auto& [sub, sup] : *pairs) {
      known.insert(pair_key(sup, sub, nc));
    }
  }
  const NegativeSampler pair_sampler(nc, std::move(known));
  if (!task.valid_pairs.empty()) {
    pools.valid = build_pair_pool(task.valid_pairs, task.valid_neg_pairs, pair_sampler,
                                  cfg.negatives, valid_stream_seed(cfg.seed));
  }
  if (!task.test_pairs.empty()) {
    pools.test = build_pair_pool(task.test_pairs, task.test_neg_pairs, pair_sampler,
                                 cfg.negatives, test_stream_seed(cfg.seed));
  }
  return pools;
}

}  // namespace

OntologyOutcome train_ontology(const OntologyTask& task, const TrainConfig& cfg,
                               std::ostream* jsonl) {
  cfg.validate();
  const OntologyConfig ocfg = cfg.ontology_config();
  const RegionKind kind = ocfg.region_kind();
  ocfg.validate(kind);
  if (task.data.concepts.empty()) {
    throw DataError("ontology has no concepts");
  }
  if (task.train.empty()) {
    throw DataError("no training axioms");
  }
  const int nc = static_cast<int>(task.data.concepts.size());
  const int nr = static_cast<int>(task.data.roles.size());
  check_axiom_ids(task.train, nc, nr, "train");
  check_axiom_ids(task.valid_axioms, nc, nr, "valid");
  check_axiom_ids(task.test_axioms, nc, nr, "test");
  check_pairs(task.valid_pairs, nc, "valid");
  check_pairs(task.test_pairs, nc, "test");
  check_pairs(task.valid_neg_pairs, nc, "valid negative");
  check_pairs(task.test_neg_pairs, nc, "test negative");

  OntologyOutcome out{.table = EmbeddingTable(kind, cfg.dim, task.data.concepts, task.data.roles)};
  out.table.init_random(cfg.seed);

  AxiomSet train_set;
  for (const NormalizedAxiom& ax : task.train) {
    train_set.insert(axiom_key(ax));
  }

  const OntologyPools pools = make_ontology_pools(task, cfg);
  const AxiomPool& valid_pool = pools.valid;
  const AxiomPool& test_pool = pools.test;

  AdamState adam(out.table.num_params(), cfg.lr);
  std::vector<double> grad(out.table.num_params());
  std::vector<std::size_t> order(task.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(train_stream_seed(cfg.seed));
  const std::size_t bs = static_cast<std::size_t>(cfg.batch_size);

  out.log.reserve(static_cast<std::size_t>(cfg.epochs));
  OntologyBatch batch;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t stop = std::min(order.size(), start + bs);
      batch.positives.clear();
      batch.negatives.assign(stop - start, {});
      for (std::size_t i = start; i < stop; ++i) {
        const NormalizedAxiom& ax = task.train[order[i]];
        batch.positives.push_back(ax);
        for (int j = 0; j < cfg.negatives; ++j) {
          batch.negatives[i - start].push_back(corrupt_axiom(ax, nc, train_set, rng));
        }
      }
      loss_sum += ontology_batch_loss_grad(out.table, batch, ocfg, grad);
      adam_step(adam, out.table.params(), grad);
      out.table.clamp_log_sizes(cfg.log_size_floor);
    }

    EpochLog el;
    el.epoch = epoch;
    el.loss = loss_sum / static_cast<double>(task.train.size());
    const bool due =
        epoch == cfg.epochs || (cfg.eval_every > 0 && epoch % cfg.eval_every == 0);
    if (due && !valid_pool.positives.empty()) {
      const auto scored = score_axiom_pool(out.table, ocfg, valid_pool);
      const ThresholdResult best = best_threshold_f1(scored);
      el.evaluated = true;
      el.valid_f1 = best.f1;
      el.threshold = best.threshold;
      out.valid_f1 = best.f1;
      out.threshold = best.threshold;
    }
    out.log.push_back(el);
    write_jsonl(jsonl, el);
  }

  if (!test_pool.positives.empty() && std::isfinite(out.threshold)) {
    const auto scored = score_axiom_pool(out.table, ocfg, test_pool);
    out.test_prf = f1_at_threshold(scored, out.threshold);
    out.has_test = true;
  }

  if (task.prediction) {
    std::vector<NormalizedAxiom> queries;
    for (const NormalizedAxiom& ax : task.test_axioms) {
      if (ax.nf == NormalForm::NF4) {
        queries.push_back(ax);
      }
    }
    if (!queries.empty()) {
      std::vector<int> concept_map(static_cast<std::size_t>(nc));
      std::iota(concept_map.begin(), concept_map.end(), 0);
      std::vector<int> role_map(static_cast<std::size_t>(nr));
      std::iota(role_map.begin(), role_map.end(), 0);
      const auto ranks = rank_nf4(out.table, ocfg, queries, concept_map, role_map);
      out.ranking = ranking_metrics(ranks);
      out.has_ranking = true;
    }
  }
  return out;
}

std::vector<RankResult> rank_nf4(const EmbeddingTable& table, const OntologyConfig& cfg,
                                 std::span<const NormalizedAxiom> axioms,
                                 std::span<const int> concept_map, std::span<const int> role_map) {
  const std::size_t nc = concept_map.size();
  std::vector<RankResult> ranks;
  ranks.reserve(axioms.size());
  std::vector<double> scores(nc);
  for (const NormalizedAxiom& ax : axioms) {
    if (ax.nf != NormalForm::NF4) {
      throw DataError("ranking expects existential superclass axioms only");
    }
    if (ax.a < 0 || static_cast<std::size_t>(ax.a) >= nc || ax.b < 0 ||
        static_cast<std::size_t>(ax.b) >= nc) {
      throw DataError("ranked axiom references an unknown concept");
    }
    if (ax.role < 0 || static_cast<std::size_t>(ax.role) >= role_map.size()) {
      throw DataError("ranked axiom references an unknown role");
    }
    NormalizedAxiom cand = ax;
    cand.b = concept_map[static_cast<std::size_t>(ax.b)];
    cand.role = role_map[static_cast<std::size_t>(ax.role)];
    for (std::size_t c = 0; c < nc; ++c) {
      cand.a = concept_map[c];
      scores[c] = axiom_energy(cand, table, cfg);
    }
    ranks.push_back(
        {pessimistic_rank(scores, static_cast<std::size_t>(ax.a)), static_cast<long>(nc)});
  }
  return ranks;
}

EvalOutcome evaluate_ontology(const OntologyTask& task, const TrainConfig& cfg,
                              const EmbeddingTable& table, std::optional<double> threshold) {
  cfg.validate();
  const OntologyConfig ocfg = cfg.ontology_config();
  const RegionKind kind = ocfg.region_kind();
  ocfg.validate(kind);
  if (table.kind() != kind) {
    throw DataError("embedding region shape does not match the configured scorer");
  }
  const int nc = static_cast<int>(task.data.concepts.size());
  const int nr = static_cast<int>(task.data.roles.size());
  check_axiom_ids(task.train, nc, nr, "train");
  check_axiom_ids(task.valid_axioms, nc, nr, "valid");
  check_axiom_ids(task.test_axioms, nc, nr, "test");
  check_pairs(task.valid_pairs, nc, "valid");
  check_pairs(task.test_pairs, nc, "test");
  check_pairs(task.valid_neg_pairs, nc, "valid negative");
  check_pairs(task.test_neg_pairs, nc, "test negative");

  // Pools are drawn in task index space, identical to training, then remapped
  // onto whatever row order the stored table uses.
  OntologyPools pools = make_ontology_pools(task, cfg);
  std::vector<int> concept_map(static_cast<std::size_t>(nc));
  for (int i = 0; i < nc; ++i) {
    concept_map[static_cast<std::size_t>(i)] = table.node_index(task.data.concepts[static_cast<std::size_t>(i)]);
  }
  std::vector<int> role_map(static_cast<std::size_t>(nr));
  for (int i = 0; i < nr; ++i) {
    role_map[static_cast<std::size_t>(i)] = table.role_index(task.data.roles[static_cast<std::size_t>(i)]);
  }
  const auto remap = [&](NormalizedAxiom& ax) {
    ax.a = concept_map[static_cast<std::size_t>(ax.a)];
    ax.b = concept_map[static_cast<std::size_t>(ax.b)];
    if (ax.c >= 0) {
      ax.c = concept_map[static_cast<std::size_t>(ax.c)];
    }
    if (ax.role >= 0) {
      ax.role = role_map[static_cast<std::size_t>(ax.role)];
    }
  };
  for (AxiomPool* pool : {&pools.valid, &pools.test}) {
    for (NormalizedAxiom& ax : pool->positives) {
      remap(ax);
    }
    for (auto& negs : pool->negatives) {
      for (NormalizedAxiom& ax : negs) {
        remap(ax);
      }
    }
    for (NormalizedAxiom& ax : pool->extra_negatives) {
      remap(ax);
    }
  }

  EvalOutcome out;
  if (threshold.has_value()) {
    out.threshold = *threshold;
  } else {
    if (pools.valid.positives.empty()) {
      throw DataError("threshold sweep needs validation pairs; pass a threshold instead");
    }
    const auto scored = score_axiom_pool(table, ocfg, pools.valid);
    const ThresholdResult best = best_threshold_f1(scored);
    out.threshold = best.threshold;
    out.valid_f1 = best.f1;
  }
  if (!pools.test.positives.empty() && std::isfinite(out.threshold)) {
    const auto scored = score_axiom_pool(table, ocfg, pools.test);
    out.test_prf = f1_at_threshold(scored, out.threshold);
    out.has_test = true;
  }
  if (task.prediction) {
    std::vector<NormalizedAxiom> queries;
    for (const NormalizedAxiom& ax : task.test_axioms) {
      if (ax.nf == NormalForm::NF4) {
        queries.push_back(ax);
      }
    }
    if (!queries.empty()) {
      out.nf4_ranks = rank_nf4(table, ocfg, queries, concept_map, role_map);
      out.ranking = ranking_metrics(out.nf4_ranks);
      out.has_ranking = true;
    }
  }
  return out;
}

}  // namespace regd
