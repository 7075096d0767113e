#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>

#include "regd/eval.hpp"
#include "regd/graph.hpp"
#include "regd/model.hpp"
#include "regd/ontology.hpp"

namespace regd {

struct TrainConfig {
  RegionKind kind = RegionKind::Box;
  int dim = 5;
  double lambda = 0.5;
  int p = 0;  // 0 resolves to 1 for boxes, 2 for balls
  BoundaryVariant boundary = BoundaryVariant::Geometric;
  double lr = 0.01;
  int batch_size = 32;
  int epochs = 400;
  int negatives = 10;
  double gamma1 = 0.001;
  double gamma2 = 0.0;
  std::uint64_t seed = 42;
  int eval_every = 10;
  double log_size_floor = -30.0;  // guards runaway shrinkage after Adam steps
  // Ontology-only settings.
  BaseModel base = BaseModel::Elbe;
  bool use_regd = true;
  bool elem_center_regularizer = true;
  double reg_weight = 0.1;
  double base_margin = 0.0;

  int resolved_p() const { return p != 0 ? p : (kind == RegionKind::Box ? 1 : 2); }
  EnergyConfig energy_config() const;
  OntologyConfig ontology_config() const;
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;
  bool evaluated = false;
  double valid_f1 = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
};

// One hierarchy run: node universe, edge splits, and the pair sets used to
// filter corruptions (training positives while training, the full closure of
// all supplied edges at evaluation time).
struct DagTask {
  std::vector<std::string> ids;
  EdgeList train;
  EdgeList valid;
  EdgeList test;
  std::unordered_set<std::int64_t> train_pairs;
  std::unordered_set<std::int64_t> known_pairs;
};

DagTask make_dag_task(std::vector<std::string> ids, EdgeList train, EdgeList valid, EdgeList test);
DagTask dag_task_from_split(const Dag& dag, const SplitResult& split);

// Fixed evaluation pool: one corruption set per positive, sampled once so
// training-time and standalone evaluation agree exactly.
struct PairPool {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::vector<int>> negatives;
};

PairPool build_eval_pool(const EdgeList& positives, const NegativeSampler& sampler, int k,
                         std::uint64_t seed);
std::vector<ScoredPair> score_pool(const EmbeddingTable& table, const EnergyConfig& cfg,
                                   const PairPool& pool);

struct TrainOutcome {
  EmbeddingTable table;
  std::vector<EpochLog> log = {};
  double valid_f1 = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  Prf test_prf = {};
  bool has_test = false;
};

TrainOutcome train_dag(const DagTask& task, const TrainConfig& cfg, std::ostream* jsonl = nullptr);

// Deterministic seeds for the corruption streams derived from the run seed.
std::uint64_t train_stream_seed(std::uint64_t seed);
std::uint64_t valid_stream_seed(std::uint64_t seed);
std::uint64_t test_stream_seed(std::uint64_t seed);

// Ontology run. Inference mode scores subsumption pairs (sub, sup); explicit
// negative pair lists override sampling when present. Prediction mode scores
// held-out axioms and ranks the superclass of NF4 queries over all concepts.
struct OntologyTask {
  OntologyData data;
  std::vector<NormalizedAxiom> train;
  std::vector<std::pair<int, int>> valid_pairs;
  std::vector<std::pair<int, int>> test_pairs;
  std::vector<std::pair<int, int>> valid_neg_pairs;
  std::vector<std::pair<int, int>> test_neg_pairs;
  std::vector<NormalizedAxiom> valid_axioms;
  std::vector<NormalizedAxiom> test_axioms;
  bool prediction = false;
};

struct OntologyOutcome {
  EmbeddingTable table;
  std::vector<EpochLog> log = {};
  double valid_f1 = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  Prf test_prf = {};
  bool has_test = false;
  RankingMetrics ranking = {};
  bool has_ranking = false;
};

OntologyOutcome train_ontology(const OntologyTask& task, const TrainConfig& cfg,
                               std::ostream* jsonl = nullptr);

// Standalone evaluation of a stored table on a task. The corruption pools are
// rebuilt from the task with the same derived stream seeds the trainer uses,
// so evaluating right after training reproduces the reported numbers exactly.
// Without an explicit threshold the sweep runs on the validation pool.
struct EvalOutcome {
  double valid_f1 = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  Prf test_prf;
  bool has_test = false;
  RankingMetrics ranking;
  bool has_ranking = false;
  std::vector<RankResult> nf4_ranks;  // aligned with the NF4 axioms of test_axioms
};

EvalOutcome evaluate_dag(const DagTask& task, const TrainConfig& cfg, const EmbeddingTable& table,
                         std::optional<double> threshold = {});
EvalOutcome evaluate_ontology(const OntologyTask& task, const TrainConfig& cfg,
                              const EmbeddingTable& table,
                              std::optional<double> threshold = {});

// Rank of each axiom's superclass against every concept (ids in task space;
// concept_map/role_map translate them to table rows). Every axiom must name
// an existential superclass query.
std::vector<RankResult> rank_nf4(const EmbeddingTable& table, const OntologyConfig& cfg,
                                 std::span<const NormalizedAxiom> axioms,
                                 std::span<const int> concept_map, std::span<const int> role_map);

}  // namespace regd
