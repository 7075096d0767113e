#include "regd/cli.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "regd/graph.hpp"
#include "regd/model.hpp"
#include "regd/ontology.hpp"
#include "regd/train.hpp"
#include "regd/verify.hpp"

namespace regd {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Shared run options; enums stay strings until the task dispatch resolves
// them so config files and flags go through one code path.
struct RunOptions {
  std::string task = "dag";
  std::string train_path;
  std::string valid_path;
  std::string test_path;
  std::string valid_pairs_path;
  std::string test_pairs_path;
  std::string valid_neg_pairs_path;
  std::string test_neg_pairs_path;
  std::string embeddings_path;
  std::string out_dir;

  std::string kind = "box";
  std::string boundary = "geometric";
  std::string base = "elbe";
  int dim = 5;
  double lambda = 0.5;
  int p = 0;
  double lr = 0.01;
  int batch_size = 32;
  int epochs = 400;
  int negatives = 10;
  double gamma1 = 0.001;
  double gamma2 = 0.0;
  std::uint64_t seed = 42;
  int eval_every = 10;
  double log_size_floor = -30.0;
  bool base_only = false;
  bool no_center_reg = false;
  double reg_weight = 0.1;
  double base_margin = 0.0;

  double threshold = std::numeric_limits<double>::quiet_NaN();

  std::string config_path;
  std::unordered_set<std::string> config_keys;

  bool dag() const { return task == "dag"; }
  bool prediction() const { return task == "ontology-prediction"; }
  bool sets(const std::string& key) const { return config_keys.count(key) > 0; }
};

TrainConfig to_train_config(const RunOptions& o) {
  TrainConfig cfg;
  cfg.kind = region_kind_from_string(o.kind);
  cfg.dim = o.dim;
  cfg.lambda = o.lambda;
  cfg.p = o.p;
  cfg.boundary = boundary_variant_from_string(o.boundary);
  cfg.lr = o.lr;
  cfg.batch_size = o.batch_size;
  cfg.epochs = o.epochs;
  cfg.negatives = o.negatives;
  cfg.gamma1 = o.gamma1;
  cfg.gamma2 = o.gamma2;
  cfg.seed = o.seed;
  cfg.eval_every = o.eval_every;
  cfg.log_size_floor = o.log_size_floor;
  cfg.base = base_model_from_string(o.base);
  cfg.use_regd = !o.base_only;
  cfg.elem_center_regularizer = !o.no_center_reg;
  cfg.reg_weight = o.reg_weight;
  cfg.base_margin = o.base_margin;
  if (!o.dag()) {
    cfg.kind = cfg.ontology_config().region_kind();
  }
  return cfg;
}

json config_json(const RunOptions& o, const TrainConfig& cfg) {
  json j;
  j["task"] = o.task;
  j["kind"] = to_string(cfg.kind);
  j["dim"] = cfg.dim;
  j["lambda"] = cfg.lambda;
  j["p"] = cfg.resolved_p();
  j["boundary"] = to_string(cfg.boundary);
  j["lr"] = cfg.lr;
  j["batch_size"] = cfg.batch_size;
  j["epochs"] = cfg.epochs;
  j["negatives"] = cfg.negatives;
  j["gamma1"] = cfg.gamma1;
  j["gamma2"] = cfg.gamma2;
  j["seed"] = cfg.seed;
  j["eval_every"] = cfg.eval_every;
  j["log_size_floor"] = cfg.log_size_floor;
  if (!o.dag()) {
    j["base"] = to_string(cfg.base);
    j["base_only"] = !cfg.use_regd;
    j["center_reg"] = cfg.elem_center_regularizer;
    j["reg_weight"] = cfg.reg_weight;
    j["base_margin"] = cfg.base_margin;
  }
  return j;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path);
  if (!os) {
    throw DataError("cannot write " + path.string());
  }
  os << j.dump(2) << '\n';
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path out(dir);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  }
  return out;
}

json finite_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// Merges per-file edge lists into one task universe: train node order first,
// then unseen valid and test ids. Training and evaluation both build the task
// this way, so the derived sampling streams coincide.
DagTask dag_task_from_files(const std::string& train_path, const std::string& valid_path,
                            const std::string& test_path) {
  Dag universe = load_edges_tsv(train_path);
  EdgeList train = universe.edges;
  const auto absorb = [&universe](const std::string& path) {
    EdgeList out;
    if (path.empty()) {
      return out;
    }
    const Dag part = load_edges_tsv(path);
    for (const auto& [u, v] : part.edges) {
      out.emplace_back(universe.add_node(part.ids[static_cast<std::size_t>(u)]),
                       universe.add_node(part.ids[static_cast<std::size_t>(v)]));
    }
    return out;
  };
  EdgeList valid = absorb(valid_path);
  EdgeList test = absorb(test_path);
  return make_dag_task(std::move(universe.ids), std::move(train), std::move(valid),
                       std::move(test));
}

// `sub<TAB>sup` per line, '#' comments; names are interned into the shared
// concept universe.
std::vector<std::pair<int, int>> load_pairs_tsv(OntologyData& data, const std::string& path) {
  std::vector<std::pair<int, int>> pairs;
  if (path.empty()) {
    return pairs;
  }
  std::ifstream is(path);
  if (!is) {
    throw DataError("cannot open " + path);
  }
  std::string line;
  long lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') {
      continue;
    }
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
      throw DataError(path + ":" + std::to_string(lineno) + ": expected sub<TAB>sup");
    }
    pairs.emplace_back(concept_index(data, line.substr(0, tab)),
                       concept_index(data, line.substr(tab + 1)));
  }
  return pairs;
}

OntologyTask ontology_task_from_files(const RunOptions& o) {
  OntologyTask task;
  task.data = load_ontology(o.train_path);
  task.train = std::move(task.data.axioms);
  task.data.axioms.clear();
  task.prediction = o.prediction();
  if (task.prediction) {
    if (!o.valid_path.empty()) {
      task.valid_axioms = load_axioms_into(task.data, o.valid_path);
    }
    if (!o.test_path.empty()) {
      task.test_axioms = load_axioms_into(task.data, o.test_path);
    }
  } else {
    task.valid_pairs = load_pairs_tsv(task.data, o.valid_pairs_path);
    task.test_pairs = load_pairs_tsv(task.data, o.test_pairs_path);
    task.valid_neg_pairs = load_pairs_tsv(task.data, o.valid_neg_pairs_path);
    task.test_neg_pairs = load_pairs_tsv(task.data, o.test_neg_pairs_path);
  }
  return task;
}

void report_missing(const EmbeddingTable& table, const std::vector<std::string>& ids) {
  std::vector<std::string> missing;
  for (const std::string& id : ids) {
    if (!table.find_node(id).has_value()) {
      missing.push_back(id);
    }
  }
  if (missing.empty()) {
    return;
  }
  std::string msg = "embeddings missing " + std::to_string(missing.size()) + " node(s):";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 10);
  for (std::size_t i = 0; i < shown; ++i) {
    msg += ' ' + missing[i];
  }
  if (shown < missing.size()) {
    msg += " ...";
  }
  throw DataError(msg);
}

json results_json(const EvalOutcome& out) {
  json j;
  j["t"] = finite_or_null(out.threshold);
  j["valid_f1"] = finite_or_null(out.valid_f1);
  if (out.has_test) {
    j["precision"] = out.test_prf.precision;
    j["recall"] = out.test_prf.recall;
    j["f1"] = out.test_prf.f1;
  } else {
    j["precision"] = nullptr;
    j["recall"] = nullptr;
    j["f1"] = nullptr;
  }
  if (out.has_ranking) {
    j["h1"] = out.ranking.hits_at_1;
    j["h10"] = out.ranking.hits_at_10;
    j["h100"] = out.ranking.hits_at_100;
    j["median"] = out.ranking.median_rank;
    j["mrr"] = out.ranking.mrr;
    j["mr"] = out.ranking.mean_rank;
    j["auc"] = out.ranking.auc;
  }
  return j;
}

int cmd_closure(const std::string& edges_path, const std::string& out_dir, const SplitSpec& spec) {
  const Dag dag = load_edges_tsv(edges_path);
  const SplitResult split = split_edges(dag, spec);
  const fs::path out = prepare_out_dir(out_dir);
  save_edges_tsv(out / "basic.tsv", dag, split.basic);
  save_edges_tsv(out / "closure.tsv", dag, split.closure);
  save_edges_tsv(out / "train.tsv", dag, split.train);
  save_edges_tsv(out / "valid.tsv", dag, split.valid);
  save_edges_tsv(out / "test.tsv", dag, split.test);

  json manifest;
  manifest["command"] = "closure";
  manifest["edges"] = edges_path;
  manifest["num_nodes"] = dag.num_nodes();
  manifest["num_edges"] = dag.edges.size();
  manifest["valid_fraction"] = spec.valid_fraction;
  manifest["test_fraction"] = spec.test_fraction;
  manifest["train_nonbasic_fraction"] = spec.train_nonbasic_fraction;
  manifest["seed"] = spec.seed;
  manifest["counts"] = {{"basic", split.basic.size()},
                        {"closure", split.closure.size()},
                        {"train", split.train.size()},
                        {"valid", split.valid.size()},
                        {"test", split.test.size()}};
  write_json(out / "manifest.json", manifest);
  std::cout << "nodes=" << dag.num_nodes() << " closure=" << split.closure.size()
            << " basic=" << split.basic.size() << " train=" << split.train.size()
            << " valid=" << split.valid.size() << " test=" << split.test.size() << '\n';
  return 0;
}

int cmd_train(const RunOptions& o) {
  const TrainConfig cfg = to_train_config(o);
  cfg.validate();
  const fs::path out = prepare_out_dir(o.out_dir);
  std::ofstream log_os(out / "train_log.jsonl");
  if (!log_os) {
    throw DataError("cannot write " + (out / "train_log.jsonl").string());
  }

  json manifest;
  manifest["command"] = "train";
  manifest["config"] = config_json(o, cfg);
  json inputs;
  inputs["train"] = o.train_path;
  double valid_f1 = std::numeric_limits<double>::quiet_NaN();
  double threshold = std::numeric_limits<double>::quiet_NaN();
  json results;

  if (o.dag()) {
    inputs["valid"] = o.valid_path.empty() ? json(nullptr) : json(o.valid_path);
    inputs["test"] = o.test_path.empty() ? json(nullptr) : json(o.test_path);
    const DagTask task = dag_task_from_files(o.train_path, o.valid_path, o.test_path);
    const TrainOutcome res = train_dag(task, cfg, &log_os);
    res.table.save(out / "embeddings.txt");
    valid_f1 = res.valid_f1;
    threshold = res.threshold;
    results["valid_f1"] = finite_or_null(res.valid_f1);
    results["t"] = finite_or_null(res.threshold);
    if (res.has_test) {
      results["test"] = {{"precision", res.test_prf.precision},
                         {"recall", res.test_prf.recall},
                         {"f1", res.test_prf.f1}};
    } else {
      results["test"] = nullptr;
    }
  } else {
    if (o.prediction()) {
      inputs["valid_axioms"] = o.valid_path.empty() ? json(nullptr) : json(o.valid_path);
      inputs["test_axioms"] = o.test_path.empty() ? json(nullptr) : json(o.test_path);
    } else {
      const auto opt = [](const std::string& p) { return p.empty() ? json(nullptr) : json(p); };
      inputs["valid_pairs"] = opt(o.valid_pairs_path);
      inputs["test_pairs"] = opt(o.test_pairs_path);
      inputs["valid_neg_pairs"] = opt(o.valid_neg_pairs_path);
      inputs["test_neg_pairs"] = opt(o.test_neg_pairs_path);
    }
    const OntologyTask task = ontology_task_from_files(o);
    const OntologyOutcome res = train_ontology(task, cfg, &log_os);
    res.table.save(out / "embeddings.txt");
    valid_f1 = res.valid_f1;
    threshold = res.threshold;
    results["valid_f1"] = finite_or_null(res.valid_f1);
    results["t"] = finite_or_null(res.threshold);
    if (res.has_test) {
      results["test"] = {{"precision", res.test_prf.precision},
                         {"recall", res.test_prf.recall},
                         {"f1", res.test_prf.f1}};
    } else {
      results["test"] = nullptr;
    }
    if (res.has_ranking) {
      results["ranking"] = {{"h1", res.ranking.hits_at_1},     {"h10", res.ranking.hits_at_10},
                            {"h100", res.ranking.hits_at_100}, {"median", res.ranking.median_rank},
                            {"mrr", res.ranking.mrr},          {"mr", res.ranking.mean_rank},
                            {"auc", res.ranking.auc}};
    }
  }
  manifest["inputs"] = inputs;
  manifest["results"] = results;
  write_json(out / "manifest.json", manifest);
  std::cout << "valid_f1=" << valid_f1 << " t=" << threshold << '\n';
  return 0;
}

int cmd_eval(const RunOptions& o, bool threshold_given) {
  const TrainConfig base_cfg = to_train_config(o);
  const EmbeddingTable table = EmbeddingTable::load(o.embeddings_path);
  const std::optional<double> threshold =
      threshold_given ? std::optional<double>(o.threshold) : std::nullopt;
  const fs::path out = prepare_out_dir(o.out_dir);

  EvalOutcome res;
  json inputs;
  inputs["embeddings"] = o.embeddings_path;
  inputs["train"] = o.train_path;
  TrainConfig cfg = base_cfg;
  if (o.dag()) {
    const DagTask task = dag_task_from_files(o.train_path, o.valid_path, o.test_path);
    report_missing(table, task.ids);
    cfg.kind = table.kind();
    cfg.dim = table.dim();
    res = evaluate_dag(task, cfg, table, threshold);
    inputs["valid"] = o.valid_path.empty() ? json(nullptr) : json(o.valid_path);
    inputs["test"] = o.test_path.empty() ? json(nullptr) : json(o.test_path);
  } else {
    const OntologyTask task = ontology_task_from_files(o);
    report_missing(table, task.data.concepts);
    cfg.dim = table.dim();
    res = evaluate_ontology(task, cfg, table, threshold);
    if (o.prediction()) {
      inputs["valid_axioms"] = o.valid_path.empty() ? json(nullptr) : json(o.valid_path);
      inputs["test_axioms"] = o.test_path.empty() ? json(nullptr) : json(o.test_path);
      std::ofstream pred_os(out / "predictions.tsv");
      if (!pred_os) {
        throw DataError("cannot write " + (out / "predictions.tsv").string());
      }
      pred_os << "# role\tfiller\tsuperclass\trank\tcandidates\n";
      std::size_t next = 0;
      for (const NormalizedAxiom& ax : task.test_axioms) {
        if (ax.nf != NormalForm::NF4 || next >= res.nf4_ranks.size()) {
          continue;
        }
        const RankResult& rr = res.nf4_ranks[next++];
        pred_os << task.data.roles[static_cast<std::size_t>(ax.role)] << '\t'
                << task.data.concepts[static_cast<std::size_t>(ax.b)] << '\t'
                << task.data.concepts[static_cast<std::size_t>(ax.a)] << '\t' << rr.rank << '\t'
                << rr.count << '\n';
      }
    } else {
      const auto opt = [](const std::string& p) { return p.empty() ? json(nullptr) : json(p); };
      inputs["valid_pairs"] = opt(o.valid_pairs_path);
      inputs["test_pairs"] = opt(o.test_pairs_path);
      inputs["valid_neg_pairs"] = opt(o.valid_neg_pairs_path);
      inputs["test_neg_pairs"] = opt(o.test_neg_pairs_path);
    }
  }

  const json metrics = results_json(res);
  write_json(out / "metrics.json", metrics);
  json manifest;
  manifest["command"] = "eval";
  manifest["config"] = config_json(o, cfg);
  manifest["inputs"] = inputs;
  manifest["results"] = metrics;
  write_json(out / "manifest.json", manifest);
  std::cout << metrics.dump() << '\n';
  return 0;
}

int cmd_verify() {
  const auto reports = run_all_verifications(&std::cout);
  for (const PropertyReport& r : reports) {
    if (!r.pass) {
      return 3;
    }
  }
  return 0;
}

void add_run_options(CLI::App* cmd, RunOptions& o, bool for_eval) {
  cmd->add_option("--config", o.config_path, "key=value file; command-line flags win");
  cmd->add_option("--task", o.task, "dag, ontology-inference, or ontology-prediction")
      ->check(CLI::IsMember({"dag", "ontology-inference", "ontology-prediction"}))
      ->capture_default_str();
  cmd->add_option("--train", o.train_path,
                  "training edges TSV (dag) or normalized axiom file (ontology)")
      ->required();
  cmd->add_option("--valid", o.valid_path, "validation edges TSV or axiom file");
  cmd->add_option("--test", o.test_path, "test edges TSV or axiom file");
  cmd->add_option("--valid-pairs", o.valid_pairs_path,
                  "validation subsumption pairs TSV (ontology-inference)");
  cmd->add_option("--test-pairs", o.test_pairs_path, "test subsumption pairs TSV");
  cmd->add_option("--valid-neg-pairs", o.valid_neg_pairs_path,
                  "explicit validation negatives; overrides sampling");
  cmd->add_option("--test-neg-pairs", o.test_neg_pairs_path, "explicit test negatives");
  cmd->add_option("--out", o.out_dir, "output directory")->required();

  cmd->add_option("--kind", o.kind, "region shape (dag task; ontologies derive it from --base)")
      ->check(CLI::IsMember({"ball", "box"}))
      ->capture_default_str();
  cmd->add_option("--dim", o.dim, "embedding dimension")->capture_default_str();
  cmd->add_option("--lambda", o.lambda, "depth term weight; 0 skips depth entirely")
      ->capture_default_str();
  cmd->add_option("--p", o.p, "depth norm exponent; 0 resolves to 1 for boxes, 2 for balls")
      ->check(CLI::IsMember({0, 1, 2}))
      ->capture_default_str();
  cmd->add_option("--boundary", o.boundary, "boundary dissimilarity variant")
      ->check(CLI::IsMember({"geometric", "volume", "cone"}))
      ->capture_default_str();
  cmd->add_option("--base", o.base, "ontology base model: elbe boxes or elem balls")
      ->check(CLI::IsMember({"elbe", "elem"}))
      ->capture_default_str();

  if (for_eval) {
    cmd->add_option("--threshold", o.threshold,
                    "decision threshold; omit to sweep on the validation pool");
  }
  cmd->add_option("--epochs", o.epochs, "training epochs")->capture_default_str();
  cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--batch-size", o.batch_size, "positives per batch")->capture_default_str();
  cmd->add_option("--negatives", o.negatives, "corruptions per positive")->capture_default_str();
  cmd->add_option("--gamma1", o.gamma1, "floor of each positive loss term")
      ->capture_default_str();
  cmd->add_option("--gamma2", o.gamma2, "margin of the negative hinge")->capture_default_str();
  cmd->add_option("--seed", o.seed, "run seed; fixes init, shuffling, and corruption streams")
      ->capture_default_str();
  cmd->add_option("--eval-every", o.eval_every, "epochs between validation sweeps; 0 = final only")
      ->capture_default_str();
  cmd->add_option("--log-size-floor", o.log_size_floor, "lower clamp on log sizes after each step")
      ->capture_default_str();
  cmd->add_flag("--base-only", o.base_only,
                "score axioms with the plain base margin loss instead of the region energy");
  cmd->add_flag("--no-center-reg", o.no_center_reg, "disable the elem center norm regularizer");
  cmd->add_option("--reg-weight", o.reg_weight, "weight of the elem center regularizer")
      ->capture_default_str();
  cmd->add_option("--base-margin", o.base_margin, "margin of the plain base loss")
      ->capture_default_str();
}

// Applies a key=value config file after parsing; flags already given on the
// command line keep their values. Unknown keys and bad values surface as
// parse errors. Ontologies then default to the long epoch schedule unless
// epochs came from a flag or the file.
void finish_run_options(CLI::App* cmd, RunOptions& o) {
  if (!o.config_path.empty()) {
    std::ifstream is(o.config_path);
    if (!is) {
      throw CLI::FileError("cannot open config file " + o.config_path);
    }
    const auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    std::string line;
    long lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped.front() == '#') {
        continue;
      }
      const auto eq = stripped.find('=');
      const std::string where = o.config_path + ":" + std::to_string(lineno);
      if (eq == std::string::npos) {
        throw CLI::ConfigError(where + ": expected key=value");
      }
      const std::string key = trim(stripped.substr(0, eq));
      const std::string value = trim(stripped.substr(eq + 1));
      if (key.empty() || key == "config") {
        throw CLI::ConfigError(where + ": bad key");
      }
      CLI::Option* op = cmd->get_option_no_throw("--" + key);
      if (op == nullptr) {
        throw CLI::ConfigError(where + ": unknown key " + key);
      }
      o.config_keys.insert(key);
      if (op->count() > 0) {
        continue;  // flag wins
      }
      op->add_result(value);
      op->run_callback();
    }
  }
  if (o.task != "dag" && cmd->count("--epochs") == 0 && !o.sets("epochs")) {
    o.epochs = 5000;
  }
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  CLI::App app{"region embeddings for hierarchies and normalized ontologies"};
  app.require_subcommand(1);

  std::string edges_path;
  std::string closure_out;
  SplitSpec spec;
  CLI::App* closure = app.add_subcommand(
      "closure", "compute the transitive closure and a basic/valid/test edge split");
  closure->add_option("--edges", edges_path, "input edges TSV, parent<TAB>child")->required();
  closure->add_option("--out", closure_out, "output directory")->required();
  closure->add_option("--valid-fraction", spec.valid_fraction, "share of non-basic closure edges")
      ->capture_default_str();
  closure->add_option("--test-fraction", spec.test_fraction, "share of non-basic closure edges")
      ->capture_default_str();
  closure
      ->add_option("--train-nonbasic-fraction", spec.train_nonbasic_fraction,
                   "extra non-basic share appended to the training set")
      ->capture_default_str();
  closure->add_option("--seed", spec.seed, "split seed")->capture_default_str();

  RunOptions train_opts;
  CLI::App* train = app.add_subcommand("train", "fit region embeddings and persist them");
  add_run_options(train, train_opts, false);

  RunOptions eval_opts;
  CLI::App* eval = app.add_subcommand("eval", "score a stored embedding table on held-out data");
  add_run_options(eval, eval_opts, true);
  eval->add_option("--embeddings", eval_opts.embeddings_path, "stored embedding table")
      ->required();

  CLI::App* verify =
      app.add_subcommand("verify", "run the geometric and gradient property suites");

  try {
    app.parse(argc, argv);
    if (train->parsed()) {
      finish_run_options(train, train_opts);
    }
    if (eval->parsed()) {
      finish_run_options(eval, eval_opts);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (closure->parsed()) {
      return cmd_closure(edges_path, closure_out, spec);
    }
    if (train->parsed()) {
      return cmd_train(train_opts);
    }
    if (eval->parsed()) {
      const bool threshold_given = eval->count("--threshold") > 0 || eval_opts.sets("threshold");
      return cmd_eval(eval_opts, threshold_given);
    }
    if (verify->parsed()) {
      return cmd_verify();
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace regd
