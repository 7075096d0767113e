#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "regd/errors.hpp"
#include "regd/ontology.hpp"
#include "regd/optim.hpp"
#include "regd/train.hpp"

using namespace regd;

namespace {

std::filesystem::path write_axioms(const std::string& name, const std::string& body) {
  const auto dir = std::filesystem::temp_directory_path() / "regd_onto_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / name;
  std::ofstream(path) << body;
  return path;
}

OntologyConfig box_config(bool use_regd) {
  OntologyConfig cfg;
  cfg.base = BaseModel::Elbe;
  cfg.use_regd = use_regd;
  cfg.energy.lambda = 0.5;
  cfg.energy.depth = DepthConfig::linear(RegionKind::Box);
  return cfg;
}

OntologyConfig ball_config(bool use_regd) {
  OntologyConfig cfg;
  cfg.base = BaseModel::Elem;
  cfg.use_regd = use_regd;
  cfg.energy.lambda = 0.5;
  cfg.energy.depth = DepthConfig::linear(RegionKind::Ball);
  return cfg;
}

}  // namespace

TEST_CASE("axiom files parse all four normal forms") {
  const auto path = write_axioms("forms.txt",
                                 "# hierarchy\n"
                                 "nf1 A B\n"
                                 "nf2 A B C\n"
                                 "nf3 A hasPart B\n"
                                 "nf4 hasPart B D\n"
                                 "\n");
  const OntologyData data = load_ontology(path);
  REQUIRE(data.axioms.size() == 4);
  CHECK(data.concepts == std::vector<std::string>{"A", "B", "C", "D"});
  CHECK(data.roles == std::vector<std::string>{"hasPart"});

  CHECK(data.axioms[0].nf == NormalForm::NF1);
  CHECK(data.axioms[0].a == 0);
  CHECK(data.axioms[0].b == 1);

  CHECK(data.axioms[1].nf == NormalForm::NF2);
  CHECK(data.axioms[1].c == 2);

  CHECK(data.axioms[2].nf == NormalForm::NF3);
  CHECK(data.axioms[2].role == 0);
  CHECK(data.axioms[2].b == 1);

  // nf4 lists role, filler, then the named superclass.
  CHECK(data.axioms[3].nf == NormalForm::NF4);
  CHECK(data.axioms[3].b == 1);
  CHECK(data.axioms[3].a == 3);
}

TEST_CASE("axiom parse errors carry the line number") {
  SUBCASE("unknown form") {
    const auto path = write_axioms("bad_form.txt", "nf1 A B\nnf9 A B\n");
    try {
      load_ontology(path);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      const std::string msg = e.what();
      CHECK(msg.find(":2:") != std::string::npos);
      CHECK(msg.find("nf9") != std::string::npos);
    }
  }
  SUBCASE("wrong arity") {
    const auto path = write_axioms("arity.txt", "nf2 A B\n");
    CHECK_THROWS_AS(load_ontology(path), DataError);
  }
}

TEST_CASE("several axiom files share one universe") {
  const auto train = write_axioms("tr.txt", "nf1 A B\n");
  const auto valid = write_axioms("va.txt", "nf1 B C\nnf3 A r B\n");
  OntologyData data;
  const auto train_ax = load_axioms_into(data, train);
  const auto valid_ax = load_axioms_into(data, valid);
  CHECK(train_ax.size() == 1);
  CHECK(valid_ax.size() == 2);
  CHECK(data.concepts == std::vector<std::string>{"A", "B", "C"});
  CHECK(data.roles == std::vector<std::string>{"r"});
  CHECK(valid_ax[0].a == 1);  // B kept the id assigned by the first file
  CHECK(concept_index(data, "C") == 2);
  CHECK(concept_index(data, "Z") == 3);
}

TEST_CASE("existential translation shifts only the center") {
  const Region b = Region::box({0.25, -0.5}, {1.0, 2.0});
  const Vec v = {0.5, -0.25};

  const Region fwd = translated_region(b, v);
  CHECK(fwd.center[0] == 0.25 - 0.5);
  CHECK(fwd.center[1] == -0.5 + 0.25);
  CHECK(fwd.size[0] == b.size[0]);
  CHECK(fwd.size[1] == b.size[1]);
  CHECK(fwd.log_size[0] == b.log_size[0]);

  // Power-of-two coordinates make the round trip exact.
  const Region back = translated_region(fwd, v, true);
  CHECK(back.center[0] == b.center[0]);
  CHECK(back.center[1] == b.center[1]);

  const Vec zero = {0.0, 0.0};
  const Region same = translated_region(b, zero);
  CHECK(same.center == b.center);

  const Vec wrong_dim = {1.0};
  CHECK_THROWS_AS(translated_region(b, wrong_dim), std::invalid_argument);
}

TEST_CASE("pseudo intersection box") {
  const Region a = Region::box({0.0, 0.0}, {1.0, 1.0});

  SUBCASE("overlapping boxes keep the exact intersection") {
    const Region b = Region::box({1.0, 0.5}, {1.0, 1.0});
    double penalty = -1.0;
    const Region inter = pseudo_intersection_box(a, b, &penalty);
    CHECK(penalty == 0.0);
    CHECK(inter.center[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(inter.size[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(inter.center[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(inter.size[1] == doctest::Approx(0.75).epsilon(1e-15));
  }
  SUBCASE("disjoint dimension floors the offset and pays the gap") {
    const Region b = Region::box({5.0, 0.0}, {1.0, 1.0});  // gap of 3 in dim 0
    double penalty = 0.0;
    const Region inter = pseudo_intersection_box(a, b, &penalty);
    CHECK(penalty == 3.0);
    CHECK(inter.size[0] == kPseudoFloor);
    CHECK(inter.size[1] == 1.0);
  }
  SUBCASE("self intersection is the box itself") {
    double penalty = 1.0;
    const Region inter = pseudo_intersection_box(a, a, &penalty);
    CHECK(penalty == 0.0);
    CHECK(inter.center == a.center);
    CHECK(inter.size == a.size);
  }
  SUBCASE("balls are rejected") {
    const Region ball = Region::ball({0.0, 0.0}, 1.0);
    CHECK_THROWS_AS(pseudo_intersection_box(ball, ball, nullptr), std::invalid_argument);
  }
}

TEST_CASE("pseudo midpoint ball") {
  SUBCASE("overlapping balls") {
    const Region a = Region::ball({0.0, 0.0}, 2.0);
    const Region b = Region::ball({2.0, 0.0}, 1.0);
    double penalty = -1.0;
    const Region mid = pseudo_midpoint_ball(a, b, &penalty);
    CHECK(penalty == 0.0);
    CHECK(mid.center[0] == 1.0);
    CHECK(mid.center[1] == 0.0);
    CHECK(mid.radius() == 0.5);  // (2 + 1 - 2) / 2
  }
  SUBCASE("disjoint balls floor the radius and pay the gap") {
    const Region a = Region::ball({0.0, 0.0}, 1.0);
    const Region b = Region::ball({6.0, 0.0}, 2.0);
    double penalty = 0.0;
    const Region mid = pseudo_midpoint_ball(a, b, &penalty);
    CHECK(penalty == 3.0);
    CHECK(mid.radius() == kPseudoFloor);
    CHECK(mid.center[0] == 3.0);
  }
}

TEST_CASE("base inclusion scores") {
  SUBCASE("box score is the hinged boundary norm") {
    EmbeddingTable table(RegionKind::Box, 2, {"A", "B"});
    table.set_node(0, Region::box({2.0, 0.0}, {1.0, 1.0}));
    table.set_node(1, Region::box({0.0, 0.0}, {1.0, 1.0}));
    const OntologyConfig cfg = box_config(false);
    const NormalizedAxiom ax{NormalForm::NF1, 0, 1, -1, -1};  // A subsumed by B
    CHECK(axiom_energy(ax, table, cfg) == 2.0);
    const NormalizedAxiom self{NormalForm::NF1, 1, 1, -1, -1};
    CHECK(axiom_energy(self, table, cfg) == 0.0);
  }
  SUBCASE("ball score hinges at containment") {
    EmbeddingTable table(RegionKind::Ball, 2, {"A", "B"});
    table.set_node(0, Region::ball({0.0, 0.0}, 1.0));
    table.set_node(1, Region::ball({0.0, 0.0}, 2.0));
    const OntologyConfig cfg = ball_config(false);
    const NormalizedAxiom ax{NormalForm::NF1, 0, 1, -1, -1};
    CHECK(axiom_energy(ax, table, cfg) == 0.0);  // contained, no push
    const NormalizedAxiom flipped{NormalForm::NF1, 1, 0, -1, -1};
    CHECK(axiom_energy(flipped, table, cfg) == 1.0);
  }
}

TEST_CASE("nf2 with equal conjuncts reduces to nf1") {
  EmbeddingTable table(RegionKind::Box, 3, {"A", "B", "C"});
  table.set_node(0, Region::box({0.1, -0.2, 0.4}, {0.3, 0.5, 0.2}));
  table.set_node(1, Region::box({0.15, -0.1, 0.3}, {0.4, 0.3, 0.6}));
  table.set_node(2, Region::box({0.0, 0.0, 0.0}, {1.0, 1.2, 1.4}));
  const OntologyConfig cfg = box_config(true);
  const NormalizedAxiom nf2{NormalForm::NF2, 0, 0, 2, -1};
  const NormalizedAxiom nf1{NormalForm::NF1, 0, 2, -1, -1};
  CHECK(axiom_energy(nf2, table, cfg) ==
        doctest::Approx(axiom_energy(nf1, table, cfg)).epsilon(1e-12));
}

TEST_CASE("axiom energies are invariant under joint translation") {
  // Shifting every center (and leaving role vectors alone) must not change
  // any axiom energy: the model only sees relative positions.
  EmbeddingTable table(RegionKind::Box, 2, {"A", "B", "C"}, {"r"});
  table.init_random(3);
  EmbeddingTable shifted = table;
  const Vec delta = {0.75, -1.25};
  for (int node = 0; node < 3; ++node) {
    const std::size_t off = shifted.node_offset(node);
    for (int d = 0; d < 2; ++d) shifted.params()[off + d] += delta[d];
  }
  shifted.refresh_sizes();

  const OntologyConfig cfg = box_config(true);
  const std::vector<NormalizedAxiom> axioms = {
      {NormalForm::NF1, 0, 1, -1, -1},
      {NormalForm::NF2, 0, 1, 2, -1},
      {NormalForm::NF3, 0, 1, -1, 0},
      {NormalForm::NF4, 2, 1, -1, 0},
  };
  for (const auto& ax : axioms) {
    CHECK(axiom_energy(ax, table, cfg) ==
          doctest::Approx(axiom_energy(ax, shifted, cfg)).epsilon(1e-12));
  }
}

TEST_CASE("contrastive ontology loss sits on the floor when satisfied") {
  EmbeddingTable table(RegionKind::Box, 2, {"A", "B", "C"});
  table.set_node(0, Region::box({0.0, 0.0}, {0.5, 0.5}));
  table.set_node(1, Region::box({0.0, 0.0}, {2.0, 2.0}));   // A inside B, slack 1.5
  table.set_node(2, Region::box({9.0, 0.0}, {0.5, 0.5}));   // far decoy
  OntologyConfig cfg = box_config(true);
  cfg.energy.gamma2 = 0.0;
  OntologyBatch batch;
  batch.positives = {{NormalForm::NF1, 0, 1, -1, -1}};
  batch.negatives = {{{NormalForm::NF1, 2, 1, -1, -1}}};
  // Positive energy is negative, so it is floored at gamma1; the lone negative
  // has a positive boundary, so its hinge is 0 and log sum exp is log 1 = 0.
  CHECK(ontology_batch_loss(table, batch, cfg) == cfg.energy.gamma1);
}

TEST_CASE("plain margin loss accumulates signed scores") {
  EmbeddingTable table(RegionKind::Box, 2, {"A", "B", "C"});
  table.set_node(0, Region::box({0.0, 0.0}, {0.5, 0.5}));
  table.set_node(1, Region::box({0.0, 0.0}, {1.0, 1.0}));
  table.set_node(2, Region::box({4.0, 0.0}, {0.5, 0.5}));
  OntologyConfig cfg = box_config(false);
  cfg.base_margin = 1.0;
  OntologyBatch batch;
  batch.positives = {{NormalForm::NF1, 0, 1, -1, -1}};
  batch.negatives = {{{NormalForm::NF1, 2, 1, -1, -1}}};
  // Positive score 0 (contained); negative score |4| + 0.5 - 1 = 3.5 in dim 0.
  CHECK(ontology_batch_loss(table, batch, cfg) == 1.0 - 3.5);
}

TEST_CASE("center regularizer charges each distinct concept once") {
  EmbeddingTable table(RegionKind::Ball, 2, {"A", "B"});
  table.set_node(0, Region::ball({2.0, 0.0}, 1.0));   // center norm 2
  table.set_node(1, Region::ball({0.0, 0.0}, 0.5));   // center norm 0
  OntologyConfig cfg = ball_config(false);
  cfg.base_margin = 0.0;
  REQUIRE(cfg.elem_center_regularizer);
  REQUIRE(cfg.reg_weight == 0.1);

  OntologyBatch batch;
  batch.positives = {{NormalForm::NF1, 0, 1, -1, -1}};
  batch.negatives = {{}};
  // score = (2 + 1) - 0.5 = 2.5, regularizer 0.1 * (|2-1| + |0-1|) = 0.2.
  CHECK(ontology_batch_loss(table, batch, cfg) == doctest::Approx(2.7).epsilon(1e-14));

  // Repeating the same positive doubles the score, not the regularizer.
  batch.positives.push_back(batch.positives[0]);
  batch.negatives.push_back({});
  CHECK(ontology_batch_loss(table, batch, cfg) == doctest::Approx(5.2).epsilon(1e-14));

  cfg.elem_center_regularizer = false;
  CHECK(ontology_batch_loss(table, batch, cfg) == doctest::Approx(5.0).epsilon(1e-14));
}

TEST_CASE("ontology loss gradients match finite differences") {
  const auto check_grad = [](EmbeddingTable& table, const OntologyBatch& batch,
                             const OntologyConfig& cfg) {
    Vec grad(table.num_params());
    const double val = ontology_batch_loss_grad(table, batch, cfg, grad);
    CHECK(val == ontology_batch_loss(table, batch, cfg));

    EmbeddingTable probe = table;
    const auto f = [&](std::span<const double> params) {
      std::copy(params.begin(), params.end(), probe.params().begin());
      probe.refresh_sizes();
      return ontology_batch_loss(probe, batch, cfg);
    };
    const Vec fd = finite_difference(f, table.params());
    REQUIRE(fd.size() == grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) {
      const double scale = std::max({1.0, std::abs(grad[i]), std::abs(fd[i])});
      CHECK(std::abs(grad[i] - fd[i]) / scale <= 1e-4);
    }
  };

  SUBCASE("boxes, full contrastive batch over all forms") {
    EmbeddingTable table(RegionKind::Box, 3, {"A", "B", "C", "D"}, {"r"});
    table.init_random(41);
    OntologyConfig cfg = box_config(true);
    cfg.energy.gamma2 = 1.0;
    OntologyBatch batch;
    batch.positives = {
        {NormalForm::NF1, 0, 1, -1, -1},
        {NormalForm::NF2, 0, 1, 2, -1},
        {NormalForm::NF3, 2, 3, -1, 0},
        {NormalForm::NF4, 1, 3, -1, 0},
    };
    batch.negatives = {
        {{NormalForm::NF1, 3, 1, -1, -1}, {NormalForm::NF1, 2, 1, -1, -1}},
        {{NormalForm::NF2, 3, 1, 2, -1}},
        {{NormalForm::NF3, 0, 3, -1, 0}},
        {{NormalForm::NF4, 1, 0, -1, 0}},
    };
    check_grad(table, batch, cfg);
  }
  SUBCASE("balls, base margin mode with the regularizer") {
    EmbeddingTable table(RegionKind::Ball, 3, {"A", "B", "C"}, {"r"});
    table.init_random(43);
    OntologyConfig cfg = ball_config(false);
    cfg.base_margin = 0.5;
    OntologyBatch batch;
    batch.positives = {
        {NormalForm::NF1, 0, 1, -1, -1},
        {NormalForm::NF2, 0, 1, 2, -1},
        {NormalForm::NF3, 1, 2, -1, 0},
    };
    batch.negatives = {
        {{NormalForm::NF1, 2, 1, -1, -1}},
        {},
        {{NormalForm::NF4, 0, 2, -1, 0}},
    };
    check_grad(table, batch, cfg);
  }
}

TEST_CASE("nf4 ranking orders candidates by axiom energy") {
  EmbeddingTable table(RegionKind::Box, 2, {"A", "B", "C"}, {"r"});
  table.set_node(0, Region::box({0.0, 0.0}, {2.0, 2.0}));
  table.set_node(1, Region::box({0.0, 0.0}, {0.5, 0.5}));
  table.set_node(2, Region::box({6.0, 0.0}, {1.0, 1.0}));
  const Vec role = {0.0, 0.0};
  table.set_role(0, role);
  const OntologyConfig cfg = box_config(true);

  const std::vector<int> concept_map = {0, 1, 2};
  const std::vector<int> role_map = {0};
  const std::vector<NormalizedAxiom> queries = {{NormalForm::NF4, 0, 1, -1, 0}};
  const auto ranks = rank_nf4(table, cfg, queries, concept_map, role_map);
  REQUIRE(ranks.size() == 1);
  CHECK(ranks[0].count == 3);

  // The oracle: score every candidate superclass directly.
  std::vector<double> scores(3);
  for (int c = 0; c < 3; ++c) {
    scores[c] = axiom_energy({NormalForm::NF4, c, 1, -1, 0}, table, cfg);
  }
  CHECK(ranks[0].rank == pessimistic_rank(scores, 0));
  CHECK(ranks[0].rank == 1);  // A contains the translated filler, C is far

  const std::vector<NormalizedAxiom> bad = {{NormalForm::NF1, 0, 1, -1, -1}};
  CHECK_THROWS_AS(rank_nf4(table, cfg, bad, concept_map, role_map), DataError);
}
