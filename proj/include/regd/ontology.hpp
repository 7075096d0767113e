#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "regd/model.hpp"

namespace regd {

// Normal forms of a normalized EL ontology. Field use per form:
//   NF1  A ⊑ B        -> a = A, b = B
//   NF2  A ⊓ B ⊑ C    -> a = A, b = B, c = C
//   NF3  A ⊑ ∃r.B     -> a = A, b = B, role = r
//   NF4  ∃r.B ⊑ A     -> a = A, b = B, role = r
enum class NormalForm { NF1, NF2, NF3, NF4 };

struct NormalizedAxiom {
  NormalForm nf = NormalForm::NF1;
  int a = -1;
  int b = -1;
  int c = -1;
  int role = -1;

  bool operator==(const NormalizedAxiom&) const = default;
};

// Parsed axiom file: `nf1 A B`, `nf2 A B C`, `nf3 A r B`, `nf4 r B A`, one
// per line, whitespace-separated, '#' comments.
struct OntologyData {
  std::vector<std::string> concepts;
  std::vector<std::string> roles;
  std::vector<NormalizedAxiom> axioms;
};

OntologyData load_ontology(const std::filesystem::path& path);

// Parses one axiom file, extending data's concept/role universe with any new
// names, and returns just that file's axioms. Lets several files (train,
// valid, test) share one indexing.
std::vector<NormalizedAxiom> load_axioms_into(OntologyData& data,
                                              const std::filesystem::path& path);

int concept_index(OntologyData& data, const std::string& name);
int role_index(OntologyData& data, const std::string& name);

enum class BaseModel { Elbe, Elem };

std::string to_string(BaseModel m);
BaseModel base_model_from_string(const std::string& s);

// Pseudo-region size floor for empty NF2 intersections.
inline constexpr double kPseudoFloor = 1e-8;

struct OntologyConfig {
  BaseModel base = BaseModel::Elbe;  // Elbe embeds boxes, Elem balls
  bool use_regd = true;              // off: plain margin loss over base energies
  bool elem_center_regularizer = true;
  double reg_weight = 0.1;   // rho of the |‖c‖ - 1| center regularizer
  double base_margin = 0.0;  // gamma of the plain margin loss
  EnergyConfig energy;

  RegionKind region_kind() const {
    return base == BaseModel::Elbe ? RegionKind::Box : RegionKind::Ball;
  }
  void validate(RegionKind table_kind) const;
};

// Existential restriction ∃r.B as the filler region shifted by the role
// vector: center - v (forward) or center + v (inverse). Sizes pass through
// bitwise.
Region translated_region(RegionView reg, std::span<const double> role_vec, bool inverse = false);

// NF2 effective child for boxes: the per-dimension intersection box with
// offsets floored at kPseudoFloor, plus the disjointness penalty
// ‖max(lo - hi, 0)‖_2 over dimensions.
Region pseudo_intersection_box(RegionView a, RegionView b, double* penalty = nullptr);

// NF2 effective child for balls: midpoint center, radius
// max(kPseudoFloor, (r_a + r_b - ‖c_a - c_b‖) / 2), plus the gap penalty
// max(‖c_a - c_b‖ - r_a - r_b, 0).
Region pseudo_midpoint_ball(RegionView a, RegionView b, double* penalty = nullptr);

// Energy of one axiom: the (parent, child) region pair it induces, scored by
// the configured energy (use_regd) or the base inclusion score, plus the NF2
// penalty. Lower is better.
double axiom_energy(const NormalizedAxiom& ax, const EmbeddingTable& table,
                    const OntologyConfig& cfg);

// Boundary-only part of the axiom score, used for corrupted axioms in the
// contrastive loss.
double axiom_boundary(const NormalizedAxiom& ax, const EmbeddingTable& table,
                      const OntologyConfig& cfg);

struct OntologyBatch {
  std::vector<NormalizedAxiom> positives;
  std::vector<std::vector<NormalizedAxiom>> negatives;  // per positive
};

// use_regd on: the contrastive loss over axiom energies, corrupted axioms
// scored by their boundary part. Off: sum of positive energies plus
// sum(base_margin - energy) over corrupted axioms. Elem adds
// reg_weight * |‖c‖ - 1| once per distinct concept touched by the batch when
// the center regularizer is on.
double ontology_batch_loss(const EmbeddingTable& table, const OntologyBatch& batch,
                           const OntologyConfig& cfg);
double ontology_batch_loss_grad(const EmbeddingTable& table, const OntologyBatch& batch,
                                const OntologyConfig& cfg, std::span<double> grad);

}  // namespace regd
