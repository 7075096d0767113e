#include "regd/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace regd {

namespace {

int intern(std::vector<std::string>& names, std::unordered_map<std::string, int>& index,
           const std::string& name) {
  auto it = index.find(name);
  if (it != index.end()) return it->second;
  const int id = static_cast<int>(names.size());
  names.push_back(name);
  index.emplace(name, id);
  return id;
}

struct NameIndex {
  std::unordered_map<std::string, int> concepts;
  std::unordered_map<std::string, int> roles;

  static NameIndex build(const OntologyData& data) {
    NameIndex idx;
    for (std::size_t i = 0; i < data.concepts.size(); ++i)
      idx.concepts.emplace(data.concepts[i], static_cast<int>(i));
    for (std::size_t i = 0; i < data.roles.size(); ++i)
      idx.roles.emplace(data.roles[i], static_cast<int>(i));
    return idx;
  }
};

}  // namespace

int concept_index(OntologyData& data, const std::string& name) {
  auto idx = NameIndex::build(data);
  return intern(data.concepts, idx.concepts, name);
}

int role_index(OntologyData& data, const std::string& name) {
  auto idx = NameIndex::build(data);
  return intern(data.roles, idx.roles, name);
}

std::vector<NormalizedAxiom> load_axioms_into(OntologyData& data,
                                              const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open axiom file: " + path.string());
  auto idx = NameIndex::build(data);
  auto concept_id = [&](const std::string& name) {
    return intern(data.concepts, idx.concepts, name);
  };
  auto role_id = [&](const std::string& name) { return intern(data.roles, idx.roles, name); };

  std::vector<NormalizedAxiom> axioms;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ss >> tok) tokens.push_back(tok);
    if (tokens.empty() || tokens[0].front() == '#') continue;

    auto fail = [&](const std::string& why) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + why);
    };
    NormalizedAxiom ax;
    if (tokens[0] == "nf1") {
      if (tokens.size() != 3) fail("nf1 expects 'nf1 A B'");
      ax.nf = NormalForm::NF1;
      ax.a = concept_id(tokens[1]);
      ax.b = concept_id(tokens[2]);
    } else if (tokens[0] == "nf2") {
      if (tokens.size() != 4) fail("nf2 expects 'nf2 A B C'");
      ax.nf = NormalForm::NF2;
      ax.a = concept_id(tokens[1]);
      ax.b = concept_id(tokens[2]);
      ax.c = concept_id(tokens[3]);
    } else if (tokens[0] == "nf3") {
      if (tokens.size() != 4) fail("nf3 expects 'nf3 A r B'");
      ax.nf = NormalForm::NF3;
      ax.a = concept_id(tokens[1]);
      ax.role = role_id(tokens[2]);
      ax.b = concept_id(tokens[3]);
    } else if (tokens[0] == "nf4") {
      if (tokens.size() != 4) fail("nf4 expects 'nf4 r B A'");
      ax.nf = NormalForm::NF4;
      ax.role = role_id(tokens[1]);
      ax.b = concept_id(tokens[2]);
      ax.a = concept_id(tokens[3]);
    } else {
      fail("unknown normal form '" + tokens[0] + "'");
    }
    axioms.push_back(ax);
  }
  return axioms;
}

OntologyData load_ontology(const std::filesystem::path& path) {
  OntologyData data;
  data.axioms = load_axioms_into(data, path);
  return data;
}

std::string to_string(BaseModel m) { return m == BaseModel::Elbe ? "elbe" : "elem"; }

BaseModel base_model_from_string(const std::string& s) {
  if (s == "elbe") return BaseModel::Elbe;
  if (s == "elem") return BaseModel::Elem;
  throw std::invalid_argument("unknown base model: " + s);
}

void OntologyConfig::validate(RegionKind table_kind) const {
  if (region_kind() != table_kind)
    throw std::invalid_argument(to_string(base) + " requires " + to_string(region_kind()) +
                                " regions");
  if (!(reg_weight >= 0.0)) throw std::invalid_argument("regularizer weight must be non-negative");
  if (use_regd) energy.validate(table_kind);
}

Region translated_region(RegionView reg, std::span<const double> role_vec, bool inverse) {
  if (role_vec.size() != reg.center.size())
    throw std::invalid_argument("role vector dimension mismatch");
  Vec center(reg.center.begin(), reg.center.end());
  for (std::size_t i = 0; i < center.size(); ++i)
    center[i] += inverse ? role_vec[i] : -role_vec[i];
  Vec log_size(reg.size.size());
  for (std::size_t i = 0; i < reg.size.size(); ++i) log_size[i] = std::log(reg.size[i]);
  return Region::from_parts(reg.kind, std::move(center), std::move(log_size),
                            Vec(reg.size.begin(), reg.size.end()));
}

namespace {

struct DimBounds {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_is_a = false;
  bool hi_is_a = false;
};

// Intersection bounds in one dimension; ties bind to the first conjunct.
DimBounds nf2_bounds(RegionView a, RegionView b, int i) {
  const double lo_a = a.center[i] - a.size[i];
  const double hi_a = a.center[i] + a.size[i];
  const double lo_b = b.center[i] - b.size[i];
  const double hi_b = b.center[i] + b.size[i];
  DimBounds d;
  d.lo_is_a = lo_a >= lo_b;
  d.lo = d.lo_is_a ? lo_a : lo_b;
  d.hi_is_a = hi_a <= hi_b;
  d.hi = d.hi_is_a ? hi_a : hi_b;
  return d;
}

}  // namespace

Region pseudo_intersection_box(RegionView a, RegionView b, double* penalty) {
  detail::require_same_shape(a, b);
  detail::require_kind(a, RegionKind::Box, "pseudo_intersection_box");
  const int n = a.dim();
  Vec center(n);
  Vec offsets(n);
  double pen_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const DimBounds d = nf2_bounds(a, b, i);
    center[i] = 0.5 * (d.lo + d.hi);
    offsets[i] = std::max(kPseudoFloor, 0.5 * (d.hi - d.lo));
    const double gap = d.lo - d.hi;
    if (gap > 0.0) pen_sq += gap * gap;
  }
  if (penalty) *penalty = std::sqrt(pen_sq);
  return Region::box(std::move(center), std::move(offsets));
}

Region pseudo_midpoint_ball(RegionView a, RegionView b, double* penalty) {
  detail::require_same_shape(a, b);
  detail::require_kind(a, RegionKind::Ball, "pseudo_midpoint_ball");
  const int n = a.dim();
  Vec center(n);
  for (int i = 0; i < n; ++i) center[i] = 0.5 * (a.center[i] + b.center[i]);
  const double nrm = l2_dist(a.center, b.center);
  const double radius = std::max(kPseudoFloor, 0.5 * ((a.radius() + b.radius()) - nrm));
  if (penalty) *penalty = std::max(nrm - a.radius() - b.radius(), 0.0);
  return Region::ball(std::move(center), radius);
}

namespace {

double sign_of(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

// Base inclusion score of the box model: hinged boundary norm, zero iff the
// child box lies inside the parent box.
template <bool WithGrad>
double elbe_core(RegionView parent, RegionView child, double w, ParamGrad* gp, ParamGrad* gc) {
  const int n = parent.dim();
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (std::abs(parent.center[i] - child.center[i]) + child.size[i]) -
                     parent.size[i];
    if (z > 0.0) s += z * z;
  }
  const double value = std::sqrt(s);
  if constexpr (WithGrad) {
    if (value > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double z = (std::abs(parent.center[i] - child.center[i]) + child.size[i]) -
                         parent.size[i];
        if (z > 0.0) {
          const double coeff = w * z / value;
          const double sgn = sign_of(parent.center[i] - child.center[i]);
          gp->center[i] += coeff * sgn;
          gc->center[i] -= coeff * sgn;
          gp->size[i] -= coeff;
          gc->size[i] += coeff;
        }
      }
    }
  }
  return value;
}

// Base inclusion score of the ball model: hinged ball boundary value.
template <bool WithGrad>
double elem_core(RegionView parent, RegionView child, double w, ParamGrad* gp, ParamGrad* gc) {
  const double nrm = l2_dist(parent.center, child.center);
  const double raw = (nrm + child.radius()) - parent.radius();
  if (raw <= 0.0) return 0.0;
  if constexpr (WithGrad) {
    if (nrm > 0.0) {
      for (int i = 0; i < parent.dim(); ++i) {
        const double u = (parent.center[i] - child.center[i]) / nrm;
        gp->center[i] += w * u;
        gc->center[i] -= w * u;
      }
    }
    gp->size[0] -= w;
    gc->size[0] += w;
  }
  return raw;
}

enum class ScorePart { Full, BoundaryOnly };

struct SideScratch {
  Vec center;
  Vec size;

  void reset(int dim, int sizes) {
    center.assign(dim, 0.0);
    size.assign(sizes, 0.0);
  }
  ParamGrad grad() { return {center, size}; }
};

void check_axiom(const NormalizedAxiom& ax, const EmbeddingTable& table) {
  const int n = table.num_nodes();
  auto node_ok = [n](int v) { return v >= 0 && v < n; };
  switch (ax.nf) {
    case NormalForm::NF1:
      if (!node_ok(ax.a) || !node_ok(ax.b)) throw std::invalid_argument("nf1 node out of range");
      return;
    case NormalForm::NF2:
      if (!node_ok(ax.a) || !node_ok(ax.b) || !node_ok(ax.c))
        throw std::invalid_argument("nf2 node out of range");
      return;
    case NormalForm::NF3:
    case NormalForm::NF4:
      if (!node_ok(ax.a) || !node_ok(ax.b) || ax.role < 0 || ax.role >= table.num_roles())
        throw std::invalid_argument("nf3/nf4 node or role out of range");
      return;
  }
  throw std::invalid_argument("unknown normal form");
}

// Chains raw gradients of a translated region back to its source node and
// role vector (center' = center - role, sizes pass through).
void fold_translated(const EmbeddingTable& table, int node, int role,
                     std::span<const double> d_center, std::span<const double> d_size_raw,
                     std::span<double> grad) {
  detail::fold_node_grad(table, node, d_center, d_size_raw, grad);
  const std::size_t off = table.role_offset(role);
  for (std::size_t d = 0; d < d_center.size(); ++d) grad[off + d] -= d_center[d];
}

// Chains raw gradients of the NF2 pseudo-box child, plus w_pen times the
// disjointness penalty, back to the two conjunct boxes.
void fold_pseudo_box(const EmbeddingTable& table, int node_a, int node_b,
                     std::span<const double> d_center, std::span<const double> d_size_raw,
                     double w_pen, std::span<double> grad) {
  const RegionView a = table.region(node_a);
  const RegionView b = table.region(node_b);
  const int n = a.dim();
  SideScratch ga, gb;
  ga.reset(n, n);
  gb.reset(n, n);

  double pen = 0.0;
  if (w_pen != 0.0) {
    double pen_sq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double gap = nf2_bounds(a, b, i).lo - nf2_bounds(a, b, i).hi;
      if (gap > 0.0) pen_sq += gap * gap;
    }
    pen = std::sqrt(pen_sq);
  }

  for (int i = 0; i < n; ++i) {
    const DimBounds d = nf2_bounds(a, b, i);
    const bool active = 0.5 * (d.hi - d.lo) > kPseudoFloor;
    double dlo = 0.5 * d_center[i] + (active ? -0.5 * d_size_raw[i] : 0.0);
    double dhi = 0.5 * d_center[i] + (active ? 0.5 * d_size_raw[i] : 0.0);
    if (w_pen != 0.0 && pen > 0.0) {
      const double gap = d.lo - d.hi;
      if (gap > 0.0) {
        dlo += w_pen * gap / pen;
        dhi -= w_pen * gap / pen;
      }
    }
    SideScratch& glo = d.lo_is_a ? ga : gb;
    SideScratch& ghi = d.hi_is_a ? ga : gb;
    glo.center[i] += dlo;
    glo.size[i] -= dlo;
    ghi.center[i] += dhi;
    ghi.size[i] += dhi;
  }
  detail::fold_node_grad(table, node_a, ga.center, ga.size, grad);
  detail::fold_node_grad(table, node_b, gb.center, gb.size, grad);
}

// Chains raw gradients of the NF2 midpoint ball, plus w_pen times the gap
// penalty, back to the two conjunct balls.
void fold_pseudo_ball(const EmbeddingTable& table, int node_a, int node_b,
                      std::span<const double> d_center, std::span<const double> d_size_raw,
                      double w_pen, std::span<double> grad) {
  const RegionView a = table.region(node_a);
  const RegionView b = table.region(node_b);
  const int n = a.dim();
  SideScratch ga, gb;
  ga.reset(n, 1);
  gb.reset(n, 1);

  const double nrm = l2_dist(a.center, b.center);
  const bool active = 0.5 * ((a.radius() + b.radius()) - nrm) > kPseudoFloor;
  for (int i = 0; i < n; ++i) {
    ga.center[i] += 0.5 * d_center[i];
    gb.center[i] += 0.5 * d_center[i];
  }
  if (active) {
    ga.size[0] += 0.5 * d_size_raw[0];
    gb.size[0] += 0.5 * d_size_raw[0];
    if (nrm > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double unit = (a.center[i] - b.center[i]) / nrm;
        ga.center[i] -= 0.5 * d_size_raw[0] * unit;
        gb.center[i] += 0.5 * d_size_raw[0] * unit;
      }
    }
  }
  if (w_pen != 0.0 && nrm - a.radius() - b.radius() > 0.0 && nrm > 0.0) {
    for (int i = 0; i < n; ++i) {
      const double unit = (a.center[i] - b.center[i]) / nrm;
      ga.center[i] += w_pen * unit;
      gb.center[i] -= w_pen * unit;
    }
    ga.size[0] -= w_pen;
    gb.size[0] -= w_pen;
  }
  detail::fold_node_grad(table, node_a, ga.center, ga.size, grad);
  detail::fold_node_grad(table, node_b, gb.center, gb.size, grad);
}

template <bool WithGrad>
double axiom_score_core(const NormalizedAxiom& ax, const EmbeddingTable& table,
                        const OntologyConfig& cfg, ScorePart part, double w,
                        std::span<double> grad) {
  check_axiom(ax, table);
  const int n = table.dim();
  const int spn = table.sizes_per_node();

  Region parent_store, child_store;
  RegionView parent, child;
  double penalty = 0.0;
  switch (ax.nf) {
    case NormalForm::NF1:
      parent = table.region(ax.b);
      child = table.region(ax.a);
      break;
    case NormalForm::NF2:
      parent = table.region(ax.c);
      child_store = table.kind() == RegionKind::Box
                        ? pseudo_intersection_box(table.region(ax.a), table.region(ax.b), &penalty)
                        : pseudo_midpoint_ball(table.region(ax.a), table.region(ax.b), &penalty);
      child = child_store.view();
      break;
    case NormalForm::NF3:
      parent_store = translated_region(table.region(ax.b), table.role_vector(ax.role));
      parent = parent_store.view();
      child = table.region(ax.a);
      break;
    case NormalForm::NF4:
      parent = table.region(ax.a);
      child_store = translated_region(table.region(ax.b), table.role_vector(ax.role));
      child = child_store.view();
      break;
  }

  SideScratch gp_scratch, gc_scratch;
  ParamGrad gp{}, gc{};
  if constexpr (WithGrad) {
    gp_scratch.reset(n, spn);
    gc_scratch.reset(n, spn);
    gp = gp_scratch.grad();
    gc = gc_scratch.grad();
  }

  double value;
  if (part == ScorePart::BoundaryOnly) {
    value = WithGrad ? boundary_value_vjp(parent, child, cfg.energy, w, gp, gc)
                     : boundary_value(parent, child, cfg.energy);
  } else if (cfg.use_regd) {
    value = WithGrad ? energy_vjp(parent, child, cfg.energy, w, gp, gc)
                     : energy(parent, child, cfg.energy);
  } else if (cfg.base == BaseModel::Elbe) {
    value = elbe_core<WithGrad>(parent, child, w, &gp, &gc);
  } else {
    value = elem_core<WithGrad>(parent, child, w, &gp, &gc);
  }
  const double pen_weight = part == ScorePart::Full ? w : 0.0;
  if (part == ScorePart::Full) value += penalty;

  if constexpr (WithGrad) {
    switch (ax.nf) {
      case NormalForm::NF1:
        detail::fold_node_grad(table, ax.b, gp_scratch.center, gp_scratch.size, grad);
        detail::fold_node_grad(table, ax.a, gc_scratch.center, gc_scratch.size, grad);
        break;
      case NormalForm::NF2:
        detail::fold_node_grad(table, ax.c, gp_scratch.center, gp_scratch.size, grad);
        if (table.kind() == RegionKind::Box) {
          fold_pseudo_box(table, ax.a, ax.b, gc_scratch.center, gc_scratch.size, pen_weight, grad);
        } else {
          fold_pseudo_ball(table, ax.a, ax.b, gc_scratch.center, gc_scratch.size, pen_weight,
                           grad);
        }
        break;
      case NormalForm::NF3:
        fold_translated(table, ax.b, ax.role, gp_scratch.center, gp_scratch.size, grad);
        detail::fold_node_grad(table, ax.a, gc_scratch.center, gc_scratch.size, grad);
        break;
      case NormalForm::NF4:
        detail::fold_node_grad(table, ax.a, gp_scratch.center, gp_scratch.size, grad);
        fold_translated(table, ax.b, ax.role, gc_scratch.center, gc_scratch.size, grad);
        break;
    }
  }
  return value;
}

void touched_concepts(const OntologyBatch& batch, std::set<int>& out) {
  auto add = [&out](const NormalizedAxiom& ax) {
    out.insert(ax.a);
    out.insert(ax.b);
    if (ax.nf == NormalForm::NF2) out.insert(ax.c);
  };
  for (const auto& ax : batch.positives) add(ax);
  for (const auto& group : batch.negatives) {
    for (const auto& ax : group) add(ax);
  }
}

template <bool WithGrad>
double ontology_loss_core(const EmbeddingTable& table, const OntologyBatch& batch,
                          const OntologyConfig& cfg, std::span<double> grad) {
  cfg.validate(table.kind());
  if (batch.positives.empty()) throw std::invalid_argument("batch has no positive axioms");
  if (batch.negatives.size() != batch.positives.size())
    throw std::invalid_argument("batch needs one corruption set per positive");
  if constexpr (WithGrad) {
    if (grad.size() != table.num_params())
      throw std::invalid_argument("batch gradient span must cover the whole table");
    std::fill(grad.begin(), grad.end(), 0.0);
  }

  double loss = 0.0;
  std::vector<double> hinges;
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const NormalizedAxiom& pos = batch.positives[i];
    const auto& negs = batch.negatives[i];

    if (cfg.use_regd) {
      if (negs.empty()) throw std::invalid_argument("every positive needs at least one negative");
      const double e = axiom_score_core<false>(pos, table, cfg, ScorePart::Full, 0.0, grad);
      if (e > cfg.energy.gamma1) {
        loss += e;
        if constexpr (WithGrad)
          axiom_score_core<true>(pos, table, cfg, ScorePart::Full, 1.0, grad);
      } else {
        loss += cfg.energy.gamma1;
      }
      hinges.resize(negs.size());
      double hmax = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < negs.size(); ++j) {
        const double bd =
            axiom_score_core<false>(negs[j], table, cfg, ScorePart::BoundaryOnly, 0.0, grad);
        hinges[j] = std::max(cfg.energy.gamma2 - bd, 0.0);
        hmax = std::max(hmax, hinges[j]);
      }
      double sum = 0.0;
      for (double h : hinges) sum += std::exp(h - hmax);
      const double lse = hmax + std::log(sum);
      loss += lse;
      if constexpr (WithGrad) {
        for (std::size_t j = 0; j < negs.size(); ++j) {
          if (hinges[j] <= 0.0) continue;
          const double weight = std::exp(hinges[j] - lse);
          axiom_score_core<true>(negs[j], table, cfg, ScorePart::BoundaryOnly, -weight, grad);
        }
      }
    } else {
      loss += axiom_score_core<WithGrad>(pos, table, cfg, ScorePart::Full, 1.0, grad);
      for (const NormalizedAxiom& neg : negs) {
        const double e = axiom_score_core<WithGrad>(neg, table, cfg, ScorePart::Full, -1.0, grad);
        loss += cfg.base_margin - e;
      }
    }
  }

  if (cfg.base == BaseModel::Elem && cfg.elem_center_regularizer && cfg.reg_weight > 0.0) {
    std::set<int> touched;
    touched_concepts(batch, touched);
    for (int node : touched) {
      const RegionView r = table.region(node);
      const double nc = l2_norm(r.center);
      loss += cfg.reg_weight * std::abs(nc - 1.0);
      if constexpr (WithGrad) {
        if (nc > 0.0) {
          const double coeff = cfg.reg_weight * sign_of(nc - 1.0) / nc;
          const std::size_t off = table.node_offset(node);
          for (int d = 0; d < table.dim(); ++d) grad[off + d] += coeff * r.center[d];
        }
      }
    }
  }
  return loss;
}

}  // namespace

double axiom_energy(const NormalizedAxiom& ax, const EmbeddingTable& table,
                    const OntologyConfig& cfg) {
  cfg.validate(table.kind());
  return axiom_score_core<false>(ax, table, cfg, ScorePart::Full, 0.0, {});
}

double axiom_boundary(const NormalizedAxiom& ax, const EmbeddingTable& table,
                      const OntologyConfig& cfg) {
  cfg.validate(table.kind());
  return axiom_score_core<false>(ax, table, cfg, ScorePart::BoundaryOnly, 0.0, {});
}

double ontology_batch_loss(const EmbeddingTable& table, const OntologyBatch& batch,
                           const OntologyConfig& cfg) {
  return ontology_loss_core<false>(table, batch, cfg, {});
}

double ontology_batch_loss_grad(const EmbeddingTable& table, const OntologyBatch& batch,
                                const OntologyConfig& cfg, std::span<double> grad) {
  return ontology_loss_core<true>(table, batch, cfg, grad);
}

}  // namespace regd
