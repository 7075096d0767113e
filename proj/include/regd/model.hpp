#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "regd/dissim.hpp"
#include "regd/errors.hpp"
#include "regd/geometry.hpp"

namespace regd {

// Energy of an ordered pair: boundary dissimilarity plus lambda times the
// depth dissimilarity. gamma1 floors each positive loss term, gamma2 is the
// margin of the negative hinge.
struct EnergyConfig {
  double lambda = 0.5;
  DepthConfig depth;
  BoundaryVariant boundary = BoundaryVariant::Geometric;
  double gamma1 = 0.001;
  double gamma2 = 0.0;

  void validate(RegionKind kind) const;
};

// Dense table of region parameters, one row per node id, plus optional role
// translation vectors. The trainable vector is
//   [node0: center, log sizes | node1: ... | role0: vector | ...]
// and the exponentiated sizes are cached; refresh_sizes() must run after any
// direct mutation of params().
class EmbeddingTable {
 public:
  EmbeddingTable(RegionKind kind, int dim, std::vector<std::string> node_ids,
                 std::vector<std::string> role_ids = {});

  RegionKind kind() const { return kind_; }
  int dim() const { return dim_; }
  int num_nodes() const { return static_cast<int>(node_ids_.size()); }
  int num_roles() const { return static_cast<int>(role_ids_.size()); }
  int params_per_node() const { return kind_ == RegionKind::Ball ? dim_ + 1 : 2 * dim_; }
  int sizes_per_node() const { return kind_ == RegionKind::Ball ? 1 : dim_; }
  std::size_t num_params() const { return params_.size(); }

  int node_index(std::string_view id) const;  // throws DataError on unknown id
  std::optional<int> find_node(std::string_view id) const;
  const std::string& node_id(int node) const { return node_ids_[node]; }
  int role_index(std::string_view id) const;
  const std::string& role_id(int role) const { return role_ids_[role]; }

  RegionView region(int node) const;
  std::span<const double> role_vector(int role) const;
  std::span<double> role_vector(int role);

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  void refresh_sizes();
  // Floors every log-size slot at min_log and refreshes the cache; guards
  // against runaway shrinkage during training.
  void clamp_log_sizes(double min_log);

  // Centers uniform in [-1, 1]^dim, radii 1, offsets 0.4, role vectors
  // uniform in [-0.1, 0.1]^dim. Draw order is nodes then roles, each row in
  // index order, so a given seed always produces the same table.
  void init_random(std::uint64_t seed);

  void set_node(int node, const Region& value);
  void set_role(int role, std::span<const double> vec);

  std::size_t node_offset(int node) const {
    return static_cast<std::size_t>(node) * params_per_node();
  }
  std::size_t role_offset(int role) const {
    return node_ids_.size() * params_per_node() + static_cast<std::size_t>(role) * dim_;
  }

  // Plain-text format, one node per line with raw (exponentiated) sizes at 17
  // significant digits; role rows are prefixed with '@'.
  void save(const std::filesystem::path& path) const;
  static EmbeddingTable load(const std::filesystem::path& path);

 private:
  RegionKind kind_;
  int dim_;
  std::vector<std::string> node_ids_;
  std::vector<std::string> role_ids_;
  std::unordered_map<std::string, int> node_index_;
  std::unordered_map<std::string, int> role_index_;
  std::vector<double> params_;
  std::vector<double> sizes_;  // exp of the log-size slots, per node
};

// One training batch: ordered positive pairs (parent, child) and, for each
// positive, the corrupted children sharing that parent.
struct Batch {
  std::vector<std::pair<int, int>> positives;
  std::vector<std::vector<int>> negative_children;
};

double energy(RegionView parent, RegionView child, const EnergyConfig& cfg);
double energy(const EmbeddingTable& table, int parent, int child, const EnergyConfig& cfg);

// Boundary part of the energy alone (the variant selected by cfg).
double boundary_value(RegionView parent, RegionView child, const EnergyConfig& cfg);
double boundary_value_vjp(RegionView parent, RegionView child, const EnergyConfig& cfg, double w,
                          ParamGrad gp, ParamGrad gc);

double energy_vjp(RegionView parent, RegionView child, const EnergyConfig& cfg, double w,
                  ParamGrad gp, ParamGrad gc);

// Forward value plus gradient with respect to the trainable parameters of
// both regions; grad spans are overwritten (see dissim_gradient).
double energy_gradient(RegionView parent, RegionView child, const EnergyConfig& cfg,
                       std::span<double> grad_parent, std::span<double> grad_child);

// Contrastive loss over the batch:
//   sum_P max(E(u, v), gamma1)
//   + sum_P log sum_{v'} exp(max(gamma2 - d_bd(u, v'), 0)).
// The log-sum-exp runs over each positive's corruption set.
double batch_loss(const EmbeddingTable& table, const Batch& batch, const EnergyConfig& cfg);

// Same value; grad must span table.num_params() and is overwritten with the
// loss gradient (zero for every parameter of untouched nodes).
double batch_loss_grad(const EmbeddingTable& table, const Batch& batch, const EnergyConfig& cfg,
                       std::span<double> grad);

// u is predicted an ancestor of v iff the pair energy is at most t.
bool predict(const EmbeddingTable& table, int parent, int child, const EnergyConfig& cfg,
             double threshold);

namespace detail {
// Adds raw-parameter pair gradients into the dense trainable gradient,
// chaining size slots through the exponential parameterization.
void fold_node_grad(const EmbeddingTable& table, int node, std::span<const double> d_center,
                    std::span<const double> d_size_raw, std::span<double> grad);
}  // namespace detail

}  // namespace regd
