#include "regd/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace regd {

void EnergyConfig::validate(RegionKind kind) const {
  if (!(lambda >= 0.0)) throw std::invalid_argument("lambda must be non-negative");
  if (!(gamma1 >= 0.0)) throw std::invalid_argument("gamma1 must be non-negative");
  if (lambda != 0.0) depth.validate(kind);
  if (boundary == BoundaryVariant::Volume && kind != RegionKind::Box)
    throw std::invalid_argument("volume boundary requires box regions");
  if (boundary == BoundaryVariant::Cone && kind != RegionKind::Ball)
    throw std::invalid_argument("cone boundary requires ball regions");
}

namespace {

void check_id(const std::string& id, const char* what) {
  if (id.empty()) throw DataError(std::string(what) + " id must be non-empty");
  if (id.find_first_of("\t\n\r") != std::string::npos)
    throw DataError(std::string(what) + " id must not contain tabs or newlines: " + id);
}

}  // namespace

EmbeddingTable::EmbeddingTable(RegionKind kind, int dim, std::vector<std::string> node_ids,
                               std::vector<std::string> role_ids)
    : kind_(kind), dim_(dim), node_ids_(std::move(node_ids)), role_ids_(std::move(role_ids)) {
  if (dim_ < 1) throw std::invalid_argument("dimension must be at least 1");
  if (node_ids_.empty()) throw DataError("embedding table needs at least one node");
  node_index_.reserve(node_ids_.size());
  for (std::size_t i = 0; i < node_ids_.size(); ++i) {
    check_id(node_ids_[i], "node");
    if (node_ids_[i].front() == '@')
      throw DataError("node id must not start with '@': " + node_ids_[i]);
    if (!node_index_.emplace(node_ids_[i], static_cast<int>(i)).second)
      throw DataError("duplicate node id: " + node_ids_[i]);
  }
  role_index_.reserve(role_ids_.size());
  for (std::size_t i = 0; i < role_ids_.size(); ++i) {
    check_id(role_ids_[i], "role");
    if (!role_index_.emplace(role_ids_[i], static_cast<int>(i)).second)
      throw DataError("duplicate role id: " + role_ids_[i]);
  }
  params_.assign(node_ids_.size() * params_per_node() + role_ids_.size() * dim_, 0.0);
  sizes_.assign(node_ids_.size() * sizes_per_node(), 1.0);
}

int EmbeddingTable::node_index(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  if (it == node_index_.end()) throw DataError("unknown node id: " + std::string(id));
  return it->second;
}

std::optional<int> EmbeddingTable::find_node(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  if (it == node_index_.end()) return std::nullopt;
  return it->second;
}

int EmbeddingTable::role_index(std::string_view id) const {
  auto it = role_index_.find(std::string(id));
  if (it == role_index_.end()) throw DataError("unknown role id: " + std::string(id));
  return it->second;
}

RegionView EmbeddingTable::region(int node) const {
  const std::size_t off = node_offset(node);
  return {kind_, std::span<const double>(params_).subspan(off, dim_),
          std::span<const double>(sizes_).subspan(
              static_cast<std::size_t>(node) * sizes_per_node(), sizes_per_node())};
}

std::span<const double> EmbeddingTable::role_vector(int role) const {
  return std::span<const double>(params_).subspan(role_offset(role), dim_);
}

std::span<double> EmbeddingTable::role_vector(int role) {
  return std::span<double>(params_).subspan(role_offset(role), dim_);
}

void EmbeddingTable::refresh_sizes() {
  const int spn = sizes_per_node();
  for (int node = 0; node < num_nodes(); ++node) {
    const std::size_t off = node_offset(node) + dim_;
    for (int k = 0; k < spn; ++k)
      sizes_[static_cast<std::size_t>(node) * spn + k] = std::exp(params_[off + k]);
  }
}

void EmbeddingTable::clamp_log_sizes(double min_log) {
  const int spn = sizes_per_node();
  for (int node = 0; node < num_nodes(); ++node) {
    const std::size_t off = node_offset(node) + dim_;
    for (int k = 0; k < spn; ++k) params_[off + k] = std::max(params_[off + k], min_log);
  }
  refresh_sizes();
}

void EmbeddingTable::init_random(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> center(-1.0, 1.0);
  std::uniform_real_distribution<double> role(-0.1, 0.1);
  const double log_offset = std::log(0.4);
  for (int node = 0; node < num_nodes(); ++node) {
    const std::size_t off = node_offset(node);
    for (int d = 0; d < dim_; ++d) params_[off + d] = center(rng);
    for (int k = 0; k < sizes_per_node(); ++k)
      params_[off + dim_ + k] = kind_ == RegionKind::Ball ? 0.0 : log_offset;
  }
  for (int r = 0; r < num_roles(); ++r) {
    const std::size_t off = role_offset(r);
    for (int d = 0; d < dim_; ++d) params_[off + d] = role(rng);
  }
  refresh_sizes();
}

void EmbeddingTable::set_node(int node, const Region& value) {
  if (value.kind != kind_ || value.dim() != dim_)
    throw std::invalid_argument("set_node region shape mismatch");
  const std::size_t off = node_offset(node);
  std::copy(value.center.begin(), value.center.end(), params_.begin() + off);
  std::copy(value.log_size.begin(), value.log_size.end(), params_.begin() + off + dim_);
  // Copy the cached raw sizes too so exact constructed values survive.
  std::copy(value.size.begin(), value.size.end(),
            sizes_.begin() + static_cast<std::size_t>(node) * sizes_per_node());
}

void EmbeddingTable::set_role(int role, std::span<const double> vec) {
  if (vec.size() != static_cast<std::size_t>(dim_))
    throw std::invalid_argument("set_role vector dimension mismatch");
  std::copy(vec.begin(), vec.end(), params_.begin() + role_offset(role));
}

namespace {

void append_number(std::string& line, double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  line += '\t';
  line += buf;
}

double parse_double(const std::string& token, const std::filesystem::path& path, int line_no) {
  char* end = nullptr;
  const double x = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0')
    throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + token +
                    "'");
  return x;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

}  // namespace

void EmbeddingTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embeddings file: " + path.string());
  out << "#regd v1 kind=" << to_string(kind_) << " dim=" << dim_ << " roles=" << num_roles()
      << "\n";
  std::string line;
  for (int node = 0; node < num_nodes(); ++node) {
    line = node_ids_[node];
    const RegionView r = region(node);
    for (double c : r.center) append_number(line, c);
    for (double s : r.size) append_number(line, s);
    out << line << "\n";
  }
  for (int role = 0; role < num_roles(); ++role) {
    line = "@";
    line += role_ids_[role];
    for (double v : role_vector(role)) append_number(line, v);
    out << line << "\n";
  }
  if (!out) throw DataError("write failed: " + path.string());
}

EmbeddingTable EmbeddingTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings file: " + path.string());
  std::string header;
  if (!std::getline(in, header)) throw DataError("empty embeddings file: " + path.string());
  if (!header.empty() && header.back() == '\r') header.pop_back();

  char kind_buf[16];
  int dim = 0;
  int roles = 0;
  if (std::sscanf(header.c_str(), "#regd v1 kind=%15s dim=%d roles=%d", kind_buf, &dim, &roles) !=
      3)
    throw DataError(path.string() + ": bad header '" + header + "'");
  const RegionKind kind = region_kind_from_string(kind_buf);
  if (dim < 1) throw DataError(path.string() + ": bad dimension in header");

  std::vector<std::string> node_ids;
  std::vector<std::string> role_ids;
  std::vector<std::vector<double>> node_rows;
  std::vector<std::vector<double>> role_rows;
  const int spn = kind == RegionKind::Ball ? 1 : dim;

  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const bool is_role = line.front() == '@';
    auto fields = split_tabs(line);
    const std::size_t want = 1 + static_cast<std::size_t>(is_role ? dim : dim + spn);
    if (fields.size() != want)
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(want) + " fields, got " + std::to_string(fields.size()));
    std::vector<double> row(fields.size() - 1);
    for (std::size_t i = 1; i < fields.size(); ++i)
      row[i - 1] = parse_double(fields[i], path, line_no);
    if (is_role) {
      role_ids.push_back(fields[0].substr(1));
      role_rows.push_back(std::move(row));
    } else {
      for (int k = 0; k < spn; ++k) {
        if (!(row[dim + k] > 0.0))
          throw DataError(path.string() + ":" + std::to_string(line_no) +
                          ": sizes must be positive");
      }
      node_ids.push_back(fields[0]);
      node_rows.push_back(std::move(row));
    }
  }
  if (static_cast<int>(role_ids.size()) != roles)
    throw DataError(path.string() + ": header promises " + std::to_string(roles) + " roles, got " +
                    std::to_string(role_ids.size()));

  EmbeddingTable table(kind, dim, std::move(node_ids), std::move(role_ids));
  for (int node = 0; node < table.num_nodes(); ++node) {
    const auto& row = node_rows[node];
    Vec center(row.begin(), row.begin() + dim);
    if (kind == RegionKind::Ball) {
      table.set_node(node, Region::ball(std::move(center), row[dim]));
    } else {
      table.set_node(node, Region::box(std::move(center), Vec(row.begin() + dim, row.end())));
    }
  }
  for (int role = 0; role < table.num_roles(); ++role) table.set_role(role, role_rows[role]);
  return table;
}

namespace detail {

void fold_node_grad(const EmbeddingTable& table, int node, std::span<const double> d_center,
                    std::span<const double> d_size_raw, std::span<double> grad) {
  const std::size_t off = table.node_offset(node);
  const RegionView r = table.region(node);
  for (std::size_t d = 0; d < d_center.size(); ++d) grad[off + d] += d_center[d];
  for (std::size_t k = 0; k < d_size_raw.size(); ++k)
    grad[off + d_center.size() + k] += d_size_raw[k] * r.size[k];
}

}  // namespace detail

double boundary_value(RegionView parent, RegionView child, const EnergyConfig& cfg) {
  switch (cfg.boundary) {
    case BoundaryVariant::Geometric:
      return boundary_dissim(parent, child);
    case BoundaryVariant::Volume:
      return volume_dissim(parent, child);
    case BoundaryVariant::Cone:
      return cone_boundary_dissim(parent, child);
  }
  throw std::invalid_argument("unknown boundary variant");
}

double boundary_value_vjp(RegionView parent, RegionView child, const EnergyConfig& cfg, double w,
                          ParamGrad gp, ParamGrad gc) {
  switch (cfg.boundary) {
    case BoundaryVariant::Geometric:
      return boundary_dissim_vjp(parent, child, w, gp, gc);
    case BoundaryVariant::Volume:
      return volume_dissim_vjp(parent, child, w, gp, gc);
    case BoundaryVariant::Cone:
      return cone_boundary_dissim_vjp(parent, child, w, gp, gc);
  }
  throw std::invalid_argument("unknown boundary variant");
}

double energy(RegionView parent, RegionView child, const EnergyConfig& cfg) {
  double e = boundary_value(parent, child, cfg);
  if (cfg.lambda != 0.0) e += cfg.lambda * depth_dissim(parent, child, cfg.depth);
  return e;
}

double energy(const EmbeddingTable& table, int parent, int child, const EnergyConfig& cfg) {
  return energy(table.region(parent), table.region(child), cfg);
}

double energy_vjp(RegionView parent, RegionView child, const EnergyConfig& cfg, double w,
                  ParamGrad gp, ParamGrad gc) {
  double e = boundary_value_vjp(parent, child, cfg, w, gp, gc);
  if (cfg.lambda != 0.0)
    e += cfg.lambda * depth_dissim_vjp(parent, child, cfg.depth, w * cfg.lambda, gp, gc);
  return e;
}

double energy_gradient(RegionView parent, RegionView child, const EnergyConfig& cfg,
                       std::span<double> grad_parent, std::span<double> grad_child) {
  const std::size_t np = parent.center.size();
  const std::size_t nc = child.center.size();
  if (grad_parent.size() != np + parent.size.size() || grad_child.size() != nc + child.size.size())
    throw std::invalid_argument("energy_gradient output size mismatch");
  std::fill(grad_parent.begin(), grad_parent.end(), 0.0);
  std::fill(grad_child.begin(), grad_child.end(), 0.0);
  ParamGrad gp{grad_parent.subspan(0, np), grad_parent.subspan(np)};
  ParamGrad gc{grad_child.subspan(0, nc), grad_child.subspan(nc)};
  const double value = energy_vjp(parent, child, cfg, 1.0, gp, gc);
  for (std::size_t i = 0; i < parent.size.size(); ++i) gp.size[i] *= parent.size[i];
  for (std::size_t i = 0; i < child.size.size(); ++i) gc.size[i] *= child.size[i];
  return value;
}

namespace {

void validate_batch(const EmbeddingTable& table, const Batch& batch) {
  if (batch.positives.empty()) throw std::invalid_argument("batch has no positive pairs");
  if (batch.negative_children.size() != batch.positives.size())
    throw std::invalid_argument("batch needs one corruption set per positive");
  const int n = table.num_nodes();
  auto check = [n](int node) {
    if (node < 0 || node >= n) throw std::invalid_argument("batch node index out of range");
  };
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    check(batch.positives[i].first);
    check(batch.positives[i].second);
    if (batch.negative_children[i].empty())
      throw std::invalid_argument("every positive needs at least one negative");
    for (int v : batch.negative_children[i]) check(v);
  }
}

struct PairScratch {
  Vec pc, ps, cc, cs;

  void reset(const EmbeddingTable& table) {
    pc.assign(table.dim(), 0.0);
    ps.assign(table.sizes_per_node(), 0.0);
    cc.assign(table.dim(), 0.0);
    cs.assign(table.sizes_per_node(), 0.0);
  }
  ParamGrad parent() { return {pc, ps}; }
  ParamGrad child() { return {cc, cs}; }
};

template <bool WithGrad>
double batch_loss_core(const EmbeddingTable& table, const Batch& batch, const EnergyConfig& cfg,
                       std::span<double> grad) {
  cfg.validate(table.kind());
  validate_batch(table, batch);
  if constexpr (WithGrad) {
    if (grad.size() != table.num_params())
      throw std::invalid_argument("batch gradient span must cover the whole table");
    std::fill(grad.begin(), grad.end(), 0.0);
  }

  PairScratch scratch;
  std::vector<double> hinges;
  double loss = 0.0;
  for (std::size_t i = 0; i < batch.positives.size(); ++i) {
    const auto [u, v] = batch.positives[i];
    const RegionView parent = table.region(u);

    if constexpr (WithGrad) {
      scratch.reset(table);
      const double e = energy_vjp(parent, table.region(v), cfg, 1.0, scratch.parent(),
                                  scratch.child());
      if (e > cfg.gamma1) {
        loss += e;
        detail::fold_node_grad(table, u, scratch.pc, scratch.ps, grad);
        detail::fold_node_grad(table, v, scratch.cc, scratch.cs, grad);
      } else {
        loss += cfg.gamma1;
      }
    } else {
      loss += std::max(energy(table, u, v, cfg), cfg.gamma1);
    }

    const auto& negs = batch.negative_children[i];
    hinges.resize(negs.size());
    double hmax = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < negs.size(); ++j) {
      const double bd = boundary_value(parent, table.region(negs[j]), cfg);
      hinges[j] = std::max(cfg.gamma2 - bd, 0.0);
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
        scratch.reset(table);
        boundary_value_vjp(parent, table.region(negs[j]), cfg, -weight, scratch.parent(),
                           scratch.child());
        detail::fold_node_grad(table, u, scratch.pc, scratch.ps, grad);
        detail::fold_node_grad(table, negs[j], scratch.cc, scratch.cs, grad);
      }
    }
  }
  return loss;
}

}  // namespace

double batch_loss(const EmbeddingTable& table, const Batch& batch, const EnergyConfig& cfg) {
  return batch_loss_core<false>(table, batch, cfg, {});
}

double batch_loss_grad(const EmbeddingTable& table, const Batch& batch, const EnergyConfig& cfg,
                       std::span<double> grad) {
  return batch_loss_core<true>(table, batch, cfg, grad);
}

bool predict(const EmbeddingTable& table, int parent, int child, const EnergyConfig& cfg,
             double threshold) {
  return energy(table, parent, child, cfg) <= threshold;
}

}  // namespace regd
