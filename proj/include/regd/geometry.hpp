#pragma once

#include <span>
#include <string>
#include <vector>

namespace regd {

using Vec = std::vector<double>;

enum class RegionKind { Ball, Box };

std::string to_string(RegionKind kind);
RegionKind region_kind_from_string(const std::string& s);

// Non-owning view of one region's raw parameters. `size` holds the radius
// (length 1) for balls or the per-dimension offsets (length dim) for boxes;
// both are the exponentiated, strictly positive values.
struct RegionView {
  RegionKind kind = RegionKind::Ball;
  std::span<const double> center;
  std::span<const double> size;

  int dim() const { return static_cast<int>(center.size()); }
  double radius() const { return size[0]; }
};

// Value type for a single region. Sizes are kept in log space so every real
// parameter vector maps to a valid region; `size` caches exp(log_size).
struct Region {
  RegionKind kind = RegionKind::Ball;
  Vec center;
  Vec log_size;
  Vec size;

  static Region ball(Vec center, double radius);
  static Region ball_from_log(Vec center, double log_radius);
  static Region box(Vec center, Vec offsets);
  static Region box_from_log(Vec center, Vec log_offsets);
  // Caller guarantees size == exp(log_size); lets derived regions keep the
  // exact size bits of the region they were built from.
  static Region from_parts(RegionKind kind, Vec center, Vec log_size, Vec size);

  int dim() const { return static_cast<int>(center.size()); }
  double radius() const { return size[0]; }
  const Vec& offsets() const { return size; }

  RegionView view() const { return {kind, center, size}; }
  operator RegionView() const { return view(); }
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool empty() const { return lo > hi; }
  double length() const { return hi > lo ? hi - lo : 0.0; }
};

// Flat (center..., radius) or (center..., offsets...) vector.
Vec param_vector(RegionView reg);

// Analytic containment test: true iff `inner` is a subset of `outer`
// (closed regions, boundary touching counts as contained).
bool contains_region(RegionView outer, RegionView inner);

bool ball_contains_point(RegionView ball, std::span<const double> point);
bool box_contains_point(RegionView box, std::span<const double> point);

double box_volume(RegionView box);

// Per-dimension intersection intervals of two boxes; an interval with
// lo > hi marks an empty intersection in that dimension.
std::vector<Interval> box_intersection(RegionView a, RegionView b);
double intersection_volume(const std::vector<Interval>& intervals);

double l2_norm(std::span<const double> v);
double l2_dist(std::span<const double> a, std::span<const double> b);

namespace detail {
void require_same_shape(RegionView a, RegionView b);
void require_kind(RegionView r, RegionKind kind, const char* what);
}  // namespace detail

}  // namespace regd
