#include "regd/geometry.hpp"

#include <cmath>
#include <stdexcept>

namespace regd {

std::string to_string(RegionKind kind) {
  return kind == RegionKind::Ball ? "ball" : "box";
}

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "ball") return RegionKind::Ball;
  if (s == "box") return RegionKind::Box;
  throw std::invalid_argument("unknown region kind: " + s);
}

namespace {

Vec exp_all(const Vec& v) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = std::exp(v[i]);
  return out;
}

Vec log_all(const Vec& v, const char* what) {
  Vec out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) throw std::invalid_argument(std::string(what) + " must be positive");
    out[i] = std::log(v[i]);
  }
  return out;
}

}  // namespace

Region Region::ball(Vec center, double radius) {
  if (!(radius > 0.0)) throw std::invalid_argument("ball radius must be positive");
  Region r;
  r.kind = RegionKind::Ball;
  r.center = std::move(center);
  r.log_size = {std::log(radius)};
  r.size = {radius};
  return r;
}

Region Region::ball_from_log(Vec center, double log_radius) {
  Region r;
  r.kind = RegionKind::Ball;
  r.center = std::move(center);
  r.log_size = {log_radius};
  r.size = {std::exp(log_radius)};
  return r;
}

Region Region::box(Vec center, Vec offsets) {
  if (offsets.size() != center.size())
    throw std::invalid_argument("box offsets must match center dimension");
  Region r;
  r.kind = RegionKind::Box;
  r.log_size = log_all(offsets, "box offsets");
  r.center = std::move(center);
  r.size = std::move(offsets);
  return r;
}

Region Region::box_from_log(Vec center, Vec log_offsets) {
  if (log_offsets.size() != center.size())
    throw std::invalid_argument("box offsets must match center dimension");
  Region r;
  r.kind = RegionKind::Box;
  r.center = std::move(center);
  r.size = exp_all(log_offsets);
  r.log_size = std::move(log_offsets);
  return r;
}

Region Region::from_parts(RegionKind kind, Vec center, Vec log_size, Vec size) {
  if (size.size() != log_size.size())
    throw std::invalid_argument("size and log_size must have equal length");
  Region r;
  r.kind = kind;
  r.center = std::move(center);
  r.log_size = std::move(log_size);
  r.size = std::move(size);
  return r;
}

namespace detail {

void require_same_shape(RegionView a, RegionView b) {
  if (a.kind != b.kind) throw std::invalid_argument("region kind mismatch");
  if (a.center.size() != b.center.size())
    throw std::invalid_argument("region dimension mismatch");
}

void require_kind(RegionView r, RegionKind kind, const char* what) {
  if (r.kind != kind)
    throw std::invalid_argument(std::string(what) + " requires " + to_string(kind) + " regions");
}

}  // namespace detail

Vec param_vector(RegionView reg) {
  Vec out;
  out.reserve(reg.center.size() + reg.size.size());
  out.insert(out.end(), reg.center.begin(), reg.center.end());
  out.insert(out.end(), reg.size.begin(), reg.size.end());
  return out;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double l2_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return std::sqrt(s);
}

bool contains_region(RegionView outer, RegionView inner) {
  detail::require_same_shape(outer, inner);
  if (outer.kind == RegionKind::Ball) {
    return l2_dist(outer.center, inner.center) + inner.radius() <= outer.radius();
  }
  for (int i = 0; i < outer.dim(); ++i) {
    if (std::abs(outer.center[i] - inner.center[i]) + inner.size[i] > outer.size[i]) return false;
  }
  return true;
}

bool ball_contains_point(RegionView ball, std::span<const double> point) {
  detail::require_kind(ball, RegionKind::Ball, "ball_contains_point");
  return l2_dist(ball.center, point) <= ball.radius();
}

bool box_contains_point(RegionView box, std::span<const double> point) {
  detail::require_kind(box, RegionKind::Box, "box_contains_point");
  for (int i = 0; i < box.dim(); ++i) {
    if (std::abs(box.center[i] - point[i]) > box.size[i]) return false;
  }
  return true;
}

double box_volume(RegionView box) {
  detail::require_kind(box, RegionKind::Box, "box_volume");
  double v = 1.0;
  for (double o : box.size) v *= 2.0 * o;
  return v;
}

std::vector<Interval> box_intersection(RegionView a, RegionView b) {
  detail::require_same_shape(a, b);
  detail::require_kind(a, RegionKind::Box, "box_intersection");
  std::vector<Interval> out(a.dim());
  for (int i = 0; i < a.dim(); ++i) {
    out[i].lo = std::max(a.center[i] - a.size[i], b.center[i] - b.size[i]);
    out[i].hi = std::min(a.center[i] + a.size[i], b.center[i] + b.size[i]);
  }
  return out;
}

double intersection_volume(const std::vector<Interval>& intervals) {
  double v = 1.0;
  for (const Interval& iv : intervals) {
    if (iv.empty()) return 0.0;
    v *= iv.length();
  }
  return v;
}

}  // namespace regd
