#include "regd/dissim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace regd {

namespace {

std::atomic<std::uint64_t> g_depth_evals{0};

// arcosh(1 + q) for q >= 0, stable near q = 0.
double arcosh1p(double q) { return std::log1p(q + std::sqrt(q * (q + 2.0))); }

double sign_of(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

double phi(double t, int p) { return p == 2 ? t * t : std::abs(t); }

// Derivative of |t|^p with d|t|/dt = 0 at t = 0.
double dphi(double t, int p) { return p == 2 ? 2.0 * t : sign_of(t); }

void require_grad_shape(RegionView r, const ParamGrad& g) {
  const std::size_t sz = r.kind == RegionKind::Ball ? 1 : r.center.size();
  if (g.center.size() != r.center.size() || g.size.size() != sz)
    throw std::invalid_argument("gradient accumulator shape mismatch");
}

double f_value(RegionView r, const DepthConfig& cfg) {
  switch (cfg.f) {
    case FKind::Radius:
      return r.radius();
    case FKind::ScaledRadius:
      return cfg.f_scale * r.radius();
    case FKind::OffsetNorm:
      return l2_norm(r.size);
  }
  throw std::invalid_argument("unknown FKind");
}

template <bool WithGrad>
double depth_core(RegionView a, RegionView b, const DepthConfig& cfg, double w, ParamGrad* ga,
                  ParamGrad* gb) {
  cfg.validate(a.kind);
  detail::require_same_shape(a, b);
  g_depth_evals.fetch_add(1, std::memory_order_relaxed);

  const int n = a.dim();
  double x = 0.0;
  for (int i = 0; i < n; ++i) x += phi(a.center[i] - b.center[i], cfg.p);
  for (std::size_t i = 0; i < a.size.size(); ++i) x += phi(a.size[i] - b.size[i], cfg.p);

  const double fa = f_value(a, cfg);
  const double fb = f_value(b, cfg);
  const double d = fa * fb;
  const double q = x / d;
  const double value =
      cfg.g == GKind::Linear ? cfg.g_slope * q + cfg.g_intercept : arcosh1p(q);

  if constexpr (WithGrad) {
    require_grad_shape(a, *ga);
    require_grad_shape(b, *gb);
    double gprime;
    if (cfg.g == GKind::Linear) {
      gprime = cfg.g_slope;
    } else {
      // The composed map is smooth with zero gradient at q = 0 even though
      // arcosh(1 + q) itself has unbounded slope there.
      gprime = q > 0.0 ? 1.0 / std::sqrt(q * (q + 2.0)) : 0.0;
    }
    const double scale = w * gprime;
    for (int i = 0; i < n; ++i) {
      const double t = dphi(a.center[i] - b.center[i], cfg.p) / d;
      ga->center[i] += scale * t;
      gb->center[i] -= scale * t;
    }
    if (a.kind == RegionKind::Ball) {
      const double t = dphi(a.size[0] - b.size[0], cfg.p) / d;
      const double s = cfg.f == FKind::ScaledRadius ? cfg.f_scale : 1.0;
      ga->size[0] += scale * (t - q * s / fa);
      gb->size[0] += scale * (-t - q * s / fb);
    } else {
      for (int i = 0; i < n; ++i) {
        const double t = dphi(a.size[i] - b.size[i], cfg.p) / d;
        ga->size[i] += scale * (t - q * a.size[i] / (fa * fa));
        gb->size[i] += scale * (-t - q * b.size[i] / (fb * fb));
      }
    }
  }
  return value;
}

template <bool WithGrad>
double boundary_ball_core(RegionView parent, RegionView child, double w, ParamGrad* gp,
                          ParamGrad* gc) {
  // Same norm helper and association order as contains_region, so the sign of
  // the value and the containment predicate can never disagree.
  const double nrm = l2_dist(parent.center, child.center);
  const double value = (nrm + child.radius()) - parent.radius();
  if constexpr (WithGrad) {
    const int n = parent.dim();
    if (nrm > 0.0) {
      for (int i = 0; i < n; ++i) {
        const double u = (parent.center[i] - child.center[i]) / nrm;
        gp->center[i] += w * u;
        gc->center[i] -= w * u;
      }
    }
    gp->size[0] -= w;
    gc->size[0] += w;
  }
  return value;
}

template <bool WithGrad>
double boundary_box_core(RegionView parent, RegionView child, double w, ParamGrad* gp,
                         ParamGrad* gc) {
  const int n = parent.dim();
  double zmax = -std::numeric_limits<double>::infinity();
  int jmax = 0;
  for (int i = 0; i < n; ++i) {
    const double z = (std::abs(parent.center[i] - child.center[i]) + child.size[i]) -
                     parent.size[i];
    if (z > zmax) {
      zmax = z;
      jmax = i;
    }
  }
  if (zmax <= 0.0) {
    if constexpr (WithGrad) {
      const double sgn = sign_of(parent.center[jmax] - child.center[jmax]);
      gp->center[jmax] += w * sgn;
      gc->center[jmax] -= w * sgn;
      gp->size[jmax] -= w;
      gc->size[jmax] += w;
    }
    return zmax;
  }
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = (std::abs(parent.center[i] - child.center[i]) + child.size[i]) -
                     parent.size[i];
    if (z > 0.0) s += z * z;
  }
  const double value = std::sqrt(s);
  if constexpr (WithGrad) {
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
  return value;
}

template <bool WithGrad>
double boundary_core(RegionView parent, RegionView child, double w, ParamGrad* gp, ParamGrad* gc) {
  detail::require_same_shape(parent, child);
  if constexpr (WithGrad) {
    require_grad_shape(parent, *gp);
    require_grad_shape(child, *gc);
  }
  return parent.kind == RegionKind::Ball
             ? boundary_ball_core<WithGrad>(parent, child, w, gp, gc)
             : boundary_box_core<WithGrad>(parent, child, w, gp, gc);
}

template <bool WithGrad>
double volume_core(RegionView parent, RegionView child, double w, ParamGrad* gp, ParamGrad* gc) {
  detail::require_same_shape(parent, child);
  detail::require_kind(parent, RegionKind::Box, "volume_dissim");
  if constexpr (WithGrad) {
    require_grad_shape(parent, *gp);
    require_grad_shape(child, *gc);
  }
  const int n = parent.dim();
  double vol_child = 1.0;
  double vol_inter = 1.0;
  for (int i = 0; i < n; ++i) {
    vol_child *= 2.0 * child.size[i];
    const double lo = std::max(parent.center[i] - parent.size[i], child.center[i] - child.size[i]);
    const double hi = std::min(parent.center[i] + parent.size[i], child.center[i] + child.size[i]);
    vol_inter *= std::max(hi - lo, 0.0);
  }
  // The floor cancels vol(child), so every floored pair scores the same
  // constant with zero gradient.
  if (!(vol_inter > kVolumeFloor * vol_child)) return -std::log(kVolumeFloor);

  const double value = std::log(vol_child / vol_inter);
  if constexpr (WithGrad) {
    for (int i = 0; i < n; ++i) {
      const double p_lo = parent.center[i] - parent.size[i];
      const double p_hi = parent.center[i] + parent.size[i];
      const double c_lo = child.center[i] - child.size[i];
      const double c_hi = child.center[i] + child.size[i];
      // Ties in the interval endpoints bind to the parent.
      const bool lo_child = c_lo > p_lo;
      const bool hi_child = c_hi < p_hi;
      const double inv_w = 1.0 / (std::min(p_hi, c_hi) - std::max(p_lo, c_lo));
      gc->center[i] += w * (-inv_w) * ((hi_child ? 1.0 : 0.0) - (lo_child ? 1.0 : 0.0));
      gc->size[i] += w * (1.0 / child.size[i] -
                          inv_w * ((hi_child ? 1.0 : 0.0) + (lo_child ? 1.0 : 0.0)));
      gp->center[i] += w * (-inv_w) * ((hi_child ? 0.0 : 1.0) - (lo_child ? 0.0 : 1.0));
      gp->size[i] += w * (-inv_w) * ((hi_child ? 0.0 : 1.0) + (lo_child ? 0.0 : 1.0));
    }
  }
  return value;
}

template <bool WithGrad>
double cone_core(RegionView parent, RegionView child, double w, ParamGrad* gp, ParamGrad* gc) {
  detail::require_same_shape(parent, child);
  detail::require_kind(parent, RegionKind::Ball, "cone_boundary_dissim");
  if constexpr (WithGrad) {
    require_grad_shape(parent, *gp);
    require_grad_shape(child, *gc);
  }
  const double nrm = l2_dist(parent.center, child.center);
  const double r1 = parent.radius();
  const double r2 = child.radius();
  const double u = (nrm - r1) / r2;
  const double value = std::asinh(u) + std::asinh(1.0);
  if constexpr (WithGrad) {
    const double du = w / std::sqrt(1.0 + u * u);
    if (nrm > 0.0) {
      for (int i = 0; i < parent.dim(); ++i) {
        const double unit = (parent.center[i] - child.center[i]) / nrm;
        gp->center[i] += du * unit / r2;
        gc->center[i] -= du * unit / r2;
      }
    }
    gp->size[0] -= du / r2;
    gc->size[0] -= du * u / r2;
  }
  return value;
}

}  // namespace

void DepthConfig::validate(RegionKind kind) const {
  if (p != 1 && p != 2) throw std::invalid_argument("depth exponent p must be 1 or 2");
  if (g == GKind::Linear && !(g_slope > 0.0))
    throw std::invalid_argument("linear g requires a positive slope");
  if (f == FKind::ScaledRadius && !(f_scale > 0.0))
    throw std::invalid_argument("scaled radius requires a positive scale");
  if (f == FKind::OffsetNorm && kind != RegionKind::Box)
    throw std::invalid_argument("offset-norm size function requires box regions");
  if (f != FKind::OffsetNorm && kind != RegionKind::Ball)
    throw std::invalid_argument("radius size functions require ball regions");
}

DepthConfig DepthConfig::linear(RegionKind kind, int p) {
  DepthConfig cfg;
  cfg.p = p;
  cfg.f = kind == RegionKind::Ball ? FKind::Radius : FKind::OffsetNorm;
  return cfg;
}

DepthConfig DepthConfig::hyperbolic() {
  DepthConfig cfg;
  cfg.p = 2;
  cfg.g = GKind::ArcoshPlusOne;
  cfg.f = FKind::ScaledRadius;
  cfg.f_scale = std::sqrt(2.0);
  return cfg;
}

std::string to_string(BoundaryVariant v) {
  switch (v) {
    case BoundaryVariant::Geometric:
      return "geometric";
    case BoundaryVariant::Volume:
      return "volume";
    case BoundaryVariant::Cone:
      return "cone";
  }
  return "geometric";
}

BoundaryVariant boundary_variant_from_string(const std::string& s) {
  if (s == "geometric") return BoundaryVariant::Geometric;
  if (s == "volume") return BoundaryVariant::Volume;
  if (s == "cone") return BoundaryVariant::Cone;
  throw std::invalid_argument("unknown boundary variant: " + s);
}

double depth_dissim(RegionView a, RegionView b, const DepthConfig& cfg) {
  return depth_core<false>(a, b, cfg, 0.0, nullptr, nullptr);
}

double depth_dissim_vjp(RegionView a, RegionView b, const DepthConfig& cfg, double w, ParamGrad ga,
                        ParamGrad gb) {
  return depth_core<true>(a, b, cfg, w, &ga, &gb);
}

double depth_dissim_hyperbolic_config(RegionView a, RegionView b) {
  return depth_dissim(a, b, DepthConfig::hyperbolic());
}

double halfspace_distance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("halfspace_distance requires points of equal dimension");
  const double xn = x.back();
  const double yn = y.back();
  if (!(xn > 0.0) || !(yn > 0.0))
    throw std::invalid_argument("halfspace_distance requires positive last coordinates");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    s += d * d;
  }
  return arcosh1p(s / (2.0 * xn * yn));
}

double boundary_dissim(RegionView parent, RegionView child) {
  return boundary_core<false>(parent, child, 0.0, nullptr, nullptr);
}

double boundary_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                           ParamGrad gc) {
  return boundary_core<true>(parent, child, w, &gp, &gc);
}

double volume_dissim(RegionView parent, RegionView child) {
  return volume_core<false>(parent, child, 0.0, nullptr, nullptr);
}

double volume_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                         ParamGrad gc) {
  return volume_core<true>(parent, child, w, &gp, &gc);
}

double cone_boundary_dissim(RegionView parent, RegionView child) {
  return cone_core<false>(parent, child, 0.0, nullptr, nullptr);
}

double cone_boundary_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                                ParamGrad gc) {
  return cone_core<true>(parent, child, w, &gp, &gc);
}

double dissim_gradient(DissimKind kind, RegionView a, RegionView b, const DepthConfig& cfg,
                       std::span<double> grad_a, std::span<double> grad_b) {
  const std::size_t n = a.center.size();
  const std::size_t na = n + a.size.size();
  const std::size_t nb = b.center.size() + b.size.size();
  if (grad_a.size() != na || grad_b.size() != nb)
    throw std::invalid_argument("dissim_gradient output size mismatch");
  std::fill(grad_a.begin(), grad_a.end(), 0.0);
  std::fill(grad_b.begin(), grad_b.end(), 0.0);
  ParamGrad ga{grad_a.subspan(0, n), grad_a.subspan(n)};
  ParamGrad gb{grad_b.subspan(0, b.center.size()), grad_b.subspan(b.center.size())};

  double value = 0.0;
  switch (kind) {
    case DissimKind::Depth:
      value = depth_dissim_vjp(a, b, cfg, 1.0, ga, gb);
      break;
    case DissimKind::DepthHyperbolic:
      value = depth_dissim_vjp(a, b, DepthConfig::hyperbolic(), 1.0, ga, gb);
      break;
    case DissimKind::Boundary:
      value = boundary_dissim_vjp(a, b, 1.0, ga, gb);
      break;
    case DissimKind::Volume:
      value = volume_dissim_vjp(a, b, 1.0, ga, gb);
      break;
    case DissimKind::Cone:
      value = cone_boundary_dissim_vjp(a, b, 1.0, ga, gb);
      break;
  }
  // Chain raw size gradients through the exponential parameterization.
  for (std::size_t i = 0; i < a.size.size(); ++i) ga.size[i] *= a.size[i];
  for (std::size_t i = 0; i < b.size.size(); ++i) gb.size[i] *= b.size[i];
  return value;
}

std::uint64_t depth_eval_count() { return g_depth_evals.load(std::memory_order_relaxed); }

void reset_depth_eval_count() { g_depth_evals.store(0, std::memory_order_relaxed); }

}  // namespace regd
