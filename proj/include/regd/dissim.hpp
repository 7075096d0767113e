#pragma once

#include <cstdint>
#include <string>

#include "regd/geometry.hpp"

namespace regd {

enum class GKind { Linear, ArcoshPlusOne };
enum class FKind { Radius, ScaledRadius, OffsetNorm };

// Parameters of the depth dissimilarity
//   d(a, b) = g(|P(a) - P(b)|_p^p / (f(a) f(b)))
// where P is the flat parameter vector, g an increasing map and f a positive
// region-size function.
struct DepthConfig {
  int p = 2;  // exponent of the parameter distance, 1 or 2
  GKind g = GKind::Linear;
  double g_slope = 1.0;      // k in g(x) = k x + b, k > 0
  double g_intercept = 0.0;  // b
  FKind f = FKind::Radius;
  double f_scale = 1.0;  // s in f(reg) = s * radius, s > 0

  void validate(RegionKind kind) const;
  static DepthConfig linear(RegionKind kind, int p = 2);
  // p = 2, g = arcosh(x + 1), f = sqrt(2) * radius. With this configuration
  // the depth dissimilarity of two balls equals the hyperbolic half-space
  // distance between their (center, radius) points.
  static DepthConfig hyperbolic();
};

enum class BoundaryVariant { Geometric, Volume, Cone };

std::string to_string(BoundaryVariant v);
BoundaryVariant boundary_variant_from_string(const std::string& s);

// Relative floor for the intersection volume inside volume_dissim; a child
// disjoint from the parent scores -ln(kVolumeFloor) with zero gradient.
inline constexpr double kVolumeFloor = 1e-10;

double depth_dissim(RegionView a, RegionView b, const DepthConfig& cfg);
double depth_dissim_hyperbolic_config(RegionView a, RegionView b);

// Distance in the Poincare half-space model, arcosh(1 + |x-y|^2 / (2 x_n y_n)).
// Both points must have a strictly positive last coordinate.
double halfspace_distance(std::span<const double> x, std::span<const double> y);

// Signed boundary dissimilarity; <= 0 iff child is contained in parent.
double boundary_dissim(RegionView parent, RegionView child);

// -ln(vol(parent ∩ child) / vol(child)) with the intersection volume floored
// at kVolumeFloor * vol(child). Boxes only.
double volume_dissim(RegionView parent, RegionView child);

// arcsinh((|c1-c2| - r1) / r2) + arcsinh(1). Balls only.
double cone_boundary_dissim(RegionView parent, RegionView child);

// Gradient accumulator for one region in raw parameter space
// (center, radius / offsets). Contributions are added, not assigned, so the
// spans may alias slices of a larger buffer.
struct ParamGrad {
  std::span<double> center;
  std::span<double> size;
};

// Each *_vjp returns the forward value and accumulates w * d(value)/d(param)
// into the raw-parameter accumulators of both regions. Kink conventions:
// derivative of max(x, 0) and |x| is 0 at x = 0, ties in max-over-dimensions
// resolve to the lowest index.
double depth_dissim_vjp(RegionView a, RegionView b, const DepthConfig& cfg, double w,
                        ParamGrad ga, ParamGrad gb);
double boundary_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                           ParamGrad gc);
double volume_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                         ParamGrad gc);
double cone_boundary_dissim_vjp(RegionView parent, RegionView child, double w, ParamGrad gp,
                                ParamGrad gc);

enum class DissimKind { Depth, DepthHyperbolic, Boundary, Volume, Cone };

// Forward value plus gradient with respect to the trainable parameters
// (center, log-radius / log-offsets) of both regions. grad_a / grad_b must
// have length dim+1 for balls or 2*dim for boxes; they are overwritten.
// cfg is consulted for Depth only.
double dissim_gradient(DissimKind kind, RegionView a, RegionView b, const DepthConfig& cfg,
                       std::span<double> grad_a, std::span<double> grad_b);

// Number of depth dissimilarity evaluations since the last reset. Lets tests
// pin down that runs with a zero depth weight never touch the depth term.
std::uint64_t depth_eval_count();
void reset_depth_eval_count();

}  // namespace regd
