#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace regd {

// Result of one randomized property check. checked counts the individual
// comparisons made, max_err the worst error seen under the property's own
// error measure (0 for purely boolean properties).
struct PropertyReport {
  std::string name;
  bool pass = false;
  long checked = 0;
  double max_err = 0.0;
  double seconds = 0.0;
  std::string detail;
};

// Ball depth dissimilarity under the hyperbolic configuration equals the
// upper half-space distance of the (center, radius) lifts, to 1e-12 relative.
PropertyReport verify_isometry(std::uint64_t seed = 1, long trials = 10000);

// Any linear g over the same scaled-radius core orders ball pairs exactly as
// the hyperbolic configuration does.
PropertyReport verify_monotonicity(std::uint64_t seed = 2, long trials = 10000);

// sign(boundary dissimilarity) decides containment: d <= 0 iff the child is
// contained, for balls and boxes, including exactly tangent pairs.
PropertyReport verify_containment_sign(std::uint64_t seed = 3, long trials = 10000);

// Containment chains nest: grandparent contains parent contains child implies
// every ancestor pair reports containment.
PropertyReport verify_nesting(std::uint64_t seed = 4, long trials = 1000);

// Depth dissimilarity of two fixed disjoint balls grows without bound as the
// radii shrink while the boundary dissimilarity stays put, and 100 mutually
// disjoint balls inside the unit ball can pairwise exceed depth 1e6.
PropertyReport verify_depth_separation();

// Central-difference check of every analytic gradient path (dissimilarities,
// pair energies, batch losses, ontology losses) at sampled points kept away
// from the kinks by construction.
PropertyReport verify_gradients(std::uint64_t seed = 5, long trials_per_case = 1000);

// Runs every property; prints one [PASS]/[FAIL] line per report to out when
// given.
std::vector<PropertyReport> run_all_verifications(std::ostream* out = nullptr);

}  // namespace regd
