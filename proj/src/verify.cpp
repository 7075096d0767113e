#include "regd/verify.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "regd/dissim.hpp"
#include "regd/errors.hpp"
#include "regd/geometry.hpp"
#include "regd/model.hpp"
#include "regd/ontology.hpp"
#include "regd/optim.hpp"

namespace regd {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double urand(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// Uniform magnitude in [lo, hi] with a random sign; keeps coordinate
// differences away from the |t| kink by construction.
double signed_band(std::mt19937_64& rng, double lo, double hi) {
  const double v = urand(rng, lo, hi);
  return (rng() & 1u) ? v : -v;
}

Vec rand_vec(std::mt19937_64& rng, int dim, double lo, double hi) {
  Vec v(static_cast<std::size_t>(dim));
  for (double& x : v) x = urand(rng, lo, hi);
  return v;
}

int rand_dim(std::mt19937_64& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

double dissim_value(DissimKind k, RegionView a, RegionView b, const DepthConfig& dc) {
  switch (k) {
    case DissimKind::Depth:
      return depth_dissim(a, b, dc);
    case DissimKind::DepthHyperbolic:
      return depth_dissim_hyperbolic_config(a, b);
    case DissimKind::Boundary:
      return boundary_dissim(a, b);
    case DissimKind::Volume:
      return volume_dissim(a, b);
    case DissimKind::Cone:
      return cone_boundary_dissim(a, b);
  }
  throw DataError("unknown dissimilarity kind");
}

std::vector<double> pack_pair(const Region& a, const Region& b) {
  std::vector<double> p;
  p.reserve(a.center.size() + a.log_size.size() + b.center.size() + b.log_size.size());
  for (const Region* r : {&a, &b}) {
    p.insert(p.end(), r->center.begin(), r->center.end());
    p.insert(p.end(), r->log_size.begin(), r->log_size.end());
  }
  return p;
}

Region unpack_region(RegionKind kind, int dim, std::span<const double> p) {
  Vec c(p.begin(), p.begin() + dim);
  if (kind == RegionKind::Ball) return Region::ball_from_log(std::move(c), p[dim]);
  return Region::box_from_log(std::move(c), Vec(p.begin() + dim, p.end()));
}

Region copy_region(RegionView v) {
  Vec c(v.center.begin(), v.center.end());
  Vec s(v.size.begin(), v.size.end());
  Vec l(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) l[i] = std::log(s[i]);
  return Region::from_parts(v.kind, std::move(c), std::move(l), std::move(s));
}

NormalizedAxiom make_ax(NormalForm nf, int a, int b, int c = -1, int role = -1) {
  NormalizedAxiom ax;
  ax.nf = nf;
  ax.a = a;
  ax.b = b;
  ax.c = c;
  ax.role = role;
  return ax;
}

char fmt_buf[256];

std::string fmt(const char* format, double x) {
  std::snprintf(fmt_buf, sizeof(fmt_buf), format, x);
  return fmt_buf;
}

}  // namespace

PropertyReport verify_isometry(std::uint64_t seed, long trials) {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "halfspace-isometry";
  std::mt19937_64 rng(seed);
  const DepthConfig hyp = DepthConfig::hyperbolic();
  const double log_lo = std::log(1e-3);
  const double log_hi = std::log(1e3);
  long bad = 0;
  for (long t = 0; t < trials; ++t) {
    const int dim = rand_dim(rng, 1, 10);
    Vec c1 = rand_vec(rng, dim, -5.0, 5.0);
    Vec c2 = rand_vec(rng, dim, -5.0, 5.0);
    const double r1 = std::exp(urand(rng, log_lo, log_hi));
    const double r2 = std::exp(urand(rng, log_lo, log_hi));
    const Region a = Region::ball(c1, r1);
    const Region b = Region::ball(c2, r2);
    c1.push_back(r1);
    c2.push_back(r2);
    const double ref = halfspace_distance(c1, c2);
    const double scale = std::max(1.0, std::abs(ref));
    const double err_generic = std::abs(depth_dissim(a.view(), b.view(), hyp) - ref) / scale;
    const double err_fixed =
        std::abs(depth_dissim_hyperbolic_config(a.view(), b.view()) - ref) / scale;
    const double err = std::max(err_generic, err_fixed);
    rep.max_err = std::max(rep.max_err, err);
    if (err > 1e-12) ++bad;
    rep.checked += 2;
  }
  rep.pass = bad == 0;
  if (bad > 0) rep.detail = std::to_string(bad) + " pairs over 1e-12 relative";
  rep.seconds = seconds_since(t0);
  return rep;
}

PropertyReport verify_monotonicity(std::uint64_t seed, long trials) {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "order-preservation";
  std::mt19937_64 rng(seed);
  const DepthConfig hyp = DepthConfig::hyperbolic();
  long inversions = 0;
  for (long t = 0; t < trials; ++t) {
    const int dim = rand_dim(rng, 1, 8);
    Region balls[4] = {
        Region::ball(rand_vec(rng, dim, -5.0, 5.0), std::exp(urand(rng, -3.0, 3.0))),
        Region::ball(rand_vec(rng, dim, -5.0, 5.0), std::exp(urand(rng, -3.0, 3.0))),
        Region::ball(rand_vec(rng, dim, -5.0, 5.0), std::exp(urand(rng, -3.0, 3.0))),
        Region::ball(rand_vec(rng, dim, -5.0, 5.0), std::exp(urand(rng, -3.0, 3.0)))};
    DepthConfig cand = hyp;
    cand.g = GKind::Linear;
    cand.g_slope = std::exp(urand(rng, -2.0, 2.0));
    cand.g_intercept = urand(rng, -5.0, 5.0);
    const double h1 = depth_dissim(balls[0].view(), balls[1].view(), hyp);
    const double h2 = depth_dissim(balls[2].view(), balls[3].view(), hyp);
    const double c1 = depth_dissim(balls[0].view(), balls[1].view(), cand);
    const double c2 = depth_dissim(balls[2].view(), balls[3].view(), cand);
    if ((h1 < h2 && c1 > c2) || (h1 > h2 && c1 < c2)) ++inversions;
    ++rep.checked;
  }
  rep.pass = inversions == 0;
  if (inversions > 0) rep.detail = std::to_string(inversions) + " order inversions";
  rep.seconds = seconds_since(t0);
  return rep;
}

PropertyReport verify_containment_sign(std::uint64_t seed, long trials) {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "containment-sign";
  std::mt19937_64 rng(seed);
  long mismatches = 0;

  for (long t = 0; t < trials; ++t) {
    const int dim = rand_dim(rng, 1, 8);
    Region parent = Region::ball(rand_vec(rng, dim, -2.0, 2.0), std::exp(urand(rng, -2.0, 1.0)));
    Region child = Region::ball(rand_vec(rng, dim, -2.0, 2.0), std::exp(urand(rng, -2.0, 1.0)));
    if (t % 2 == 0) {
      // Construct a genuinely contained pair so both predicate branches get
      // exercised about equally often.
      Vec pc = child.center;
      for (double& x : pc) x += urand(rng, -0.5, 0.5);
      const double radius = l2_dist(pc, child.center) + child.radius() + urand(rng, 1e-3, 1.0);
      parent = Region::ball(std::move(pc), radius);
    }
    const bool by_sign = boundary_dissim(parent.view(), child.view()) <= 0.0;
    if (by_sign != contains_region(parent.view(), child.view())) ++mismatches;
    ++rep.checked;
  }

  for (long t = 0; t < trials; ++t) {
    const int dim = rand_dim(rng, 1, 6);
    Vec cc = rand_vec(rng, dim, -2.0, 2.0);
    Vec co(static_cast<std::size_t>(dim));
    for (double& x : co) x = std::exp(urand(rng, -2.0, 0.5));
    Vec pc = rand_vec(rng, dim, -2.0, 2.0);
    Vec po(static_cast<std::size_t>(dim));
    if (t % 2 == 0) {
      for (int i = 0; i < dim; ++i) {
        po[static_cast<std::size_t>(i)] = std::abs(pc[static_cast<std::size_t>(i)] -
                                                   cc[static_cast<std::size_t>(i)]) +
                                          co[static_cast<std::size_t>(i)] + urand(rng, 1e-3, 1.0);
      }
    } else {
      for (double& x : po) x = std::exp(urand(rng, -2.0, 0.7));
    }
    const Region parent = Region::box(pc, po);
    const Region child = Region::box(cc, co);
    const bool by_sign = boundary_dissim(parent.view(), child.view()) <= 0.0;
    if (by_sign != contains_region(parent.view(), child.view())) ++mismatches;
    ++rep.checked;
  }

  // Exactly tangent pairs: the parent size is set to the rounded sum the
  // boundary formula itself computes, so the dissimilarity is exactly zero
  // and the containment predicate must still agree.
  const long tangents = 1000;
  for (long t = 0; t < tangents; ++t) {
    const int dim = rand_dim(rng, 1, 6);
    Vec cc = rand_vec(rng, dim, -2.0, 2.0);
    Vec pc = rand_vec(rng, dim, -2.0, 2.0);
    double d;
    bool contained;
    if (t % 2 == 0) {
      const double rc = std::exp(urand(rng, -2.0, 1.0));
      const Region child = Region::ball(cc, rc);
      const Region parent = Region::ball(pc, l2_dist(pc, cc) + rc);
      d = boundary_dissim(parent.view(), child.view());
      contained = contains_region(parent.view(), child.view());
    } else {
      Vec co(static_cast<std::size_t>(dim));
      for (double& x : co) x = std::exp(urand(rng, -2.0, 0.5));
      Vec po(static_cast<std::size_t>(dim));
      const int touch = static_cast<int>(rng() % static_cast<std::uint64_t>(dim));
      for (int i = 0; i < dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        po[ui] = std::abs(pc[ui] - cc[ui]) + co[ui] + (i == touch ? 0.0 : urand(rng, 0.05, 1.0));
      }
      const Region child = Region::box(cc, co);
      const Region parent = Region::box(pc, po);
      d = boundary_dissim(parent.view(), child.view());
      contained = contains_region(parent.view(), child.view());
    }
    rep.max_err = std::max(rep.max_err, std::abs(d));
    if (std::abs(d) > 1e-12 || !contained || !(d <= 0.0)) ++mismatches;
    ++rep.checked;
  }

  rep.pass = mismatches == 0;
  if (mismatches > 0) rep.detail = std::to_string(mismatches) + " sign mismatches";
  rep.seconds = seconds_since(t0);
  return rep;
}

PropertyReport verify_nesting(std::uint64_t seed, long trials) {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "nesting-transitivity";
  std::mt19937_64 rng(seed);
  long violations = 0;

  const auto check_chain = [&](const Region& g, const Region& p, const Region& c) {
    const bool ok = boundary_dissim(g.view(), p.view()) <= 0.0 &&
                    boundary_dissim(p.view(), c.view()) <= 0.0 &&
                    boundary_dissim(g.view(), c.view()) <= 0.0 &&
                    contains_region(g.view(), p.view()) && contains_region(p.view(), c.view()) &&
                    contains_region(g.view(), c.view());
    if (!ok) ++violations;
    ++rep.checked;
  };

  for (long t = 0; t < trials; ++t) {
    const int dim = rand_dim(rng, 1, 6);

    const Region c = Region::ball(rand_vec(rng, dim, -1.0, 1.0), std::exp(urand(rng, -2.0, 0.0)));
    Vec pc = c.center;
    for (double& x : pc) x += urand(rng, -0.8, 0.8);
    const Region p = Region::ball(pc, l2_dist(pc, c.center) + c.radius() + urand(rng, 0.01, 0.5));
    Vec gc = p.center;
    for (double& x : gc) x += urand(rng, -0.8, 0.8);
    const Region g = Region::ball(gc, l2_dist(gc, pc) + p.radius() + urand(rng, 0.01, 0.5));
    check_chain(g, p, c);

    Vec cc = rand_vec(rng, dim, -1.0, 1.0);
    Vec co(static_cast<std::size_t>(dim));
    for (double& x : co) x = std::exp(urand(rng, -2.0, 0.0));
    Vec pc2 = cc;
    Vec po(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      pc2[ui] += urand(rng, -0.5, 0.5);
      po[ui] = std::abs(pc2[ui] - cc[ui]) + co[ui] + urand(rng, 0.01, 0.5);
    }
    Vec gc2 = pc2;
    Vec go(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      gc2[ui] += urand(rng, -0.5, 0.5);
      go[ui] = std::abs(gc2[ui] - pc2[ui]) + po[ui] + urand(rng, 0.01, 0.5);
    }
    check_chain(Region::box(gc2, go), Region::box(pc2, po), Region::box(cc, co));
  }

  rep.pass = violations == 0;
  if (violations > 0) rep.detail = std::to_string(violations) + " broken chains";
  rep.seconds = seconds_since(t0);
  return rep;
}

PropertyReport verify_depth_separation() {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "depth-separation";
  const DepthConfig cfg = DepthConfig::linear(RegionKind::Ball, 2);
  bool ok = true;

  // Two fixed disjoint balls: halving the radii drives the depth
  // dissimilarity past any target while the boundary dissimilarity stays at
  // the fixed center gap.
  const double target = 100.0;
  double r = 1.0;
  int halvings = 0;
  double depth = 0.0;
  while (halvings <= 60) {
    const Region a = Region::ball({0.0, 0.0}, r);
    const Region b = Region::ball({3.0, 0.0}, r);
    depth = depth_dissim(a.view(), b.view(), cfg);
    const double bd = boundary_dissim(a.view(), b.view());
    rep.max_err = std::max(rep.max_err, std::abs(bd - 3.0));
    if (std::abs(bd - 3.0) > 1e-12) ok = false;
    ++rep.checked;
    if (depth >= target) break;
    r /= 2.0;
    ++halvings;
  }
  if (depth < target || halvings > 40) ok = false;

  // 100 disjoint balls inside the unit ball whose pairwise depth
  // dissimilarity all exceeds 1e6: a 10x10 grid of tiny balls.
  const double radius = 1e-5;
  std::vector<Region> grid;
  grid.reserve(100);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      grid.push_back(Region::ball({-0.45 + 0.1 * i, -0.45 + 0.1 * j}, radius));
    }
  }
  const Region unit = Region::ball({0.0, 0.0}, 1.0);
  double min_depth = std::numeric_limits<double>::infinity();
  for (const Region& b : grid) {
    if (!contains_region(unit.view(), b.view())) ok = false;
    ++rep.checked;
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = i + 1; j < grid.size(); ++j) {
      const RegionView a = grid[i].view();
      const RegionView b = grid[j].view();
      if (!(l2_dist(a.center, b.center) > a.radius() + b.radius())) ok = false;
      min_depth = std::min(min_depth, depth_dissim(a, b, cfg));
      ++rep.checked;
    }
  }
  if (!(min_depth > 1e6)) ok = false;

  rep.pass = ok;
  rep.detail = "halvings=" + std::to_string(halvings) + " min_grid_depth=" +
               fmt("%.3g", min_depth);
  rep.seconds = seconds_since(t0);
  return rep;
}

PropertyReport verify_gradients(std::uint64_t seed, long trials_per_case) {
  const auto t0 = Clock::now();
  PropertyReport rep;
  rep.name = "gradient-check";
  std::mt19937_64 rng(seed);
  const double kTol = 1e-4;
  const double kM = 1e-3;
  long violations = 0;
  std::vector<std::string> fails;

  const auto note = [&](const std::string& s) {
    if (fails.size() < 6) fails.push_back(s);
  };

  const auto compare = [&](const std::string& cname, std::span<const double> analytic,
                           const std::vector<double>& fd) {
    for (std::size_t i = 0; i < fd.size(); ++i) {
      const double err = std::abs(fd[i] - analytic[i]) /
                         std::max({1.0, std::abs(fd[i]), std::abs(analytic[i])});
      rep.max_err = std::max(rep.max_err, err);
      if (err > kTol) {
        ++violations;
        note(cname + "[" + std::to_string(i) + "] err=" + fmt("%.3g", err));
      }
    }
    ++rep.checked;
  };

  // --- region pair samplers; every draw keeps a margin from the kinks ---

  const auto ball_pair = [&](std::mt19937_64& g, int dim, double sep_lo, double sep_hi,
                             bool size_gap) {
    Vec ca = rand_vec(g, dim, -2.0, 2.0);
    Vec cb = ca;
    for (double& x : cb) x += signed_band(g, sep_lo, sep_hi);
    const double la = urand(g, -1.5, 0.5);
    const double lb = size_gap ? la + signed_band(g, 0.15, 0.8) : urand(g, -1.5, 0.5);
    return std::pair<Region, Region>{Region::ball_from_log(std::move(ca), la),
                                     Region::ball_from_log(std::move(cb), lb)};
  };

  const auto box_pair = [&](std::mt19937_64& g, int dim, double sep_lo, double sep_hi,
                            bool size_gap) {
    Vec ca = rand_vec(g, dim, -1.0, 1.0);
    Vec cb = ca;
    for (double& x : cb) x += signed_band(g, sep_lo, sep_hi);
    Vec la(static_cast<std::size_t>(dim));
    Vec lb(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      la[ui] = urand(g, -1.5, 0.2);
      lb[ui] = size_gap ? la[ui] + signed_band(g, 0.15, 0.8) : urand(g, -1.5, 0.2);
    }
    return std::pair<Region, Region>{Region::box_from_log(std::move(ca), std::move(la)),
                                     Region::box_from_log(std::move(cb), std::move(lb))};
  };

  // Parent strictly around the child; the slack gaps keep every z term and
  // the argmax of the contained branch away from ties.
  const auto contained_box = [&](std::mt19937_64& g, int dim) {
    for (int tries = 0; tries < 10000; ++tries) {
      Vec cc = rand_vec(g, dim, -1.0, 1.0);
      Vec co(static_cast<std::size_t>(dim));
      for (double& x : co) x = std::exp(urand(g, -1.5, -0.3));
      Vec pc = cc;
      Vec po(static_cast<std::size_t>(dim));
      Vec slack(static_cast<std::size_t>(dim));
      for (double& s : slack) s = urand(g, 0.05, 0.6);
      Vec sorted = slack;
      std::sort(sorted.begin(), sorted.end());
      if (dim >= 2 && sorted[1] - sorted[0] < 2e-3) continue;
      for (int i = 0; i < dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        pc[ui] += signed_band(g, 0.01, 0.04);
        po[ui] = std::abs(pc[ui] - cc[ui]) + co[ui] + slack[ui];
      }
      return std::pair<Region, Region>{Region::box(std::move(pc), std::move(po)),
                                       Region::box(std::move(cc), std::move(co))};
    }
    throw DataError("contained box sampler exhausted");
  };

  const auto crossing_box = [&](std::mt19937_64& g, int dim) {
    Vec cc = rand_vec(g, dim, -1.0, 1.0);
    Vec co(static_cast<std::size_t>(dim));
    for (double& x : co) x = std::exp(urand(g, -1.5, -0.3));
    Vec pc = cc;
    Vec po(static_cast<std::size_t>(dim));
    for (int i = 0; i < dim; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      pc[ui] += signed_band(g, 0.01, 0.04);
      const double t = i == 0 ? urand(g, 0.05, 0.15) : signed_band(g, 0.05, 0.15);
      po[ui] = std::abs(pc[ui] - cc[ui]) + co[ui] - t;
    }
    return std::pair<Region, Region>{Region::box(std::move(pc), std::move(po)),
                                     Region::box(std::move(cc), std::move(co))};
  };

  const auto live_volume_pair = [&](std::mt19937_64& g, int dim) {
    for (int tries = 0; tries < 10000; ++tries) {
      Vec pc = rand_vec(g, dim, -0.3, 0.3);
      Vec po(static_cast<std::size_t>(dim));
      for (double& x : po) x = urand(g, 0.6, 1.0);
      Vec cc = pc;
      Vec co(static_cast<std::size_t>(dim));
      for (int i = 0; i < dim; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        cc[ui] += signed_band(g, 0.05, 0.45);
        co[ui] = urand(g, 0.25, 0.5);
      }
      bool ok = true;
      for (int i = 0; i < dim && ok; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        const double plo = pc[ui] - po[ui];
        const double phi = pc[ui] + po[ui];
        const double clo = cc[ui] - co[ui];
        const double chi = cc[ui] + co[ui];
        ok = std::abs(clo - plo) >= 5e-3 && std::abs(chi - phi) >= 5e-3 &&
             std::min(phi, chi) - std::max(plo, clo) >= 0.05;
      }
      if (!ok) continue;
      return std::pair<Region, Region>{Region::box(std::move(pc), std::move(po)),
                                       Region::box(std::move(cc), std::move(co))};
    }
    throw DataError("volume sampler exhausted");
  };

  const auto floored_volume_pair = [&](std::mt19937_64& g, int dim) {
    Vec pc = rand_vec(g, dim, -0.5, 0.5);
    Vec po(static_cast<std::size_t>(dim));
    for (double& x : po) x = urand(g, 0.3, 0.6);
    Vec cc = rand_vec(g, dim, -0.5, 0.5);
    Vec co(static_cast<std::size_t>(dim));
    for (double& x : co) x = urand(g, 0.1, 0.3);
    cc[0] = pc[0] + po[0] + co[0] + 0.2 + urand(g, 0.0, 0.5);
    return std::pair<Region, Region>{Region::box(std::move(pc), std::move(po)),
                                     Region::box(std::move(cc), std::move(co))};
  };

  // --- case runners ---

  const auto dissim_case = [&](const std::string& cname, RegionKind kind, DissimKind dk,
                               const DepthConfig& dc, long n, int dim_lo, int dim_hi,
                               const std::function<std::pair<Region, Region>(std::mt19937_64&,
                                                                             int)>& draw) {
    try {
      for (long t = 0; t < n; ++t) {
        const int dim = rand_dim(rng, dim_lo, dim_hi);
        const int ppn = kind == RegionKind::Ball ? dim + 1 : 2 * dim;
        const auto [a, b] = draw(rng, dim);
        std::vector<double> analytic(static_cast<std::size_t>(2 * ppn));
        std::span<double> ga(analytic.data(), static_cast<std::size_t>(ppn));
        std::span<double> gb(analytic.data() + ppn, static_cast<std::size_t>(ppn));
        dissim_gradient(dk, a.view(), b.view(), dc, ga, gb);
        const std::vector<double> params = pack_pair(a, b);
        const std::function<double(std::span<const double>)> f =
            [&](std::span<const double> q) {
              const Region ra = unpack_region(kind, dim, q.subspan(0, static_cast<std::size_t>(ppn)));
              const Region rb = unpack_region(kind, dim, q.subspan(static_cast<std::size_t>(ppn)));
              return dissim_value(dk, ra.view(), rb.view(), dc);
            };
        compare(cname, analytic, finite_difference(f, params));
      }
    } catch (const std::exception& e) {
      ++violations;
      note(cname + ": " + e.what());
    }
  };

  const auto energy_case = [&](const std::string& cname, RegionKind kind, const EnergyConfig& e,
                               long n, int dim_lo, int dim_hi,
                               const std::function<std::pair<Region, Region>(std::mt19937_64&,
                                                                             int)>& draw) {
    try {
      for (long t = 0; t < n; ++t) {
        const int dim = rand_dim(rng, dim_lo, dim_hi);
        const int ppn = kind == RegionKind::Ball ? dim + 1 : 2 * dim;
        const auto [p, c] = draw(rng, dim);
        std::vector<double> analytic(static_cast<std::size_t>(2 * ppn));
        std::span<double> gp(analytic.data(), static_cast<std::size_t>(ppn));
        std::span<double> gc(analytic.data() + ppn, static_cast<std::size_t>(ppn));
        energy_gradient(p.view(), c.view(), e, gp, gc);
        const std::vector<double> params = pack_pair(p, c);
        const std::function<double(std::span<const double>)> f =
            [&](std::span<const double> q) {
              const Region rp = unpack_region(kind, dim, q.subspan(0, static_cast<std::size_t>(ppn)));
              const Region rc = unpack_region(kind, dim, q.subspan(static_cast<std::size_t>(ppn)));
              return energy(rp.view(), rc.view(), e);
            };
        compare(cname, analytic, finite_difference(f, params));
      }
    } catch (const std::exception& e2) {
      ++violations;
      note(cname + ": " + e2.what());
    }
  };

  // --- kink margin predicates used by the table-level cases ---

  const auto depth_margins = [&](RegionView a, RegionView b, const DepthConfig& dc) {
    if (dc.p == 1) {
      for (int i = 0; i < a.dim(); ++i) {
        if (std::abs(a.center[i] - b.center[i]) < kM) return false;
      }
      for (std::size_t s = 0; s < a.size.size(); ++s) {
        if (std::abs(a.size[s] - b.size[s]) < kM) return false;
      }
    }
    if (dc.g == GKind::ArcoshPlusOne) {
      double x = 0.0;
      for (int i = 0; i < a.dim(); ++i) {
        const double d = a.center[i] - b.center[i];
        x += dc.p == 2 ? d * d : std::abs(d);
      }
      for (std::size_t s = 0; s < a.size.size(); ++s) {
        const double d = a.size[s] - b.size[s];
        x += dc.p == 2 ? d * d : std::abs(d);
      }
      const auto fv = [&](RegionView r) {
        switch (dc.f) {
          case FKind::Radius:
            return r.radius();
          case FKind::ScaledRadius:
            return dc.f_scale * r.radius();
          case FKind::OffsetNorm:
            return l2_norm(r.size);
        }
        return 0.0;
      };
      if (x / (fv(a) * fv(b)) < 1e-2) return false;
    }
    return true;
  };

  const auto boundary_margins = [&](RegionView p, RegionView c) {
    if (p.kind == RegionKind::Ball) return l2_dist(p.center, c.center) >= kM;
    double z1 = -std::numeric_limits<double>::infinity();
    double z2 = z1;
    for (int i = 0; i < p.dim(); ++i) {
      if (std::abs(p.center[i] - c.center[i]) < kM) return false;
      const double z = std::abs(p.center[i] - c.center[i]) + c.size[i] - p.size[i];
      if (std::abs(z) < kM) return false;
      if (z > z1) {
        z2 = z1;
        z1 = z;
      } else {
        z2 = std::max(z2, z);
      }
    }
    if (z1 <= 0.0 && p.dim() >= 2 && z1 - z2 < kM) return false;
    return true;
  };

  const auto energy_margins = [&](RegionView p, RegionView c, const EnergyConfig& e) {
    if (!boundary_margins(p, c)) return false;
    if (e.lambda != 0.0 && !depth_margins(p, c, e.depth)) return false;
    return true;
  };

  const auto random_table = [&](RegionKind kind, int dim, const std::vector<std::string>& ids,
                                const std::vector<std::string>& roles) {
    EmbeddingTable t(kind, dim, ids, roles);
    t.init_random(rng());
    auto pv = t.params();
    for (int nidx = 0; nidx < t.num_nodes(); ++nidx) {
      for (int s = 0; s < t.sizes_per_node(); ++s) {
        pv[t.node_offset(nidx) + static_cast<std::size_t>(dim + s)] = urand(rng, -1.2, 0.3);
      }
    }
    t.refresh_sizes();
    return t;
  };

  const auto batch_case = [&](const std::string& cname, RegionKind kind, const EnergyConfig& e,
                              long n) {
    const std::vector<std::string> ids = {"n0", "n1", "n2", "n3", "n4", "n5"};
    Batch batch;
    batch.positives = {{0, 1}, {2, 3}};
    batch.negative_children = {{4, 5}, {5, 1}};
    const int dim = 3;
    const auto margins_ok = [&](const EmbeddingTable& t) {
      for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        const auto [u, v] = batch.positives[i];
        if (!energy_margins(t.region(u), t.region(v), e)) return false;
        if (std::abs(energy(t, u, v, e) - e.gamma1) < kM) return false;
        for (const int w : batch.negative_children[i]) {
          if (!boundary_margins(t.region(u), t.region(w))) return false;
          if (std::abs(e.gamma2 - boundary_value(t.region(u), t.region(w), e)) < kM) return false;
        }
      }
      return true;
    };
    try {
      for (long t = 0; t < n; ++t) {
        EmbeddingTable table = random_table(kind, dim, ids, {});
        int tries = 0;
        while (!margins_ok(table)) {
          if (++tries > 2000) throw DataError("batch sampler exhausted");
          table = random_table(kind, dim, ids, {});
        }
        std::vector<double> analytic(table.num_params());
        batch_loss_grad(table, batch, e, analytic);
        const std::vector<double> params(table.params().begin(), table.params().end());
        EmbeddingTable scratch = table;
        const std::function<double(std::span<const double>)> f =
            [&](std::span<const double> q) {
              std::copy(q.begin(), q.end(), scratch.params().begin());
              scratch.refresh_sizes();
              return batch_loss(scratch, batch, e);
            };
        compare(cname, analytic, finite_difference(f, params));
      }
    } catch (const std::exception& e2) {
      ++violations;
      note(cname + ": " + e2.what());
    }
  };

  const auto effective_pair = [&](const NormalizedAxiom& ax, const EmbeddingTable& t) {
    switch (ax.nf) {
      case NormalForm::NF1:
        return std::pair<Region, Region>{copy_region(t.region(ax.b)), copy_region(t.region(ax.a))};
      case NormalForm::NF2: {
        Region child = t.kind() == RegionKind::Box
                           ? pseudo_intersection_box(t.region(ax.a), t.region(ax.b))
                           : pseudo_midpoint_ball(t.region(ax.a), t.region(ax.b));
        return std::pair<Region, Region>{copy_region(t.region(ax.c)), std::move(child)};
      }
      case NormalForm::NF3:
        return std::pair<Region, Region>{translated_region(t.region(ax.b), t.role_vector(ax.role)),
                                         copy_region(t.region(ax.a))};
      case NormalForm::NF4:
        return std::pair<Region, Region>{copy_region(t.region(ax.a)),
                                         translated_region(t.region(ax.b), t.role_vector(ax.role))};
    }
    throw DataError("unknown normal form");
  };

  // need_live: a positive scored with the depth term must have a genuine
  // intersection, otherwise the floored pseudo size drives the loss to ~1e8
  // and the finite-difference quotient drowns in float cancellation.
  const auto nf2_margins = [&](const EmbeddingTable& t, const NormalizedAxiom& ax,
                               bool need_live) {
    const RegionView a = t.region(ax.a);
    const RegionView b = t.region(ax.b);
    if (t.kind() == RegionKind::Box) {
      for (int i = 0; i < a.dim(); ++i) {
        const double lo_a = a.center[i] - a.size[i];
        const double lo_b = b.center[i] - b.size[i];
        const double hi_a = a.center[i] + a.size[i];
        const double hi_b = b.center[i] + b.size[i];
        if (std::abs(lo_a - lo_b) < kM || std::abs(hi_a - hi_b) < kM) return false;
        const double width = std::min(hi_a, hi_b) - std::max(lo_a, lo_b);
        if (need_live ? width < 0.1 : std::abs(width) < kM) return false;
      }
      return true;
    }
    const double nrm = l2_dist(a.center, b.center);
    if (nrm < kM) return false;
    const double slack = a.radius() + b.radius() - nrm;
    return need_live ? slack >= 0.1 : std::abs(slack) >= kM;
  };

  const auto base_margins = [&](RegionView p, RegionView c, BaseModel base) {
    if (base == BaseModel::Elbe) {
      for (int i = 0; i < p.dim(); ++i) {
        if (std::abs(p.center[i] - c.center[i]) < kM) return false;
        const double z = std::abs(p.center[i] - c.center[i]) + c.size[i] - p.size[i];
        if (std::abs(z) < kM) return false;
      }
      return true;
    }
    const double nrm = l2_dist(p.center, c.center);
    if (nrm < kM) return false;
    return std::abs(nrm + c.radius() - p.radius()) >= kM;
  };

  const auto ontology_case = [&](const std::string& cname, const OntologyConfig& oc, long n) {
    const std::vector<std::string> concepts = {"A", "B", "C", "D", "E", "F"};
    const std::vector<std::string> roles = {"r"};
    const RegionKind kind = oc.region_kind();
    OntologyBatch batch;
    batch.positives = {make_ax(NormalForm::NF1, 0, 1), make_ax(NormalForm::NF2, 0, 1, 2),
                       make_ax(NormalForm::NF3, 0, 4, -1, 0), make_ax(NormalForm::NF4, 5, 2, -1, 0)};
    batch.negatives = {{make_ax(NormalForm::NF1, 3, 1)},
                       {make_ax(NormalForm::NF2, 0, 3, 2)},
                       {make_ax(NormalForm::NF3, 3, 4, -1, 0)},
                       {make_ax(NormalForm::NF4, 3, 2, -1, 0)}};
    const auto axiom_margins = [&](const EmbeddingTable& t, const NormalizedAxiom& ax,
                                   bool positive) {
      const bool live = positive && oc.use_regd && oc.energy.lambda > 0.0;
      if (ax.nf == NormalForm::NF2 && !nf2_margins(t, ax, live)) return false;
      const auto [p, c] = effective_pair(ax, t);
      if (oc.use_regd) {
        if (!energy_margins(p.view(), c.view(), oc.energy)) return false;
        if (positive && std::abs(axiom_energy(ax, t, oc) - oc.energy.gamma1) < kM) return false;
        if (!positive && std::abs(oc.energy.gamma2 - axiom_boundary(ax, t, oc)) < kM) return false;
        return true;
      }
      return base_margins(p.view(), c.view(), oc.base);
    };
    const auto margins_ok = [&](const EmbeddingTable& t) {
      std::set<int> touched;
      for (std::size_t i = 0; i < batch.positives.size(); ++i) {
        if (!axiom_margins(t, batch.positives[i], true)) return false;
        for (const NormalizedAxiom& neg : batch.negatives[i]) {
          if (!axiom_margins(t, neg, false)) return false;
        }
      }
      if (oc.base == BaseModel::Elem && oc.elem_center_regularizer) {
        for (const NormalizedAxiom& ax : batch.positives) {
          touched.insert(ax.a);
          touched.insert(ax.b);
          if (ax.nf == NormalForm::NF2) touched.insert(ax.c);
        }
        for (const auto& negs : batch.negatives) {
          for (const NormalizedAxiom& ax : negs) {
            touched.insert(ax.a);
            touched.insert(ax.b);
            if (ax.nf == NormalForm::NF2) touched.insert(ax.c);
          }
        }
        for (const int cid : touched) {
          const double nrm = l2_norm(t.region(cid).center);
          if (nrm < kM || std::abs(nrm - 1.0) < kM) return false;
        }
      }
      return true;
    };
    try {
      for (long t = 0; t < n; ++t) {
        EmbeddingTable table = random_table(kind, 3, concepts, roles);
        int tries = 0;
        while (!margins_ok(table)) {
          if (++tries > 2000) throw DataError("ontology sampler exhausted");
          table = random_table(kind, 3, concepts, roles);
        }
        std::vector<double> analytic(table.num_params());
        ontology_batch_loss_grad(table, batch, oc, analytic);
        const std::vector<double> params(table.params().begin(), table.params().end());
        EmbeddingTable scratch = table;
        const std::function<double(std::span<const double>)> f =
            [&](std::span<const double> q) {
              std::copy(q.begin(), q.end(), scratch.params().begin());
              scratch.refresh_sizes();
              return ontology_batch_loss(scratch, batch, oc);
            };
        compare(cname, analytic, finite_difference(f, params));
      }
    } catch (const std::exception& e2) {
      ++violations;
      note(cname + ": " + e2.what());
    }
  };

  // --- the cases ---

  const long n = trials_per_case;
  const long nt = std::max(30L, trials_per_case / 10);

  DepthConfig dc = DepthConfig::linear(RegionKind::Ball, 2);
  dc.g_slope = 1.3;
  dc.g_intercept = 0.2;
  dissim_case("depth-ball-p2-linear", RegionKind::Ball, DissimKind::Depth, dc, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return ball_pair(g, dim, 0.05, 1.5, false); });

  dissim_case("depth-ball-p2-arcosh", RegionKind::Ball, DissimKind::Depth,
              DepthConfig::hyperbolic(), n, 1, 4, [&](std::mt19937_64& g, int dim) {
                return ball_pair(g, dim, 0.6, 1.5, false);
              });

  dc = DepthConfig::linear(RegionKind::Ball, 1);
  dissim_case("depth-ball-p1-linear", RegionKind::Ball, DissimKind::Depth, dc, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return ball_pair(g, dim, 0.05, 1.5, true); });

  dissim_case("depth-hyperbolic-fixed", RegionKind::Ball, DissimKind::DepthHyperbolic,
              DepthConfig::hyperbolic(), n, 1, 4, [&](std::mt19937_64& g, int dim) {
                return ball_pair(g, dim, 0.6, 1.5, false);
              });

  dc = DepthConfig::linear(RegionKind::Box, 1);
  dissim_case("depth-box-p1-linear", RegionKind::Box, DissimKind::Depth, dc, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return box_pair(g, dim, 0.05, 1.0, true); });

  dc = DepthConfig::linear(RegionKind::Box, 2);
  dc.g = GKind::ArcoshPlusOne;
  dissim_case("depth-box-p2-arcosh", RegionKind::Box, DissimKind::Depth, dc, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return box_pair(g, dim, 0.6, 1.2, false); });

  const DepthConfig unused = DepthConfig::linear(RegionKind::Ball, 2);
  dissim_case("boundary-ball", RegionKind::Ball, DissimKind::Boundary, unused, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return ball_pair(g, dim, 0.05, 1.5, false); });

  dissim_case("boundary-box-contained", RegionKind::Box, DissimKind::Boundary, unused, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return contained_box(g, dim); });

  dissim_case("boundary-box-crossing", RegionKind::Box, DissimKind::Boundary, unused, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return crossing_box(g, dim); });

  dissim_case("volume-live", RegionKind::Box, DissimKind::Volume, unused, n, 1, 3,
              [&](std::mt19937_64& g, int dim) { return live_volume_pair(g, dim); });

  dissim_case("volume-floored", RegionKind::Box, DissimKind::Volume, unused, n, 1, 3,
              [&](std::mt19937_64& g, int dim) { return floored_volume_pair(g, dim); });

  dissim_case("cone-ball", RegionKind::Ball, DissimKind::Cone, unused, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return ball_pair(g, dim, 0.05, 1.5, false); });

  EnergyConfig e;
  e.lambda = 0.5;
  e.depth = DepthConfig::linear(RegionKind::Ball, 2);
  energy_case("energy-ball", RegionKind::Ball, e, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return ball_pair(g, dim, 0.05, 1.5, false); });

  e.depth = DepthConfig::linear(RegionKind::Box, 1);
  energy_case("energy-box", RegionKind::Box, e, n, 1, 4, [&](std::mt19937_64& g, int dim) {
    return (g() & 1u) ? contained_box(g, dim) : crossing_box(g, dim);
  });

  EnergyConfig e0 = e;
  e0.lambda = 0.0;
  energy_case("energy-box-boundary-only", RegionKind::Box, e0, n, 1, 4,
              [&](std::mt19937_64& g, int dim) { return crossing_box(g, dim); });

  EnergyConfig eb;
  eb.lambda = 0.5;
  eb.depth = DepthConfig::linear(RegionKind::Box, 1);
  eb.gamma1 = 1e-3;
  eb.gamma2 = 0.0;
  batch_case("batch-loss-box", RegionKind::Box, eb, nt);

  EnergyConfig ec;
  ec.lambda = 0.5;
  ec.depth = DepthConfig::linear(RegionKind::Ball, 2);
  ec.gamma1 = 1e-3;
  ec.gamma2 = 0.2;
  batch_case("batch-loss-ball", RegionKind::Ball, ec, nt);

  OntologyConfig oc_box;
  oc_box.base = BaseModel::Elbe;
  oc_box.use_regd = true;
  oc_box.energy.lambda = 0.5;
  oc_box.energy.depth = DepthConfig::linear(RegionKind::Box, 1);
  oc_box.energy.gamma1 = 1e-3;
  oc_box.energy.gamma2 = 0.1;
  ontology_case("ontology-box-contrastive", oc_box, nt);

  OntologyConfig oc_ball;
  oc_ball.base = BaseModel::Elem;
  oc_ball.use_regd = false;
  oc_ball.elem_center_regularizer = true;
  oc_ball.reg_weight = 0.1;
  oc_ball.base_margin = 2.0;
  oc_ball.energy.depth = DepthConfig::linear(RegionKind::Ball, 2);
  ontology_case("ontology-ball-margin", oc_ball, nt);

  rep.pass = violations == 0;
  if (!fails.empty()) {
    rep.detail = fails.front();
    for (std::size_t i = 1; i < fails.size(); ++i) rep.detail += "; " + fails[i];
  }
  rep.seconds = seconds_since(t0);
  return rep;
}

std::vector<PropertyReport> run_all_verifications(std::ostream* out) {
  std::vector<PropertyReport> reports;
  const auto emit = [&](PropertyReport rep) {
    if (out != nullptr) {
      (*out) << (rep.pass ? "[PASS] " : "[FAIL] ") << rep.name << " checked=" << rep.checked
             << " max_err=" << fmt("%.3g", rep.max_err) << " time=" << fmt("%.2fs", rep.seconds);
      if (!rep.detail.empty()) (*out) << "  " << rep.detail;
      (*out) << '\n';
    }
    reports.push_back(std::move(rep));
  };
  emit(verify_isometry());
  emit(verify_monotonicity());
  emit(verify_containment_sign());
  emit(verify_nesting());
  emit(verify_depth_separation());
  emit(verify_gradients());
  return reports;
}

}  // namespace regd
