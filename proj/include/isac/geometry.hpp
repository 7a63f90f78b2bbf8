#pragma once

// Point-process sampling, ordered-distance distribution laws, and the exact
// and lower-bound CRLB of RSS-based positioning.
//
// Distance-law conventions. pdf_ordered_distance(l, lambda, r) is the density
// of the distance to the l-th nearest point of the process. For conditionals,
// note that given the (l+1)-th nearest distance, exactly l points lie
// uniformly inside that disk; pdf_r1_given_rl(l, r1, rl) is the radial law of
// the nearest of l uniform points in a disk of radius rl. Consequently the
// joint density of (R_1, R_l) is pdf_ordered_distance(l) times
// pdf_r1_given_rl with count l-1 (the points strictly inside R_l), which is
// what joint_pdf_r1_rl evaluates and what sampled realizations confirm.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rng.hpp"

namespace isac {

struct BsPoint {
  double r;      // distance from the origin [m]
  double theta;  // azimuth [rad]
};

struct BsRealization {
  std::vector<BsPoint> points;  // sorted by distance (ties by angle, then input order)
  double window_radius = 0;     // [m]
};

struct DistanceProfile {
  std::vector<double> distances;  // r_1 <= ... <= r_L [m]
  std::vector<double> angles;     // optional; empty or same length
};

// Sample a homogeneous PPP of the given density on a disk of window_radius
// around the origin, deterministically from the rng stream. Uses the radial
// construction: lambda*pi*r_l^2 are the arrival times of a unit-rate Poisson
// process, so points arrive already sorted by distance.
inline BsRealization sample_ppp(double lambda_bs, double window_radius, Rng& rng) {
  if (!(lambda_bs > 0)) throw std::invalid_argument("sample_ppp: lambda_bs must be > 0");
  if (!(window_radius > 0)) throw std::invalid_argument("sample_ppp: window_radius must be > 0");
  const double mean_count = lambda_bs * std::numbers::pi * window_radius * window_radius;
  if (mean_count > 1e7)
    throw std::invalid_argument("sample_ppp: expected point count exceeds 1e7; shrink the window");
  BsRealization out;
  out.window_radius = window_radius;
  out.points.reserve(static_cast<size_t>(mean_count + 6.0 * std::sqrt(mean_count) + 16.0));
  const double scale = lambda_bs * std::numbers::pi;
  double w = 0.0;
  for (;;) {
    w += rng.exponential();
    double r = std::sqrt(w / scale);
    if (r > window_radius) break;
    double theta = 2.0 * std::numbers::pi * rng.uniform();
    out.points.push_back({r, theta});
  }
  // The construction emits nondecreasing radii already; enforce the full
  // deterministic order contract (distance, then angle, then input order).
  std::stable_sort(out.points.begin(), out.points.end(), [](const BsPoint& a, const BsPoint& b) {
    if (a.r != b.r) return a.r < b.r;
    return a.theta < b.theta;
  });
  return out;
}

inline BsRealization sample_ppp(double lambda_bs, double window_radius, uint64_t seed) {
  Rng rng(seed, 0);
  return sample_ppp(lambda_bs, window_radius, rng);
}

// Density of the distance to the l-th nearest point:
// e^{-lambda pi r^2} 2 (lambda pi r^2)^l / (r (l-1)!).
inline double pdf_ordered_distance(int l, double lambda_bs, double r) {
  if (l < 1) throw std::invalid_argument("pdf_ordered_distance: l must be >= 1");
  if (!(r > 0)) throw std::invalid_argument("pdf_ordered_distance: r must be > 0");
  double w = lambda_bs * std::numbers::pi * r * r;
  double log_pdf = -w + l * std::log(w) - std::lgamma(static_cast<double>(l)) + std::log(2.0 / r);
  return std::exp(log_pdf);
}

// Radial law of the nearest among l points placed uniformly in a disk of
// radius rl: 2 l r1 (rl^2 - r1^2)^{l-1} / rl^{2l}.
inline double pdf_r1_given_rl(int l, double r1, double rl) {
  if (l < 1) throw std::invalid_argument("pdf_r1_given_rl: l must be >= 1");
  if (!(r1 > 0 && r1 < rl)) throw std::invalid_argument("pdf_r1_given_rl: need 0 < r1 < rl");
  double u = (rl - r1) * (rl + r1) / (rl * rl);  // 1 - (r1/rl)^2
  return 2.0 * l * r1 / (rl * rl) * std::pow(u, l - 1);
}

// Joint density of (R_1, R_l) for the process, l >= 2: the l-th ordered
// distance law times the nearest-of-(l-1)-uniform conditional (the l-1 points
// strictly inside the disk of radius R_l).
inline double joint_pdf_r1_rl(int l, double lambda_bs, double r1, double rl) {
  if (l < 2) throw std::invalid_argument("joint_pdf_r1_rl: l must be >= 2");
  return pdf_ordered_distance(l, lambda_bs, rl) * pdf_r1_given_rl(l - 1, r1, rl);
}

namespace detail {

// Shared prefactor of both CRLB expressions: (ln10 / (10 beta))^2 xi^2.
inline double crlb_prefactor(double beta, double xi) {
  double f = std::numbers::ln10 / (10.0 * beta);
  return f * f * xi * xi;
}

} // namespace detail

// Exact RSS positioning CRLB: trace of the inverse 2x2 Fisher information
// matrix, written as the closed ratio
//   prefactor * 2 sum_l q_l / sum_{l,m} q_l q_m sin^2(theta_l - theta_m),
// q_l = r_l^{-2}. Throws on collinear (singular-FIM) geometries.
inline double crlb_exact(const DistanceProfile& profile, double beta, double xi) {
  const auto& r = profile.distances;
  const auto& th = profile.angles;
  if (r.size() < 3) throw std::invalid_argument("crlb_exact: need at least 3 anchors");
  if (th.size() != r.size()) throw std::invalid_argument("crlb_exact: angles required");
  const size_t n = r.size();
  std::vector<double> q(n);
  for (size_t i = 0; i < n; ++i) {
    if (!(r[i] > 0)) throw std::invalid_argument("crlb_exact: distances must be > 0");
    q[i] = 1.0 / (r[i] * r[i]);
  }
  double s1 = 0;
  for (double qi : q) s1 += qi;
  double denom = 0;  // sum over ordered pairs (l, m), diagonal vanishes
  for (size_t l = 0; l < n; ++l)
    for (size_t m = l + 1; m < n; ++m) {
      double sn = std::sin(th[l] - th[m]);
      denom += 2.0 * q[l] * q[m] * sn * sn;
    }
  // Scale-free singularity test: det(J) ~ denom/4 against (trace(J)/2)^2 ~ (s1/2)^2.
  if (denom / 4.0 < 1e-14 * (s1 / 2.0) * (s1 / 2.0))
    throw std::domain_error("crlb_exact: singular geometry (anchors collinear with the user)");
  return detail::crlb_prefactor(beta, xi) * 2.0 * s1 / denom;
}

// Orientation-independent lower bound of the CRLB: prefactor * 4 / sum r_l^{-2}.
inline double crlb_lower_bound(std::span<const double> distances, double beta, double xi) {
  if (distances.size() < 3)
    throw std::invalid_argument("crlb_lower_bound: unlocalizable (need at least 3 anchors)");
  double s1 = 0;
  for (double r : distances) {
    if (!(r > 0)) throw std::invalid_argument("crlb_lower_bound: distances must be > 0");
    s1 += 1.0 / (r * r);
  }
  return detail::crlb_prefactor(beta, xi) * 4.0 / s1;
}

// Whether the lower bound is attainable by some anchor orientation:
// sum r_l^{-2} >= 2 max_k r_k^{-2} (no single anchor dominates).
inline bool achievability_check(std::span<const double> distances) {
  if (distances.size() < 3)
    throw std::invalid_argument("achievability_check: need at least 3 distances");
  double s1 = 0, qmax = 0;
  for (double r : distances) {
    if (!(r > 0)) throw std::invalid_argument("achievability_check: distances must be > 0");
    double q = 1.0 / (r * r);
    s1 += q;
    qmax = std::max(qmax, q);
  }
  return s1 >= 2.0 * qmax;
}

// Debug serialization: one "x y" pair per line, meters. Not a stable format.
inline void write_realization(const BsRealization& r, std::ostream& os) {
  os.precision(17);
  for (const auto& p : r.points)
    os << p.r * std::cos(p.theta) << " " << p.r * std::sin(p.theta) << "\n";
}

inline BsRealization read_realization(std::istream& is, double window_radius) {
  BsRealization out;
  out.window_radius = window_radius;
  double x, y;
  while (is >> x >> y) out.points.push_back({std::hypot(x, y), std::atan2(y, x)});
  std::stable_sort(out.points.begin(), out.points.end(), [](const BsPoint& a, const BsPoint& b) {
    if (a.r != b.r) return a.r < b.r;
    return a.theta < b.theta;
  });
  return out;
}

} // namespace isac
