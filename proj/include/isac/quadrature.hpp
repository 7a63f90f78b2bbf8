#pragma once

// Quadrature primitives: Gauss-Legendre rules on finite intervals (nodes and
// weights by Newton iteration on the Legendre recurrence) and an adaptive
// Gauss-Kronrod 7/15 integrator with greedy interval refinement.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace isac {

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
  double a = 0, b = 0;
};

// Gauss-Legendre rule with g nodes on [a, b]; exact for polynomials up to
// degree 2g-1. Nodes from Newton iteration with the standard cosine initial
// guess; weights 2/((1-x^2) P'_g(x)^2) scaled to the interval.
inline QuadratureRule legendre_rule(int g, double a, double b) {
  if (g < 2) throw std::invalid_argument("legendre_rule: order must be >= 2");
  if (!(a < b)) throw std::invalid_argument("legendre_rule: need a < b");
  QuadratureRule rule;
  rule.order = g;
  rule.a = a;
  rule.b = b;
  rule.nodes.resize(g);
  rule.weights.resize(g);
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (b + a);
  const int m = (g + 1) / 2;
  for (int i = 0; i < m; ++i) {
    // Initial guess for the i-th root of P_g on (-1, 1).
    double x = std::cos(std::numbers::pi * (i + 0.75) / (g + 0.5));
    double pp = 0;
    for (int iter = 0; iter < 100; ++iter) {
      // Evaluate P_g(x) and P'_g(x) by the three-term recurrence.
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= g; ++k) {
        double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      pp = g * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / pp;
      x -= dx;
      if (std::fabs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = mid - half * x;
    rule.nodes[g - 1 - i] = mid + half * x;
    rule.weights[i] = half * w;
    rule.weights[g - 1 - i] = half * w;
  }
  return rule;
}

template <class Func>
double apply_rule(const QuadratureRule& rule, Func&& f) {
  double s = 0;
  for (size_t i = 0; i < rule.nodes.size(); ++i) s += rule.weights[i] * f(rule.nodes[i]);
  return s;
}

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (positive half; symmetric).
inline constexpr double gk_nodes[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double gk_wk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
// Embedded 7-point Gauss weights, matching gk_nodes indices 1, 3, 5, 7.
inline constexpr double gk_wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

template <class Func>
inline void gk15(Func&& f, double a, double b, double& result, double& err) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double resk = 0, resg = 0;
  for (int i = 0; i < 8; ++i) {
    double fv;
    if (i == 7) {
      fv = f(mid);
      resk += gk_wk[7] * fv;
      resg += gk_wg[3] * fv;
    } else {
      double x = half * gk_nodes[i];
      double f1 = f(mid - x);
      double f2 = f(mid + x);
      resk += gk_wk[i] * (f1 + f2);
      if (i % 2 == 1) resg += gk_wg[i / 2] * (f1 + f2);
    }
  }
  result = resk * half;
  err = std::fabs((resk - resg) * half);
}

struct Segment {
  double a, b, value, err;
};

} // namespace detail

// Adaptive quadrature of f over the finite interval [a, b]: repeatedly bisect
// the segment with the largest error estimate until the summed estimate meets
// max(abs_tol, rel_tol*|I|) or the segment budget is exhausted.
template <class Func>
double integrate(Func&& f, double a, double b, double rel_tol = 1e-10,
                 double abs_tol = 0.0, int max_segments = 4000) {
  if (a == b) return 0.0;
  if (!(a < b)) throw std::invalid_argument("integrate: need a <= b");
  std::vector<detail::Segment> segs;
  segs.reserve(64);
  detail::Segment s0{a, b, 0, 0};
  detail::gk15(f, a, b, s0.value, s0.err);
  segs.push_back(s0);
  double total = s0.value, total_err = s0.err;
  while (static_cast<int>(segs.size()) < max_segments) {
    double tol = std::max(abs_tol, rel_tol * std::fabs(total));
    if (total_err <= tol) break;
    size_t worst = 0;
    for (size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    detail::Segment seg = segs[worst];
    double m = 0.5 * (seg.a + seg.b);
    if (m <= seg.a || m >= seg.b) break;  // interval at floating-point resolution
    detail::Segment l{seg.a, m, 0, 0}, r{m, seg.b, 0, 0};
    detail::gk15(f, l.a, l.b, l.value, l.err);
    detail::gk15(f, r.a, r.b, r.value, r.err);
    total += l.value + r.value - seg.value;
    total_err += l.err + r.err - seg.err;
    segs[worst] = l;
    segs.push_back(r);
  }
  return total;
}

// Adaptive quadrature over [a, +inf) via the rational map r = a + s*u/(1-u),
// u in (0, 1), where s > 0 sets the length scale of the decay.
template <class Func>
double integrate_to_inf(Func&& f, double a, double scale, double rel_tol = 1e-10,
                        double abs_tol = 0.0, int max_segments = 4000) {
  if (!(scale > 0)) throw std::invalid_argument("integrate_to_inf: scale must be > 0");
  auto g = [&](double u) {
    double om = 1.0 - u;
    double r = a + scale * u / om;
    double jac = scale / (om * om);
    return f(r) * jac;
  };
  // Stay strictly inside (0, 1); the integrand must vanish fast enough at
  // u -> 1 for the mapped integral to converge (integrands here decay at
  // least as r^{1-beta} with beta > 2).
  return integrate(g, 0.0, 1.0 - 1e-14, rel_tol, abs_tol, max_segments);
}

} // namespace isac
