#pragma once

// Analytic engine.
//
// Evaluates the coverage probabilities and ergodic rates of the dual-function
// (positioning + communication) cellular model by numerical integration of
// the closed-form expressions:
//
//  * localizability / participation PMF of the number L of anchors whose
//    participation SINR clears the threshold gamma,
//  * coverage of the positioning precision metric C (the achievable-variance
//    lower bound, in m^2), approximated through an N-term gamma surrogate of
//    the unit step,
//  * SINR / SER coverage of the communication link with a two-tier sectored
//    beam pattern and Rayleigh fading,
//  * the joint (positioning AND communication) coverage through a kernel over
//    the joint law of the nearest and the L-th nearest anchor distances,
//  * conditional coverages (ratios of joint to marginal coverage) and the
//    ergodic metrics obtained by integrating coverage over its threshold.
//
// All distance integrals are transformed to w = lambda*pi*r_l^2 (a Gamma(l)
// variate) and evaluated on mass-pruned composite Gauss-Legendre panels, so
// the cost is deterministic and independent of threading.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "params.hpp"
#include "qam.hpp"
#include "quadrature.hpp"
#include "specfun.hpp"

namespace isac {

// ---------------------------------------------------------------------------
// Options and query types
// ---------------------------------------------------------------------------

// Evaluation path for the interference Laplace functional: either adaptive
// quadrature of the defining exclusion integral, or the hypergeometric
// closed form (an exact identity; the two must agree to quadrature accuracy).
enum class EvalPath { defining_integral, closed_form };

struct EvalOptions {
  EvalPath path = EvalPath::closed_form;
  // Positioning exponent: the exact exponential-integral identity, or the
  // logarithmic surrogate E1(x) ~= -ln(1 - exp(-b*x)) with rate b.
  ExpInvsqMode e1_mode = ExpInvsqMode::exact;
  double e1_b = exp_invsq_default_b;
  // Relative tolerance of adaptive quadratures (defining-path inner
  // integrals and outer integrals that are not on fixed panels).
  double rel_tol = 1e-9;
  // Relative tolerance of the threshold integrals behind ergodic metrics.
  double ergodic_rel_tol = 1e-4;
  // Override of NetworkParams::g_quad for the fixed Gauss-Legendre order
  // (0 keeps the value from the parameter set).
  int g_override = 0;

  void validate() const {
    if (!(rel_tol > 0.0 && rel_tol <= 0.1))
      throw std::invalid_argument("EvalOptions: rel_tol must be in (0, 0.1]");
    if (!(ergodic_rel_tol > 0.0 && ergodic_rel_tol <= 0.1))
      throw std::invalid_argument("EvalOptions: ergodic_rel_tol must be in (0, 0.1]");
    if (!(e1_b > 0.0) || !std::isfinite(e1_b))
      throw std::invalid_argument("EvalOptions: e1_b must be positive and finite");
    if (g_override != 0 && g_override < 2)
      throw std::invalid_argument("EvalOptions: g_override must be 0 or >= 2");
  }
};

enum class Metric {
  positioning,          // P{ C <= eps1 }
  communication_sinr,   // P{ SINR >= eps2 }
  communication_ser,    // P{ SER <= eps3 }
  joint_crlb_sinr,      // P{ C <= eps1 and SINR >= eps2 }
  joint_crlb_ser,       // P{ C <= eps1 and SER <= eps3 }
  cond_p_given_s,       // P{ C <= eps1 | SER <= eps3 }
  cond_s_given_p,       // P{ SER <= eps3 | C <= eps1 }
  cond_p_given_c,       // P{ C <= eps1 | SINR >= eps2 }
  cond_c_given_p,       // P{ SINR >= eps2 | C <= eps1 }
};

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::positioning: return "positioning";
    case Metric::communication_sinr: return "communication_sinr";
    case Metric::communication_ser: return "communication_ser";
    case Metric::joint_crlb_sinr: return "joint_crlb_sinr";
    case Metric::joint_crlb_ser: return "joint_crlb_ser";
    case Metric::cond_p_given_s: return "cond_p_given_s";
    case Metric::cond_s_given_p: return "cond_s_given_p";
    case Metric::cond_p_given_c: return "cond_p_given_c";
    case Metric::cond_c_given_p: return "cond_c_given_p";
  }
  return "unknown";
}

struct CoverageQuery {
  Metric metric = Metric::positioning;
  double eps1 = std::numeric_limits<double>::quiet_NaN();  // precision threshold, m^2
  double eps2 = std::numeric_limits<double>::quiet_NaN();  // SINR threshold, linear
  double eps3 = std::numeric_limits<double>::quiet_NaN();  // SER threshold, probability
  QamOrder qam = default_qam();

  bool needs_eps1() const {
    return metric != Metric::communication_sinr && metric != Metric::communication_ser;
  }
  bool needs_eps2() const {
    return metric == Metric::communication_sinr || metric == Metric::joint_crlb_sinr ||
           metric == Metric::cond_p_given_c || metric == Metric::cond_c_given_p;
  }
  bool needs_eps3() const {
    return metric == Metric::communication_ser || metric == Metric::joint_crlb_ser ||
           metric == Metric::cond_p_given_s || metric == Metric::cond_s_given_p;
  }

  void validate() const {
    if (needs_eps1() && !(std::isfinite(eps1) && eps1 > 0.0))
      throw std::invalid_argument("CoverageQuery: eps1 must be finite and > 0");
    if (needs_eps2() && !(std::isfinite(eps2) && eps2 > 0.0))
      throw std::invalid_argument("CoverageQuery: eps2 must be finite and > 0");
    if (needs_eps3()) {
      if (!(std::isfinite(eps3) && eps3 > 0.0 && eps3 < 1.0))
        throw std::invalid_argument("CoverageQuery: eps3 must be in (0, 1)");
      qam.validate();
    }
  }
};

enum class ErgodicMetric {
  crlb,             // E[min(C, N_L)] plus localizable-only variants
  rate,             // E[log2(1 + SINR)], bit/s/Hz
  crlb_given_sinr,  // E[...] conditioned on SINR >= eps2
  rate_given_crlb,  // E[rate] conditioned on C <= eps1
  ser_given_crlb,   // E[SER] conditioned on C <= eps1
};

inline const char* ergodic_metric_name(ErgodicMetric m) {
  switch (m) {
    case ErgodicMetric::crlb: return "ergodic_crlb";
    case ErgodicMetric::rate: return "ergodic_rate";
    case ErgodicMetric::crlb_given_sinr: return "ergodic_crlb_given_sinr";
    case ErgodicMetric::rate_given_crlb: return "ergodic_rate_given_crlb";
    case ErgodicMetric::ser_given_crlb: return "ergodic_ser_given_crlb";
  }
  return "unknown";
}

struct ErgodicQuery {
  ErgodicMetric metric = ErgodicMetric::crlb;
  double eps1 = std::numeric_limits<double>::quiet_NaN();  // for *_given_crlb
  double eps2 = std::numeric_limits<double>::quiet_NaN();  // for crlb_given_sinr
  QamOrder qam = default_qam();

  void validate() const {
    if ((metric == ErgodicMetric::rate_given_crlb || metric == ErgodicMetric::ser_given_crlb) &&
        !(std::isfinite(eps1) && eps1 > 0.0))
      throw std::invalid_argument("ErgodicQuery: eps1 must be finite and > 0");
    if (metric == ErgodicMetric::crlb_given_sinr && !(std::isfinite(eps2) && eps2 > 0.0))
      throw std::invalid_argument("ErgodicQuery: eps2 must be finite and > 0");
    if (metric == ErgodicMetric::ser_given_crlb) qam.validate();
  }
};

struct ErgodicResult {
  // Headline value: for crlb metrics the capped mean E[min(C, N_L)] (the
  // unlocalizable mass contributes the cap); for rate/ser metrics the mean.
  double value = std::numeric_limits<double>::quiet_NaN();
  // crlb metrics only: mean conditioned on localizability (uncapped), and
  // the mean of sqrt(C) under the same conditioning (an RMSE-style figure).
  double value_localizable = std::numeric_limits<double>::quiet_NaN();
  double mean_sqrt_localizable = std::numeric_limits<double>::quiet_NaN();
  // Probability of the conditioning event (1 when unconditional).
  double condition_prob = 1.0;
};

// Maps a precision threshold eps1 (m^2) to the exponent scale of the
// gamma-surrogate bound: mu = (10*beta/ln10)^2 * eps1 / (4*xi^2).
inline double mu_of_eps1(double eps1, const NetworkParams& p) {
  if (!(std::isfinite(eps1) && eps1 >= 0.0))
    throw std::invalid_argument("mu_of_eps1: eps1 must be finite and >= 0");
  double f = 10.0 * p.beta / std::numbers::ln10;
  return f * f * eps1 / (4.0 * p.xi * p.xi);
}

// Exclusion Laplace integral X(eta, beta, r0) = int_{r0}^inf r / (1 + r^beta/eta) dr.
// Hypergeometric closed form for moderate q = eta * r0^{-beta}; an alternating
// reciprocal-power expansion (with the exact complete integral as its head)
// takes over for large q, where the hypergeometric argument approaches the
// convergence boundary.
inline double exclusion_laplace_integral(double eta, double beta, double r_excl) {
  if (!(eta >= 0.0) || !std::isfinite(eta))
    throw std::invalid_argument("exclusion_laplace_integral: eta must be finite and >= 0");
  if (!(beta > 2.0)) throw std::invalid_argument("exclusion_laplace_integral: beta must be > 2");
  if (!(r_excl > 0.0) || !std::isfinite(r_excl))
    throw std::invalid_argument("exclusion_laplace_integral: r_excl must be positive and finite");
  if (eta == 0.0) return 0.0;
  const double q = eta * std::pow(r_excl, -beta);
  if (q <= 5.0) {
    return eta * std::pow(r_excl, 2.0 - beta) / (beta - 2.0) *
           hyp2f1_neg(1.0 - 2.0 / beta, 2.0 - 2.0 / beta, -q);
  }
  // X = eta^{2/beta} * (pi/beta) / sin(2*pi/beta) - r0^2 * sum_k (-1)^k q^{-k} / (k*beta + 2)
  const double head =
      std::pow(eta, 2.0 / beta) * (std::numbers::pi / beta) / std::sin(2.0 * std::numbers::pi / beta);
  double sum = 0.0, qk = 1.0;
  for (int k = 0; k < 400; ++k) {
    double term = qk / (k * beta + 2.0);
    sum += (k % 2 == 0) ? term : -term;
    qk /= q;
    if (term < 1e-17 * std::abs(sum)) break;
  }
  return head - r_excl * r_excl * sum;
}

namespace detail {

// Probabilities are produced by quadrature and may stray outside [0,1] by
// rounding; clamp only after checking the excursion is numerical noise.
inline double checked_prob(double raw, const char* what, double tol = 1e-6) {
  if (!(raw > -tol) || !(raw < 1.0 + tol))
    throw std::logic_error(std::string(what) + ": probability out of range: " + std::to_string(raw));
  return std::min(1.0, std::max(0.0, raw));
}

inline std::vector<double> binomial_row(int n) {
  std::vector<double> b(static_cast<std::size_t>(n) + 1, 1.0);
  for (int k = 1; k <= n; ++k) b[static_cast<std::size_t>(k)] = b[k - 1] * (n - k + 1) / k;
  return b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// AnalyticEngine: caches the participation PMF and quadrature nodes so sweeps
// and threshold integrals do not recompute shared structure. All methods are
// const and the engine has no mutable state, so it is safe to share across
// threads.
// ---------------------------------------------------------------------------

class AnalyticEngine {
 public:
  AnalyticEngine(const NetworkParams& params, const BeamPattern& beam, const EvalOptions& opts = {})
      : p_(params), b_(beam), o_(opts) {
    p_.validate();
    b_.validate();
    o_.validate();
    g_ = o_.g_override > 0 ? o_.g_override : p_.g_quad;
    base_ = legendre_rule(g_, -1.0, 1.0);
    n_ = p_.n_approx;
    a_ = gamma_bound_rate(n_);
    binom_ = detail::binomial_row(n_);
    lambda_pi_ = p_.lambda_bs * std::numbers::pi;
    two_pi_lambda_ = 2.0 * std::numbers::pi * p_.lambda_bs;

    wnodes_.resize(static_cast<std::size_t>(p_.l_p) + 1);
    for (int l = 1; l <= p_.l_p; ++l) wnodes_[static_cast<std::size_t>(l)] = build_gamma_nodes_(l);

    // Localizability table P{L >= l} for l = 3 .. l_p (+ sentinel l_p + 1)
    // and the participation PMF derived from its telescoping differences.
    ploc_.assign(static_cast<std::size_t>(p_.l_p) + 2, 0.0);
    for (int l = 3; l <= p_.l_p + 1; ++l) ploc_[static_cast<std::size_t>(l)] = localizability_impl_(l);
    pmf_.assign(static_cast<std::size_t>(p_.l_p) + 1, 0.0);
    for (int l = 3; l < p_.l_p; ++l) {
      double d = ploc_[static_cast<std::size_t>(l)] - ploc_[static_cast<std::size_t>(l) + 1];
      if (d < -1e-9)
        throw std::logic_error("AnalyticEngine: participation PMF came out negative at l=" + std::to_string(l));
      pmf_[static_cast<std::size_t>(l)] = std::max(0.0, d);
    }
    pmf_[static_cast<std::size_t>(p_.l_p)] = ploc_[static_cast<std::size_t>(p_.l_p)];
  }

  const NetworkParams& params() const { return p_; }
  const BeamPattern& beam() const { return b_; }
  const EvalOptions& options() const { return o_; }

  // P{L >= l}: at least l anchors clear the participation SINR threshold.
  double localizability(int l) const {
    if (l < 1) throw std::invalid_argument("localizability: l must be >= 1");
    if (l >= 3 && l <= p_.l_p + 1) return ploc_[static_cast<std::size_t>(l)];
    return localizability_impl_(l);
  }

  // P{exactly l anchors participate}; l = 0 aggregates the unlocalizable
  // event (fewer than 3 anchors) and l = l_p the saturated one (l_p or more).
  double pmf_participation(int l) const {
    if (l < 0) throw std::invalid_argument("pmf_participation: l must be >= 0");
    if (l == 0) return detail::checked_prob(1.0 - ploc_[3], "pmf_participation");
    if (l < 3 || l > p_.l_p) return 0.0;
    return pmf_[static_cast<std::size_t>(l)];
  }

  double p_localizable() const { return ploc_[3]; }

  // P{C <= eps1 | exactly l participating anchors}, by the gamma-surrogate
  // bound with N = n_approx terms.
  double positioning_cov_conditional(double eps1, int l) const {
    if (!(std::isfinite(eps1) && eps1 >= 0.0))
      throw std::invalid_argument("positioning_cov_conditional: eps1 must be finite and >= 0");
    if (l < 1 || l > p_.l_p)
      throw std::invalid_argument("positioning_cov_conditional: l must be in [1, l_p]");
    if (eps1 == 0.0) return 0.0;
    const double mu = mu_of_eps1(eps1, p_);
    double acc = 1.0;  // n = 0 term
    double sign = -1.0;
    for (int n = 1; n <= n_; ++n, sign = -sign)
      acc += sign * binom_[static_cast<std::size_t>(n)] * pos_transform_conditional(a_ * n * mu, l);
    return detail::checked_prob(acc, "positioning_cov_conditional");
  }

  // Laplace transform E[exp(-c * S) | L = l] of the anchor power sum
  // S = sum_{i<=l} r_i^{-2}. Given the l-th nearest anchor at radius r, the
  // inner l-1 anchors are i.i.d. uniform on the disk, so the transform
  // factorizes as exp(-c r^{-2}) * phibar^{l-1} with
  // phibar = (2/r^2) int_0^r exp(-c x^{-2}) x dx; r is then folded over its
  // Gamma(l) law. Exact up to quadrature: both the positioning coverage
  // bracket and the ergodic CRLB identities are built on it.
  double pos_transform_conditional(double c, int l) const {
    if (!(std::isfinite(c) && c >= 0.0))
      throw std::invalid_argument("pos_transform_conditional: c must be finite and >= 0");
    if (l < 1 || l > p_.l_p)
      throw std::invalid_argument("pos_transform_conditional: l must be in [1, l_p]");
    if (c == 0.0) return 1.0;
    const auto& wn = wnodes_[static_cast<std::size_t>(l)];
    double acc = 0.0;
    for (const auto& [wi, wt] : wn) {
      double r2 = wi / lambda_pi_;
      double r = std::sqrt(r2);
      double j = exp_invsq_integral(c, 0.0, r, o_.e1_mode, o_.e1_b);
      double phibar = std::min(two_pi_lambda_ * j / wi, 1.0);
      acc += wt * std::exp(-c / r2) * std::pow(phibar, l - 1);
    }
    return acc;
  }

  // Positioning coverage P{C <= eps1} mixed over the participation PMF; the
  // unlocalizable mass is assigned the area cap N_L.
  double positioning_cov(double eps1) const {
    if (!(std::isfinite(eps1) && eps1 > 0.0))
      throw std::invalid_argument("positioning_cov: eps1 must be finite and > 0");
    double acc = positioning_cov_localizable_(eps1);
    if (eps1 >= p_.n_l_cap) acc += 1.0 - ploc_[3];
    return detail::checked_prob(acc, "positioning_cov");
  }

  // Laplace functional of the aggregate interference seen by the typical
  // user, with interferers excluded inside radius r1.
  double laplace_interference(double s, double r1) const {
    if (!(std::isfinite(s) && s >= 0.0))
      throw std::invalid_argument("laplace_interference: s must be finite and >= 0");
    if (!(std::isfinite(r1) && r1 > 0.0))
      throw std::invalid_argument("laplace_interference: r1 must be positive and finite");
    return laplace_interference_impl_(s, r1);
  }

  // Communication SINR coverage P{SINR >= eps2}.
  double comm_cov_sinr(double eps2) const {
    if (!(std::isfinite(eps2) && eps2 > 0.0))
      throw std::invalid_argument("comm_cov_sinr: eps2 must be finite and > 0");
    return detail::checked_prob(comm_cov_sinr_impl_(eps2), "comm_cov_sinr");
  }

  // Communication SER coverage P{SER <= eps3} for square K-QAM.
  double comm_cov_ser(double eps3, const QamOrder& qam) const {
    qam.validate();
    if (!(std::isfinite(eps3) && eps3 > 0.0 && eps3 < 1.0))
      throw std::invalid_argument("comm_cov_ser: eps3 must be in (0, 1)");
    if (eps3 >= qam.ser_max()) return 1.0;  // SER never exceeds its zero-SINR ceiling
    return detail::checked_prob(comm_cov_sinr_impl_(sinr_for_ser(eps3, qam)), "comm_cov_ser");
  }

  // Joint coverage P{C <= eps1 and SINR >= upsilon}. upsilon = 0 degenerates
  // to the positioning marginal of the joint family.
  double joint_cov(double eps1, double upsilon) const {
    if (!(std::isfinite(eps1) && eps1 > 0.0))
      throw std::invalid_argument("joint_cov: eps1 must be finite and > 0");
    if (!(std::isfinite(upsilon) && upsilon >= 0.0))
      throw std::invalid_argument("joint_cov: upsilon must be finite and >= 0");
    double acc = joint_localizable_(mu_of_eps1(eps1, p_), upsilon);
    if (eps1 >= p_.n_l_cap)
      acc += (1.0 - ploc_[3]) * (upsilon > 0.0 ? comm_cov_sinr_impl_(upsilon) : 1.0);
    return detail::checked_prob(acc, "joint_cov");
  }

  // Dispatcher over all coverage metrics.
  double coverage(const CoverageQuery& q) const {
    q.validate();
    switch (q.metric) {
      case Metric::positioning:
        return positioning_cov(q.eps1);
      case Metric::communication_sinr:
        return comm_cov_sinr(q.eps2);
      case Metric::communication_ser:
        return comm_cov_ser(q.eps3, q.qam);
      case Metric::joint_crlb_sinr:
        return joint_cov(q.eps1, q.eps2);
      case Metric::joint_crlb_ser:
        return joint_cov(q.eps1, sinr_for_ser(q.eps3, q.qam));
      case Metric::cond_p_given_s:
      case Metric::cond_s_given_p:
      case Metric::cond_p_given_c:
      case Metric::cond_c_given_p:
        return conditional_cov(q);
    }
    throw std::logic_error("coverage: unhandled metric");
  }

  // Conditional coverage = joint coverage divided by the marginal coverage of
  // the conditioning event. The two sides come from different approximation
  // families, so the ratio is allowed a looser consistency margin before
  // clamping into [0, 1].
  double conditional_cov(const CoverageQuery& q) const {
    q.validate();
    double joint, denom;
    switch (q.metric) {
      case Metric::cond_p_given_s:
        joint = joint_cov(q.eps1, sinr_for_ser(q.eps3, q.qam));
        denom = comm_cov_ser(q.eps3, q.qam);
        break;
      case Metric::cond_s_given_p:
        joint = joint_cov(q.eps1, sinr_for_ser(q.eps3, q.qam));
        denom = positioning_cov(q.eps1);
        break;
      case Metric::cond_p_given_c:
        joint = joint_cov(q.eps1, q.eps2);
        denom = comm_cov_sinr(q.eps2);
        break;
      case Metric::cond_c_given_p:
        joint = joint_cov(q.eps1, q.eps2);
        denom = positioning_cov(q.eps1);
        break;
      default:
        throw std::invalid_argument("conditional_cov: not a conditional metric");
    }
    if (denom < 1e-12)
      throw std::domain_error("conditional_cov: conditioning event has negligible probability");
    return detail::checked_prob(joint / denom, "conditional_cov", 5e-2);
  }

  // Ergodic metrics, by integrating the relevant coverage over its threshold.
  ErgodicResult ergodic(const ErgodicQuery& q) const {
    q.validate();
    ErgodicResult res;
    switch (q.metric) {
      case ErgodicMetric::crlb: {
        // E[C | localizable] and E[sqrt(C) | localizable] through the exact
        // identities 1/S = int_0^inf e^{-tS} dt and
        // 1/sqrt(S) = (2/sqrt(pi)) int_0^inf e^{-u^2 S} du applied to the
        // anchor power sum S (C = 4*pref/S), so no unit-step surrogate enters;
        // the unlocalizable mass contributes the cap to the headline value.
        const double plim = ploc_[3];
        if (plim < 1e-12) {
          res.value = p_.n_l_cap;
          return res;
        }
        auto mix = [this](double t) {
          double v = 0.0;
          for (int l = 3; l <= p_.l_p; ++l) {
            double w = pmf_[static_cast<std::size_t>(l)];
            if (w > 1e-15) v += w * pos_transform_conditional(t, l);
          }
          return v;
        };
        fill_crlb_means_(mix, plim, res);
        res.value = p_.n_l_cap * (1.0 - plim) + plim * res.value_localizable;
        return res;
      }
      case ErgodicMetric::crlb_given_sinr: {
        double denom = comm_cov_sinr(q.eps2);
        if (denom < 1e-12)
          throw std::domain_error("ergodic: conditioning event has negligible probability");
        double ploc_sinr = std::min(denom, joint_localizable_(std::nullopt, q.eps2));
        auto mix = [this, &q](double t) {
          double v = 0.0;
          for (int l = 3; l <= p_.l_p; ++l) {
            double w = pmf_[static_cast<std::size_t>(l)];
            if (w > 1e-15) v += w * joint_transform_cond_l_(l, t, q.eps2);
          }
          return v;
        };
        if (ploc_sinr > 1e-12) fill_crlb_means_(mix, ploc_sinr, res);
        double num = (ploc_sinr > 1e-12) ? ploc_sinr * res.value_localizable : 0.0;
        res.value = (p_.n_l_cap * (denom - ploc_sinr) + num) / denom;
        res.condition_prob = denom;
        return res;
      }
      case ErgodicMetric::rate: {
        res.value = rate_integral_([this](double ups) { return comm_cov_sinr_impl_(ups); });
        return res;
      }
      case ErgodicMetric::rate_given_crlb: {
        double denom = positioning_cov(q.eps1);
        if (denom < 1e-12)
          throw std::domain_error("ergodic: conditioning event has negligible probability");
        double mu = mu_of_eps1(q.eps1, p_);
        bool with_step = q.eps1 >= p_.n_l_cap;
        res.value = rate_integral_([this, mu, with_step](double ups) {
                      double v = joint_localizable_(mu, ups);
                      if (with_step) v += (1.0 - ploc_[3]) * (ups > 0.0 ? comm_cov_sinr_impl_(ups) : 1.0);
                      return v;
                    }) /
                    denom;
        res.condition_prob = denom;
        return res;
      }
      case ErgodicMetric::ser_given_crlb: {
        double denom = positioning_cov(q.eps1);
        if (denom < 1e-12)
          throw std::domain_error("ergodic: conditioning event has negligible probability");
        double mu = mu_of_eps1(q.eps1, p_);
        bool with_step = q.eps1 >= p_.n_l_cap;
        double smax = q.qam.ser_max();
        auto survival = [&](double t) {
          if (t <= 0.0) return 1.0;
          if (t >= smax) return 0.0;
          double ups = sinr_for_ser(t, q.qam);
          double v = joint_localizable_(mu, ups);
          if (with_step) v += (1.0 - ploc_[3]) * (ups > 0.0 ? comm_cov_sinr_impl_(ups) : 1.0);
          return std::max(0.0, 1.0 - v / denom);
        };
        // E[SER | .] = int_0^smax P{SER > t | .} dt, integrated on a
        // logarithmic scale (t = smax e^{-y}) because the survival knee sits
        // orders of magnitude below smax.
        auto logform = [&](double y) {
          double t = smax * std::exp(-y);
          return t * survival(t);
        };
        res.value = integrate(logform, 0.0, 45.0, o_.ergodic_rel_tol, 1e-14, 64);
        res.condition_prob = denom;
        return res;
      }
    }
    throw std::logic_error("ergodic: unhandled metric");
  }

  // Localizable part of the joint coverage (no unlocalizable step):
  // sum over l of P{exactly l} * P{C <= eps1 and SINR >= upsilon | l}.
  // eps1 = nullopt drops the positioning constraint (communication marginal
  // of the same family); upsilon = 0 drops the communication constraint.
  double joint_localizable_given(std::optional<double> eps1, double upsilon) const {
    std::optional<double> mu;
    if (eps1) mu = mu_of_eps1(*eps1, p_);
    return joint_localizable_(mu, upsilon);
  }

 private:
  // --- quadrature scaffolding ---------------------------------------------

  // Nodes (w_i, weight_i) with weight_i = GL weight * Gamma(l) density, on
  // panels chosen around the Gamma(l) mass and pruned below 1e-14 content.
  std::vector<std::pair<double, double>> build_gamma_nodes_(int l) const {
    double s = std::sqrt(static_cast<double>(l));
    std::vector<double> anchors = {0.0,
                                   l - 8.0 * s,
                                   l - 5.0 * s,
                                   l - 3.0 * s,
                                   l - 1.5 * s,
                                   static_cast<double>(l),
                                   l + 1.5 * s,
                                   l + 3.0 * s,
                                   l + 5.0 * s,
                                   l + 8.0 * s + 6.0,
                                   l + 13.0 * s + 20.0,
                                   l + 18.0 * s + 45.0};
    for (double& x : anchors) x = std::max(0.0, x);
    std::sort(anchors.begin(), anchors.end());
    anchors.erase(std::unique(anchors.begin(), anchors.end(),
                              [](double x, double y) { return y - x < 1e-9; }),
                  anchors.end());
    std::vector<std::pair<double, double>> out;
    out.reserve(anchors.size() * static_cast<std::size_t>(g_));
    const double lg = std::lgamma(static_cast<double>(l));
    const double norm = std::tgamma(static_cast<double>(l));
    for (std::size_t i = 0; i + 1 < anchors.size(); ++i) {
      double w0 = anchors[i], w1 = anchors[i + 1];
      if (gen_inc_gamma(static_cast<double>(l), w0, w1) / norm < 1e-14) continue;
      double c = 0.5 * (w0 + w1), h = 0.5 * (w1 - w0);
      for (int k = 0; k < g_; ++k) {
        double w = c + h * base_.nodes[static_cast<std::size_t>(k)];
        double pdf = std::exp((l - 1) * std::log(w) - w - lg);
        out.emplace_back(w, h * base_.weights[static_cast<std::size_t>(k)] * pdf);
      }
    }
    return out;
  }

  template <class F>
  double gl_on_(double lo, double hi, F&& f) const {
    double c = 0.5 * (lo + hi), h = 0.5 * (hi - lo), acc = 0.0;
    for (int k = 0; k < g_; ++k)
      acc += base_.weights[static_cast<std::size_t>(k)] * f(c + h * base_.nodes[static_cast<std::size_t>(k)]);
    return acc * h;
  }

  // --- localizability -------------------------------------------------------

  double localizability_impl_(int l) const {
    const auto nodes =
        (l >= 1 && l <= p_.l_p) ? wnodes_[static_cast<std::size_t>(l)] : build_gamma_nodes_(l);
    // Per-n constants: interference exclusion slope (per unit w) and the
    // noise coefficient multiplying r_l^beta.
    std::vector<double> un(static_cast<std::size_t>(n_) + 1, 0.0);
    std::vector<double> cn(static_cast<std::size_t>(n_) + 1, 0.0);
    for (int n = 1; n <= n_; ++n) {
      un[static_cast<std::size_t>(n)] = exclusion_exponent_unit(a_ * n * p_.gamma, p_.beta);
      cn[static_cast<std::size_t>(n)] = a_ * n * p_.gamma * p_.n0 / p_.p_t;
    }
    double acc = 0.0;
    for (const auto& [wi, wt] : nodes) {
      double rbeta = std::pow(wi / lambda_pi_, 0.5 * p_.beta);
      double sum = 1.0;  // n = 0
      double sign = -1.0;
      for (int n = 1; n <= n_; ++n, sign = -sign) {
        double y = std::exp(-cn[static_cast<std::size_t>(n)] * rbeta -
                            un[static_cast<std::size_t>(n)] * wi);
        sum += sign * binom_[static_cast<std::size_t>(n)] * y;
      }
      acc += wt * (1.0 - sum);
    }
    return detail::checked_prob(acc, "localizability");
  }

  // --- positioning ----------------------------------------------------------

  double positioning_cov_localizable_(double eps1) const {
    double acc = 0.0;
    for (int l = 3; l < p_.l_p; ++l) {
      double w = pmf_[static_cast<std::size_t>(l)];
      if (w > 1e-15) acc += w * positioning_cov_conditional(eps1, l);
    }
    if (pmf_[static_cast<std::size_t>(p_.l_p)] > 1e-15)
      acc += pmf_[static_cast<std::size_t>(p_.l_p)] * positioning_cov_conditional(eps1, p_.l_p);
    return acc;
  }

  // --- communication --------------------------------------------------------

  double laplace_interference_impl_(double s, double r1) const {
    if (s <= 0.0) return 1.0;
    const double eta1 = s * p_.p_t * b_.m1;
    const double eta2 = s * p_.p_t * b_.m2;
    const double c1 = b_.c1(), c2 = b_.c2();
    double integral;
    if (o_.path == EvalPath::defining_integral) {
      const double beta = p_.beta;
      auto f = [&](double r) {
        double pb = std::pow(r, beta);
        return (c1 / (1.0 + pb / eta1) + c2 / (1.0 + pb / eta2)) * r;
      };
      double scale = std::max(r1, std::pow(std::max(eta1, eta2), 1.0 / beta));
      integral = integrate_to_inf(f, r1, scale, o_.rel_tol);
    } else {
      integral = c1 * exclusion_laplace_integral(eta1, p_.beta, r1) +
                 c2 * exclusion_laplace_integral(eta2, p_.beta, r1);
    }
    return std::exp(-two_pi_lambda_ * integral);
  }

  double comm_cov_sinr_impl_(double upsilon) const {
    if (upsilon <= 0.0) return 1.0;
    const auto& wn = wnodes_[1];
    double acc = 0.0;
    for (const auto& [wi, wt] : wn) {
      double r1 = std::sqrt(wi / lambda_pi_);
      double r1b = std::pow(r1, p_.beta);
      double noise = std::exp(-upsilon * p_.sigma_n2 * r1b / (p_.p_t * b_.m1));
      if (noise == 0.0) continue;
      acc += wt * noise * laplace_interference_impl_(upsilon * r1b / (p_.p_t * b_.m1), r1);
    }
    return acc;
  }

  // --- joint kernel ---------------------------------------------------------

  struct KernelScratch {
    std::vector<double> rho, wq, bf, base, pw;
  };

  // Joint kernel given exactly l anchors, serving distance r1 and
  // participation radius rL: gamma-surrogate bracket over n. Conditioned on
  // (r1, rL, l), the l-2 interior anchors are i.i.d. on the annulus with
  // density 2 rho / (rL^2 - r1^2), so their joint transform is the
  // single-anchor mean factor raised to the power l-2; the serving atom and
  // the anchor at rL enter explicitly, and anchors beyond rL form an
  // unconditioned process handled by the exclusion Laplace terms.
  double kernel_(int l, double r1, double rl, const double* mu, double upsilon,
                 KernelScratch& s) const {
    double noise = 1.0, eta1 = 0.0, eta2 = 0.0, lam23 = 1.0, bfrl = 1.0;
    const double beta = p_.beta;
    if (upsilon > 0.0) {
      double r1b = std::pow(r1, beta);
      noise = std::exp(-upsilon * p_.sigma_n2 * r1b / (p_.p_t * b_.m1));
      if (noise == 0.0) return 0.0;
      eta1 = upsilon * r1b;                   // s * P_T * M1
      eta2 = upsilon * r1b * (b_.m2 / b_.m1); // s * P_T * M2
      lam23 = std::exp(-two_pi_lambda_ * (b_.c1() * exclusion_laplace_integral(eta1, beta, rl) +
                                          b_.c2() * exclusion_laplace_integral(eta2, beta, rl)));
      double rlb = std::pow(rl, beta);
      bfrl = b_.c1() / (1.0 + eta1 / rlb) + b_.c2() / (1.0 + eta2 / rlb);
    } else if (mu == nullptr) {
      return 1.0;  // no constraint at all
    }

    // Inner Gauss-Legendre nodes on [r1, rL], split where the positioning
    // factor transitions so the fixed order resolves the boundary layer.
    double cuts[4];
    int ncuts = 0;
    cuts[ncuts++] = r1;
    if (mu != nullptr && *mu > 0.0) {
      double s_lo = std::sqrt(a_ * (*mu));
      double s_hi = std::sqrt(a_ * n_ * (*mu));
      if (s_lo > r1 * 1.02 && s_lo < rl * 0.98) cuts[ncuts++] = s_lo;
      if (s_hi > std::max(r1, s_lo) * 1.02 && s_hi < rl * 0.98) cuts[ncuts++] = s_hi;
    }
    cuts[ncuts++] = rl;

    const std::size_t m = static_cast<std::size_t>(g_) * static_cast<std::size_t>(ncuts - 1);
    s.rho.resize(m);
    s.wq.resize(m);
    s.bf.resize(m);
    s.base.resize(m);
    s.pw.assign(m, 1.0);
    std::size_t j = 0;
    for (int pnl = 0; pnl + 1 < ncuts; ++pnl) {
      double c = 0.5 * (cuts[pnl] + cuts[pnl + 1]), h = 0.5 * (cuts[pnl + 1] - cuts[pnl]);
      for (int k = 0; k < g_; ++k, ++j) {
        double rho = c + h * base_.nodes[static_cast<std::size_t>(k)];
        s.rho[j] = rho;
        s.wq[j] = h * base_.weights[static_cast<std::size_t>(k)] * rho;
        if (upsilon > 0.0) {
          // Per-interferer Laplace factor E[e^{-s h D rho^-beta}] averaged
          // over the fade and the two-tier beam gain.
          double pb = std::pow(rho, beta);
          s.bf[j] = b_.c1() / (1.0 + eta1 / pb) + b_.c2() / (1.0 + eta2 / pb);
        } else {
          s.bf[j] = 1.0;
        }
        s.base[j] = (mu != nullptr) ? std::exp(-a_ * (*mu) / (rho * rho)) : 1.0;
      }
    }

    const int nmax = (mu != nullptr) ? n_ : 0;
    const double s1base = (mu != nullptr) ? std::exp(-a_ * (*mu) / (r1 * r1)) : 1.0;
    const double rlbase = (mu != nullptr) ? std::exp(-a_ * (*mu) / (rl * rl)) : 1.0;
    const double annulus_halfarea = 0.5 * (rl * rl - r1 * r1);  // int_{r1}^{rL} rho drho
    double atoms = 1.0;  // per-n product of the r1 and rL positioning factors
    double acc = 0.0;
    double sign = 1.0;
    for (int n = 0; n <= nmax; ++n, sign = -sign) {
      double gnum = 0.0;
      for (std::size_t i = 0; i < m; ++i) gnum += s.wq[i] * s.bf[i] * s.pw[i];
      double gbar = std::clamp(gnum / annulus_halfarea, 0.0, 1.0);
      acc += sign * binom_[static_cast<std::size_t>(n)] * atoms * std::pow(gbar, l - 2);
      if (n < nmax) {
        for (std::size_t i = 0; i < m; ++i) s.pw[i] *= s.base[i];
        atoms *= s1base * rlbase;
      }
    }
    return noise * lam23 * bfrl * acc;
  }

  // E[kernel | exactly l anchors], over w = lambda*pi*rL^2 ~ Gamma(l) and the
  // distribution-free ratio t = r1/rL with density 2(l-1) t (1-t^2)^{l-2}.
  double joint_cond_l_(int l, const std::optional<double>& mu, double upsilon) const {
    const auto& wn = wnodes_[static_cast<std::size_t>(l)];
    const double* mup = mu ? &*mu : nullptr;
    KernelScratch scratch;
    double acc = 0.0;
    for (const auto& [wi, wt] : wn) {
      double rl = std::sqrt(wi / lambda_pi_);
      // Split the t-range where exp(-a n mu / (t rL)^2) turns on.
      double tcuts[4];
      int ntc = 0;
      tcuts[ntc++] = 0.0;
      if (mup != nullptr && *mup > 0.0) {
        double t1 = std::sqrt(a_ * (*mup)) / rl;
        double t2 = std::sqrt(a_ * n_ * (*mup)) / rl;
        if (t1 > 0.02 && t1 < 0.95) tcuts[ntc++] = t1;
        if (t2 > std::max(0.02, t1 * 1.05) && t2 < 0.95) tcuts[ntc++] = t2;
      }
      tcuts[ntc++] = 1.0;
      double inner = 0.0;
      for (int pnl = 0; pnl + 1 < ntc; ++pnl) {
        inner += gl_on_(tcuts[pnl], tcuts[pnl + 1], [&](double t) {
          double r1 = t * rl;
          double tdens = 2.0 * (l - 1) * t * std::pow(1.0 - t * t, l - 2);
          return tdens * kernel_(l, r1, rl, mup, upsilon, scratch);
        });
      }
      acc += wt * inner;
    }
    return acc;
  }

  double joint_localizable_(const std::optional<double>& mu, double upsilon) const {
    if (!mu && upsilon <= 0.0) return ploc_[3];
    double acc = 0.0;
    for (int l = 3; l <= p_.l_p; ++l) {
      double w = pmf_[static_cast<std::size_t>(l)];
      if (w > 1e-15) acc += w * joint_cond_l_(l, mu, upsilon);
    }
    return acc;
  }

  // Same factor structure as kernel_, but with a single fixed positioning
  // transform exp(-c * S) in place of the gamma-surrogate bracket; feeds the
  // exact ergodic CRLB identities.
  double kernel_fixed_(int l, double r1, double rl, double c, double upsilon) const {
    double noise = 1.0, eta1 = 0.0, eta2 = 0.0, lam23 = 1.0, bfrl = 1.0;
    const double beta = p_.beta;
    if (upsilon > 0.0) {
      double r1b = std::pow(r1, beta);
      noise = std::exp(-upsilon * p_.sigma_n2 * r1b / (p_.p_t * b_.m1));
      if (noise == 0.0) return 0.0;
      eta1 = upsilon * r1b;
      eta2 = upsilon * r1b * (b_.m2 / b_.m1);
      lam23 = std::exp(-two_pi_lambda_ * (b_.c1() * exclusion_laplace_integral(eta1, beta, rl) +
                                          b_.c2() * exclusion_laplace_integral(eta2, beta, rl)));
      double rlb = std::pow(rl, beta);
      bfrl = b_.c1() / (1.0 + eta1 / rlb) + b_.c2() / (1.0 + eta2 / rlb);
    }
    double cuts[3];
    int ncuts = 0;
    cuts[ncuts++] = r1;
    if (c > 0.0) {
      double sc = std::sqrt(c);
      if (sc > r1 * 1.02 && sc < rl * 0.98) cuts[ncuts++] = sc;
    }
    cuts[ncuts++] = rl;
    double gnum = 0.0;
    for (int pnl = 0; pnl + 1 < ncuts; ++pnl) {
      double cm = 0.5 * (cuts[pnl] + cuts[pnl + 1]), h = 0.5 * (cuts[pnl + 1] - cuts[pnl]);
      for (int k = 0; k < g_; ++k) {
        double rho = cm + h * base_.nodes[static_cast<std::size_t>(k)];
        double wq = h * base_.weights[static_cast<std::size_t>(k)] * rho;
        double bf = 1.0;
        if (upsilon > 0.0) {
          double pb = std::pow(rho, beta);
          bf = b_.c1() / (1.0 + eta1 / pb) + b_.c2() / (1.0 + eta2 / pb);
        }
        double pw = (c > 0.0) ? std::exp(-c / (rho * rho)) : 1.0;
        gnum += wq * bf * pw;
      }
    }
    double gbar = std::clamp(gnum / (0.5 * (rl * rl - r1 * r1)), 0.0, 1.0);
    double atoms = (c > 0.0) ? std::exp(-c / (r1 * r1) - c / (rl * rl)) : 1.0;
    return noise * lam23 * bfrl * atoms * std::pow(gbar, l - 2);
  }

  // E[exp(-c * S) ; SINR >= upsilon | L = l]: fixed-transform analogue of
  // joint_cond_l_.
  double joint_transform_cond_l_(int l, double c, double upsilon) const {
    const auto& wn = wnodes_[static_cast<std::size_t>(l)];
    double acc = 0.0;
    for (const auto& [wi, wt] : wn) {
      double rl = std::sqrt(wi / lambda_pi_);
      double tcuts[3];
      int ntc = 0;
      tcuts[ntc++] = 0.0;
      if (c > 0.0) {
        double t1 = std::sqrt(c) / rl;
        if (t1 > 0.02 && t1 < 0.95) tcuts[ntc++] = t1;
      }
      tcuts[ntc++] = 1.0;
      double inner = 0.0;
      for (int pnl = 0; pnl + 1 < ntc; ++pnl) {
        inner += gl_on_(tcuts[pnl], tcuts[pnl + 1], [&](double t) {
          double r1 = t * rl;
          double tdens = 2.0 * (l - 1) * t * std::pow(1.0 - t * t, l - 2);
          return tdens * kernel_fixed_(l, r1, rl, c, upsilon);
        });
      }
      acc += wt * inner;
    }
    return acc;
  }

  // --- ergodic helpers ------------------------------------------------------

  // Shared reduction for the two CRLB-style ergodic metrics: mix(t) is the
  // pmf-weighted transform E[e^{-tS}; conditioning event, localizable]; norm
  // is its t = 0 limit (the probability of that event). C = 4*pref/S, so the
  // two moments follow from the Laplace identities in the crlb case above.
  template <class Mix>
  void fill_crlb_means_(Mix&& mix, double norm, ErgodicResult& res) const {
    const double pref4 = 1.0 / mu_of_eps1(1.0, p_);  // 4 * CRLB prefactor
    const double tscale = 1.0 / (3.0 * lambda_pi_);
    double m1 = integrate_to_inf(mix, 0.0, tscale, o_.ergodic_rel_tol);
    double m05 = integrate_to_inf([&](double u) { return mix(u * u); }, 0.0, std::sqrt(tscale),
                                  o_.ergodic_rel_tol);
    res.value_localizable = pref4 * m1 / norm;
    res.mean_sqrt_localizable = std::sqrt(pref4) * 2.0 * std::numbers::inv_sqrtpi * m05 / norm;
  }

  // E[log2(1 + SINR)] against a coverage function of the SINR threshold:
  // integral over z of P{SINR >= 2^z - 1}.
  template <class Cov>
  double rate_integral_(Cov&& cov) const {
    auto f = [&](double z) {
      if (z <= 0.0) return 1.0;
      return cov(std::exp2(z) - 1.0);
    };
    double upper = 4.0;
    while (upper < 900.0 && f(upper) > 1e-12) upper *= 2.0;
    return integrate(f, 0.0, std::min(upper, 900.0), o_.ergodic_rel_tol, 1e-12, 64);
  }

  NetworkParams p_;
  BeamPattern b_;
  EvalOptions o_;
  int g_ = 32;
  int n_ = 5;
  double a_ = 0.0;
  double lambda_pi_ = 0.0;
  double two_pi_lambda_ = 0.0;
  QuadratureRule base_;
  std::vector<double> binom_;
  std::vector<std::vector<std::pair<double, double>>> wnodes_;
  std::vector<double> ploc_;
  std::vector<double> pmf_;
};

// ---------------------------------------------------------------------------
// Free-function façade (constructs an engine per call; use AnalyticEngine
// directly for sweeps over thresholds with fixed parameters).
// ---------------------------------------------------------------------------

inline double localizability(int l, const NetworkParams& p, const EvalOptions& o = {}) {
  return AnalyticEngine(p, default_beam(), o).localizability(l);
}

inline double pmf_participation(int l, const NetworkParams& p, const EvalOptions& o = {}) {
  return AnalyticEngine(p, default_beam(), o).pmf_participation(l);
}

inline double positioning_cov_conditional(double eps1, int l, const NetworkParams& p,
                                          const EvalOptions& o = {}) {
  return AnalyticEngine(p, default_beam(), o).positioning_cov_conditional(eps1, l);
}

inline double positioning_cov(double eps1, const NetworkParams& p, const EvalOptions& o = {}) {
  return AnalyticEngine(p, default_beam(), o).positioning_cov(eps1);
}

inline double laplace_interference(double s, double r1, const NetworkParams& p,
                                   const BeamPattern& b, const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).laplace_interference(s, r1);
}

inline double comm_cov_sinr(double eps2, const NetworkParams& p, const BeamPattern& b,
                            const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).comm_cov_sinr(eps2);
}

inline double comm_cov_ser(double eps3, const QamOrder& qam, const NetworkParams& p,
                           const BeamPattern& b, const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).comm_cov_ser(eps3, qam);
}

inline double joint_cov(double eps1, double upsilon, const NetworkParams& p, const BeamPattern& b,
                        const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).joint_cov(eps1, upsilon);
}

inline double conditional_cov(const CoverageQuery& q, const NetworkParams& p, const BeamPattern& b,
                              const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).conditional_cov(q);
}

inline double coverage(const CoverageQuery& q, const NetworkParams& p, const BeamPattern& b,
                       const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).coverage(q);
}

inline ErgodicResult ergodic(const ErgodicQuery& q, const NetworkParams& p, const BeamPattern& b,
                             const EvalOptions& o = {}) {
  return AnalyticEngine(p, b, o).ergodic(q);
}

}  // namespace isac
