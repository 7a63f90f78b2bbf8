#pragma once

// Special functions backing the analytic formulas: Gaussian Q and inverse,
// generalized incomplete gamma, Gauss hypergeometric 2F1(1, b; c; z) for
// z <= 0, the gamma-CDF surrogate bound, the exp(-mu/r^2) radial integral
// (exact exponential-integral form and its log-surrogate approximation), and
// the interference exclusion-zone exponent in its convergent
// integration-by-parts form.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace isac {

// Standard Gaussian upper-tail probability Q(x).
inline double gauss_q(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("gauss_q: x must be finite");
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

// Standard Gaussian density.
inline double gauss_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

// Inverse of gauss_q on (0, 1): initial rational approximation refined by
// Newton steps on gauss_q itself.
inline double inv_gauss_q(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("inv_gauss_q: p must lie in (0,1)");
  if (p == 0.5) return 0.0;
  const double ps = std::min(p, 1.0 - p);
  // Abramowitz-Stegun 26.2.22 starting point (|error| < 4.5e-4).
  double t = std::sqrt(-2.0 * std::log(ps));
  double x = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t * t);
  for (int i = 0; i < 6; ++i) {
    double q = gauss_q(x);
    double dens = gauss_pdf(x);
    if (dens <= 0.0) break;
    double dx = (q - ps) / dens;  // dQ/dx = -pdf
    x += dx;
    if (std::fabs(dx) <= 1e-15 * std::max(1.0, std::fabs(x))) break;
  }
  return (p < 0.5) ? x : -x;
}

namespace detail {

// Lower incomplete gamma by series: gamma(w, x) = x^w e^{-x} sum, w > 0.
inline double lower_gamma_series(double w, double x) {
  double term = 1.0 / w;
  double sum = term;
  for (int n = 1; n < 500; ++n) {
    term *= x / (w + n);
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-17) break;
  }
  return std::exp(w * std::log(x) - x) * sum;
}

// Upper incomplete gamma by the Lentz continued fraction; valid for x > 0 and
// real w (used with x not too small; small x is handled by the callers).
inline double upper_gamma_cf(double w, double x) {
  const double fpmin = 1e-300;
  double b = x + 1.0 - w;
  double c = 1.0 / fpmin;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= 1000; ++i) {
    double an = -static_cast<double>(i) * (i - w);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < fpmin) d = fpmin;
    c = b + an / c;
    if (std::fabs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return std::exp(-x + w * std::log(x)) * h;
}

// Upper incomplete gamma Gamma(w, x) for x >= 0; supports w <= 0 when x > 0
// through the upward recurrence Gamma(w,x) = (Gamma(w+1,x) - x^w e^{-x}) / w.
inline double upper_gamma(double w, double x) {
  if (x < 0) throw std::invalid_argument("upper_gamma: x must be >= 0");
  if (x == 0.0) {
    if (w <= 0) throw std::invalid_argument("upper_gamma: divergent at x=0 for w<=0");
    return std::tgamma(w);
  }
  if (w <= 0.0 && x < 1.0) {
    return (upper_gamma(w + 1.0, x) - std::exp(w * std::log(x) - x)) / w;
  }
  if (w > 0.0 && x < w + 1.0) {
    return std::tgamma(w) - lower_gamma_series(w, x);
  }
  return upper_gamma_cf(w, x);
}

} // namespace detail

// Generalized incomplete gamma: integral of t^{w-1} e^{-t} over [z0, z1]
// (z1 may be +inf). Divergent at z0 = 0 for w <= 0, which is rejected; the
// convergent exclusion-zone quantity is interference_exclusion_exponent.
inline double gen_inc_gamma(double w, double z0, double z1) {
  if (!std::isfinite(w)) throw std::invalid_argument("gen_inc_gamma: w must be finite");
  if (!(z0 >= 0)) throw std::invalid_argument("gen_inc_gamma: z0 must be >= 0");
  if (!(z1 >= z0)) throw std::invalid_argument("gen_inc_gamma: need z0 <= z1");
  if (z0 == 0.0 && w <= 0.0)
    throw std::invalid_argument(
        "gen_inc_gamma: divergent integral for w <= 0 with z0 = 0; use "
        "interference_exclusion_exponent instead");
  if (z0 == z1) return 0.0;
  double upper0 = detail::upper_gamma(w, z0);
  if (std::isinf(z1)) return upper0;
  return upper0 - detail::upper_gamma(w, z1);
}

// Gauss hypergeometric 2F1(1, b; c; z) for z <= 0: power series on
// [-0.5, 0], Pfaff transformation z -> z/(z-1) below. Intended for the
// moderate-|z| range; extreme arguments are handled by the asymptotic
// expansions at the call sites.
inline double hyp2f1_neg(double b, double c, double z) {
  if (z > 0) throw std::invalid_argument("hyp2f1_neg: z must be <= 0");
  if (!(b > 0 && c > 0)) throw std::invalid_argument("hyp2f1_neg: need b > 0 and c > 0");
  if (z == 0.0) return 1.0;
  if (z >= -0.5) {
    // sum_k (b)_k / (c)_k z^k  (the a = 1 slot makes (1)_k / k! = 1)
    double term = 1.0, sum = 1.0;
    for (int k = 0; k < 10000; ++k) {
      term *= (b + k) / (c + k) * z;
      sum += term;
      if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
    }
    return sum;
  }
  // Pfaff: 2F1(1, b; c; z) = (1-z)^{-1} 2F1(1, c-b; c; z/(z-1)).
  double w = z / (z - 1.0);
  double bb = c - b;
  double term = 1.0, sum = 1.0;
  const int kmax = 2000000;
  int k = 0;
  for (; k < kmax; ++k) {
    term *= (bb + k) / (c + k) * w;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  if (k == kmax)
    throw std::runtime_error("hyp2f1_neg: series did not converge (|z| too large)");
  return sum / (1.0 - z);
}

// Surrogate CDF bound for the normalized gamma(N) variable (mean 1):
// (1 - e^{-a c})^N with a = N (N!)^{-1/N}. By Alzer's inequality this is a
// pointwise LOWER bound on P(g < c) for N > 1 (exact at N = 1), despite
// being widely cited as an upper bound; the exact CDF dominates it.
inline double gamma_cdf_bound(double c, int n) {
  if (n < 1) throw std::invalid_argument("gamma_cdf_bound: n must be >= 1");
  if (!(c >= 0)) throw std::invalid_argument("gamma_cdf_bound: c must be >= 0");
  if (std::isinf(c)) return 1.0;
  double a = n * std::exp(-std::lgamma(n + 1.0) / n);
  return std::pow(-std::expm1(-a * c), n);
}

// The a = N (N!)^{-1/N} constant of the surrogate bound, exposed because the
// analytic kernels need it per expansion term.
inline double gamma_bound_rate(int n) {
  if (n < 1) throw std::invalid_argument("gamma_bound_rate: n must be >= 1");
  return n * std::exp(-std::lgamma(n + 1.0) / n);
}

enum class ExpInvsqMode { exact, approx };

// Default surrogate constant b = e^{euler_gamma} in E1(x) ~ -ln(1 - e^{-bx}),
// the choice that matches the x -> 0 expansion of E1 exactly.
inline constexpr double exp_invsq_default_b = 1.7810724179901979;

// Exponential integral E1(x) for x > 0.
inline double expint_e1(double x) {
  if (!(x > 0)) throw std::invalid_argument("expint_e1: x must be > 0");
  if (x > 700.0) return 0.0;  // below double underflow of e^{-x}
  return -std::expint(-x);
}

// Radial integral of e^{-mu r^{-2}} r dr over [tau1, tau2] (tau1 = 0 allowed
// as the limit). Substituting t = mu r^{-2} gives the exact form
//   (tau2^2/2) e^{-mu/tau2^2} - (tau1^2/2) e^{-mu/tau1^2}
//     + (mu/2) [E1(mu/tau1^2) - E1(mu/tau2^2)],
// which the approx mode evaluates with E1(x) ~ -ln(1 - e^{-b x}).
inline double exp_invsq_integral(double mu, double tau1, double tau2,
                                 ExpInvsqMode mode = ExpInvsqMode::exact,
                                 double b = exp_invsq_default_b) {
  if (!(mu >= 0)) throw std::invalid_argument("exp_invsq_integral: mu must be >= 0");
  if (!(tau1 >= 0 && tau1 < tau2)) throw std::invalid_argument("exp_invsq_integral: need 0 <= tau1 < tau2");
  if (mu == 0.0) return 0.5 * (tau2 * tau2 - tau1 * tau1);
  auto e1 = [&](double x) {
    if (std::isinf(x)) return 0.0;
    if (mode == ExpInvsqMode::exact) return expint_e1(x);
    double y = b * x;
    // -ln(1 - e^{-y}) ~ -ln(y) + y/2 as y -> 0 (avoids 1 - e^{-y} rounding to 0).
    if (y < 1e-8) return -std::log(y) + 0.5 * y;
    double e = std::exp(-y);
    return -std::log1p(-e);
  };
  double t2 = mu / (tau2 * tau2);
  double result = 0.5 * tau2 * tau2 * std::exp(-t2) - 0.5 * mu * e1(t2);
  if (tau1 > 0.0) {
    double t1 = mu / (tau1 * tau1);
    result += -0.5 * tau1 * tau1 * std::exp(-t1) + 0.5 * mu * e1(t1);
  }
  return result;
}

// Exclusion-zone interference exponent: 2 * integral over [r_excl, inf) of
// (1 - e^{-c r^{-beta}}) r dr, via the convergent integration-by-parts form
//   r_excl^2 * [ t0^{2/beta} * gamma_lower(1 - 2/beta, t0) - (1 - e^{-t0}) ],
// t0 = c * r_excl^{-beta}. Finite and positive for beta > 2.
inline double interference_exclusion_exponent(double c, double beta, double r_excl) {
  if (!(beta > 2)) throw std::invalid_argument("interference_exclusion_exponent: beta must be > 2");
  if (!(r_excl > 0)) throw std::invalid_argument("interference_exclusion_exponent: r_excl must be > 0");
  if (!(c >= 0)) throw std::invalid_argument("interference_exclusion_exponent: c must be >= 0");
  if (c == 0.0) return 0.0;
  double t0 = c * std::pow(r_excl, -beta);
  double w = 1.0 - 2.0 / beta;
  double u = std::pow(t0, 2.0 / beta) * gen_inc_gamma(w, 0.0, t0) + std::expm1(-t0);
  return r_excl * r_excl * u;
}

// Same exclusion exponent normalized by r_excl^2; depends only on
// t0 = c * r_excl^{-beta} and beta.
inline double exclusion_exponent_unit(double t0, double beta) {
  if (!(beta > 2)) throw std::invalid_argument("exclusion_exponent_unit: beta must be > 2");
  if (!(t0 >= 0)) throw std::invalid_argument("exclusion_exponent_unit: t0 must be >= 0");
  if (t0 == 0.0) return 0.0;
  double w = 1.0 - 2.0 / beta;
  return std::pow(t0, 2.0 / beta) * gen_inc_gamma(w, 0.0, t0) + std::expm1(-t0);
}

} // namespace isac
