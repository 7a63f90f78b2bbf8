#pragma once

// Model parameters: physical constants, thresholds and derived quantities for
// the ISAC network model. Single source of truth for derived constants; all
// types are immutable-by-convention after construction and safe to share
// across threads.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "units.hpp"

namespace isac {

// How the dB-domain shadowing deviation setting is mapped to the linear
// standard deviation xi used by both engines:
//   power_db     : xi = 10^(x/10)
//   amplitude_db : xi = 10^(x/20)
//   raw          : xi = |x|   (the configured number taken literally)
enum class XiInterpretation { power_db, amplitude_db, raw };

inline double resolve_xi(double x, XiInterpretation interp) {
  switch (interp) {
    case XiInterpretation::power_db: return std::pow(10.0, x / 10.0);
    case XiInterpretation::amplitude_db: return std::pow(10.0, x / 20.0);
    case XiInterpretation::raw: return std::fabs(x);
  }
  throw std::logic_error("unreachable xi interpretation");
}

inline void require_finite(double v, const char* name) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string(name) + " must be finite");
}

struct NetworkParams {
  double lambda_bs = 0;  // BS density [1/m^2]
  double beta = 0;       // path-loss exponent (> 2)
  double p_t = 0;        // transmit power [W]
  double n0 = 0;         // positioning-stage noise power [W]
  double sigma_n2 = 0;   // communication noise power [W]
  double xi = 0;         // shadowing standard deviation of the dB-domain RSS term [linear]
  double gamma = 0;      // participation SINR threshold [linear]
  int l_p = 0;           // max BSs used for positioning (>= 3)
  double n_l_cap = 0;    // CRLB placeholder for unlocalizable snapshots [m^2]
  int n_approx = 0;      // order N of the gamma-CDF surrogate
  int g_quad = 0;        // order G of the finite-interval quadrature panels

  void validate() const {
    require_finite(lambda_bs, "lambda_bs");
    require_finite(beta, "beta");
    require_finite(p_t, "p_t");
    require_finite(n0, "n0");
    require_finite(sigma_n2, "sigma_n2");
    require_finite(xi, "xi");
    require_finite(gamma, "gamma");
    require_finite(n_l_cap, "n_l_cap");
    if (lambda_bs <= 0) throw std::invalid_argument("lambda_bs must be > 0");
    if (beta <= 2) throw std::invalid_argument("beta must be > 2 (interference integrals diverge otherwise)");
    if (p_t <= 0) throw std::invalid_argument("p_t must be > 0");
    if (n0 <= 0) throw std::invalid_argument("n0 must be > 0");
    if (sigma_n2 <= 0) throw std::invalid_argument("sigma_n2 must be > 0");
    if (xi <= 0) throw std::invalid_argument("xi must be > 0");
    if (gamma <= 0) throw std::invalid_argument("gamma must be > 0");
    if (l_p < 3) throw std::invalid_argument("l_p must be >= 3 (fewer than 3 anchors is unlocalizable)");
    if (n_l_cap <= 0) throw std::invalid_argument("n_l_cap must be > 0");
    if (n_approx < 5 || n_approx > 30)
      throw std::invalid_argument(
          "n_approx must be in [5, 30] (the alternating binomial bracket loses all "
          "precision beyond ~30 terms)");
    if (g_quad < 2) throw std::invalid_argument("g_quad must be >= 2");
  }
};

struct BeamPattern {
  double m1 = 1;  // main-lobe gain [linear]
  double m2 = 1;  // side-lobe gain [linear]
  double phi = 0; // main-lobe width [rad]

  double c1() const { return phi / (2.0 * std::numbers::pi); }
  double c2() const { return 1.0 - c1(); }
  // Mean interferer gain E[D] over the sectored pattern.
  double mean_gain() const { return c1() * m1 + c2() * m2; }

  void validate() const {
    require_finite(m1, "m1");
    require_finite(m2, "m2");
    require_finite(phi, "phi");
    if (!(m1 >= m2 && m2 > 0)) throw std::invalid_argument("beam gains must satisfy m1 >= m2 > 0");
    if (!(phi > 0 && phi < 2.0 * std::numbers::pi))
      throw std::invalid_argument("phi must lie in (0, 2*pi)");
  }
};

struct QamOrder {
  int k = 4;  // constellation size; perfect square >= 4

  double v() const {
    double s = std::sqrt(static_cast<double>(k));
    return (s - 1.0) / s;
  }
  double varsigma() const { return 3.0 / (k - 1); }
  // Largest achievable symbol error rate (at SINR = 0).
  double ser_max() const { double vv = v(); return 2.0 * vv - vv * vv; }

  void validate() const {
    if (k < 4) throw std::invalid_argument("QAM order must be >= 4");
    int s = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    if (s * s != k) throw std::invalid_argument("QAM order must be a perfect square");
  }
};

// Default operating point used throughout: density 8/sqrt(3) per km^2,
// path-loss exponent 3.6, 0 dB transmit power, -89 dBm noise at both stages,
// -9 dB shadowing deviation (power_db reading), participation threshold
// -15 dB, up to 10 positioning BSs, 10^4 m^2 unlocalizable placeholder,
// 5-term gamma surrogate, 32-point quadrature panels.
inline NetworkParams default_params() {
  NetworkParams p;
  p.lambda_bs = per_km2_to_per_m2(8.0 / std::sqrt(3.0));
  p.beta = 3.6;
  p.p_t = db_to_linear(0.0);
  p.n0 = dbm_to_watts(-89.0);
  p.sigma_n2 = dbm_to_watts(-89.0);
  p.xi = resolve_xi(-9.0, XiInterpretation::power_db);
  p.gamma = db_to_linear(-15.0);
  p.l_p = 10;
  p.n_l_cap = 1e4;
  p.n_approx = 5;
  p.g_quad = 32;
  p.validate();
  return p;
}

// Default sectored beam: 0 dB main lobe of width 30 degrees, -20 dB side lobe.
inline BeamPattern default_beam() {
  BeamPattern b;
  b.m1 = db_to_linear(0.0);
  b.m2 = db_to_linear(-20.0);
  b.phi = deg_to_rad(30.0);
  b.validate();
  return b;
}

inline QamOrder default_qam() {
  QamOrder q;
  q.k = 16;
  q.validate();
  return q;
}

} // namespace isac
