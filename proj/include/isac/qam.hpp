#pragma once

// Symbol error rate of square K-QAM under coherent maximum-likelihood
// detection, as a deterministic function of the post-combining SINR, plus the
// inverse mapping from an SER target back to the SINR threshold.

#include <cmath>
#include <stdexcept>

#include "params.hpp"
#include "specfun.hpp"

namespace isac {

// S(upsilon) = 4 v Q(sqrt(varsigma * upsilon)) - 4 v^2 Q^2(sqrt(varsigma * upsilon)).
// Strictly decreasing; S(0) = 2v - v^2.
inline double ser_of_sinr(double upsilon, const QamOrder& qam) {
  if (!(upsilon >= 0)) throw std::invalid_argument("ser_of_sinr: upsilon must be >= 0");
  double q = gauss_q(std::sqrt(qam.varsigma() * upsilon));
  double v = qam.v();
  return 4.0 * v * q - 4.0 * v * v * q * q;
}

// Inverse of ser_of_sinr: the SINR threshold whose SER equals eps3. The
// quadratic in q = Q(x) has two roots; the event S <= eps3 corresponds to the
// smaller root q* = (1 - sqrt(1 - eps3)) / (2v). Returns 0 when eps3 is at or
// above the SER ceiling 2v - v^2 (the event is then sure — signaled by a zero
// threshold, not an error).
inline double sinr_for_ser(double eps3, const QamOrder& qam) {
  if (!(eps3 > 0)) throw std::invalid_argument("sinr_for_ser: eps3 must be > 0");
  if (!(eps3 < 1)) throw std::invalid_argument("sinr_for_ser: eps3 must be < 1");
  double v = qam.v();
  if (eps3 >= qam.ser_max()) return 0.0;
  // 1 - sqrt(1 - eps3) written in the cancellation-free form so that tiny
  // eps3 does not round qstar to zero.
  double qstar = eps3 / ((1.0 + std::sqrt(1.0 - eps3)) * 2.0 * v);
  double x = inv_gauss_q(qstar);
  return x * x / qam.varsigma();
}

} // namespace isac
