#pragma once

// Unit conversions. All internal quantities are SI: meters, watts, linear
// gains, densities per square meter. Conversion from dB / dBm / km^2 / degrees
// happens exactly once, at the configuration boundary.

#include <cmath>
#include <numbers>

namespace isac {

inline double db_to_linear(double x_db) { return std::pow(10.0, x_db / 10.0); }

inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

// dBm referenced to 1 mW.
inline double dbm_to_watts(double x_dbm) { return std::pow(10.0, (x_dbm - 30.0) / 10.0); }

inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

inline double per_km2_to_per_m2(double d) { return d * 1e-6; }

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

} // namespace isac
