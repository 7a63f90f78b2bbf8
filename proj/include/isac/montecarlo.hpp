#pragma once

// Monte Carlo engine.
//
// Estimates the same coverage probabilities and ergodic rates as the analytic
// engine, from independent simulated snapshots of the network. Each snapshot
// draws one realization of the anchor process inside a finite window, plays
// the participation rule to decide how many anchors take part in positioning,
// and draws fading/beam states for the communication link. The neglected
// interference from outside the window is compensated by its exact mean, and
// the window is large enough that the residual fluctuation is far below the
// statistical resolution of practical trial counts.
//
// Determinism: trial i always uses the RNG stream (seed, i), and estimates
// are sequential reductions over the snapshot vector, so results depend only
// on (parameters, seed, n_trials) -- never on the number of worker threads.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "analytic.hpp"  // CoverageQuery / ErgodicQuery / metric enums
#include "geometry.hpp"
#include "params.hpp"
#include "qam.hpp"
#include "rng.hpp"

namespace isac {

// Number of worker threads: an explicit request wins, then the ISAC_THREADS
// environment variable, then hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ISAC_THREADS")) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096)
      throw std::invalid_argument("ISAC_THREADS must be an integer in [1, 4096]");
    return static_cast<int>(v);
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? static_cast<int>(hc) : 1;
}

struct McOptions {
  std::uint64_t seed = 1;
  std::int64_t n_trials = 10000;
  int n_threads = 0;  // 0 = resolve_threads default
  // Overrides the mean number of window points (0 keeps the built-in rule);
  // used by window-bias diagnostics.
  double window_target_override = 0.0;

  void validate() const {
    if (n_trials < 1) throw std::invalid_argument("McOptions: n_trials must be >= 1");
    if (n_threads < 0) throw std::invalid_argument("McOptions: n_threads must be >= 0");
    if (window_target_override < 0.0 || !std::isfinite(window_target_override))
      throw std::invalid_argument("McOptions: window_target_override must be finite and >= 0");
  }
};

// One simulated snapshot, reduced to the quantities every metric derives from.
struct SnapshotMetrics {
  std::int32_t l = 0;        // participating anchors (0 when fewer than 3 qualify)
  double crlb_bound = std::numeric_limits<double>::infinity();  // m^2, inf when l = 0
  double crlb_exact = std::numeric_limits<double>::infinity();  // m^2, geometry-exact variant
  double sinr = 0.0;         // communication SINR (linear)
};

struct EstimateWithCI {
  double value = std::numeric_limits<double>::quiet_NaN();
  double ci_half_width = std::numeric_limits<double>::quiet_NaN();  // 95 % normal CI
  std::int64_t n = 0;  // effective sample count (conditioning subset size)
};

struct ErgodicEstimate {
  EstimateWithCI value;                 // same semantics as ErgodicResult::value
  EstimateWithCI value_localizable;     // crlb metrics only
  EstimateWithCI mean_sqrt_localizable; // crlb metrics only
  double condition_prob = 1.0;
};

namespace detail {

// Mean number of points in the simulation window. Large enough that the l_p
// nearest anchors and the dominant interferers are always deep inside it.
inline double window_target_count(const NetworkParams& p, const McOptions& o) {
  if (o.window_target_override > 0.0) return o.window_target_override;
  return std::max(500.0, 100.0 * static_cast<double>(std::max(p.l_p, 5)));
}

// Exact mean of sum r^{-beta} over the points beyond radius R:
// 2*pi*lambda * R^{2-beta} / (beta - 2).
inline double mean_tail_beyond(const NetworkParams& p, double radius) {
  return 2.0 * std::numbers::pi * p.lambda_bs * std::pow(radius, 2.0 - p.beta) / (p.beta - 2.0);
}

}  // namespace detail

inline double mc_window_radius(const NetworkParams& p, const McOptions& o = {}) {
  return std::sqrt(detail::window_target_count(p, o) / (p.lambda_bs * std::numbers::pi));
}

// Simulates one snapshot. Draw order is part of the reproducibility contract:
// first the point process (one exponential area increment plus one uniform
// angle per accepted point), then the serving fade, then one (fade, beam)
// pair per interferer in distance order.
inline SnapshotMetrics simulate_snapshot(const NetworkParams& p, const BeamPattern& b, Rng& rng,
                                         double window_radius, double pos_tail) {
  SnapshotMetrics out;
  BsRealization real = sample_ppp(p.lambda_bs, window_radius, rng);
  const auto& pts = real.points;
  const std::size_t k = pts.size();

  std::vector<double> rpb(k);
  for (std::size_t i = 0; i < k; ++i) rpb[i] = std::pow(pts[i].r, -p.beta);

  // Participation: anchor l qualifies when its fading-free, beam-free SINR
  // against all farther points clears gamma. L is the largest qualifying
  // index up to l_p; fewer than 3 anchors means unlocalizable (L = 0).
  if (k > 0) {
    std::vector<double> suffix(k + 1, 0.0);
    for (std::size_t i = k; i-- > 0;) suffix[i] = suffix[i + 1] + rpb[i];
    const double noise = p.n0 / p.p_t;
    const std::size_t lmax = std::min<std::size_t>(k, static_cast<std::size_t>(p.l_p));
    std::int32_t part = 0;
    for (std::size_t l = 1; l <= lmax; ++l) {
      double sinr_l = rpb[l - 1] / (suffix[l] + pos_tail + noise);
      if (sinr_l >= p.gamma) part = static_cast<std::int32_t>(l);
    }
    if (part >= 3) {
      out.l = part;
      double s1 = 0.0;
      for (std::size_t i = 0; i < static_cast<std::size_t>(part); ++i)
        s1 += 1.0 / (pts[i].r * pts[i].r);
      out.crlb_bound = detail::crlb_prefactor(p.beta, p.xi) * 4.0 / s1;
      DistanceProfile prof;
      prof.distances.reserve(static_cast<std::size_t>(part));
      prof.angles.reserve(static_cast<std::size_t>(part));
      for (std::size_t i = 0; i < static_cast<std::size_t>(part); ++i) {
        prof.distances.push_back(pts[i].r);
        prof.angles.push_back(pts[i].theta);
      }
      try {
        out.crlb_exact = crlb_exact(prof, p.beta, p.xi);
      } catch (const std::domain_error&) {
        out.crlb_exact = std::numeric_limits<double>::infinity();
      }
    }
  }

  // Communication SINR: Rayleigh fading on every link, two-tier beam gain on
  // the interferers (main lobe with probability c1), serving link aligned.
  if (k > 0) {
    const double comm_tail = b.mean_gain() * pos_tail;
    double h1 = rng.exponential();
    double num = h1 * b.m1 * rpb[0];
    double den = comm_tail + p.sigma_n2 / p.p_t;
    const double c1 = b.c1();
    for (std::size_t i = 1; i < k; ++i) {
      double h = rng.exponential();
      double gain = rng.uniform() < c1 ? b.m1 : b.m2;
      den += h * gain * rpb[i];
    }
    out.sinr = num / den;
  }
  return out;
}

// Runs n_trials independent snapshots. Trial i uses RNG stream (seed, i);
// worker threads share nothing but the output slots they own.
inline std::vector<SnapshotMetrics> run_snapshots(const NetworkParams& p, const BeamPattern& b,
                                                  const McOptions& o) {
  p.validate();
  b.validate();
  o.validate();
  const double radius = mc_window_radius(p, o);
  const double pos_tail = detail::mean_tail_beyond(p, radius);
  const std::int64_t n = o.n_trials;
  std::vector<SnapshotMetrics> out(static_cast<std::size_t>(n));
  const int threads = std::min<std::int64_t>(resolve_threads(o.n_threads), n);
  auto worker = [&](int tid) {
    for (std::int64_t i = tid; i < n; i += threads) {
      Rng rng(o.seed, static_cast<std::uint64_t>(i));
      out[static_cast<std::size_t>(i)] = simulate_snapshot(p, b, rng, radius, pos_tail);
    }
  };
  if (threads <= 1) {
    worker(0);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads) - 1);
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (auto& th : pool) th.join();
  }
  return out;
}

namespace detail {

struct EventDefs {
  bool use_pos = false, use_comm = false;
  double eps1 = 0.0, sinr_thresh = 0.0;
};

inline EventDefs make_events(const CoverageQuery& q) {
  EventDefs e;
  switch (q.metric) {
    case Metric::positioning:
      e.use_pos = true;
      break;
    case Metric::communication_sinr:
    case Metric::communication_ser:
      e.use_comm = true;
      break;
    default:
      e.use_pos = e.use_comm = true;
      break;
  }
  if (e.use_pos) e.eps1 = q.eps1;
  if (e.use_comm) {
    bool ser_based = q.metric == Metric::communication_ser || q.metric == Metric::joint_crlb_ser ||
                     q.metric == Metric::cond_p_given_s || q.metric == Metric::cond_s_given_p;
    e.sinr_thresh = ser_based ? sinr_for_ser(q.eps3, q.qam) : q.eps2;
  }
  return e;
}

inline bool pos_event(const SnapshotMetrics& s, double eps1, double cap) {
  return s.l >= 3 ? s.crlb_bound <= eps1 : eps1 >= cap;
}

inline EstimateWithCI bernoulli_ci(std::int64_t hits, std::int64_t n) {
  EstimateWithCI r;
  r.n = n;
  double ph = static_cast<double>(hits) / static_cast<double>(n);
  r.value = ph;
  r.ci_half_width = 1.959963984540054 * std::sqrt(ph * (1.0 - ph) / static_cast<double>(n));
  return r;
}

inline EstimateWithCI mean_ci(const std::vector<double>& xs) {
  EstimateWithCI r;
  r.n = static_cast<std::int64_t>(xs.size());
  if (xs.empty()) return r;
  double sum = 0.0;
  for (double x : xs) sum += x;
  double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  double var = xs.size() > 1 ? ss / static_cast<double>(xs.size() - 1) : 0.0;
  r.value = mean;
  r.ci_half_width = 1.959963984540054 * std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

}  // namespace detail

// Coverage estimate for any metric of the query enum. Conditional metrics
// report the Bernoulli CI within the conditioning subset.
inline EstimateWithCI estimate_coverage(const std::vector<SnapshotMetrics>& snaps,
                                        const CoverageQuery& q, const NetworkParams& p) {
  q.validate();
  if (snaps.empty()) throw std::invalid_argument("estimate_coverage: no snapshots");
  const auto ev = detail::make_events(q);
  const double cap = p.n_l_cap;

  bool conditional = q.metric == Metric::cond_p_given_s || q.metric == Metric::cond_s_given_p ||
                     q.metric == Metric::cond_p_given_c || q.metric == Metric::cond_c_given_p;
  bool cond_on_pos = q.metric == Metric::cond_s_given_p || q.metric == Metric::cond_c_given_p;

  std::int64_t joint_hits = 0, denom_hits = 0;
  for (const auto& s : snaps) {
    bool pos = !ev.use_pos || detail::pos_event(s, ev.eps1, cap);
    bool comm = !ev.use_comm || s.sinr >= ev.sinr_thresh;
    if (!conditional) {
      joint_hits += (pos && comm) ? 1 : 0;
      continue;
    }
    bool given = cond_on_pos ? detail::pos_event(s, ev.eps1, cap) : s.sinr >= ev.sinr_thresh;
    if (given) {
      ++denom_hits;
      joint_hits += (pos && comm) ? 1 : 0;
    }
  }
  if (!conditional) return detail::bernoulli_ci(joint_hits, static_cast<std::int64_t>(snaps.size()));
  if (denom_hits == 0)
    throw std::domain_error("estimate_coverage: conditioning event never occurred in the sample");
  return detail::bernoulli_ci(joint_hits, denom_hits);
}

// Ergodic estimates. The crlb metrics report the capped mean over all
// (conditioning) snapshots plus localizable-only variants; rate/ser metrics
// the plain conditional mean.
inline ErgodicEstimate estimate_ergodic(const std::vector<SnapshotMetrics>& snaps,
                                        const ErgodicQuery& q, const NetworkParams& p) {
  q.validate();
  if (snaps.empty()) throw std::invalid_argument("estimate_ergodic: no snapshots");
  const double cap = p.n_l_cap;

  auto in_condition = [&](const SnapshotMetrics& s) -> bool {
    switch (q.metric) {
      case ErgodicMetric::crlb:
      case ErgodicMetric::rate:
        return true;
      case ErgodicMetric::crlb_given_sinr:
        return s.sinr >= q.eps2;
      case ErgodicMetric::rate_given_crlb:
      case ErgodicMetric::ser_given_crlb:
        return detail::pos_event(s, q.eps1, cap);
    }
    return true;
  };

  std::vector<double> vals, loc_vals, loc_sqrt;
  std::int64_t cond = 0;
  for (const auto& s : snaps) {
    if (!in_condition(s)) continue;
    ++cond;
    switch (q.metric) {
      case ErgodicMetric::crlb:
      case ErgodicMetric::crlb_given_sinr:
        vals.push_back(s.l >= 3 ? std::min(s.crlb_bound, cap) : cap);
        if (s.l >= 3) {
          loc_vals.push_back(s.crlb_bound);
          loc_sqrt.push_back(std::sqrt(s.crlb_bound));
        }
        break;
      case ErgodicMetric::rate:
      case ErgodicMetric::rate_given_crlb:
        vals.push_back(std::log2(1.0 + s.sinr));
        break;
      case ErgodicMetric::ser_given_crlb:
        vals.push_back(ser_of_sinr(s.sinr, q.qam));
        break;
    }
  }
  if (cond == 0)
    throw std::domain_error("estimate_ergodic: conditioning event never occurred in the sample");

  ErgodicEstimate out;
  out.value = detail::mean_ci(vals);
  out.condition_prob = static_cast<double>(cond) / static_cast<double>(snaps.size());
  if (q.metric == ErgodicMetric::crlb || q.metric == ErgodicMetric::crlb_given_sinr) {
    if (!loc_vals.empty()) {
      out.value_localizable = detail::mean_ci(loc_vals);
      out.mean_sqrt_localizable = detail::mean_ci(loc_sqrt);
    }
  }
  return out;
}

// Sample estimate of P{exactly l anchors participate}; l = 0 counts the
// unlocalizable snapshots, matching the analytic PMF convention.
inline EstimateWithCI estimate_pmf(const std::vector<SnapshotMetrics>& snaps, int l) {
  if (snaps.empty()) throw std::invalid_argument("estimate_pmf: no snapshots");
  if (l < 0) throw std::invalid_argument("estimate_pmf: l must be >= 0");
  std::int64_t hits = 0;
  for (const auto& s : snaps) hits += (s.l == l) ? 1 : 0;
  return detail::bernoulli_ci(hits, static_cast<std::int64_t>(snaps.size()));
}

inline EstimateWithCI estimate_p_localizable(const std::vector<SnapshotMetrics>& snaps) {
  if (snaps.empty()) throw std::invalid_argument("estimate_p_localizable: no snapshots");
  std::int64_t hits = 0;
  for (const auto& s : snaps) hits += (s.l >= 3) ? 1 : 0;
  return detail::bernoulli_ci(hits, static_cast<std::int64_t>(snaps.size()));
}

// Debug dump of raw snapshots (one line per trial).
inline void write_snapshots(std::ostream& os, const std::vector<SnapshotMetrics>& snaps,
                            const QamOrder& qam) {
  os << "trial,l,crlb_bound,crlb_exact,sinr,rate,ser\n";
  char buf[256];
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    const auto& s = snaps[i];
    std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, s.l, s.crlb_bound,
                  s.crlb_exact, s.sinr, std::log2(1.0 + s.sinr), ser_of_sinr(s.sinr, qam));
    os << buf;
  }
}

}  // namespace isac
