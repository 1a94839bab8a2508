#ifndef MIRFS_SIMULATION_HPP
#define MIRFS_SIMULATION_HPP

/** @file
 * Path simulation and empirical probes of the law-of-large-numbers
 * behaviour of ℓ, its score and observed information along (X_n, ξ_n).
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"
#include "random.hpp"

namespace mirfs {

struct SimulatedPath {
  std::vector<std::size_t> states;
  ObservationSequence observations;
  std::uint64_t seed = 0;
  ParameterVector theta_used;
};

namespace detail {

inline std::size_t sample_categorical(const Eigen::Ref<const Vector>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double cum = 0.0;
  for (Eigen::Index k = 0; k + 1 < probs.size(); ++k) {
    cum += probs(k);
    if (u < cum) return static_cast<std::size_t>(k);
  }
  return static_cast<std::size_t>(probs.size() - 1);
}

inline SimulatedPath simulate_with(const Model& model, const ParameterVector& theta,
                                   std::size_t n, Rng& rng) {
  check_kernel(model, theta);
  const Vector pi = stationary_law(model, theta, 0U).pi();
  const Matrix p = model.transition(theta.values, MultiIndex::zero(model.num_params()));
  SimulatedPath path;
  path.theta_used = theta;
  path.states.reserve(n);
  path.observations.reserve(n);
  std::size_t x = sample_categorical(pi, rng);
  for (std::size_t j = 0; j < n; ++j) {
    if (j > 0) {
      const Vector row = p.row(static_cast<Eigen::Index>(x)).transpose();
      x = sample_categorical(row, rng);
    }
    const Observation* prev = j == 0 ? nullptr : &path.observations.back();
    Observation xi = model.sample_emission(theta.values, x, prev, rng);
    path.states.push_back(x);
    path.observations.push_back(std::move(xi));
  }
  return path;
}

}  // namespace detail

/// X₀ ~ initial law, X_j ~ P(X_{j−1}, ·), ξ_j ~ f(· | X_j, ξ_{j−1}).
/// Deterministic given the seed.
inline SimulatedPath simulate(const Model& model, const ParameterVector& theta, std::size_t n,
                              std::uint64_t seed) {
  if (n < 1) throw ConfigError("simulate needs n >= 1");
  Rng rng(seed);
  SimulatedPath path = detail::simulate_with(model, theta, n, rng);
  path.seed = seed;
  return path;
}

/// Monte-Carlo mean and standard error of a sample.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;
};

inline Estimate summarize(const std::vector<double>& xs) {
  Estimate e;
  if (xs.empty()) return e;
  const double m = static_cast<double>(xs.size());
  for (double x : xs) e.mean += x;
  e.mean /= m;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - e.mean) * (x - e.mean);
    e.std_error = std::sqrt(ss / (m - 1.0) / m);
  }
  return e;
}

struct DiagnosticsRow {
  std::size_t n = 0;
  Estimate loglik_per_obs;
  std::vector<Estimate> score_per_obs;  // per coordinate
  double score_rms_per_obs = 0.0;       // sqrt(mean ‖score‖²) / n
  Matrix info_per_obs;                  // mean observed_info / n
  Matrix info_per_obs_se;
  Matrix outer_per_obs;                 // mean score scoreᵀ / n
  Matrix outer_per_obs_se;
  Matrix identity_gap;                  // mean of (score scoreᵀ − observed_info) / n
  Matrix identity_gap_se;
  bool identity_within_3se = true;
};

struct ErgodicReport {
  std::uint64_t seed = 0;
  std::size_t replications = 0;
  ParameterVector theta_true;
  std::vector<DiagnosticsRow> rows;
  /// log-log slopes of score_rms_per_obs between consecutive grid points.
  std::vector<double> pairwise_slopes;
  /// least-squares log-log slope over the whole grid.
  double score_slope = 0.0;
};

/// For each n in the grid, simulates `replications` paths at θ_true
/// (replication r of grid point i uses stream i·replications + r of the
/// master seed) and evaluates ℓ, score and observed information at θ_true.
inline ErgodicReport ergodic_diagnostics(const Model& model, const ParameterVector& theta_true,
                                         const std::vector<std::size_t>& n_grid,
                                         std::size_t replications, std::uint64_t seed,
                                         unsigned threads = 0) {
  check_kernel(model, theta_true);
  if (n_grid.empty()) throw ConfigError("diagnostics need a non-empty n grid");
  if (replications < 2) throw ConfigError("diagnostics need at least 2 replications");
  if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
  const auto qi = static_cast<Eigen::Index>(model.num_params());

  ErgodicReport report;
  report.seed = seed;
  report.replications = replications;
  report.theta_true = theta_true;

  for (std::size_t gi = 0; gi < n_grid.size(); ++gi) {
    const std::size_t n = n_grid[gi];
    std::vector<EvalReport> evals(replications);
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, replications));
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t r = w; r < replications; r += workers) {
          try {
            Rng rng = derive_rng(seed, gi * replications + r);
            const SimulatedPath path = detail::simulate_with(model, theta_true, n, rng);
            evals[r] = evaluate(model, theta_true, path.observations, 2);
          } catch (...) {
            std::lock_guard<std::mutex> lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    const double nd = static_cast<double>(n);
    DiagnosticsRow row;
    row.n = n;
    std::vector<double> ll;
    for (const auto& e : evals) ll.push_back(e.loglik / nd);
    row.loglik_per_obs = summarize(ll);
    double sq = 0.0;
    for (const auto& e : evals) sq += e.score.squaredNorm();
    row.score_rms_per_obs = std::sqrt(sq / static_cast<double>(replications)) / nd;
    for (Eigen::Index a = 0; a < qi; ++a) {
      std::vector<double> s;
      for (const auto& e : evals) s.push_back(e.score(a) / nd);
      row.score_per_obs.push_back(summarize(s));
    }
    row.info_per_obs.resize(qi, qi);
    row.info_per_obs_se.resize(qi, qi);
    row.outer_per_obs.resize(qi, qi);
    row.outer_per_obs_se.resize(qi, qi);
    row.identity_gap.resize(qi, qi);
    row.identity_gap_se.resize(qi, qi);
    for (Eigen::Index a = 0; a < qi; ++a) {
      for (Eigen::Index b = 0; b < qi; ++b) {
        std::vector<double> info, outer, gap;
        for (const auto& e : evals) {
          info.push_back(e.observed_info(a, b) / nd);
          outer.push_back(e.score(a) * e.score(b) / nd);
          gap.push_back(outer.back() - info.back());
        }
        const Estimate ei = summarize(info);
        const Estimate eo = summarize(outer);
        const Estimate eg = summarize(gap);
        row.info_per_obs(a, b) = ei.mean;
        row.info_per_obs_se(a, b) = ei.std_error;
        row.outer_per_obs(a, b) = eo.mean;
        row.outer_per_obs_se(a, b) = eo.std_error;
        row.identity_gap(a, b) = eg.mean;
        row.identity_gap_se(a, b) = eg.std_error;
        if (std::abs(eg.mean) > 3.0 * eg.std_error) row.identity_within_3se = false;
      }
    }
    report.rows.push_back(std::move(row));
  }

  std::vector<double> lx, ly;
  for (const auto& row : report.rows) {
    lx.push_back(std::log(static_cast<double>(row.n)));
    ly.push_back(std::log(row.score_rms_per_obs));
  }
  for (std::size_t i = 0; i + 1 < lx.size(); ++i)
    report.pairwise_slopes.push_back((ly[i + 1] - ly[i]) / (lx[i + 1] - lx[i]));
  if (lx.size() >= 2) {
    const double mx = summarize(lx).mean;
    const double my = summarize(ly).mean;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxy += (lx[i] - mx) * (ly[i] - my);
      sxx += (lx[i] - mx) * (lx[i] - mx);
    }
    report.score_slope = sxx > 0.0 ? sxy / sxx : 0.0;
  }
  return report;
}

}  // namespace mirfs

#endif  // MIRFS_SIMULATION_HPP
