#ifndef MIRFS_CHECK_SUITE_HPP
#define MIRFS_CHECK_SUITE_HPP

/** @file
 * End-to-end comparison of the core against the brute-force oracles, as run
 * by `mirfs check`.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "likelihood.hpp"
#include "mirfs_core.hpp"
#include "model.hpp"
#include "oracles.hpp"
#include "simulation.hpp"

namespace mirfs {

struct CheckRow {
  std::string name;
  double discrepancy = 0.0;
  double tolerance = 0.0;
  bool passed = true;
  bool skipped = false;
  std::string note;
};

struct CheckReport {
  unsigned order = 0;
  std::vector<CheckRow> rows;

  bool passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.passed; });
  }
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
      if (!r.passed) out.push_back(r.name);
    return out;
  }
};

struct CheckTolerances {
  double likelihood = 1e-10;
  double naive_product = 1e-12;
  double score = 1e-6;
  double hessian = 1e-4;
  double symmetry = 1e-8;
  double telescoping = 1e-8;
};

struct CheckOptions {
  OracleConfig oracle;
  CheckTolerances tol;
  std::uint64_t seed = 20240917;
  std::size_t short_length = 8;    // auto-generated path-sum cases
  std::size_t short_cases = 3;
  std::size_t naive_length = 10;
  std::size_t long_length = 100;   // auto-generated derivative cases
  std::size_t telescoping_length = 200;
};

/// Largest block-wise ‖exp(log_scale)·W − W_naive‖_F / ‖W_naive‖_F. Blocks
/// whose naive norm vanishes are measured against the largest block norm.
inline double scaled_vs_naive_discrepancy(const Model& model, const ParameterVector& theta,
                                          const ObservationSequence& data, unsigned order) {
  TablePtr table = build_table(model.num_params(), order);
  const StationaryLaw law = stationary_law(model, theta, table);
  const KernelCache cache = make_kernel_cache(model, theta, table);
  const DerivativeStack scaled = run_recursion(model, theta, cache, data, law.pi());
  const std::vector<Matrix> naive = naive_unscaled_product(model, theta, data, *table, law.pi());
  double largest = 0.0;
  for (const auto& m : naive) largest = std::max(largest, m.norm());
  double worst = 0.0;
  for (std::size_t k = 0; k < table->size(); ++k) {
    const double ref = naive[k].norm() > 0.0 ? naive[k].norm() : largest;
    worst = std::max(worst, (scaled.unscaled(k) - naive[k]).norm() / ref);
  }
  return worst;
}

/// Largest relative residual between summed increments and end-point values.
inline double telescoping_residual(const EvalReport& report, unsigned component) {
  if (!report.increments) throw ConfigError("report has no increments");
  const auto& rows = *report.increments;
  switch (component) {
    case 0: {
      double s = 0.0;
      for (const auto& r : rows) s += r.g0;
      return relative_error(s, report.loglik);
    }
    case 1: {
      Vector s = Vector::Zero(report.score.size());
      for (const auto& r : rows) s += r.g1;
      return max_relative_error(s, report.score);
    }
    default: {
      Matrix s = Matrix::Zero(report.hessian.rows(), report.hessian.cols());
      for (const auto& r : rows) s += r.g2;
      // Increments use the raw Hessian; compare its symmetric part.
      return max_relative_error(0.5 * (s + s.transpose()), report.hessian);
    }
  }
}

/// Runs the oracle comparisons at θ. Without data, short paths are simulated
/// from the model at θ. Order 0 runs only the likelihood checks.
inline CheckReport run_checks(const Model& model, const ParameterVector& theta, unsigned order,
                              const std::optional<ObservationSequence>& data,
                              const CheckOptions& options = {}) {
  if (order > 2 || order > model.max_order())
    throw ConfigError("check order must be at most min(2, model maximum)");
  check_kernel(model, theta);
  CheckReport report;
  report.order = order;
  auto add = [&](std::string name, double value, double tol, std::string note = {}) {
    CheckRow row{std::move(name), value, tol, std::isfinite(value) && value <= tol, false,
                 std::move(note)};
    report.rows.push_back(std::move(row));
  };
  auto skip = [&](std::string name, double tol, std::string note) {
    report.rows.push_back(CheckRow{std::move(name), 0.0, tol, true, true, std::move(note)});
  };

  auto simulated = [&](std::size_t n, std::uint64_t stream) {
    Rng rng = derive_rng(options.seed, stream);
    return detail::simulate_with(model, theta, n, rng).observations;
  };
  auto prefix = [](const ObservationSequence& d, std::size_t n) {
    return ObservationSequence(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(std::min(n, d.size())));
  };

  // Cases for the brute-force path sum and the naive product.
  const auto n_states = static_cast<double>(model.num_states());
  std::size_t pathsum_len = options.oracle.max_bruteforce_n;
  while (pathsum_len > 1 && std::pow(n_states, static_cast<double>(pathsum_len)) >= 1e7)
    --pathsum_len;
  std::vector<ObservationSequence> short_cases;
  if (data) {
    short_cases.push_back(prefix(*data, std::min(pathsum_len, options.short_length)));
  } else {
    for (std::size_t c = 0; c < options.short_cases; ++c)
      short_cases.push_back(simulated(std::min(pathsum_len, options.short_length), c));
  }
  const ObservationSequence naive_case =
      data ? prefix(*data, options.naive_length) : simulated(options.naive_length, 100);
  const ObservationSequence long_case =
      data ? prefix(*data, options.long_length) : simulated(options.long_length, 101);
  const ObservationSequence telescoping_case =
      data ? prefix(*data, options.telescoping_length) : simulated(options.telescoping_length, 102);

  // Likelihood against the path sum.
  if (model.num_states() > options.oracle.max_bruteforce_D) {
    skip("likelihood_vs_pathsum", options.tol.likelihood,
         "D exceeds the brute-force limit of " + std::to_string(options.oracle.max_bruteforce_D));
  } else {
    double worst = 0.0;
    for (const auto& c : short_cases) {
      const double core = loglik(model, theta, c);
      const double oracle = pathsum_loglik(model, theta, c, options.oracle);
      worst = std::max(worst, std::abs(std::expm1(core - oracle)));
    }
    add("likelihood_vs_pathsum", worst, options.tol.likelihood,
        std::to_string(short_cases.size()) + " case(s), n <= " +
            std::to_string(short_cases.front().size()));
  }

  add("scaled_vs_naive", scaled_vs_naive_discrepancy(model, theta, naive_case, order),
      options.tol.naive_product, "n = " + std::to_string(naive_case.size()));

  EvalOptions with_increments;
  with_increments.record_increments = true;
  const EvalReport tele = evaluate(model, theta, telescoping_case, order, with_increments);
  add("telescoping_loglik", telescoping_residual(tele, 0), options.tol.telescoping,
      "n = " + std::to_string(telescoping_case.size()));
  if (order == 0) return report;

  // Derivatives against finite differences of the core itself.
  const EvalReport at = evaluate(model, theta, long_case, order);
  const Vector fd_score = fd_gradient(
      [&](const Vector& t) { return loglik(model, model.parameters(t), long_case); }, theta.values,
      options.oracle);
  add("score_vs_fd", max_relative_error(at.score, fd_score), options.tol.score,
      "n = " + std::to_string(long_case.size()));
  add("telescoping_score", telescoping_residual(tele, 1), options.tol.telescoping);
  if (order == 1) return report;

  const Matrix fd_hess = fd_jacobian(
      [&](const Vector& t) { return evaluate(model, model.parameters(t), long_case, 1).score; },
      theta.values, options.oracle);
  add("hessian_vs_fd", max_relative_error(at.hessian, 0.5 * (fd_hess + fd_hess.transpose())),
      options.tol.hessian, "n = " + std::to_string(long_case.size()));
  const double scale = std::max(1.0, at.hessian.cwiseAbs().maxCoeff());
  add("hessian_symmetry", at.hessian_asymmetry / scale, options.tol.symmetry);
  add("telescoping_hessian", telescoping_residual(tele, 2), options.tol.telescoping);
  return report;
}

}  // namespace mirfs

#endif  // MIRFS_CHECK_SUITE_HPP
