#ifndef MIRFS_LIKELIHOOD_HPP
#define MIRFS_LIKELIHOOD_HPP

/** @file
 * Log-likelihood, score and observed information from a DerivativeStack.
 *
 * With F(W) the end-point functionals
 *   ℓ(W)    = log_scale + log mass(W⁰π)
 *   s_a(W)  = mass(W^{e_a}π + W⁰ D^{e_a}π) / mass(W⁰π)
 *   h_ab(W) = mass(W^ν π + W^{e_b} D^{e_a}π + W^{e_a} D^{e_b}π + W⁰ D^ν π) / mass(W⁰π)
 *             − s_b(W) · s_a(W),            ν = e_a + e_b,
 * the derivatives of ℓ(θ) are F(W_n), and the per-step increments are
 * g_i = F(W_i) − F(W_{i−1}), so F(W_n) = F(W_0) + Σ_{i=1}^n g_i.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "error.hpp"
#include "mirfs_core.hpp"
#include "model.hpp"

namespace mirfs {

/// End-point values of ℓ, its score and its (raw, unsymmetrized) Hessian
/// for one stack. Entries beyond the requested order are empty.
struct EndpointFunctionals {
  double loglik = 0.0;
  Vector score;
  Matrix hessian;
};

inline EndpointFunctionals endpoint(const DerivativeStack& stack, const StationaryLaw& law,
                                    unsigned order) {
  const MultiIndexTable& table = *stack.table;
  if (order > table.r() || order > law.table().r())
    throw ConfigError("requested order exceeds the recursion order");
  if (order > 2) throw ConfigError("log-likelihood derivatives are assembled up to order 2");
  const std::size_t q = table.q();
  const Vector& pi = law.pi();

  // Column sums 1ᵀ W^ν so every mass(W^ν v) is a dot product.
  std::vector<Eigen::RowVectorXd> colsum(table.size());
  for (std::size_t k = 0; k < table.size(); ++k)
    colsum[k] = stack.blocks[k].colwise().sum();

  EndpointFunctionals out;
  const double m0 = colsum[0].dot(pi);
  if (!(m0 > 0.0) || !std::isfinite(m0))
    throw NumericError("likelihood mass " + format_number(m0) + " is not positive and finite",
                       stack.step_index);
  out.loglik = stack.log_scale + std::log(m0);
  if (order == 0) return out;

  const auto qi = static_cast<Eigen::Index>(q);
  Vector first(qi);
  for (std::size_t a = 0; a < q; ++a) {
    const std::size_t ea = table.unit_label(a);
    first(static_cast<Eigen::Index>(a)) =
        colsum[ea].dot(pi) + colsum[0].dot(law.by_label(ea));
  }
  out.score = first / m0;
  if (order == 1) return out;

  out.hessian.resize(qi, qi);
  for (std::size_t a = 0; a < q; ++a) {
    for (std::size_t b = 0; b < q; ++b) {
      const std::size_t ea = table.unit_label(a);
      const std::size_t eb = table.unit_label(b);
      const std::size_t nu = table.pair_label(a, b);
      const double second = colsum[nu].dot(pi) + colsum[eb].dot(law.by_label(ea)) +
                            colsum[ea].dot(law.by_label(eb)) + colsum[0].dot(law.by_label(nu));
      const auto ia = static_cast<Eigen::Index>(a);
      const auto ib = static_cast<Eigen::Index>(b);
      out.hessian(ia, ib) = second / m0 - first(ib) * first(ia) / (m0 * m0);
    }
  }
  return out;
}

/// g⁰_i = log(‖M_i π‖ / ‖M_{i−1} π‖).
inline double increment_g0(const DerivativeStack& prev, const DerivativeStack& next,
                           const StationaryLaw& law) {
  return endpoint(next, law, 0).loglik - endpoint(prev, law, 0).loglik;
}

/// g^ν_i for ν = e_a.
inline double increment_g1(const DerivativeStack& prev, const DerivativeStack& next,
                           const StationaryLaw& law, const MultiIndex& nu) {
  if (nu.order() != 1) throw ConfigError("increment_g1 needs |nu| = 1");
  const std::size_t a = static_cast<std::size_t>(
      std::find(nu.exponents().begin(), nu.exponents().end(), 1U) - nu.exponents().begin());
  const auto ia = static_cast<Eigen::Index>(a);
  return endpoint(next, law, 1).score(ia) - endpoint(prev, law, 1).score(ia);
}

/// g^ν_i for ν = ν₁ + ν₂ with |ν₁| = |ν₂| = 1.
inline double increment_g2(const DerivativeStack& prev, const DerivativeStack& next,
                           const StationaryLaw& law, const MultiIndex& nu1,
                           const MultiIndex& nu2) {
  if (nu1.order() != 1 || nu2.order() != 1)
    throw ConfigError("increment_g2 needs |nu1| = |nu2| = 1");
  auto coord = [](const MultiIndex& nu) {
    return static_cast<Eigen::Index>(
        std::find(nu.exponents().begin(), nu.exponents().end(), 1U) - nu.exponents().begin());
  };
  const auto a = coord(nu1);
  const auto b = coord(nu2);
  return endpoint(next, law, 2).hessian(a, b) - endpoint(prev, law, 2).hessian(a, b);
}

/// Per-step increments; row 0 holds the initial term F(W_0).
struct IncrementRow {
  std::size_t step = 0;
  double g0 = 0.0;
  Vector g1;
  Matrix g2;
};

struct EvalReport {
  double loglik = 0.0;
  Vector score;          // length q when order >= 1
  Matrix hessian;        // q×q, symmetrized, when order == 2
  Matrix observed_info;  // −hessian
  double hessian_asymmetry = 0.0;  // max |H − Hᵀ| before symmetrization
  std::size_t n_obs = 0;
  unsigned order = 0;
  std::optional<std::vector<IncrementRow>> increments;
};

struct EvalOptions {
  bool record_increments = false;
};

/// Exact log-likelihood of ξ_{0:n} and, per `order`, its score and Hessian.
inline EvalReport evaluate(const Model& model, const ParameterVector& theta,
                           const ObservationSequence& data, unsigned order,
                           const EvalOptions& options = {}) {
  if (data.empty()) throw ConfigError("evaluate needs at least one observation");
  if (order > 2) throw ConfigError("order must be 0, 1 or 2");
  if (order > model.max_order())
    throw ConfigError("order " + std::to_string(order) + " exceeds model maximum " +
                      std::to_string(model.max_order()));
  check_kernel(model, theta);
  TablePtr table = build_table(model.num_params(), order);
  const StationaryLaw law = stationary_law(model, theta, table);
  const KernelCache cache = make_kernel_cache(model, theta, table);

  EvalReport report;
  report.n_obs = data.size();
  report.order = order;
  std::optional<EndpointFunctionals> previous;
  if (options.record_increments) report.increments.emplace();

  const DerivativeStack last =
      run_recursion(model, theta, cache, data, law.pi(), [&](const DerivativeStack& stack) {
        if (!options.record_increments) return;
        EndpointFunctionals now = endpoint(stack, law, order);
        IncrementRow row;
        row.step = stack.step_index;
        if (!previous) {
          row.g0 = now.loglik;
          row.g1 = now.score;
          row.g2 = now.hessian;
        } else {
          row.g0 = now.loglik - previous->loglik;
          if (order >= 1) row.g1 = now.score - previous->score;
          if (order >= 2) row.g2 = now.hessian - previous->hessian;
        }
        report.increments->push_back(std::move(row));
        previous = std::move(now);
      });

  EndpointFunctionals final_values = endpoint(last, law, order);
  report.loglik = final_values.loglik;
  if (!std::isfinite(report.loglik))
    throw NumericError("log-likelihood is not finite", last.step_index);
  if (order >= 1) {
    report.score = std::move(final_values.score);
    if (!report.score.allFinite()) throw NumericError("score is not finite", last.step_index);
  }
  if (order >= 2) {
    const Matrix& raw = final_values.hessian;
    if (!raw.allFinite()) throw NumericError("Hessian is not finite", last.step_index);
    report.hessian_asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
    report.hessian = 0.5 * (raw + raw.transpose());
    report.observed_info = -report.hessian;
  }
  return report;
}

inline double loglik(const Model& model, const ParameterVector& theta,
                     const ObservationSequence& data) {
  return evaluate(model, theta, data, 0).loglik;
}

}  // namespace mirfs

#endif  // MIRFS_LIKELIHOOD_HPP
