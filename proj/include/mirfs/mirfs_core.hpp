#ifndef MIRFS_MIRFS_CORE_HPP
#define MIRFS_MIRFS_CORE_HPP

/** @file
 * The derivative-augmented iterated function system.
 *
 * For one observation ξ the step operator is the D×D matrix
 *
 *     S(ξ)(x, y) = p_θ(y, x) · f(ξ; θ | x, ξ_prev),
 *
 * i.e. S = diag(f) · Pᵀ, so that S acting on a vector of state weights is
 * one forward-filter step with the emission taken at the destination state.
 * The first observation ξ₀ has no transition: S(ξ₀) = diag(f(ξ₀ | x)).
 *
 * With M_n = S(ξ_n) ⋯ S(ξ₀) and W_n^ν = D^ν M_n for all |ν| ≤ r, the
 * Leibniz rule gives the block recursion
 *
 *     W_n^{ν_i} = Σ_{μ ≤ ν_i} binom(ν_i, μ) · D^{ν_i−μ} S(ξ_n) · W_{n−1}^μ,
 *
 * i.e. W_n = A_n ∘ W_{n−1} with the K×K block matrix
 * A_n(i, j) = binom(ν_i, ν_j) D^{ν_i−ν_j} S(ξ_n) when ν_j ≤ ν_i and zero
 * otherwise. With graded labels A_n is block lower-triangular and every
 * diagonal block is S(ξ_n).
 *
 * The stack is stored scaled: the true W_n^ν equals exp(log_scale) times
 * the stored block, and after each step the stored ν = 0 block has unit
 * likelihood mass 1ᵀ W⁰ π = 1.
 */

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "multiindex.hpp"

namespace mirfs {

/// mass(v) = Σ_x v(x): the signed summation functional used for ‖·‖.
inline double mass(const Vector& v) { return v.sum(); }

/// Per-θ data shared by every step: the transposed kernel derivatives
/// (D^κ P)ᵀ for all labels κ.
struct KernelCache {
  TablePtr table;
  std::vector<Matrix> transition_t;
};

inline KernelCache make_kernel_cache(const Model& model, const ParameterVector& theta,
                                     TablePtr table) {
  check_admissible(model, theta);
  if (table->q() != model.num_params())
    throw ConfigError("table dimension does not match model");
  if (table->r() > model.max_order())
    throw ConfigError("order " + std::to_string(table->r()) + " exceeds model maximum " +
                      std::to_string(model.max_order()));
  KernelCache cache;
  cache.transition_t = model.transition_derivatives(theta.values, *table);
  for (auto& m : cache.transition_t) m.transposeInPlace();
  cache.table = std::move(table);
  return cache;
}

/// A_n for one observation, stored as the K derivatives D^κ S(ξ_n); the
/// block (i, j) is binom(ν_i, ν_j) · D^{ν_i−ν_j} S, or a structural zero.
class StepBlock {
 public:
  StepBlock(TablePtr table, std::vector<Matrix> operator_derivs)
      : table_(std::move(table)), derivs_(std::move(operator_derivs)) {}

  std::size_t size() const noexcept { return table_->size(); }
  Eigen::Index dim() const { return derivs_.front().rows(); }
  const MultiIndexTable& table() const { return *table_; }

  /// D^κ S(ξ) for the label κ.
  const Matrix& operator_derivative(std::size_t kappa) const { return derivs_.at(kappa); }

  bool is_structural_zero(std::size_t i, std::size_t j) const {
    return !table_->difference(i, j).has_value();
  }

  /// The (i, j) block, materialized (zero matrix for structural zeros).
  Matrix block(std::size_t i, std::size_t j) const {
    const auto kappa = table_->difference(i, j);
    if (!kappa) return Matrix::Zero(dim(), dim());
    const double c = static_cast<double>(multinomial_coeff((*table_)[i], (*table_)[j]));
    return c * derivs_[*kappa];
  }

 private:
  TablePtr table_;
  std::vector<Matrix> derivs_;
};

/// W_n: K scaled blocks plus the accumulated log scale.
struct DerivativeStack {
  TablePtr table;
  std::vector<Matrix> blocks;
  double log_scale = 0.0;
  std::size_t step_index = 0;

  std::size_t size() const noexcept { return blocks.size(); }
  const Matrix& operator[](std::size_t label) const { return blocks[label]; }
  const Matrix& block(const MultiIndex& nu) const { return blocks.at(table->label(nu)); }

  /// exp(log_scale) · blocks[label]; may underflow for long sequences.
  Matrix unscaled(std::size_t label) const { return std::exp(log_scale) * blocks.at(label); }
};

namespace detail {

inline void check_observation(const Model& model, const Observation& xi) {
  if (xi.size() != model.obs_dim())
    throw ConfigError("observation has dimension " + std::to_string(xi.size()) +
                      ", model expects " + std::to_string(model.obs_dim()));
}

}  // namespace detail

/// Builds A_n from cached kernel derivatives. D^κ S is assembled by the
/// product rule over p and f:
///   D^κ S = Σ_{λ ≤ κ} binom(κ, λ) · diag(D^{κ−λ} f) · (D^λ P)ᵀ.
/// With `xi_prev` null this is the first observation and S = diag(f).
inline StepBlock build_step_block(const Model& model, const ParameterVector& theta,
                                  const KernelCache& cache, const Observation& xi,
                                  const Observation* xi_prev) {
  detail::check_observation(model, xi);
  const MultiIndexTable& table = *cache.table;
  const Matrix f = model.emission_derivatives(theta.values, table, xi, xi_prev);
  const auto n = static_cast<Eigen::Index>(model.num_states());
  std::vector<Matrix> derivs(table.size());
  for (std::size_t kappa = 0; kappa < table.size(); ++kappa) {
    if (xi_prev == nullptr) {
      derivs[kappa] = f.row(static_cast<Eigen::Index>(kappa)).transpose().asDiagonal();
      continue;
    }
    Matrix d = Matrix::Zero(n, n);
    for (const auto& dec : table.decompositions(kappa)) {
      const double c = static_cast<double>(dec.coeff);
      d.noalias() += (c * f.row(static_cast<Eigen::Index>(dec.rest)).transpose()).asDiagonal() *
                     cache.transition_t[dec.mu];
    }
    derivs[kappa] = std::move(d);
  }
  return StepBlock(cache.table, std::move(derivs));
}

inline StepBlock build_step_block(const Model& model, const ParameterVector& theta,
                                  TablePtr table, const Observation& xi,
                                  const Observation* xi_prev) {
  return build_step_block(model, theta, make_kernel_cache(model, theta, std::move(table)), xi,
                          xi_prev);
}

/// A ∘ W: new_blocks[i] = Σ_j A(i, j) · W_j over the non-zero blocks j ≤ i.
inline DerivativeStack compose(const StepBlock& step, const DerivativeStack& stack) {
  if (step.size() != stack.size() || &step.table() != stack.table.get())
    throw ConfigError("compose: step block and stack use different tables");
  if (stack.blocks.empty() || step.dim() != stack.blocks.front().rows())
    throw ConfigError("compose: state dimension mismatch");
  const MultiIndexTable& table = step.table();
  DerivativeStack out;
  out.table = stack.table;
  out.blocks.resize(stack.size());
  out.log_scale = stack.log_scale;
  out.step_index = stack.step_index + 1;
  for (std::size_t i = 0; i < table.size(); ++i) {
    Matrix acc = Matrix::Zero(step.dim(), stack.blocks.front().cols());
    for (const auto& dec : table.decompositions(i)) {
      const double c = static_cast<double>(dec.coeff);
      acc.noalias() += c * step.operator_derivative(dec.rest) * stack.blocks[dec.mu];
    }
    out.blocks[i] = std::move(acc);
  }
  return out;
}

/// Rescales all blocks so that mass(W⁰ π) = 1, adding the log of the
/// removed factor to log_scale.
inline void normalize(DerivativeStack& stack, const Vector& pi_vec) {
  const double s = mass(stack.blocks.front() * pi_vec);
  if (!(s > 0.0) || !std::isfinite(s))
    throw NumericError("likelihood mass " + format_number(s) +
                           " is not positive and finite; data impossible under the model",
                       stack.step_index);
  const double inv = 1.0 / s;
  for (auto& b : stack.blocks) b *= inv;
  stack.log_scale += std::log(s);
}

/// W_0^ν = D^ν S(ξ₀), unscaled (log_scale = 0).
inline DerivativeStack init_stack(const Model& model, const ParameterVector& theta,
                                  const KernelCache& cache, const Observation& xi0) {
  const StepBlock first = build_step_block(model, theta, cache, xi0, nullptr);
  DerivativeStack stack;
  stack.table = cache.table;
  stack.blocks.reserve(first.size());
  for (std::size_t k = 0; k < first.size(); ++k) stack.blocks.push_back(first.operator_derivative(k));
  return stack;
}

inline DerivativeStack init_stack(const Model& model, const ParameterVector& theta,
                                  TablePtr table, const Observation& xi0) {
  return init_stack(model, theta, make_kernel_cache(model, theta, std::move(table)), xi0);
}

/// One streaming step: build A_n, compose, normalize.
inline DerivativeStack advance(const DerivativeStack& stack, const Model& model,
                               const ParameterVector& theta, const KernelCache& cache,
                               const Observation& xi, const Observation& xi_prev,
                               const Vector& pi_vec) {
  DerivativeStack next = compose(build_step_block(model, theta, cache, xi, &xi_prev), stack);
  normalize(next, pi_vec);
  return next;
}

inline DerivativeStack advance(const DerivativeStack& stack, const Model& model,
                               const ParameterVector& theta, TablePtr table,
                               const Observation& xi, const Observation& xi_prev,
                               const Vector& pi_vec) {
  return advance(stack, model, theta, make_kernel_cache(model, theta, std::move(table)), xi,
                 xi_prev, pi_vec);
}

/// Runs the scaled recursion over `data` and returns the final stack. Each
/// intermediate stack is passed to `visit` (if given), starting with the
/// normalized W_0.
template <typename Visitor>
DerivativeStack run_recursion(const Model& model, const ParameterVector& theta,
                              const KernelCache& cache, const ObservationSequence& data,
                              const Vector& pi_vec, Visitor&& visit) {
  if (data.empty()) throw ConfigError("need at least one observation");
  DerivativeStack stack = init_stack(model, theta, cache, data.front());
  normalize(stack, pi_vec);
  visit(stack);
  for (std::size_t i = 1; i < data.size(); ++i) {
    detail::check_observation(model, data[i]);
    stack = advance(stack, model, theta, cache, data[i], data[i - 1], pi_vec);
    visit(stack);
  }
  return stack;
}

inline DerivativeStack run_recursion(const Model& model, const ParameterVector& theta,
                                     const KernelCache& cache, const ObservationSequence& data,
                                     const Vector& pi_vec) {
  return run_recursion(model, theta, cache, data, pi_vec, [](const DerivativeStack&) {});
}

}  // namespace mirfs

#endif  // MIRFS_MIRFS_CORE_HPP
