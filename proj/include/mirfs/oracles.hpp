#ifndef MIRFS_ORACLES_HPP
#define MIRFS_ORACLES_HPP

/** @file
 * Brute-force reference computations. None of these share arithmetic with
 * the scaled recursion or the likelihood assembly: the path sum enumerates
 * hidden paths and gets π by repeated squaring of P, finite differences
 * only see a scalar function, and the naive product builds every block of
 * A_n from factorials and multiplies the full K×K form literally.
 */

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "error.hpp"
#include "model.hpp"
#include "multiindex.hpp"

namespace mirfs {

struct OracleConfig {
  enum class Scheme { central, richardson };

  double fd_step = 1e-5;
  Scheme fd_scheme = Scheme::richardson;
  std::size_t max_bruteforce_n = 12;  // observations
  std::size_t max_bruteforce_D = 5;
};

namespace detail {

/// Rows of P^(2^k) converge to π for a primitive kernel.
inline Vector stationary_by_squaring(const Matrix& p) {
  Matrix power = p;
  for (int k = 0; k < 64; ++k) {
    Matrix next = power * power;
    // Renormalize rows against drift.
    for (Eigen::Index i = 0; i < next.rows(); ++i) next.row(i) /= next.row(i).sum();
    const double change = (next - power).cwiseAbs().maxCoeff();
    power = std::move(next);
    if (change == 0.0) break;
  }
  Vector pi = power.colwise().mean().transpose();
  return pi / pi.sum();
}

inline double factorial(unsigned k) {
  double f = 1.0;
  for (unsigned i = 2; i <= k; ++i) f *= i;
  return f;
}

inline double multi_factorial(const MultiIndex& nu) {
  double f = 1.0;
  for (unsigned e : nu.exponents()) f *= factorial(e);
  return f;
}

}  // namespace detail

/// log L(θ; ξ_{0:n}) by summing over all D^(n+1) hidden paths:
///   Σ_{x_{0:n}} π(x₀) f(ξ₀|x₀) Π_{j≥1} P(x_{j−1}, x_j) f(ξ_j | x_j, ξ_{j−1}),
/// accumulated with log-sum-exp.
inline double pathsum_loglik(const Model& model, const ParameterVector& theta,
                             const ObservationSequence& data, const OracleConfig& config = {}) {
  check_admissible(model, theta);
  const std::size_t n_states = model.num_states();
  const std::size_t len = data.size();
  if (len == 0) throw ConfigError("path sum needs at least one observation");
  if (len > config.max_bruteforce_n)
    throw ConfigError("path sum limited to " + std::to_string(config.max_bruteforce_n) +
                      " observations");
  if (n_states > config.max_bruteforce_D)
    throw ConfigError("path sum limited to D <= " + std::to_string(config.max_bruteforce_D));
  if (std::pow(static_cast<double>(n_states), static_cast<double>(len)) >= 1e9)
    throw ConfigError("path sum would enumerate more than 1e9 paths");

  const MultiIndex zero = MultiIndex::zero(model.num_params());
  const Matrix p = model.transition(theta.values, zero);
  Vector pi;
  if (model.initial_law().kind == InitialLaw::Kind::fixed)
    pi = model.initial_law().fixed;
  else
    pi = detail::stationary_by_squaring(p);

  const double neg_inf = -std::numeric_limits<double>::infinity();
  auto safe_log = [&](double v) { return v > 0.0 ? std::log(v) : neg_inf; };
  std::vector<std::vector<double>> log_f(len, std::vector<double>(n_states));
  for (std::size_t j = 0; j < len; ++j)
    for (std::size_t x = 0; x < n_states; ++x)
      log_f[j][x] = safe_log(
          model.emission(theta.values, zero, x, data[j], j == 0 ? nullptr : &data[j - 1]));

  // Depth-first enumeration; prefix log-weights live on the stack.
  double running_max = neg_inf;
  double running_sum = 0.0;
  auto accumulate = [&](double lw) {
    if (lw == neg_inf) return;
    if (lw > running_max) {
      running_sum = running_sum * std::exp(running_max - lw) + 1.0;
      running_max = lw;
    } else {
      running_sum += std::exp(lw - running_max);
    }
  };
  std::function<void(std::size_t, std::size_t, double)> walk = [&](std::size_t j,
                                                                   std::size_t prev_state,
                                                                   double lw) {
    if (j == len) {
      accumulate(lw);
      return;
    }
    for (std::size_t x = 0; x < n_states; ++x) {
      const double step = safe_log(p(static_cast<Eigen::Index>(prev_state),
                                     static_cast<Eigen::Index>(x))) +
                          log_f[j][x];
      walk(j + 1, x, lw + step);
    }
  };
  for (std::size_t x0 = 0; x0 < n_states; ++x0)
    walk(1, x0, safe_log(pi(static_cast<Eigen::Index>(x0))) + log_f[0][x0]);
  if (running_max == neg_inf) return neg_inf;
  return running_max + std::log(running_sum);
}

inline double pathsum_likelihood(const Model& model, const ParameterVector& theta,
                                 const ObservationSequence& data, const OracleConfig& config = {}) {
  return std::exp(pathsum_loglik(model, theta, data, config));
}

/// |a − b| / max(|b|, 1): relative for large references, absolute near zero.
inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max(std::abs(b), 1.0);
}

/// Entrywise maximum of relative_error.
inline double max_relative_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ConfigError("shape mismatch");
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      worst = std::max(worst, relative_error(a(i, j), b(i, j)));
  return worst;
}

using ScalarFunction = std::function<double(const Vector&)>;
using VectorFunction = std::function<Vector(const Vector&)>;

/// Central-difference (optionally Richardson-extrapolated) Jacobian of a
/// vector function; row i is ∂F_i/∂θ.
inline Matrix fd_jacobian(const VectorFunction& fn, const Vector& theta,
                          const OracleConfig& config = {}) {
  if (!(config.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  const Eigen::Index q = theta.size();
  Matrix jac;
  auto central = [&](Eigen::Index c, double h) {
    Vector up = theta;
    Vector down = theta;
    up(c) += h;
    down(c) -= h;
    const Vector fu = fn(up);
    const Vector fd = fn(down);
    if (!fu.allFinite() || !fd.allFinite())
      throw NumericError("finite-difference evaluation is not finite", static_cast<std::size_t>(c));
    return Vector((fu - fd) / (2.0 * h));
  };
  for (Eigen::Index c = 0; c < q; ++c) {
    Vector col = central(c, config.fd_step);
    if (config.fd_scheme == OracleConfig::Scheme::richardson) {
      const Vector half = central(c, 0.5 * config.fd_step);
      col = (4.0 * half - col) / 3.0;
    }
    if (c == 0) jac.resize(col.size(), q);
    jac.col(c) = col;
  }
  return jac;
}

inline Vector fd_gradient(const ScalarFunction& fn, const Vector& theta,
                          const OracleConfig& config = {}) {
  const Matrix jac = fd_jacobian(
      [&](const Vector& t) {
        Vector v(1);
        v(0) = fn(t);
        return v;
      },
      theta, config);
  return jac.row(0).transpose();
}

/// Second central differences of a scalar function, symmetrized.
inline Matrix fd_hessian(const ScalarFunction& fn, const Vector& theta,
                         const OracleConfig& config = {}) {
  if (!(config.fd_step > 0.0)) throw ConfigError("fd_step must be positive");
  const double h = config.fd_step;
  const Eigen::Index q = theta.size();
  Matrix hess(q, q);
  auto at = [&](Eigen::Index a, double da, Eigen::Index b, double db) {
    Vector t = theta;
    t(a) += da;
    t(b) += db;
    const double v = fn(t);
    if (!std::isfinite(v))
      throw NumericError("finite-difference evaluation is not finite", static_cast<std::size_t>(a));
    return v;
  };
  const double f0 = fn(theta);
  for (Eigen::Index a = 0; a < q; ++a) {
    hess(a, a) = (at(a, h, a, 0.0) - 2.0 * f0 + at(a, -h, a, 0.0)) / (h * h);
    for (Eigen::Index b = a + 1; b < q; ++b) {
      const double v = (at(a, h, b, h) - at(a, h, b, -h) - at(a, -h, b, h) + at(a, -h, b, -h)) /
                       (4.0 * h * h);
      hess(a, b) = hess(b, a) = v;
    }
  }
  return hess;
}

/// W_n computed literally as A_n ∘ ⋯ ∘ A_1 ∘ W_0 without any rescaling.
/// Every A_n(i, j) = ν_i!/(ν_j!(ν_i−ν_j)!) · D^{ν_i−ν_j} S(ξ_n) is built
/// entrywise, and all K×K blocks (zeros included) enter the product.
/// Throws UnderflowError once the likelihood mass 1ᵀ W_n⁰ π drops below
/// the smallest normal double.
inline std::vector<Matrix> naive_unscaled_product(const Model& model, const ParameterVector& theta,
                                                  const ObservationSequence& data,
                                                  const MultiIndexTable& table,
                                                  const Vector& pi_vec) {
  check_admissible(model, theta);
  if (data.empty()) throw ConfigError("naive product needs at least one observation");
  const auto n = static_cast<Eigen::Index>(model.num_states());
  const std::size_t k_size = table.size();
  const auto& nus = table.indices();

  std::vector<Matrix> p_derivs;
  for (const auto& nu : nus) p_derivs.push_back(model.transition(theta.values, nu));

  // D^κ S(ξ_j) entry (x, y) = Σ_{λ≤κ} κ!/(λ!(κ−λ)!) D^λ p(y→x) · D^{κ−λ} f(ξ_j | x).
  auto step_derivative = [&](std::size_t kappa, std::size_t j) {
    const MultiIndex& k = nus[kappa];
    const Observation* prev = &data[j - 1];
    Matrix s = Matrix::Zero(n, n);
    for (std::size_t lam = 0; lam < k_size; ++lam) {
      const MultiIndex& l = nus[lam];
      bool leq = true;
      for (std::size_t d = 0; d < k.dim(); ++d) leq = leq && l[d] <= k[d];
      if (!leq) continue;
      std::vector<unsigned> rest_e(k.dim());
      for (std::size_t d = 0; d < k.dim(); ++d) rest_e[d] = k[d] - l[d];
      const MultiIndex rest(rest_e);
      const double c = detail::multi_factorial(k) /
                       (detail::multi_factorial(l) * detail::multi_factorial(rest));
      for (Eigen::Index x = 0; x < n; ++x) {
        const double df = model.emission(theta.values, rest, static_cast<std::size_t>(x),
                                         data[j], prev);
        for (Eigen::Index y = 0; y < n; ++y) s(x, y) += c * p_derivs[lam](y, x) * df;
      }
    }
    return s;
  };

  std::vector<Matrix> w(k_size);
  for (std::size_t i = 0; i < k_size; ++i) {
    // For ξ₀, D^κ diag(f) has only the λ = 0 term.
    Matrix s = Matrix::Zero(n, n);
    for (Eigen::Index x = 0; x < n; ++x)
      s(x, x) = model.emission(theta.values, nus[i], static_cast<std::size_t>(x), data[0], nullptr);
    w[i] = s;
  }
  auto check = [&](std::size_t j) {
    const double m = (w[0] * pi_vec).sum();
    if (!(std::abs(m) >= DBL_MIN))
      throw UnderflowError("unscaled product underflowed: likelihood mass " + format_number(m),
                           j);
  };
  check(0);

  for (std::size_t j = 1; j < data.size(); ++j) {
    std::vector<Matrix> ds(k_size);
    for (std::size_t kappa = 0; kappa < k_size; ++kappa) ds[kappa] = step_derivative(kappa, j);
    std::vector<std::vector<Matrix>> a(k_size, std::vector<Matrix>(k_size));
    for (std::size_t i = 0; i < k_size; ++i) {
      for (std::size_t jj = 0; jj < k_size; ++jj) {
        const MultiIndex& vi = nus[i];
        const MultiIndex& vj = nus[jj];
        bool leq = true;
        for (std::size_t d = 0; d < vi.dim(); ++d) leq = leq && vj[d] <= vi[d];
        if (!leq) {
          a[i][jj] = Matrix::Zero(n, n);
          continue;
        }
        std::vector<unsigned> diff(vi.dim());
        for (std::size_t d = 0; d < vi.dim(); ++d) diff[d] = vi[d] - vj[d];
        const MultiIndex vk(diff);
        const double c = detail::multi_factorial(vi) /
                         (detail::multi_factorial(vj) * detail::multi_factorial(vk));
        std::size_t kappa = 0;
        while (nus[kappa] != vk) ++kappa;
        a[i][jj] = c * ds[kappa];
      }
    }
    std::vector<Matrix> next(k_size, Matrix::Zero(n, n));
    for (std::size_t i = 0; i < k_size; ++i)
      for (std::size_t jj = 0; jj < k_size; ++jj) next[i] += a[i][jj] * w[jj];
    w = std::move(next);
    check(j);
  }
  return w;
}

/// Test hook: wraps a model and multiplies every first-order emission
/// derivative by `factor`, leaving values and the kernel intact.
class CorruptedDerivativeModel final : public Model {
 public:
  CorruptedDerivativeModel(ModelPtr inner, double factor)
      : inner_(std::move(inner)), factor_(factor) {}

  std::size_t num_states() const override { return inner_->num_states(); }
  std::size_t num_params() const override { return inner_->num_params(); }
  std::size_t obs_dim() const override { return inner_->obs_dim(); }
  unsigned max_order() const override { return inner_->max_order(); }
  const std::vector<Interval>& admissible_box() const override { return inner_->admissible_box(); }
  const std::vector<std::string>& param_names() const override { return inner_->param_names(); }
  const InitialLaw& initial_law() const override { return inner_->initial_law(); }

  Matrix transition(const Vector& theta, const MultiIndex& nu) const override {
    return inner_->transition(theta, nu);
  }
  double emission(const Vector& theta, const MultiIndex& nu, std::size_t x, const Observation& xi,
                  const Observation* prev) const override {
    const double v = inner_->emission(theta, nu, x, xi, prev);
    return nu.order() == 1 ? factor_ * v : v;
  }
  Observation sample_emission(const Vector& theta, std::size_t x, const Observation* prev,
                              Rng& rng) const override {
    return inner_->sample_emission(theta, x, prev, rng);
  }

 private:
  ModelPtr inner_;
  double factor_;
};

}  // namespace mirfs

#endif  // MIRFS_ORACLES_HPP
