#ifndef MIRFS_ESTIMATION_HPP
#define MIRFS_ESTIMATION_HPP

/** @file
 * Maximum-likelihood estimation by Newton–Raphson on the exact score and
 * observed information.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "likelihood.hpp"
#include "model.hpp"

namespace mirfs {

struct FitOptions {
  double tol = 1e-8;  // on ‖score‖₂ / n over the free coordinates
  std::size_t max_iter = 100;
  std::size_t max_halvings = 30;
  double box_margin = 1e-8;
  std::vector<bool> fixed;  // coordinates held at their initial value
};

struct FitIteration {
  Vector theta;
  double loglik = 0.0;
  double score_norm = 0.0;
  bool newton_step = true;  // false: gradient-ascent fallback was used
};

struct FitResult {
  ParameterVector theta_hat;
  double loglik = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  std::string reason;
  double grad_norm = 0.0;
  Matrix observed_info_at_mle;
  Vector std_errors;
  std::vector<FitIteration> trace;  // entry k is the iterate after k steps
};

namespace detail {

inline Vector project_to_box(const Model& model, Vector theta, double margin) {
  const auto& box = model.admissible_box();
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const auto& iv = box[static_cast<std::size_t>(i)];
    if (std::isfinite(iv.lower)) theta(i) = std::max(theta(i), iv.lower + margin);
    if (std::isfinite(iv.upper)) theta(i) = std::min(theta(i), iv.upper - margin);
  }
  return theta;
}

inline std::vector<Eigen::Index> free_coordinates(std::size_t q, const std::vector<bool>& fixed) {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < q; ++i)
    if (i >= fixed.size() || !fixed[i]) out.push_back(static_cast<Eigen::Index>(i));
  return out;
}

inline double step_scale(const Model& model, const std::vector<Eigen::Index>& free) {
  double scale = 1.0;
  for (auto i : free) {
    const auto& iv = model.admissible_box()[static_cast<std::size_t>(i)];
    const double width = iv.upper - iv.lower;
    if (std::isfinite(width)) scale = std::min(scale, 0.1 * width);
  }
  return scale;
}

}  // namespace detail

/// Newton–Raphson with backtracking. Each step solves I Δ = s with the
/// observed information I = −H on the free coordinates; if I is not
/// positive definite that iteration takes a gradient-ascent step instead.
/// Steps are halved until the log-likelihood does not decrease (up to
/// 8 ulp of rounding), and iterates are projected into the admissible box
/// with a small margin. Non-convergence is reported, not thrown.
inline FitResult fit(const Model& model, const ObservationSequence& data,
                     const ParameterVector& theta_init, const FitOptions& options = {}) {
  check_admissible(model, theta_init);
  if (data.empty()) throw ConfigError("fit needs at least one observation");
  const std::size_t q = model.num_params();
  const auto free = detail::free_coordinates(q, options.fixed);
  if (free.empty()) throw ConfigError("fit: every coordinate is fixed");
  const auto nf = static_cast<Eigen::Index>(free.size());
  const double n = static_cast<double>(data.size());
  const double eps = std::numeric_limits<double>::epsilon();

  auto free_part = [&](const Vector& v) {
    Vector out(nf);
    for (Eigen::Index k = 0; k < nf; ++k) out(k) = v(free[static_cast<std::size_t>(k)]);
    return out;
  };
  auto free_block = [&](const Matrix& m) {
    Matrix out(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a)
      for (Eigen::Index b = 0; b < nf; ++b)
        out(a, b) = m(free[static_cast<std::size_t>(a)], free[static_cast<std::size_t>(b)]);
    return out;
  };

  FitResult result;
  Vector theta = theta_init.values;
  EvalReport rep = evaluate(model, model.parameters(theta), data, 2);
  result.trace.push_back({theta, rep.loglik, free_part(rep.score).norm(), true});

  for (std::size_t it = 0;; ++it) {
    const Vector g = free_part(rep.score);
    if (g.norm() / n <= options.tol) {
      result.converged = true;
      result.reason = "score below tolerance";
      break;
    }
    if (it >= options.max_iter) {
      result.reason = "maximum iterations reached";
      break;
    }
    const Matrix info = free_block(rep.observed_info);
    Vector delta;
    bool newton = false;
    Eigen::LLT<Matrix> llt(info);
    if (llt.info() == Eigen::Success) {
      delta = llt.solve(g);
      newton = delta.allFinite();
    }
    if (!newton) delta = g * (detail::step_scale(model, free) / g.norm());

    bool accepted = false;
    double t = 1.0;
    Vector candidate;
    double cand_ll = 0.0;
    for (std::size_t h = 0; h <= options.max_halvings; ++h, t *= 0.5) {
      candidate = theta;
      for (Eigen::Index k = 0; k < nf; ++k) candidate(free[static_cast<std::size_t>(k)]) += t * delta(k);
      candidate = detail::project_to_box(model, candidate, options.box_margin);
      if (candidate == theta) break;
      try {
        cand_ll = evaluate(model, model.parameters(candidate), data, 0).loglik;
      } catch (const DomainError&) {
        continue;
      } catch (const NumericError&) {
        continue;
      }
      if (cand_ll >= rep.loglik - 8.0 * eps * std::abs(rep.loglik)) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      result.reason = "line search stalled";
      break;
    }
    theta = candidate;
    rep = evaluate(model, model.parameters(theta), data, 2);
    result.iterations = it + 1;
    result.trace.push_back({theta, rep.loglik, free_part(rep.score).norm(), newton});
  }

  result.theta_hat = model.parameters(theta);
  result.loglik = rep.loglik;
  result.grad_norm = free_part(rep.score).norm();
  result.observed_info_at_mle = rep.observed_info;
  result.std_errors = Vector::Constant(static_cast<Eigen::Index>(q),
                                       std::numeric_limits<double>::quiet_NaN());
  const Matrix info = free_block(rep.observed_info);
  Eigen::SelfAdjointEigenSolver<Matrix> eig(info);
  const double min_eig = eig.eigenvalues().minCoeff();
  if (min_eig > 0.0) {
    const Matrix cov = info.inverse();
    for (Eigen::Index k = 0; k < nf; ++k)
      result.std_errors(free[static_cast<std::size_t>(k)]) = std::sqrt(cov(k, k));
  }
  if (result.converged && min_eig < -1e-8) {
    result.converged = false;
    result.reason = "stationary point is not a local maximum";
  }
  return result;
}

/// Profile log-likelihood: for each grid value of coordinate `coord`, the
/// maximum of ℓ over the other coordinates (warm-started along the grid).
inline std::vector<std::pair<double, double>> profile_loglik(
    const Model& model, const ObservationSequence& data, std::size_t coord,
    const std::vector<double>& grid, const ParameterVector& theta_rest_init,
    FitOptions options = {}) {
  const std::size_t q = model.num_params();
  if (coord >= q) throw ConfigError("profile coordinate out of range");
  std::vector<std::pair<double, double>> out;
  Vector start = theta_rest_init.values;
  options.fixed.assign(q, false);
  options.fixed[coord] = true;
  for (double v : grid) {
    Vector theta = start;
    theta(static_cast<Eigen::Index>(coord)) = v;
    if (q == 1) {
      out.emplace_back(v, loglik(model, model.parameters(theta), data));
      continue;
    }
    const FitResult r = fit(model, data, model.parameters(theta), options);
    out.emplace_back(v, r.loglik);
    start = r.theta_hat.values;
  }
  return out;
}

/// e_{k+1}/e_k² with e_k = ‖θ_k − θ̂‖∞ along the trace, for every k with
/// e_k ≥ `floor` and e_{k+1} > 0. Bounded ratios indicate quadratic
/// convergence.
inline std::vector<double> newton_error_ratios(const FitResult& result, double floor = 1e-7) {
  std::vector<double> errs;
  for (const auto& it : result.trace)
    errs.push_back((it.theta - result.theta_hat.values).cwiseAbs().maxCoeff());
  std::vector<double> ratios;
  for (std::size_t k = 0; k + 1 < errs.size(); ++k)
    if (errs[k] >= floor && errs[k + 1] > 0.0) ratios.push_back(errs[k + 1] / (errs[k] * errs[k]));
  return ratios;
}

}  // namespace mirfs

#endif  // MIRFS_ESTIMATION_HPP
