#ifndef MIRFS_MODEL_HPP
#define MIRFS_MODEL_HPP

/** @file
 * Finite-state state-space models.
 *
 * A model supplies, for a parameter θ ∈ R^q:
 *  - the transition kernel P with P(y, x) = Prob(X_j = x | X_{j-1} = y)
 *    (rows indexed by the source state, rows sum to one), and
 *  - the emission density f(ξ_j; θ | x, ξ_{j-1}) of an observation given the
 *    hidden state x it was emitted from and the previous observation,
 *  together with every mixed partial derivative D^ν of both up to the
 *  model's maximum order. The initial hidden state X_0 follows either the
 *  stationary law π_θ of P or a fixed probability vector.
 */

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "multiindex.hpp"
#include "random.hpp"

namespace mirfs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// θ together with the coordinate names of the model it belongs to.
struct ParameterVector {
  ParameterVector() = default;
  explicit ParameterVector(Vector v, std::vector<std::string> n = {})
      : values(std::move(v)), names(std::move(n)) {}

  std::size_t size() const noexcept { return static_cast<std::size_t>(values.size()); }
  double operator[](std::size_t i) const { return values(static_cast<Eigen::Index>(i)); }

  std::string name(std::size_t i) const {
    return i < names.size() ? names[i] : "theta[" + std::to_string(i) + "]";
  }

  Vector values;
  std::vector<std::string> names;
};

/// One observation ξ_j ∈ R^d.
struct Observation {
  Observation() = default;
  explicit Observation(std::vector<double> v) : value(std::move(v)) {}
  explicit Observation(double v) : value{v} {}

  std::size_t size() const noexcept { return value.size(); }
  double operator[](std::size_t i) const { return value[i]; }
  friend bool operator==(const Observation&, const Observation&) = default;

  std::vector<double> value;
};

using ObservationSequence = std::vector<Observation>;

/// Open interval (lower, upper); either end may be infinite.
struct Interval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();

  bool contains(double v) const { return v > lower && v < upper; }
};

struct InitialLaw {
  enum class Kind { stationary, fixed };
  Kind kind = Kind::stationary;
  Vector fixed;  // used when kind == fixed
};

/// Interface for a finite-state model. Evaluators are pure functions of
/// their arguments and assume θ has already been checked for admissibility;
/// use the free functions below for checked access.
class Model {
 public:
  virtual ~Model() = default;

  virtual std::size_t num_states() const = 0;
  virtual std::size_t num_params() const = 0;
  virtual std::size_t obs_dim() const = 0;
  virtual unsigned max_order() const = 0;
  virtual const std::vector<Interval>& admissible_box() const = 0;
  virtual const std::vector<std::string>& param_names() const = 0;
  virtual const InitialLaw& initial_law() const = 0;

  /// D^ν P at θ, rows indexed by source state.
  virtual Matrix transition(const Vector& theta, const MultiIndex& nu) const = 0;

  /// D^ν f(ξ; θ | x, ξ_prev). `prev` is null for the first observation.
  virtual double emission(const Vector& theta, const MultiIndex& nu, std::size_t x,
                          const Observation& xi, const Observation* prev) const = 0;

  /// Draw ξ ~ f(·; θ | x, ξ_prev).
  virtual Observation sample_emission(const Vector& theta, std::size_t x,
                                      const Observation* prev, Rng& rng) const = 0;

  /// D^ν P for every ν in `table`, by label.
  virtual std::vector<Matrix> transition_derivatives(const Vector& theta,
                                                     const MultiIndexTable& table) const {
    std::vector<Matrix> out;
    out.reserve(table.size());
    for (const auto& nu : table.indices()) out.push_back(transition(theta, nu));
    return out;
  }

  /// K×D matrix whose row k holds D^{ν_k} f(ξ | x, ξ_prev) over states x.
  virtual Matrix emission_derivatives(const Vector& theta, const MultiIndexTable& table,
                                      const Observation& xi,
                                      const Observation* prev) const {
    const auto n_states = static_cast<Eigen::Index>(num_states());
    Matrix out(static_cast<Eigen::Index>(table.size()), n_states);
    for (std::size_t k = 0; k < table.size(); ++k)
      for (Eigen::Index x = 0; x < n_states; ++x)
        out(static_cast<Eigen::Index>(k), x) =
            emission(theta, table[k], static_cast<std::size_t>(x), xi, prev);
    return out;
  }

  ParameterVector parameters(Vector values) const {
    return ParameterVector(std::move(values), param_names());
  }
};

using ModelPtr = std::shared_ptr<const Model>;

// -- checked access ---------------------------------------------------------

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

/// Throws DomainError naming the first coordinate outside the admissible box.
inline void check_admissible(const Model& model, const ParameterVector& theta) {
  const auto& box = model.admissible_box();
  if (theta.size() != model.num_params())
    throw ConfigError("parameter vector has length " + std::to_string(theta.size()) +
                      ", model expects " + std::to_string(model.num_params()));
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double v = theta[i];
    if (!std::isfinite(v) || !box[i].contains(v)) {
      const auto& names = model.param_names();
      const std::string nm = i < names.size() ? names[i] : theta.name(i);
      throw DomainError("parameter '" + nm + "' (coordinate " + std::to_string(i) +
                        ") = " + format_number(v) + " outside admissible box (" +
                        format_number(box[i].lower) + ", " + format_number(box[i].upper) +
                        ")");
    }
  }
}

inline void check_order(const Model& model, const MultiIndex& nu) {
  if (nu.dim() != model.num_params())
    throw ConfigError("multi-index " + nu.to_string() + " has wrong dimension for q=" +
                      std::to_string(model.num_params()));
  if (nu.order() > model.max_order())
    throw ConfigError("derivative order " + std::to_string(nu.order()) +
                      " exceeds model maximum " + std::to_string(model.max_order()));
}

/// D^ν P at θ (source-state rows). For ν = 0 rows sum to one; for |ν| ≥ 1
/// rows sum to zero.
inline Matrix transition_derivative(const Model& model, const ParameterVector& theta,
                                    const MultiIndex& nu) {
  check_admissible(model, theta);
  check_order(model, nu);
  return model.transition(theta.values, nu);
}

inline double emission_derivative(const Model& model, const ParameterVector& theta,
                                  const MultiIndex& nu, std::size_t x,
                                  const Observation& xi, const Observation* xi_prev) {
  check_admissible(model, theta);
  check_order(model, nu);
  if (x >= model.num_states())
    throw ConfigError("state " + std::to_string(x) + " out of range");
  if (xi.size() != model.obs_dim())
    throw ConfigError("observation has dimension " + std::to_string(xi.size()) +
                      ", model expects " + std::to_string(model.obs_dim()));
  return model.emission(theta.values, nu, x, xi, xi_prev);
}

/// Verifies that P(θ) is row-stochastic and primitive (irreducible and
/// aperiodic: some power has all entries positive), and that a fixed
/// initial law is a probability vector.
inline void check_kernel(const Model& model, const ParameterVector& theta) {
  check_admissible(model, theta);
  const Matrix p = model.transition(theta.values, MultiIndex::zero(model.num_params()));
  const auto n = p.rows();
  if (p.cols() != n || static_cast<std::size_t>(n) != model.num_states())
    throw DomainError("transition matrix has wrong shape");
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j)
      if (!(p(i, j) >= 0.0))
        throw DomainError("transition entry (" + std::to_string(i) + "," +
                          std::to_string(j) + ") = " + format_number(p(i, j)) +
                          " is negative or not finite");
    if (std::abs(p.row(i).sum() - 1.0) > 1e-10)
      throw DomainError("transition row " + std::to_string(i) + " sums to " +
                        format_number(p.row(i).sum()));
  }
  // Wielandt: a primitive n×n matrix has P^((n-1)^2+1) > 0.
  using BoolMatrix = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;
  const BoolMatrix pattern = (p.array() > 0.0).cast<int>();
  BoolMatrix power = pattern;
  const Eigen::Index steps = (n - 1) * (n - 1) + 1;
  for (Eigen::Index s = 1; s < steps; ++s)
    power = ((power * pattern).array() > 0).cast<int>();
  if ((power.array() == 0).any())
    throw DomainError("transition kernel is not irreducible and aperiodic");

  const auto& law = model.initial_law();
  if (law.kind == InitialLaw::Kind::fixed) {
    if (law.fixed.size() != n) throw DomainError("fixed initial law has wrong length");
    if ((law.fixed.array() < 0.0).any() || std::abs(law.fixed.sum() - 1.0) > 1e-10)
      throw DomainError("fixed initial law is not a probability vector");
  }
}

// -- stationary law -----------------------------------------------------------

/// The initial law π and its derivatives D^ν π for every ν in a table.
class StationaryLaw {
 public:
  StationaryLaw(TablePtr table, std::vector<Vector> derivs)
      : table_(std::move(table)), derivs_(std::move(derivs)) {}

  const Vector& pi() const { return derivs_.front(); }
  const Vector& dpi(const MultiIndex& nu) const { return derivs_.at(table_->label(nu)); }
  /// D^{ν_label} π; label 0 is π itself.
  const Vector& by_label(std::size_t label) const { return derivs_.at(label); }
  const MultiIndexTable& table() const { return *table_; }
  const TablePtr& table_ptr() const { return table_; }

 private:
  TablePtr table_;
  std::vector<Vector> derivs_;
};

/// π_θ and D^ν π for all ν in `table`. For a stationary initial law this
/// solves (I − Pᵀ)π = 0 with 1ᵀπ = 1, then, in increasing |ν|,
///   (I − Pᵀ) D^ν π = Σ_{0<μ≤ν} binom(ν,μ) (D^μ P)ᵀ D^{ν−μ} π,  1ᵀ D^ν π = 0,
/// reusing one factorization. A fixed initial law has D^ν π = 0 for ν ≠ 0.
inline StationaryLaw stationary_law(const Model& model, const ParameterVector& theta,
                                    TablePtr table) {
  check_admissible(model, theta);
  if (table->q() != model.num_params())
    throw ConfigError("table dimension does not match model");
  if (table->r() > model.max_order())
    throw ConfigError("order " + std::to_string(table->r()) + " exceeds model maximum " +
                      std::to_string(model.max_order()));
  const auto n = static_cast<Eigen::Index>(model.num_states());
  std::vector<Vector> derivs(table->size(), Vector::Zero(n));

  const auto& init = model.initial_law();
  if (init.kind == InitialLaw::Kind::fixed) {
    derivs[0] = init.fixed;
    return StationaryLaw(std::move(table), std::move(derivs));
  }

  const std::vector<Matrix> dp = model.transition_derivatives(theta.values, *table);
  Matrix system = Matrix::Identity(n, n) - dp[0].transpose();
  system.row(n - 1).setOnes();
  Eigen::PartialPivLU<Matrix> lu(system);
  const double rcond = lu.rcond();
  if (!(rcond > 1e-13))
    throw DomainError("stationary law is ill-determined (reciprocal condition " +
                      format_number(rcond) + "); the chain may be reducible");

  Vector rhs = Vector::Zero(n);
  rhs(n - 1) = 1.0;
  derivs[0] = lu.solve(rhs);
  // One step of refinement keeps the fixed-point residual at rounding level.
  {
    Vector resid = rhs - system * derivs[0];
    derivs[0] += lu.solve(resid);
  }

  for (std::size_t label = 1; label < table->size(); ++label) {
    rhs.setZero();
    for (const auto& dec : table->decompositions(label)) {
      if (dec.mu == 0) continue;
      rhs.noalias() += static_cast<double>(dec.coeff) * dp[dec.mu].transpose() *
                       derivs[dec.rest];
    }
    rhs(n - 1) = 0.0;
    derivs[label] = lu.solve(rhs);
  }
  return StationaryLaw(std::move(table), std::move(derivs));
}

inline StationaryLaw stationary_law(const Model& model, const ParameterVector& theta,
                                    unsigned r) {
  return stationary_law(model, theta, build_table(model.num_params(), r));
}

// -- C10 check ------------------------------------------------------------------

/// Result of probing sup_x |D^ν f(ξ₁; θ | x, ξ₀)| over a finite grid.
struct C10Report {
  TablePtr table;
  std::vector<double> sup_abs;  // by label
  std::vector<std::string> failures;
  bool passed() const { return failures.empty(); }
};

/// Cartesian grid over the closure of the admissible box with `points`
/// values per coordinate (endpoints included). Infinite ends are replaced
/// by center ± 1.
inline std::vector<ParameterVector> box_grid(const Model& model, const ParameterVector& center,
                                             std::size_t points) {
  const auto& box = model.admissible_box();
  const std::size_t q = model.num_params();
  if (points < 2) throw ConfigError("box_grid needs at least 2 points per axis");
  std::vector<std::vector<double>> axes(q);
  for (std::size_t i = 0; i < q; ++i) {
    double lo = std::isfinite(box[i].lower) ? box[i].lower : center[i] - 1.0;
    double hi = std::isfinite(box[i].upper) ? box[i].upper : center[i] + 1.0;
    for (std::size_t k = 0; k < points; ++k)
      axes[i].push_back(lo + (hi - lo) * static_cast<double>(k) /
                                 static_cast<double>(points - 1));
  }
  std::vector<ParameterVector> grid;
  std::vector<std::size_t> odometer(q, 0);
  while (true) {
    Vector v(static_cast<Eigen::Index>(q));
    for (std::size_t i = 0; i < q; ++i) v(static_cast<Eigen::Index>(i)) = axes[i][odometer[i]];
    grid.push_back(model.parameters(std::move(v)));
    std::size_t d = 0;
    while (d < q && ++odometer[d] == points) odometer[d++] = 0;
    if (d == q) break;
  }
  return grid;
}

/// Evaluates every D^ν f, |ν| ≤ max_order, on the grid × observation pairs
/// × states and reports the suprema. Non-finite values or evaluation
/// errors are failures. Grid points are evaluated without the admissibility
/// check, so boundary points of the box are probed.
inline C10Report validate_c10(
    const Model& model, const std::vector<ParameterVector>& grid,
    const std::vector<std::pair<Observation, std::optional<Observation>>>& obs_pairs) {
  C10Report report;
  report.table = build_table(model.num_params(), model.max_order());
  report.sup_abs.assign(report.table->size(), 0.0);
  for (const auto& theta : grid) {
    for (const auto& [xi, prev] : obs_pairs) {
      const Observation* prev_ptr = prev ? &*prev : nullptr;
      for (std::size_t label = 0; label < report.table->size(); ++label) {
        const MultiIndex& nu = (*report.table)[label];
        for (std::size_t x = 0; x < model.num_states(); ++x) {
          double value = 0.0;
          try {
            value = model.emission(theta.values, nu, x, xi, prev_ptr);
          } catch (const std::exception& e) {
            report.failures.push_back("D^" + nu.to_string() + " f threw: " + e.what());
            continue;
          }
          if (!std::isfinite(value)) {
            std::ostringstream os;
            os << "D^" << nu.to_string() << " f(xi=" << format_number(xi[0])
               << " | x=" << x << ") is not finite at theta=("
               << theta.values.transpose() << ")";
            report.failures.push_back(os.str());
            continue;
          }
          report.sup_abs[label] = std::max(report.sup_abs[label], std::abs(value));
        }
      }
    }
  }
  return report;
}

}  // namespace mirfs

#endif  // MIRFS_MODEL_HPP
