#ifndef MIRFS_BUILTIN_MODELS_HPP
#define MIRFS_BUILTIN_MODELS_HPP

/** @file
 * Built-in model families with analytic derivatives to order two.
 *
 *  - discrete_hmm:  ξ ∈ {0,…,M−1}, f(k | x) = B(x, k)
 *  - gaussian_hmm:  f(ξ | x) = N(ξ; μ_x, σ_x²)
 *  - switching_ar1: f(ξ_j | x, ξ_{j−1}) = N(ξ_j; a_x ξ_{j−1} + c_x, σ_x²), and
 *                   for the first observation the stationary AR(1) marginal
 *                   N(c_x/(1−a_x), σ_x²/(1−a_x²)) of state x.
 *
 * Each family is described by a full set of family parameters (the
 * "slots"); the free parameters θ_1,…,θ_q each override one slot. Rows of
 * stochastic matrices keep a dependent entry that absorbs the constraint:
 * the diagonal P(i,i) = 1 − Σ_{j≠i} P(i,j) of the transition matrix and
 * the first column B(x,0) = 1 − Σ_{k≥1} B(x,k) of a discrete emission
 * table. Those entries cannot be free parameters.
 */

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <vector>

#include "model.hpp"

namespace mirfs {

enum class Family { discrete_hmm, gaussian_hmm, switching_ar1 };

inline std::string family_name(Family f) {
  switch (f) {
    case Family::discrete_hmm: return "discrete_hmm";
    case Family::gaussian_hmm: return "gaussian_hmm";
    case Family::switching_ar1: return "switching_ar1";
  }
  return "?";
}

inline Family parse_family(const std::string& s) {
  if (s == "discrete_hmm") return Family::discrete_hmm;
  if (s == "gaussian_hmm") return Family::gaussian_hmm;
  if (s == "switching_ar1") return Family::switching_ar1;
  throw ConfigError("unknown model family '" + s + "'");
}

enum class SlotKind { transition, emission, means, sigmas, ar, intercepts };

/// A family parameter: `transition[i][j]`, `emission[x][k]`, `means[x]`,
/// `sigmas[x]`, `ar[x]` or `intercepts[x]`.
struct Slot {
  SlotKind kind = SlotKind::means;
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const Slot&, const Slot&) = default;
  friend auto operator<=>(const Slot&, const Slot&) = default;
};

inline std::string slot_name(const Slot& s) {
  const auto r = std::to_string(s.row);
  const auto c = std::to_string(s.col);
  switch (s.kind) {
    case SlotKind::transition: return "transition[" + r + "][" + c + "]";
    case SlotKind::emission: return "emission[" + r + "][" + c + "]";
    case SlotKind::means: return "means[" + r + "]";
    case SlotKind::sigmas: return "sigmas[" + r + "]";
    case SlotKind::ar: return "ar[" + r + "]";
    case SlotKind::intercepts: return "intercepts[" + r + "]";
  }
  return "?";
}

inline Slot parse_slot(const std::string& text) {
  static const std::regex matrix_re(R"(^(transition|emission)\[(\d+)\]\[(\d+)\]$)");
  static const std::regex vector_re(R"(^(means|sigmas|ar|intercepts)\[(\d+)\]$)");
  std::smatch m;
  if (std::regex_match(text, m, matrix_re)) {
    Slot s;
    s.kind = m[1] == "transition" ? SlotKind::transition : SlotKind::emission;
    s.row = std::stoul(m[2]);
    s.col = std::stoul(m[3]);
    return s;
  }
  if (std::regex_match(text, m, vector_re)) {
    Slot s;
    const std::string k = m[1];
    s.kind = k == "means"    ? SlotKind::means
             : k == "sigmas" ? SlotKind::sigmas
             : k == "ar"     ? SlotKind::ar
                             : SlotKind::intercepts;
    s.row = std::stoul(m[2]);
    return s;
  }
  throw ConfigError("cannot parse parameter target '" + text + "'");
}

struct FreeParameter {
  std::string name;
  Slot target;
  Interval bounds;
};

struct BuiltinSpec {
  Family family = Family::discrete_hmm;
  Matrix transition;  // D×D, rows sum to one
  Matrix emission;    // discrete_hmm: D×M, rows sum to one
  Vector means;       // gaussian_hmm
  Vector sigmas;      // gaussian_hmm, switching_ar1
  Vector ar;          // switching_ar1
  Vector intercepts;  // switching_ar1
  std::vector<FreeParameter> parameters;
  InitialLaw initial_law;
};

namespace detail {

/// Value, gradient and Hessian of one state's emission density with respect
/// to that state's own family parameters.
struct LocalDerivatives {
  double value = 0.0;
  Vector grad;
  Matrix hess;
};

/// Gaussian density in (m, s) composed with m(u), s(u) for local params u.
inline LocalDerivatives gaussian_local(double xi, double m, double s, const Vector& jm,
                                       const Vector& js, const Matrix& hm, const Matrix& hs) {
  const double z = (xi - m) / s;
  const double lm = z / s;
  const double ls = (z * z - 1.0) / s;
  const double lmm = -1.0 / (s * s);
  const double lms = -2.0 * z / (s * s);
  const double lss = (1.0 - 3.0 * z * z) / (s * s);
  const Vector g = lm * jm + ls * js;
  const Matrix h = lmm * jm * jm.transpose() +
                   lms * (jm * js.transpose() + js * jm.transpose()) +
                   lss * js * js.transpose() + lm * hm + ls * hs;
  LocalDerivatives out;
  out.value = std::exp(-0.5 * z * z) / (s * std::sqrt(2.0 * std::numbers::pi));
  out.grad = out.value * g;
  out.hess = out.value * (g * g.transpose() + h);
  return out;
}

}  // namespace detail

class BuiltinModel final : public Model {
 public:
  explicit BuiltinModel(BuiltinSpec spec) : spec_(std::move(spec)) { validate(); }

  std::size_t num_states() const override { return static_cast<std::size_t>(spec_.transition.rows()); }
  std::size_t num_params() const override { return spec_.parameters.size(); }
  std::size_t obs_dim() const override { return 1; }
  unsigned max_order() const override { return 2; }
  const std::vector<Interval>& admissible_box() const override { return box_; }
  const std::vector<std::string>& param_names() const override { return names_; }
  const InitialLaw& initial_law() const override { return spec_.initial_law; }

  const BuiltinSpec& spec() const noexcept { return spec_; }
  Family family() const noexcept { return spec_.family; }
  std::size_t num_symbols() const { return static_cast<std::size_t>(spec_.emission.cols()); }

  /// θ read off the family parameter values of the BuiltinSpec.
  ParameterVector default_parameters() const {
    Vector v(static_cast<Eigen::Index>(num_params()));
    for (std::size_t a = 0; a < num_params(); ++a)
      v(static_cast<Eigen::Index>(a)) = slot_value(spec_.parameters[a].target);
    return parameters(std::move(v));
  }

  Matrix transition(const Vector& theta, const MultiIndex& nu) const override {
    const auto n = static_cast<Eigen::Index>(num_states());
    if (nu.order() == 0) {
      Matrix p = spec_.transition;
      std::vector<bool> touched(num_states(), false);
      for (std::size_t a = 0; a < num_params(); ++a) {
        const Slot& s = spec_.parameters[a].target;
        if (s.kind != SlotKind::transition) continue;
        p(idx(s.row), idx(s.col)) = theta(idx(a));
        touched[s.row] = true;
      }
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!touched[static_cast<std::size_t>(i)]) continue;
        double off = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
          if (j != i) off += p(i, j);
        p(i, i) = 1.0 - off;
      }
      return p;
    }
    check_supported(nu);
    Matrix d = Matrix::Zero(n, n);
    if (nu.order() == 1) {
      const std::size_t a = first_coordinate(nu);
      const Slot& s = spec_.parameters[a].target;
      if (s.kind == SlotKind::transition) {
        d(idx(s.row), idx(s.col)) = 1.0;
        d(idx(s.row), idx(s.row)) = -1.0;
      }
    }
    // Entries are affine in θ, so second derivatives vanish.
    return d;
  }

  double emission(const Vector& theta, const MultiIndex& nu, std::size_t x,
                  const Observation& xi, const Observation* prev) const override {
    check_supported(nu);
    const auto local = local_derivatives(theta, x, xi, prev);
    return pick(local, nu, x);
  }

  Matrix emission_derivatives(const Vector& theta, const MultiIndexTable& table,
                              const Observation& xi, const Observation* prev) const override {
    if (table.r() > max_order())
      throw ConfigError("built-in families support derivatives up to order 2");
    Matrix out(static_cast<Eigen::Index>(table.size()), static_cast<Eigen::Index>(num_states()));
    for (std::size_t x = 0; x < num_states(); ++x) {
      const auto local = local_derivatives(theta, x, xi, prev);
      for (std::size_t k = 0; k < table.size(); ++k)
        out(idx(k), idx(x)) = pick(local, table[k], x);
    }
    return out;
  }

  Observation sample_emission(const Vector& theta, std::size_t x, const Observation* prev,
                              Rng& rng) const override {
    switch (spec_.family) {
      case Family::discrete_hmm: {
        const double u = uniform01(rng);
        double cum = 0.0;
        const std::size_t m = num_symbols();
        for (std::size_t k = 0; k + 1 < m; ++k) {
          cum += emission_prob(theta, x, k);
          if (u < cum) return Observation(static_cast<double>(k));
        }
        return Observation(static_cast<double>(m - 1));
      }
      case Family::gaussian_hmm: {
        const double mu = value(theta, {SlotKind::means, x, 0});
        const double sd = value(theta, {SlotKind::sigmas, x, 0});
        return Observation(mu + sd * standard_normal(rng));
      }
      case Family::switching_ar1: {
        const double a = value(theta, {SlotKind::ar, x, 0});
        const double c = value(theta, {SlotKind::intercepts, x, 0});
        const double sd = value(theta, {SlotKind::sigmas, x, 0});
        if (prev == nullptr)
          return Observation(c / (1.0 - a) + sd / std::sqrt(1.0 - a * a) * standard_normal(rng));
        return Observation(a * (*prev)[0] + c + sd * standard_normal(rng));
      }
    }
    return {};
  }

 private:
  static Eigen::Index idx(std::size_t i) { return static_cast<Eigen::Index>(i); }

  static std::size_t first_coordinate(const MultiIndex& nu) {
    for (std::size_t d = 0; d < nu.dim(); ++d)
      if (nu[d] > 0) return d;
    return nu.dim();
  }

  void check_supported(const MultiIndex& nu) const {
    if (nu.dim() != num_params())
      throw ConfigError("multi-index " + nu.to_string() + " has wrong dimension");
    if (nu.order() > max_order())
      throw ConfigError("built-in families support derivatives up to order 2");
  }

  double slot_value(const Slot& s) const {
    switch (s.kind) {
      case SlotKind::transition: return spec_.transition(idx(s.row), idx(s.col));
      case SlotKind::emission: return spec_.emission(idx(s.row), idx(s.col));
      case SlotKind::means: return spec_.means(idx(s.row));
      case SlotKind::sigmas: return spec_.sigmas(idx(s.row));
      case SlotKind::ar: return spec_.ar(idx(s.row));
      case SlotKind::intercepts: return spec_.intercepts(idx(s.row));
    }
    return 0.0;
  }

  /// Current value of a slot: θ if a free parameter targets it.
  double value(const Vector& theta, const Slot& s) const {
    for (std::size_t a = 0; a < num_params(); ++a)
      if (spec_.parameters[a].target == s) return theta(idx(a));
    return slot_value(s);
  }

  double emission_prob(const Vector& theta, std::size_t x, std::size_t k) const {
    if (k > 0) return value(theta, {SlotKind::emission, x, k});
    double rest = 0.0;
    for (std::size_t j = 1; j < num_symbols(); ++j)
      rest += value(theta, {SlotKind::emission, x, j});
    return 1.0 - rest;
  }

  /// Local parameter list of state x, in the order used by LocalDerivatives.
  std::vector<Slot> local_slots(std::size_t x) const {
    switch (spec_.family) {
      case Family::discrete_hmm: {
        std::vector<Slot> out;
        for (std::size_t k = 1; k < num_symbols(); ++k) out.push_back({SlotKind::emission, x, k});
        return out;
      }
      case Family::gaussian_hmm:
        return {{SlotKind::means, x, 0}, {SlotKind::sigmas, x, 0}};
      case Family::switching_ar1:
        return {{SlotKind::ar, x, 0}, {SlotKind::intercepts, x, 0}, {SlotKind::sigmas, x, 0}};
    }
    return {};
  }

  detail::LocalDerivatives local_derivatives(const Vector& theta, std::size_t x,
                                             const Observation& xi,
                                             const Observation* prev) const {
    if (xi.size() != 1) throw ConfigError("built-in families expect scalar observations");
    const double v = xi[0];
    detail::LocalDerivatives out;
    switch (spec_.family) {
      case Family::discrete_hmm: {
        const std::size_t m = num_symbols();
        const double rounded = std::round(v);
        if (!(rounded == v && v >= 0.0 && v < static_cast<double>(m)))
          throw DomainError("observation " + format_number(v) + " is not a symbol in 0.." +
                            std::to_string(m - 1));
        const auto k = static_cast<std::size_t>(v);
        const auto l = static_cast<Eigen::Index>(m - 1);
        out.value = emission_prob(theta, x, k);
        out.grad = Vector::Zero(l);
        out.hess = Matrix::Zero(l, l);
        if (k > 0)
          out.grad(idx(k - 1)) = 1.0;
        else
          out.grad.setConstant(-1.0);
        return out;
      }
      case Family::gaussian_hmm: {
        const double mu = value(theta, {SlotKind::means, x, 0});
        const double sd = value(theta, {SlotKind::sigmas, x, 0});
        const Vector jm = Vector::Unit(2, 0);
        const Vector js = Vector::Unit(2, 1);
        const Matrix zero = Matrix::Zero(2, 2);
        return detail::gaussian_local(v, mu, sd, jm, js, zero, zero);
      }
      case Family::switching_ar1: {
        const double a = value(theta, {SlotKind::ar, x, 0});
        const double c = value(theta, {SlotKind::intercepts, x, 0});
        const double sd = value(theta, {SlotKind::sigmas, x, 0});
        Vector jm = Vector::Zero(3);
        Vector js = Vector::Zero(3);
        Matrix hm = Matrix::Zero(3, 3);
        Matrix hs = Matrix::Zero(3, 3);
        if (prev != nullptr) {
          const double p = (*prev)[0];
          jm << p, 1.0, 0.0;
          js << 0.0, 0.0, 1.0;
          return detail::gaussian_local(v, a * p + c, sd, jm, js, hm, hs);
        }
        // Stationary marginal: m = c/(1−a), s = σ (1−a²)^{−1/2}.
        const double om = 1.0 - a;
        const double w = 1.0 / std::sqrt(1.0 - a * a);
        const double w3 = w * w * w;
        const double w5 = w3 * w * w;
        jm << c / (om * om), 1.0 / om, 0.0;
        hm(0, 0) = 2.0 * c / (om * om * om);
        hm(0, 1) = hm(1, 0) = 1.0 / (om * om);
        js << sd * a * w3, 0.0, w;
        hs(0, 0) = sd * (1.0 + 2.0 * a * a) * w5;
        hs(0, 2) = hs(2, 0) = a * w3;
        return detail::gaussian_local(v, c / om, sd * w, jm, js, hm, hs);
      }
    }
    return out;
  }

  /// D^ν f for state x from the local bundle: zero unless every coordinate
  /// in ν targets one of state x's own slots.
  double pick(const detail::LocalDerivatives& local, const MultiIndex& nu, std::size_t x) const {
    const unsigned order = nu.order();
    if (order == 0) return local.value;
    std::vector<Eigen::Index> locs;
    for (std::size_t a = 0; a < nu.dim(); ++a) {
      if (nu[a] == 0) continue;
      const auto& map = local_index_[a];
      if (!map || map->first != x) return 0.0;
      for (unsigned e = 0; e < nu[a]; ++e) locs.push_back(map->second);
    }
    if (order == 1) return local.grad(locs[0]);
    return local.hess(locs[0], locs[1]);
  }

  void validate() {
    const auto n = spec_.transition.rows();
    if (n < 1 || spec_.transition.cols() != n)
      throw ConfigError("transition matrix must be square with D >= 1");
    auto check_stochastic = [](const Matrix& m, const std::string& what) {
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        if ((m.row(i).array() < 0.0).any() || !m.row(i).allFinite())
          throw ConfigError(what + " row " + std::to_string(i) + " has a negative entry");
        if (std::abs(m.row(i).sum() - 1.0) > 1e-10)
          throw ConfigError(what + " row " + std::to_string(i) + " sums to " +
                            format_number(m.row(i).sum()) + ", not 1");
      }
    };
    check_stochastic(spec_.transition, "transition");
    switch (spec_.family) {
      case Family::discrete_hmm:
        if (spec_.emission.rows() != n || spec_.emission.cols() < 1)
          throw ConfigError("discrete_hmm emission must be D x M");
        check_stochastic(spec_.emission, "emission");
        break;
      case Family::gaussian_hmm:
        if (spec_.means.size() != n || spec_.sigmas.size() != n)
          throw ConfigError("gaussian_hmm needs D means and D sigmas");
        break;
      case Family::switching_ar1:
        if (spec_.ar.size() != n || spec_.intercepts.size() != n || spec_.sigmas.size() != n)
          throw ConfigError("switching_ar1 needs D ar, intercepts and sigmas");
        if ((spec_.ar.array().abs() >= 1.0).any())
          throw ConfigError("switching_ar1 ar coefficients must satisfy |a| < 1");
        break;
    }
    if (spec_.family != Family::discrete_hmm && (spec_.sigmas.array() <= 0.0).any())
      throw ConfigError("sigmas must be positive");

    const auto& init = spec_.initial_law;
    if (init.kind == InitialLaw::Kind::fixed) {
      if (init.fixed.size() != n) throw ConfigError("fixed initial law must have length D");
      if ((init.fixed.array() < 0.0).any() || std::abs(init.fixed.sum() - 1.0) > 1e-10)
        throw ConfigError("fixed initial law must be a probability vector");
    }

    std::set<Slot> seen_slots;
    std::set<std::string> seen_names;
    local_index_.assign(num_params(), std::nullopt);
    for (std::size_t a = 0; a < num_params(); ++a) {
      const auto& p = spec_.parameters[a];
      const Slot& s = p.target;
      const std::string where = "parameter '" + p.name + "' -> " + slot_name(s);
      if (p.name.empty()) throw ConfigError("parameter names must be non-empty");
      if (!seen_names.insert(p.name).second)
        throw ConfigError("duplicate parameter name '" + p.name + "'");
      if (!seen_slots.insert(s).second) throw ConfigError(where + ": slot bound twice");
      const auto rows = static_cast<std::size_t>(n);
      bool ok = s.row < rows;
      switch (s.kind) {
        case SlotKind::transition:
          ok = ok && s.col < rows && s.col != s.row;
          break;
        case SlotKind::emission:
          ok = ok && spec_.family == Family::discrete_hmm && s.col >= 1 &&
               s.col < num_symbols();
          break;
        case SlotKind::means:
          ok = ok && spec_.family == Family::gaussian_hmm;
          break;
        case SlotKind::sigmas:
          ok = ok && spec_.family != Family::discrete_hmm;
          break;
        case SlotKind::ar:
        case SlotKind::intercepts:
          ok = ok && spec_.family == Family::switching_ar1;
          break;
      }
      if (!ok) throw ConfigError(where + ": not a free slot of family " + family_name(spec_.family));
      if (!(p.bounds.lower < p.bounds.upper))
        throw ConfigError(where + ": empty admissible interval");
      if (s.kind == SlotKind::ar && (p.bounds.lower < -1.0 || p.bounds.upper > 1.0))
        throw ConfigError(where + ": admissible interval must lie in [-1, 1]");
      const double v = slot_value(s);
      if (!p.bounds.contains(v))
        throw ConfigError(where + ": family value " + format_number(v) +
                          " lies outside the admissible interval");
      if (s.kind != SlotKind::transition) {
        const auto slots = local_slots(s.row);
        const auto it = std::find(slots.begin(), slots.end(), s);
        local_index_[a] = std::make_pair(s.row, static_cast<Eigen::Index>(it - slots.begin()));
      }
      box_.push_back(p.bounds);
      names_.push_back(p.name);
    }
    if (num_params() == 0) throw ConfigError("model needs at least one free parameter");
  }

  BuiltinSpec spec_;
  std::vector<Interval> box_;
  std::vector<std::string> names_;
  // For each coordinate bound to an emission-side slot: (state, local index).
  std::vector<std::optional<std::pair<std::size_t, Eigen::Index>>> local_index_;
};

inline std::shared_ptr<const BuiltinModel> builtin_model(BuiltinSpec spec) {
  return std::make_shared<const BuiltinModel>(std::move(spec));
}

}  // namespace mirfs

#endif  // MIRFS_BUILTIN_MODELS_HPP
