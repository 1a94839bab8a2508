#ifndef MIRFS_TESTS_FIXTURES_HPP
#define MIRFS_TESTS_FIXTURES_HPP

// Shared models for the unit tests and the acceptance binary.

#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <mirfs/mirfs.hpp>

namespace fixtures {

using namespace mirfs;

inline Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

inline FreeParameter param(std::string name, const std::string& target, double lo, double hi) {
  return FreeParameter{std::move(name), parse_slot(target), Interval{lo, hi}};
}

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline ObservationSequence obs(std::initializer_list<double> values) {
  ObservationSequence out;
  for (double v : values) out.emplace_back(v);
  return out;
}

/// Two states, symbols {0, 1}: P = [[0.7, 0.3], [0.4, 0.6]],
/// f(1|0) = 0.9, f(1|1) = 0.2, uniform initial law.
inline std::shared_ptr<const BuiltinModel> two_state_bernoulli(bool stationary = false) {
  BuiltinSpec s;
  s.family = Family::discrete_hmm;
  s.transition = mat({{0.7, 0.3}, {0.4, 0.6}});
  s.emission = mat({{0.1, 0.9}, {0.8, 0.2}});
  s.parameters = {param("p01", "transition[0][1]", 0.0, 1.0),
                  param("p10", "transition[1][0]", 0.0, 1.0),
                  param("f0", "emission[0][1]", 0.0, 1.0),
                  param("f1", "emission[1][1]", 0.0, 1.0)};
  if (!stationary) {
    s.initial_law.kind = InitialLaw::Kind::fixed;
    s.initial_law.fixed = vec({0.5, 0.5});
  }
  return builtin_model(std::move(s));
}

/// Single state, Bernoulli(θ).
inline std::shared_ptr<const BuiltinModel> bernoulli(double theta = 0.5) {
  BuiltinSpec s;
  s.family = Family::discrete_hmm;
  s.transition = mat({{1.0}});
  s.emission = mat({{1.0 - theta, theta}});
  s.parameters = {param("theta", "emission[0][1]", 0.0, 1.0)};
  return builtin_model(std::move(s));
}

/// P = [[1−a, a], [b, 1−b]] with a = θ₁, b = θ₂ free.
inline std::shared_ptr<const BuiltinModel> two_state_gaussian(double a = 0.2, double b = 0.3) {
  BuiltinSpec s;
  s.family = Family::gaussian_hmm;
  s.transition = mat({{1.0 - a, a}, {b, 1.0 - b}});
  s.means = vec({-1.0, 1.5});
  s.sigmas = vec({1.0, 0.7});
  s.parameters = {param("a", "transition[0][1]", 0.0, 1.0),
                  param("b", "transition[1][0]", 0.0, 1.0),
                  param("mu0", "means[0]", -inf, inf),
                  param("mu1", "means[1]", -inf, inf),
                  param("sigma0", "sigmas[0]", 0.05, inf),
                  param("sigma1", "sigmas[1]", 0.05, inf)};
  return builtin_model(std::move(s));
}

inline std::shared_ptr<const BuiltinModel> two_state_ar1() {
  BuiltinSpec s;
  s.family = Family::switching_ar1;
  s.transition = mat({{0.85, 0.15}, {0.25, 0.75}});
  s.ar = vec({0.5, -0.3});
  s.intercepts = vec({0.2, -0.4});
  s.sigmas = vec({0.8, 1.3});
  s.parameters = {param("p01", "transition[0][1]", 0.0, 1.0),
                  param("ar0", "ar[0]", -1.0, 1.0),
                  param("ar1", "ar[1]", -1.0, 1.0),
                  param("c0", "intercepts[0]", -inf, inf),
                  param("sigma1", "sigmas[1]", 0.05, inf)};
  return builtin_model(std::move(s));
}

/// Single-state N(μ, σ²) with μ free.
inline std::shared_ptr<const BuiltinModel> single_gaussian(double mu = 0.5, double sigma = 2.0) {
  BuiltinSpec s;
  s.family = Family::gaussian_hmm;
  s.transition = mat({{1.0}});
  s.means = vec({mu});
  s.sigmas = vec({sigma});
  s.parameters = {param("mu", "means[0]", -inf, inf)};
  return builtin_model(std::move(s));
}

/// Two-state discrete HMM with three symbols, four free parameters.
inline std::shared_ptr<const BuiltinModel> two_state_discrete3() {
  BuiltinSpec s;
  s.family = Family::discrete_hmm;
  s.transition = mat({{0.9, 0.1}, {0.2, 0.8}});
  s.emission = mat({{0.6, 0.3, 0.1}, {0.1, 0.3, 0.6}});
  s.parameters = {param("p01", "transition[0][1]", 0.0, 1.0),
                  param("p10", "transition[1][0]", 0.0, 1.0),
                  param("e02", "emission[0][2]", 0.0, 1.0),
                  param("e12", "emission[1][2]", 0.0, 1.0)};
  return builtin_model(std::move(s));
}

/// Restricts a built-in model to the given parameter subset.
inline std::shared_ptr<const BuiltinModel> restrict(const BuiltinModel& m,
                                                    const std::vector<std::size_t>& keep) {
  BuiltinSpec s = m.spec();
  std::vector<FreeParameter> ps;
  for (auto k : keep) ps.push_back(s.parameters.at(k));
  s.parameters = ps;
  return builtin_model(std::move(s));
}

/// Test-only model with derivatives of every order: two states,
/// P = [[1−a, a], [0.3, 0.7]] with a = θ₁, and f(ξ|x) = φ(ξ − c_x θ₂)
/// with c = (1, −0.5). D^k_μ φ(ξ − cμ) = c^k He_k(z) φ(z).
class HermiteModel final : public Model {
 public:
  HermiteModel() : box_{{0.0, 1.0}, {-inf, inf}}, names_{"a", "mu"} {}

  std::size_t num_states() const override { return 2; }
  std::size_t num_params() const override { return 2; }
  std::size_t obs_dim() const override { return 1; }
  unsigned max_order() const override { return 6; }
  const std::vector<Interval>& admissible_box() const override { return box_; }
  const std::vector<std::string>& param_names() const override { return names_; }
  const InitialLaw& initial_law() const override { return law_; }

  Matrix transition(const Vector& theta, const MultiIndex& nu) const override {
    if (nu.is_zero()) return mat({{1.0 - theta(0), theta(0)}, {0.3, 0.7}});
    if (nu[1] == 0 && nu[0] == 1) return mat({{-1.0, 1.0}, {0.0, 0.0}});
    return Matrix::Zero(2, 2);
  }
  double emission(const Vector& theta, const MultiIndex& nu, std::size_t x, const Observation& xi,
                  const Observation*) const override {
    if (nu[0] != 0) return 0.0;
    const double c = x == 0 ? 1.0 : -0.5;
    const double z = xi[0] - c * theta(1);
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    // Probabilists' Hermite polynomials by recurrence.
    double h_prev = 1.0, h = z;
    const unsigned k = nu[1];
    if (k == 0) return phi;
    for (unsigned j = 1; j < k; ++j) {
      const double next = z * h - j * h_prev;
      h_prev = h;
      h = next;
    }
    return std::pow(c, k) * h * phi;
  }
  Observation sample_emission(const Vector& theta, std::size_t x, const Observation*,
                              Rng& rng) const override {
    const double c = x == 0 ? 1.0 : -0.5;
    return Observation(c * theta(1) + standard_normal(rng));
  }

 private:
  std::vector<Interval> box_;
  std::vector<std::string> names_;
  InitialLaw law_;
};

/// Single state, f(ξ) = θ·s(ξ) with s(ξ) = exp(−ξ²/2). Not normalized in
/// ξ; used to check the block layout with scalar entries.
class LinearScaleModel final : public Model {
 public:
  LinearScaleModel() : box_{{0.0, inf}}, names_{"theta"} {}

  static double s(double xi) { return std::exp(-0.5 * xi * xi); }

  std::size_t num_states() const override { return 1; }
  std::size_t num_params() const override { return 1; }
  std::size_t obs_dim() const override { return 1; }
  unsigned max_order() const override { return 4; }
  const std::vector<Interval>& admissible_box() const override { return box_; }
  const std::vector<std::string>& param_names() const override { return names_; }
  const InitialLaw& initial_law() const override { return law_; }

  Matrix transition(const Vector&, const MultiIndex& nu) const override {
    return Matrix::Constant(1, 1, nu.is_zero() ? 1.0 : 0.0);
  }
  double emission(const Vector& theta, const MultiIndex& nu, std::size_t, const Observation& xi,
                  const Observation*) const override {
    if (nu[0] == 0) return theta(0) * s(xi[0]);
    return nu[0] == 1 ? s(xi[0]) : 0.0;
  }
  Observation sample_emission(const Vector&, std::size_t, const Observation*, Rng& rng) const override {
    return Observation(standard_normal(rng));
  }

 private:
  std::vector<Interval> box_;
  std::vector<std::string> names_;
  InitialLaw law_;
};

/// Randomized fixture for the oracle comparisons: one of the three
/// families, D in [1, 4], q in [1, 3] free parameters chosen at random
/// among the family slots.
struct RandomFixture {
  std::shared_ptr<const BuiltinModel> model;
  ParameterVector theta;
  std::string label;
};

inline RandomFixture random_fixture(std::mt19937_64& rng, Family family, std::size_t max_d = 4,
                                    std::size_t max_q = 3) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_d(1, max_d);
  const std::size_t d = pick_d(rng);
  const auto di = static_cast<Eigen::Index>(d);
  BuiltinSpec s;
  s.family = family;
  s.transition.resize(di, di);
  for (Eigen::Index i = 0; i < di; ++i) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < di; ++j) {
      if (i == j) continue;
      s.transition(i, j) = 0.05 + 0.25 * u(rng) / static_cast<double>(d);
      off += s.transition(i, j);
    }
    s.transition(i, i) = 1.0 - off;
  }
  std::vector<std::pair<std::string, Interval>> slots;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j)
        slots.push_back({"transition[" + std::to_string(i) + "][" + std::to_string(j) + "]", {0.0, 1.0}});
  switch (family) {
    case Family::discrete_hmm: {
      const Eigen::Index m = 3;
      s.emission.resize(di, m);
      for (Eigen::Index x = 0; x < di; ++x) {
        Vector w(m);
        for (Eigen::Index k = 0; k < m; ++k) w(k) = 0.2 + u(rng);
        s.emission.row(x) = (w / w.sum()).transpose();
        for (Eigen::Index k = 1; k < m; ++k)
          slots.push_back({"emission[" + std::to_string(x) + "][" + std::to_string(k) + "]", {0.0, 1.0}});
      }
      break;
    }
    case Family::gaussian_hmm:
      s.means.resize(di);
      s.sigmas.resize(di);
      for (Eigen::Index x = 0; x < di; ++x) {
        s.means(x) = -2.0 + 4.0 * u(rng);
        s.sigmas(x) = 0.5 + u(rng);
        slots.push_back({"means[" + std::to_string(x) + "]", {-inf, inf}});
        slots.push_back({"sigmas[" + std::to_string(x) + "]", {0.05, inf}});
      }
      break;
    case Family::switching_ar1:
      s.ar.resize(di);
      s.intercepts.resize(di);
      s.sigmas.resize(di);
      for (Eigen::Index x = 0; x < di; ++x) {
        s.ar(x) = -0.7 + 1.4 * u(rng);
        s.intercepts(x) = -1.0 + 2.0 * u(rng);
        s.sigmas(x) = 0.5 + u(rng);
        slots.push_back({"ar[" + std::to_string(x) + "]", {-1.0, 1.0}});
        slots.push_back({"intercepts[" + std::to_string(x) + "]", {-inf, inf}});
        slots.push_back({"sigmas[" + std::to_string(x) + "]", {0.05, inf}});
      }
      break;
  }
  std::shuffle(slots.begin(), slots.end(), rng);
  std::uniform_int_distribution<std::size_t> pick_q(1, std::min(max_q, slots.size()));
  const std::size_t q = pick_q(rng);
  for (std::size_t a = 0; a < q; ++a)
    s.parameters.push_back(FreeParameter{"t" + std::to_string(a + 1), parse_slot(slots[a].first), slots[a].second});
  RandomFixture f;
  f.label = family_name(family) + " D=" + std::to_string(d) + " q=" + std::to_string(q);
  f.model = builtin_model(std::move(s));
  f.theta = f.model->default_parameters();
  return f;
}

}  // namespace fixtures

#endif  // MIRFS_TESTS_FIXTURES_HPP
