#ifndef MIRFS_MULTIINDEX_HPP
#define MIRFS_MULTIINDEX_HPP

/** @file
 * Multi-indices ν ∈ ℕ^q labelling mixed partial derivatives D^ν, and the
 * table of all ν with |ν| ≤ r used to address derivative blocks.
 */

#include <compare>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"

namespace mirfs {

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out))
    throw ConfigError("integer overflow in multi-index arithmetic");
  return out;
}

inline std::uint64_t binomial(unsigned n, unsigned k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (unsigned i = 1; i <= k; ++i) {
    // result * (n - k + i) is divisible by i at every step
    result = checked_mul(result, n - k + i) / i;
  }
  return result;
}

}  // namespace detail

/// A tuple of q nonnegative exponents (ν⁽¹⁾,…,ν⁽q⁾).
class MultiIndex {
 public:
  MultiIndex() = default;
  explicit MultiIndex(std::vector<unsigned> exponents)
      : exponents_(std::move(exponents)) {}

  static MultiIndex zero(std::size_t q) {
    return MultiIndex(std::vector<unsigned>(q, 0U));
  }

  /// The unit index e_d (0-based coordinate d).
  static MultiIndex unit(std::size_t q, std::size_t d) {
    std::vector<unsigned> e(q, 0U);
    e.at(d) = 1;
    return MultiIndex(std::move(e));
  }

  std::size_t dim() const noexcept { return exponents_.size(); }
  unsigned operator[](std::size_t d) const { return exponents_[d]; }
  const std::vector<unsigned>& exponents() const noexcept { return exponents_; }

  /// |ν|
  unsigned order() const noexcept {
    unsigned s = 0;
    for (unsigned e : exponents_) s += e;
    return s;
  }

  bool is_zero() const noexcept { return order() == 0; }

  /// ν! = Π_d ν⁽d⁾!
  std::uint64_t factorial() const {
    std::uint64_t f = 1;
    for (unsigned e : exponents_)
      for (unsigned k = 2; k <= e; ++k) f = detail::checked_mul(f, k);
    return f;
  }

  /// Componentwise μ ≤ ν.
  bool componentwise_leq(const MultiIndex& other) const {
    if (dim() != other.dim()) return false;
    for (std::size_t d = 0; d < dim(); ++d)
      if (exponents_[d] > other.exponents_[d]) return false;
    return true;
  }

  friend MultiIndex operator+(const MultiIndex& a, const MultiIndex& b) {
    if (a.dim() != b.dim()) throw ConfigError("multi-index dimension mismatch");
    std::vector<unsigned> e(a.dim());
    for (std::size_t d = 0; d < a.dim(); ++d) e[d] = a[d] + b[d];
    return MultiIndex(std::move(e));
  }

  /// ν − μ; requires μ ≤ ν componentwise.
  friend MultiIndex operator-(const MultiIndex& a, const MultiIndex& b) {
    if (!b.componentwise_leq(a))
      throw ConfigError("multi-index difference " + a.to_string() + " - " +
                        b.to_string() + " is negative");
    std::vector<unsigned> e(a.dim());
    for (std::size_t d = 0; d < a.dim(); ++d) e[d] = a[d] - b[d];
    return MultiIndex(std::move(e));
  }

  friend bool operator==(const MultiIndex&, const MultiIndex&) = default;
  friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

  std::string to_string() const {
    std::string s = "(";
    for (std::size_t d = 0; d < dim(); ++d) {
      if (d) s += ",";
      s += std::to_string(exponents_[d]);
    }
    return s + ")";
  }

 private:
  std::vector<unsigned> exponents_;
};

/// ν!/(μ!(ν−μ)!) = Π_d binom(ν⁽d⁾, μ⁽d⁾). Throws unless μ ≤ ν.
inline std::uint64_t multinomial_coeff(const MultiIndex& nu, const MultiIndex& mu) {
  if (!mu.componentwise_leq(nu))
    throw ConfigError("multinomial_coeff: " + mu.to_string() +
                      " is not componentwise <= " + nu.to_string());
  std::uint64_t c = 1;
  for (std::size_t d = 0; d < nu.dim(); ++d)
    c = detail::checked_mul(c, detail::binomial(nu[d], mu[d]));
  return c;
}

/// Number of multi-indices in ℕ^q with |ν| ≤ r, i.e. (r+q)!/(r!q!).
/// Throws ConfigError if the count does not fit in 64 bits.
inline std::uint64_t table_size(std::size_t q, unsigned r) {
  std::uint64_t k = 1;
  for (std::size_t i = 1; i <= q; ++i) {
    std::uint64_t next = 0;
    if (__builtin_mul_overflow(k, static_cast<std::uint64_t>(r) + i, &next))
      throw ConfigError("K = (r+q)!/(r!q!) overflows 64 bits for q=" +
                        std::to_string(q) + ", r=" + std::to_string(r));
    k = next / i;
  }
  return k;
}

/// One term of the Leibniz expansion of D^ν: the pair (μ, ν−μ) by label.
struct Decomposition {
  std::size_t mu;
  std::size_t rest;
  std::uint64_t coeff;
};

/// All multi-indices with |ν| ≤ r in graded order, with their labels and
/// precomputed Leibniz decompositions. Immutable after construction.
///
/// Ordering: by total order |ν| first; within an order, lexicographically
/// with the larger leading exponent first, so for q = 2 the labels run
/// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2). The first-order labels are the
/// unit indices e_1,…,e_q in coordinate order, and label 0 is the zero index.
class MultiIndexTable {
 public:
  /// Refuse to enumerate tables larger than this.
  static constexpr std::uint64_t max_size = 1U << 20;

  MultiIndexTable(std::size_t q, unsigned r) : q_(q), r_(r) {
    if (q == 0) throw ConfigError("multi-index table needs q >= 1");
    const std::uint64_t k = table_size(q, r);
    if (k > max_size)
      throw ConfigError("multi-index table too large: K = " + std::to_string(k) +
                        " exceeds " + std::to_string(max_size));
    indices_.reserve(k);
    std::vector<unsigned> scratch(q, 0U);
    for (unsigned order = 0; order <= r; ++order) enumerate(scratch, 0, order);
    for (std::size_t i = 0; i < indices_.size(); ++i)
      position_.emplace(indices_[i].exponents(), i);

    decompositions_.resize(indices_.size());
    for (std::size_t i = 0; i < indices_.size(); ++i) {
      const MultiIndex& nu = indices_[i];
      auto& out = decompositions_[i];
      for (std::size_t j = 0; j <= i; ++j) {
        const MultiIndex& mu = indices_[j];
        if (!mu.componentwise_leq(nu)) continue;
        out.push_back({j, label(nu - mu), multinomial_coeff(nu, mu)});
      }
    }
  }

  std::size_t q() const noexcept { return q_; }
  unsigned r() const noexcept { return r_; }
  std::size_t size() const noexcept { return indices_.size(); }

  const MultiIndex& operator[](std::size_t label) const { return indices_.at(label); }
  const std::vector<MultiIndex>& indices() const noexcept { return indices_; }

  bool contains(const MultiIndex& nu) const {
    return position_.find(nu.exponents()) != position_.end();
  }

  std::size_t label(const MultiIndex& nu) const {
    auto it = position_.find(nu.exponents());
    if (it == position_.end())
      throw ConfigError("multi-index " + nu.to_string() + " not in table (q=" +
                        std::to_string(q_) + ", r=" + std::to_string(r_) + ")");
    return it->second;
  }

  /// Label of e_d.
  std::size_t unit_label(std::size_t d) const { return label(MultiIndex::unit(q_, d)); }

  /// Label of e_a + e_b; requires r ≥ 2.
  std::size_t pair_label(std::size_t a, std::size_t b) const {
    return label(MultiIndex::unit(q_, a) + MultiIndex::unit(q_, b));
  }

  /// Every ordered split ν = μ + (ν−μ), sorted by the label of μ.
  std::span<const Decomposition> decompositions(std::size_t label) const {
    return decompositions_.at(label);
  }
  std::span<const Decomposition> decompositions(const MultiIndex& nu) const {
    return decompositions(label(nu));
  }

  /// Label of ν_i − ν_j if it is a valid multi-index, otherwise nothing.
  std::optional<std::size_t> difference(std::size_t i, std::size_t j) const {
    const MultiIndex& a = indices_.at(i);
    const MultiIndex& b = indices_.at(j);
    if (!b.componentwise_leq(a)) return std::nullopt;
    return label(a - b);
  }

 private:
  void enumerate(std::vector<unsigned>& scratch, std::size_t d, unsigned remaining) {
    if (d + 1 == q_) {
      scratch[d] = remaining;
      indices_.emplace_back(scratch);
      return;
    }
    for (unsigned e = remaining + 1; e-- > 0;) {
      scratch[d] = e;
      enumerate(scratch, d + 1, remaining - e);
    }
    scratch[d] = 0;
  }

  std::size_t q_;
  unsigned r_;
  std::vector<MultiIndex> indices_;
  std::map<std::vector<unsigned>, std::size_t> position_;
  std::vector<std::vector<Decomposition>> decompositions_;
};

using TablePtr = std::shared_ptr<const MultiIndexTable>;

inline TablePtr build_table(std::size_t q, unsigned r) {
  return std::make_shared<const MultiIndexTable>(q, r);
}

}  // namespace mirfs

#endif  // MIRFS_MULTIINDEX_HPP
