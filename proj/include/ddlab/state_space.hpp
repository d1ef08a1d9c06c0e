#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"

namespace ddlab {

using Symbol = int;
using StateIndex = std::uint64_t;
using State = std::vector<Symbol>;

inline constexpr std::uint64_t kDefaultDenseCap = std::uint64_t{1} << 21;

// Tokens are 0..S-1; MASK, when present, is S.
struct Alphabet {
  int vocab_size = 2;
  bool has_mask = false;

  Alphabet() = default;
  Alphabet(int s, bool mask) : vocab_size(s), has_mask(mask) {
    if (s < 2) throw DomainError("vocab_size must be at least 2");
  }

  int symbols() const { return vocab_size + (has_mask ? 1 : 0); }
  Symbol mask() const {
    if (!has_mask) throw DomainError("alphabet has no MASK symbol");
    return vocab_size;
  }
  bool is_mask(Symbol c) const { return has_mask && c == vocab_size; }

  friend bool operator==(const Alphabet&, const Alphabet&) = default;
};

// V^d with mixed-radix packing, coordinate 0 least significant.
class StateSpace {
 public:
  StateSpace() = default;
  StateSpace(int dim, Alphabet alphabet, std::uint64_t cap = kDefaultDenseCap)
      : dim_(dim), alpha_(alphabet) {
    if (dim < 1) throw DomainError("dimension must be positive");
    const std::uint64_t v = static_cast<std::uint64_t>(alphabet.symbols());
    stride_.resize(dim);
    std::uint64_t n = 1;
    for (int i = 0; i < dim; ++i) {
      stride_[i] = n;
      if (n > cap / v) throw ResourceError("state space |V|^d exceeds dense cap of " + std::to_string(cap));
      n *= v;
    }
    size_ = n;
  }

  int dim() const { return dim_; }
  const Alphabet& alphabet() const { return alpha_; }
  int symbols() const { return alpha_.symbols(); }
  int vocab() const { return alpha_.vocab_size; }
  bool has_mask() const { return alpha_.has_mask; }
  std::uint64_t size() const { return size_; }
  std::uint64_t stride(int i) const { return stride_[i]; }

  Symbol digit(StateIndex x, int i) const {
    return static_cast<Symbol>((x / stride_[i]) % static_cast<std::uint64_t>(symbols()));
  }

  StateIndex pack(const State& s) const {
    if (static_cast<int>(s.size()) != dim_) throw DomainError("state has wrong dimension");
    StateIndex x = 0;
    for (int i = 0; i < dim_; ++i) {
      check_symbol(s[i]);
      x += static_cast<StateIndex>(s[i]) * stride_[i];
    }
    return x;
  }

  State unpack(StateIndex x) const {
    check_index(x);
    State s(dim_);
    for (int i = 0; i < dim_; ++i) s[i] = digit(x, i);
    return s;
  }

  // x with coordinate i set to c.
  StateIndex substitute(StateIndex x, int i, Symbol c) const {
    check_index(x);
    check_coord(i);
    check_symbol(c);
    return substitute_unchecked(x, i, c);
  }

  StateIndex substitute_unchecked(StateIndex x, int i, Symbol c) const {
    Symbol old = digit(x, i);
    return x + static_cast<StateIndex>(c) * stride_[i] - static_cast<StateIndex>(old) * stride_[i];
  }

  // x with coordinate i advanced by c modulo S.
  StateIndex shift(StateIndex x, int i, int c) const {
    if (has_mask()) throw UnsupportedOperation("shift is undefined on a masked alphabet");
    check_index(x);
    check_coord(i);
    if (c < 1 || c >= vocab()) throw DomainError("shift increment must lie in 1..S-1");
    return substitute_unchecked(x, i, (digit(x, i) + c) % vocab());
  }

  int hamming(StateIndex x, StateIndex y) const {
    int h = 0;
    for (int i = 0; i < dim_; ++i) h += digit(x, i) != digit(y, i);
    return h;
  }

  std::vector<int> masked_set(StateIndex x) const {
    if (!has_mask()) throw DomainError("masked_set needs a masked alphabet");
    std::vector<int> out;
    for (int i = 0; i < dim_; ++i)
      if (digit(x, i) == alpha_.vocab_size) out.push_back(i);
    return out;
  }

  int mask_count(StateIndex x) const {
    if (!has_mask()) return 0;
    int m = 0;
    for (int i = 0; i < dim_; ++i) m += digit(x, i) == alpha_.vocab_size;
    return m;
  }

  bool contains_mask(StateIndex x) const { return mask_count(x) > 0; }

  // Same dimension and tokens, MASK added.
  StateSpace with_mask() const { return StateSpace(dim_, Alphabet(vocab(), true)); }
  StateSpace without_mask() const { return StateSpace(dim_, Alphabet(vocab(), false)); }

  friend bool operator==(const StateSpace& a, const StateSpace& b) {
    return a.dim_ == b.dim_ && a.alpha_ == b.alpha_;
  }

  void check_coord(int i) const {
    if (i < 0 || i >= dim_) throw DomainError("coordinate out of range");
  }
  void check_symbol(Symbol c) const {
    if (c < 0 || c >= symbols()) throw DomainError("symbol out of range");
  }
  void check_index(StateIndex x) const {
    if (x >= size_) throw DomainError("state index out of range");
  }

 private:
  int dim_ = 0;
  Alphabet alpha_;
  std::uint64_t size_ = 0;
  std::vector<std::uint64_t> stride_;
};

inline constexpr double kPmfSumTol = 1e-12;

// Exact pmf over the whole product space.
class DensePmf {
 public:
  DensePmf() = default;

  // Validates nonnegativity and unit mass.
  DensePmf(StateSpace space, std::vector<double> mass) : space_(std::move(space)), mass_(std::move(mass)) {
    if (mass_.size() != space_.size()) throw ValidationError("pmf length does not match state space");
    double total = 0.0;
    for (double m : mass_) {
      if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("pmf entry negative or not finite");
      total += m;
    }
    if (std::abs(total - 1.0) > kPmfSumTol) throw ValidationError("pmf does not sum to 1 (sum=" + std::to_string(total) + ")");
  }

  const StateSpace& space() const { return space_; }
  const std::vector<double>& mass() const { return mass_; }
  std::uint64_t size() const { return mass_.size(); }
  double operator[](StateIndex x) const { return mass_[x]; }

  static DensePmf uniform(const StateSpace& space) {
    return DensePmf(space, std::vector<double>(space.size(), 1.0 / static_cast<double>(space.size())));
  }

  static DensePmf point_mass(const StateSpace& space, StateIndex x) {
    space.check_index(x);
    std::vector<double> m(space.size(), 0.0);
    m[x] = 1.0;
    return DensePmf(space, std::move(m));
  }

 private:
  StateSpace space_;
  std::vector<double> mass_;
};

inline DensePmf normalize(const StateSpace& space, std::vector<double> raw) {
  double total = 0.0;
  for (double m : raw) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ValidationError("raw mass entry negative or not finite");
    total += m;
  }
  if (!(total > 0.0)) throw ValidationError("total mass must be positive");
  for (auto& m : raw) m /= total;
  return DensePmf(space, std::move(raw));
}

// Lift a pmf on [S]^d into ([S] u {MASK})^d without moving mass.
inline DensePmf embed_masked(const DensePmf& p) {
  if (p.space().has_mask()) return p;
  StateSpace ms = p.space().with_mask();
  std::vector<double> m(ms.size(), 0.0);
  const auto& src = p.space();
  for (StateIndex x = 0; x < src.size(); ++x) {
    if (p[x] == 0.0) continue;
    StateIndex y = 0;
    for (int i = 0; i < src.dim(); ++i) y += static_cast<StateIndex>(src.digit(x, i)) * ms.stride(i);
    m[y] = p[x];
  }
  return DensePmf(ms, std::move(m));
}

// Inverse of embed_masked; the pmf must not charge any masked state.
inline DensePmf strip_mask(const DensePmf& p) {
  if (!p.space().has_mask()) return p;
  const auto& ms = p.space();
  StateSpace us = ms.without_mask();
  std::vector<double> m(us.size(), 0.0);
  for (StateIndex x = 0; x < ms.size(); ++x) {
    if (p[x] == 0.0) continue;
    if (ms.contains_mask(x)) throw ValidationError("pmf charges a masked state");
    StateIndex y = 0;
    for (int i = 0; i < ms.dim(); ++i) y += static_cast<StateIndex>(ms.digit(x, i)) * us.stride(i);
    m[y] = p[x];
  }
  return DensePmf(us, std::move(m));
}

// For a pmf on unmasked states lifted to the masked space, the table whose entry at a
// partially masked x is the marginal probability of x's unmasked coordinates.
inline std::vector<double> masked_marginal_table(const DensePmf& q0) {
  DensePmf lifted = embed_masked(q0);
  const auto& sp = lifted.space();
  std::vector<double> t = lifted.mass();
  const Symbol mk = sp.alphabet().mask();
  for (int i = 0; i < sp.dim(); ++i) {
    for (StateIndex x = 0; x < sp.size(); ++x) {
      if (sp.digit(x, i) != mk) continue;
      double s = 0.0;
      for (Symbol a = 0; a < mk; ++a) s += t[sp.substitute_unchecked(x, i, a)];
      t[x] = s;
    }
  }
  return t;
}

}  // namespace ddlab
