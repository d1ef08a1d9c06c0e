#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "forward.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "state_space.hpp"

namespace ddlab {

struct LogNormal {
  double sigma = 0.0;
};
struct ConstantBias {
  double factor = 1.0;
};

struct CorruptionModel {
  std::variant<LogNormal, ConstantBias> variant;
  std::uint64_t seed = 0;

  void validate() const {
    if (auto* ln = std::get_if<LogNormal>(&variant); ln && !(ln->sigma >= 0.0))
      throw ConfigError("lognormal sigma must be nonnegative");
    if (auto* cb = std::get_if<ConstantBias>(&variant); cb && !(cb->factor > 0.0))
      throw ConfigError("bias factor must be positive");
  }

  nlohmann::json to_json() const {
    if (auto* ln = std::get_if<LogNormal>(&variant)) return {{"type", "lognormal"}, {"sigma", ln->sigma}, {"seed", seed}};
    return {{"type", "constant_bias"}, {"factor", std::get<ConstantBias>(variant).factor}, {"seed", seed}};
  }
};

// What an exact field returns where q_t(x) = 0. Such states are never visited by the
// true reverse process but can be reached from a mismatched initialization.
enum class OffSupport { Throw, Uninformative };

// Standard normal from a 64-bit key, no engine state.
inline double hashed_normal(std::uint64_t key) {
  std::uint64_t a = splitmix64(key), b = splitmix64(a ^ 0x5851f42d4c957f2dULL);
  double u1 = 1.0 - static_cast<double>(a >> 11) * 0x1.0p-53;
  double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// s_t(x (.)_i b, x) on Hamming-1 pairs, exact (ratio of propagated marginals) or corrupted.
class ScoreField {
 public:
  ScoreField() = default;

  // q0 is the data pmf on tokens; q_t is computed here.
  static ScoreField exact(const DensePmf& q0, NoiseKind kind, double t) {
    if (!(t > 0.0)) throw DomainError("score time must be positive");
    return from_marginal(propagate_forward(q0, kind, t), kind, t);
  }

  static ScoreField from_marginal(DensePmf qt, NoiseKind kind, double t) {
    check_kind_alphabet(kind, qt.space());
    ScoreField f;
    f.qt_ = std::make_shared<const DensePmf>(std::move(qt));
    f.kind_ = kind;
    f.t_ = t;
    return f;
  }

  // `stream` separates independent corruptions of the same field (one per grid point).
  ScoreField corrupted(const CorruptionModel& m, std::uint64_t stream = 0) const {
    m.validate();
    ScoreField f = *this;
    f.corruption_ = m;
    f.stream_ = stream;
    return f;
  }

  ScoreField with_off_support(OffSupport p) const {
    ScoreField f = *this;
    f.off_ = p;
    return f;
  }

  NoiseKind kind() const { return kind_; }
  double time() const { return t_; }
  const StateSpace& space() const { return qt_->space(); }
  const DensePmf& marginal() const { return *qt_; }
  bool is_exact() const { return !corruption_.has_value(); }
  const std::optional<CorruptionModel>& corruption() const { return corruption_; }

  // Value at the pair (x with coordinate i set to b, x).
  double operator()(StateIndex x, int i, Symbol b) const {
    double s = exact_value(x, i, b);
    if (!corruption_) return s;
    return s * corruption_factor(x, i, b);
  }

  // Uniform alphabet: s(x (+)_i c, x).
  double by_increment(StateIndex x, int i, int c) const {
    const auto& sp = space();
    if (c < 1 || c >= sp.vocab()) throw DomainError("increment must lie in 1..S-1");
    return (*this)(x, i, (sp.digit(x, i) + c) % sp.vocab());
  }

  double exact_value(StateIndex x, int i, Symbol b) const {
    const auto& sp = space();
    sp.check_index(x);
    sp.check_coord(i);
    Symbol a = sp.digit(x, i);
    if (b < 0 || b >= sp.vocab() || b == a) throw DomainError("target must be a token different from x^i");
    if (kind_ == NoiseKind::Masking && a != sp.vocab()) throw DomainError("masking score needs coordinate i masked");
    double den = (*qt_)[x];
    if (den <= 0.0) {
      if (off_ == OffSupport::Throw) throw SingularScoreError("score denominator q_t(x) is zero");
      return kind_ == NoiseKind::Uniform ? 1.0 : 1.0 / (std::expm1(t_) * sp.vocab());
    }
    return (*qt_)[sp.substitute_unchecked(x, i, b)] / den;
  }

  double corruption_factor(StateIndex x, int i, Symbol b) const {
    if (!corruption_) return 1.0;
    if (auto* cb = std::get_if<ConstantBias>(&corruption_->variant)) return cb->factor;
    double sigma = std::get<LogNormal>(corruption_->variant).sigma;
    if (sigma == 0.0) return 1.0;
    auto key = hash_keys({corruption_->seed, stream_, x, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(b)});
    return std::exp(sigma * hashed_normal(key));
  }

  nlohmann::json provenance() const {
    nlohmann::json j{{"kind", to_string(kind_)}, {"time", t_}};
    if (corruption_) {
      j["type"] = "corrupted";
      j["model"] = corruption_->to_json();
      j["stream"] = stream_;
    } else {
      j["type"] = "exact";
    }
    return j;
  }

 private:
  std::shared_ptr<const DensePmf> qt_;
  NoiseKind kind_ = NoiseKind::Uniform;
  double t_ = 0.0;
  std::optional<CorruptionModel> corruption_;
  std::uint64_t stream_ = 0;
  OffSupport off_ = OffSupport::Throw;
};

// s_t(x (+)_i c, x) for the uniform process, as a ratio of q_t values.
inline double exact_score_uniform(const DensePmf& q0, double t, StateIndex x, int i, int c) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  if (q0.space().has_mask()) throw DomainError("uniform score needs an alphabet without MASK");
  DensePmf qt = t > 0.0 ? propagate_forward(q0, NoiseKind::Uniform, t) : q0;
  const auto& sp = qt.space();
  StateIndex y = sp.shift(x, i, c);
  if (qt[x] <= 0.0) throw SingularScoreError("score denominator q_t(x) is zero");
  return qt[y] / qt[x];
}

// (e^t - 1)^{-1} q0(x (.)_i a) / q0(x), q0 of a masked state being the marginal of its
// unmasked coordinates. Pass the table from masked_marginal_table to avoid recomputing it.
inline double exact_score_masking(const StateSpace& masked_space, const std::vector<double>& marginal_table, double t,
                                  StateIndex x, int i, Symbol a) {
  if (!(t > 0.0)) throw DomainError("masking score needs t > 0");
  masked_space.check_index(x);
  masked_space.check_coord(i);
  if (masked_space.digit(x, i) != masked_space.vocab()) throw DomainError("coordinate is not masked");
  if (a < 0 || a >= masked_space.vocab()) throw DomainError("target must be a token");
  double den = marginal_table[x];
  if (den <= 0.0) throw SingularScoreError("q0 marginal of x is zero");
  return marginal_table[masked_space.substitute_unchecked(x, i, a)] / (den * std::expm1(t));
}

inline double exact_score_masking(const DensePmf& q0, double t, StateIndex x, int i, Symbol a) {
  DensePmf lifted = embed_masked(q0);
  return exact_score_masking(lifted.space(), masked_marginal_table(q0), t, x, i, a);
}

inline double bregman(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw DomainError("bregman needs positive arguments");
  double r = a / b;
  return r - 1.0 - std::log(r);
}

// b * D(a, b) extended to the boundary: 0 when both vanish, a when only b does.
inline double weighted_bregman(double a, double b) {
  if (b == 0.0) return a;
  if (a == 0.0) return std::numeric_limits<double>::infinity();
  return a - b - b * std::log(a / b);
}

// Forward rate Q(y, x) from y = x (.)_i b into x: uniform 1/S, masking 1 (token to MASK).
inline double forward_rate_into(NoiseKind kind, int S) { return kind == NoiseKind::Uniform ? 1.0 / S : 1.0; }

// Calls f(x, i, b) for every Hamming-1 pair (y = x (.)_i b, x) with Q(y, x) > 0.
template <class F>
void for_each_reverse_pair(const StateSpace& sp, NoiseKind kind, StateIndex x, F&& f) {
  const int S = sp.vocab();
  for (int i = 0; i < sp.dim(); ++i) {
    Symbol a = sp.digit(x, i);
    if (kind == NoiseKind::Masking && a != S) continue;
    for (Symbol b = 0; b < S; ++b)
      if (b != a) f(i, b);
  }
}

// E_{x~q_t} sum_{y != x} Q(y, x) s(y, x) D(s_hat(y, x), s(y, x)).
inline double score_entropy_loss(double t, const ScoreField& s_hat, const ScoreField& s, const DensePmf& qt, NoiseKind kind) {
  if (s_hat.kind() != kind || s.kind() != kind) throw DomainError("score fields disagree on noise kind");
  if (std::abs(s_hat.time() - t) > 1e-12 || std::abs(s.time() - t) > 1e-12) throw DomainError("score fields disagree on time");
  const auto& sp = qt.space();
  const double q = forward_rate_into(kind, sp.vocab());
  double total = 0.0;
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double px = qt[x];
    if (px <= 0.0) continue;
    double inner = 0.0;
    for_each_reverse_pair(sp, kind, x, [&](int i, Symbol b) { inner += weighted_bregman(s_hat(x, i, b), s(x, i, b)); });
    total += px * q * inner;
  }
  return total;
}

// E_{x~q_t} sum_{y != x} Q(y, x) s(y, x).
inline double expected_reverse_rate(const ScoreField& s, const DensePmf& qt, NoiseKind kind) {
  const auto& sp = qt.space();
  const double q = forward_rate_into(kind, sp.vocab());
  double total = 0.0;
  for (StateIndex x = 0; x < sp.size(); ++x) {
    if (qt[x] <= 0.0) continue;
    double inner = 0.0;
    for_each_reverse_pair(sp, kind, x, [&](int i, Symbol b) { inner += s(x, i, b); });
    total += qt[x] * q * inner;
  }
  return total;
}

// Score field to use at grid index k, evaluated at time T - t_k.
using ScoreProvider = std::function<ScoreField(int k, double t)>;

inline ScoreProvider exact_score_provider(const DensePmf& q0, NoiseKind kind) {
  auto data = std::make_shared<const DensePmf>(q0);
  return [data, kind](int, double t) { return ScoreField::exact(*data, kind, t); };
}

// per_grid_point: each grid index gets an independent draw of the corruption.
inline ScoreProvider corrupted_score_provider(const DensePmf& q0, NoiseKind kind, CorruptionModel model,
                                              bool per_grid_point = true) {
  model.validate();
  auto data = std::make_shared<const DensePmf>(q0);
  return [data, kind, model, per_grid_point](int k, double t) {
    return ScoreField::exact(*data, kind, t).corrupted(model, per_grid_point ? static_cast<std::uint64_t>(k) : 0);
  };
}

// sum_k (t_{k+1} - t_k) L_SE(T - t_k).
inline double score_error_total(const Schedule& sched, const ScoreProvider& s_hat, const ScoreProvider& exact) {
  validate_schedule(sched);
  double total = 0.0;
  for (int k = 0; k < sched.steps(); ++k) {
    double t = sched.remaining(k);
    ScoreField e = exact(k, t);
    ScoreField h = s_hat(k, t);
    total += sched.step(k) * score_entropy_loss(t, h, e, e.marginal(), e.kind());
  }
  return total;
}

// [{state, coordinate, target, value}] for every admissible pair with q_t(x) > 0.
inline nlohmann::json score_dump(const ScoreField& f) {
  const auto& sp = f.space();
  nlohmann::json out = nlohmann::json::array();
  for (StateIndex x = 0; x < sp.size(); ++x) {
    if (f.marginal()[x] <= 0.0) continue;
    for_each_reverse_pair(sp, f.kind(), x, [&](int i, Symbol b) {
      out.push_back({{"state", sp.unpack(x)}, {"coordinate", i}, {"target", b}, {"value", f(x, i, b)}});
    });
  }
  return out;
}

}  // namespace ddlab
