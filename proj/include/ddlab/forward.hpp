#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "linalg.hpp"
#include "rng.hpp"
#include "state_space.hpp"

namespace ddlab {

enum class NoiseKind { Uniform, Masking };

inline std::string to_string(NoiseKind k) { return k == NoiseKind::Uniform ? "uniform" : "masking"; }

inline NoiseKind parse_noise_kind(const std::string& s) {
  if (s == "uniform") return NoiseKind::Uniform;
  if (s == "masking") return NoiseKind::Masking;
  throw ConfigError("unknown noise kind '" + s + "'");
}

// Space on which the chain for `kind` lives, given a data space over tokens.
inline StateSpace process_space(const StateSpace& data, NoiseKind kind) {
  return kind == NoiseKind::Masking ? data.with_mask() : data.without_mask();
}

inline void check_kind_alphabet(NoiseKind kind, const StateSpace& sp) {
  if (kind == NoiseKind::Uniform && sp.has_mask()) throw DomainError("uniform noise needs an alphabet without MASK");
  if (kind == NoiseKind::Masking && !sp.has_mask()) throw DomainError("masking noise needs an alphabet with MASK");
}

inline double alpha(double t, int S) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  if (S < 2) throw DomainError("vocab size must be at least 2");
  double e = std::exp(-t);
  return (1.0 - e) / (1.0 + (S - 1) * e);
}

struct RateMatrixTok {
  Matrix matrix;

  void validate(double tol = 1e-12) const {
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < matrix.cols(); ++c) {
        if (r != c && matrix(r, c) < 0.0) throw ValidationError("negative off-diagonal rate");
        s += matrix(r, c);
      }
      if (std::abs(s) > tol) throw ValidationError("rate matrix row does not sum to zero");
    }
  }
};

struct TokenKernel {
  Matrix matrix;
  double t_from = 0.0, t_to = 0.0;

  void validate(double tol = 1e-12) const {
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      double s = 0.0;
      for (std::size_t c = 0; c < matrix.cols(); ++c) {
        double v = matrix(r, c);
        if (v < -tol || v > 1.0 + tol) throw ValidationError("kernel entry outside [0,1]");
        s += v;
      }
      if (std::abs(s - 1.0) > tol) throw ValidationError("kernel row does not sum to one");
    }
  }
};

inline RateMatrixTok token_rate_matrix(NoiseKind kind, int S) {
  if (S < 2) throw DomainError("vocab size must be at least 2");
  if (kind == NoiseKind::Uniform) {
    Matrix q(S, S, 1.0 / S);
    for (int a = 0; a < S; ++a) q(a, a) = -(S - 1.0) / S;
    return {q};
  }
  Matrix q(S + 1, S + 1);
  for (int a = 0; a < S; ++a) {
    q(a, a) = -1.0;
    q(a, S) = 1.0;
  }
  return {q};
}

// Largest exit rate of a single token; the uniformization bound per coordinate.
inline double max_exit_rate(NoiseKind kind, int S) { return kind == NoiseKind::Uniform ? (S - 1.0) / S : 1.0; }

inline double dominating_rate(NoiseKind kind, int S, int d) { return d * max_exit_rate(kind, S); }

inline TokenKernel forward_token_kernel(NoiseKind kind, int S, double t) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  const double e = std::exp(-t);
  if (kind == NoiseKind::Uniform) {
    Matrix k(S, S, (1.0 - e) / S);
    for (int a = 0; a < S; ++a) k(a, a) = (1.0 + (S - 1) * e) / S;
    return {k, 0.0, t};
  }
  Matrix k(S + 1, S + 1);
  for (int a = 0; a < S; ++a) {
    k(a, a) = e;
    k(a, S) = -std::expm1(-t);
  }
  k(S, S) = 1.0;
  return {k, 0.0, t};
}

// out[y] = sum_x p[x] prod_i K_i(x^i, y^i), one coordinate at a time.
inline std::vector<double> apply_coordinate_kernels(const StateSpace& sp, std::vector<double> p,
                                                    const std::vector<const Matrix*>& kernels) {
  const int V = sp.symbols();
  std::vector<double> next(p.size());
  for (int i = 0; i < sp.dim(); ++i) {
    const Matrix& k = *kernels[i];
    std::fill(next.begin(), next.end(), 0.0);
    for (StateIndex x = 0; x < sp.size(); ++x) {
      double px = p[x];
      if (px == 0.0) continue;
      Symbol a = sp.digit(x, i);
      StateIndex base = x - static_cast<StateIndex>(a) * sp.stride(i);
      for (Symbol b = 0; b < V; ++b) {
        double kab = k(a, b);
        if (kab != 0.0) next[base + static_cast<StateIndex>(b) * sp.stride(i)] += px * kab;
      }
    }
    p.swap(next);
  }
  return p;
}

// Data pmf moved onto the space the chain for `kind` runs on.
inline DensePmf lift_for(NoiseKind kind, const DensePmf& q0) {
  if (kind == NoiseKind::Masking) {
    if (!q0.space().has_mask()) return embed_masked(q0);
    return q0;
  }
  check_kind_alphabet(kind, q0.space());
  return q0;
}

// q_t from q0 via the closed-form product kernel. Under masking an unmasked q0 is lifted
// first; a masked-alphabet q0 must not charge masked states.
inline DensePmf propagate_forward(const DensePmf& q0, NoiseKind kind, double t) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  DensePmf start = lift_for(kind, q0);
  const auto& sp = start.space();
  if (kind == NoiseKind::Masking && q0.space().has_mask()) {
    for (StateIndex x = 0; x < sp.size(); ++x)
      if (start[x] > 0.0 && sp.contains_mask(x)) throw ValidationError("masking forward process needs an unmasked q0");
  }
  TokenKernel k = forward_token_kernel(kind, sp.vocab(), t);
  std::vector<const Matrix*> ks(sp.dim(), &k.matrix);
  auto out = apply_coordinate_kernels(sp, start.mass(), ks);
  return normalize(sp, std::move(out));
}

struct PathEvent {
  double time;
  StateIndex state;
};

struct ForwardPath {
  StateIndex initial = 0;
  std::vector<PathEvent> events;

  StateIndex terminal() const { return events.empty() ? initial : events.back().state; }
};

// Exact simulation of the forward chain by competing exponential clocks.
inline ForwardPath sample_forward_path(const DensePmf& q0, NoiseKind kind, double horizon, Rng& rng) {
  if (!(horizon > 0.0)) throw DomainError("horizon must be positive");
  DensePmf start = lift_for(kind, q0);
  const auto& sp = start.space();
  const int d = sp.dim(), S = sp.vocab();
  ForwardPath path;
  path.initial = CdfSampler(start.mass())(rng);
  StateIndex x = path.initial;
  double t = 0.0;
  while (true) {
    double rate;
    if (kind == NoiseKind::Uniform) {
      rate = d * (S - 1.0) / S;
    } else {
      rate = d - sp.mask_count(x);
    }
    if (rate <= 0.0) break;
    t += rng.exponential(rate);
    if (t > horizon) break;
    if (kind == NoiseKind::Uniform) {
      int i = static_cast<int>(rng.below(d));
      int c = 1 + static_cast<int>(rng.below(S - 1));
      x = sp.substitute_unchecked(x, i, (sp.digit(x, i) + c) % S);
    } else {
      auto unmasked = static_cast<std::uint64_t>(d - sp.mask_count(x));
      std::uint64_t pick = rng.below(unmasked);
      for (int i = 0; i < d; ++i) {
        if (sp.digit(x, i) == S) continue;
        if (pick-- == 0) {
          x = sp.substitute_unchecked(x, i, S);
          break;
        }
      }
    }
    path.events.push_back({t, x});
  }
  return path;
}

// One draw from q_t by uniformization: Poisson(lambda t) candidate jumps on a uniformly
// chosen coordinate, each kept with probability exit_rate / per-coordinate bound.
inline StateIndex uniformize_forward(const DensePmf& q0, NoiseKind kind, double t, Rng& rng) {
  if (t < 0.0) throw DomainError("time must be nonnegative");
  DensePmf start = lift_for(kind, q0);
  const auto& sp = start.space();
  const int d = sp.dim(), S = sp.vocab();
  const RateMatrixTok q = token_rate_matrix(kind, S);
  const double lambda = dominating_rate(kind, S, d);
  const double mu = lambda / d;
  StateIndex x = CdfSampler(start.mass())(rng);
  std::uint64_t n = t > 0.0 ? rng.poisson(lambda * t) : 0;
  std::vector<double> w(sp.symbols());
  for (std::uint64_t k = 0; k < n; ++k) {
    int i = static_cast<int>(rng.below(d));
    Symbol a = sp.digit(x, i);
    double exit = -q.matrix(a, a);
    if (rng.uniform() * mu >= exit) continue;  // virtual jump
    for (int b = 0; b < sp.symbols(); ++b) w[b] = b == a ? 0.0 : q.matrix(a, b);
    x = sp.substitute_unchecked(x, i, static_cast<Symbol>(rng.categorical(w)));
  }
  return x;
}

inline nlohmann::json path_to_json(const StateSpace& sp, const ForwardPath& p) {
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : p.events) ev.push_back({{"time", e.time}, {"state", sp.unpack(e.state)}});
  return {{"initial", sp.unpack(p.initial)}, {"events", ev}};
}

}  // namespace ddlab
