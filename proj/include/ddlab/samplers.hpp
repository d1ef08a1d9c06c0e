#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "forward.hpp"
#include "linalg.hpp"
#include "rng.hpp"
#include "schedule.hpp"
#include "score.hpp"

namespace ddlab {

enum class SamplerKind { TauLeaping, TruncatedTtl, ModifiedTtl };

inline std::string to_string(SamplerKind s) {
  switch (s) {
    case SamplerKind::TauLeaping: return "tau_leaping";
    case SamplerKind::TruncatedTtl: return "truncated_tau_leaping";
    case SamplerKind::ModifiedTtl: return "modified_truncated_tau_leaping";
  }
  return "?";
}

inline SamplerKind parse_sampler(const std::string& s) {
  if (s == "tau_leaping") return SamplerKind::TauLeaping;
  if (s == "truncated_tau_leaping" || s == "truncated") return SamplerKind::TruncatedTtl;
  if (s == "modified_truncated_tau_leaping" || s == "modified") return SamplerKind::ModifiedTtl;
  throw ConfigError("unknown sampler '" + s + "'");
}

// Per-coordinate kernels for one step, conditioned on the step-start state.
struct StepKernelSet {
  std::vector<TokenKernel> kernels;

  void validate(double tol = 1e-12) const {
    for (const auto& k : kernels) k.validate(tol);
  }
};

// Uniform alphabet: each coordinate runs the increment-circulant chain with rates
// R(a, a (+) c) = Q^tok * s_hat(x_k (+)_i c, x_k) for time h.
inline StepKernelSet tau_leaping_step_uniform(StateIndex xk, const ScoreField& s_hat, double h) {
  const auto& sp = s_hat.space();
  if (sp.has_mask() || s_hat.kind() != NoiseKind::Uniform) throw DomainError("tau-leaping needs the uniform process");
  if (!(h > 0.0)) throw DomainError("step length must be positive");
  const int S = sp.vocab();
  const double q = forward_rate_into(NoiseKind::Uniform, S);
  StepKernelSet out;
  out.kernels.reserve(sp.dim());
  std::vector<double> rate(S);
  for (int i = 0; i < sp.dim(); ++i) {
    for (int c = 1; c < S; ++c) rate[c] = q * s_hat.by_increment(xk, i, c);
    Matrix r(S, S);
    for (int a = 0; a < S; ++a) {
      double tot = 0.0;
      for (int c = 1; c < S; ++c) {
        r(a, (a + c) % S) = rate[c];
        tot += rate[c];
      }
      r(a, a) = -tot;
    }
    r *= h;
    out.kernels.push_back({expm(r), 0.0, h});
  }
  return out;
}

// Only jumps out of the step-start symbol are active; every other row is the identity.
inline StepKernelSet truncated_ttl_step(StateIndex xk, const ScoreField& s_hat, double h) {
  const auto& sp = s_hat.space();
  if (!(h > 0.0)) throw DomainError("step length must be positive");
  const NoiseKind kind = s_hat.kind();
  const int S = sp.vocab(), V = sp.symbols();
  const double q = forward_rate_into(kind, S);
  StepKernelSet out;
  out.kernels.reserve(sp.dim());
  std::vector<double> rate(S);
  for (int i = 0; i < sp.dim(); ++i) {
    Matrix k = Matrix::identity(V);
    Symbol a0 = sp.digit(xk, i);
    if (kind == NoiseKind::Uniform || a0 == S) {
      double tot = 0.0;
      for (Symbol b = 0; b < S; ++b) {
        rate[b] = b == a0 ? 0.0 : q * s_hat(xk, i, b);
        tot += rate[b];
      }
      if (tot > 0.0) {
        double leave = -std::expm1(-h * tot);
        k(a0, a0) = 1.0 - leave;
        for (Symbol b = 0; b < S; ++b)
          if (b != a0) k(a0, b) = leave * rate[b] / tot;
      }
    }
    out.kernels.push_back({std::move(k), 0.0, h});
  }
  return out;
}

// Time-rescaled integral Delta_k of one modified truncated tau-leaping step.
inline double modified_ttl_delta(double tk, double tk1, double T) {
  if (!(tk < tk1) || tk1 > T) throw ConfigError("modified step needs t_k < t_{k+1} <= T");
  if (tk1 >= T) throw ConfigError("t_{k+1} = T is only allowed on the final step");
  // (e^T - e^{t_k}) / (e^T - e^{t_{k+1}}) written to stay accurate near T.
  return std::expm1(T - tk) * std::log(std::expm1(tk - T) / std::expm1(tk1 - T));
}

// Modified truncated tau-leaping step: a masked coordinate stays masked with probability
// exp(-Delta_k * sum_a Q(a)), zero on the final step, and otherwise unmasks to a with
// probability proportional to Q(a) = s_hat(x_k (.)_i a, x_k).
inline StepKernelSet modified_ttl_step(StateIndex xk, const ScoreField& s_hat, double tk, double tk1, double T, bool is_last) {
  const auto& sp = s_hat.space();
  if (!sp.has_mask() || s_hat.kind() != NoiseKind::Masking) throw DomainError("modified step needs the masking process");
  if (!(tk < tk1) || tk1 > T + 1e-15) throw ConfigError("modified step needs t_k < t_{k+1} <= T");
  const double delta = is_last ? 0.0 : modified_ttl_delta(tk, tk1, T);
  const int S = sp.vocab(), V = sp.symbols();
  StepKernelSet out;
  out.kernels.reserve(sp.dim());
  std::vector<double> rate(S);
  for (int i = 0; i < sp.dim(); ++i) {
    Matrix k = Matrix::identity(V);
    if (sp.digit(xk, i) == S) {
      double tot = 0.0;
      for (Symbol a = 0; a < S; ++a) tot += rate[a] = s_hat(xk, i, a);
      double stay = is_last ? 0.0 : std::exp(-delta * tot);
      if (tot > 0.0) {
        k(S, S) = stay;
        for (Symbol a = 0; a < S; ++a) k(S, a) = (1.0 - stay) * rate[a] / tot;
      } else if (is_last) {
        throw SingularScoreError("final step with all-zero unmasking rates");
      }
    }
    out.kernels.push_back({std::move(k), tk, tk1});
  }
  return out;
}

inline StepKernelSet sampler_step(SamplerKind kind, StateIndex xk, const ScoreField& s_hat, const Schedule& sched, int k) {
  const double h = sched.step(k);
  switch (kind) {
    case SamplerKind::TauLeaping: return tau_leaping_step_uniform(xk, s_hat, h);
    case SamplerKind::TruncatedTtl: return truncated_ttl_step(xk, s_hat, h);
    case SamplerKind::ModifiedTtl:
      // The forced unmasking of the final step applies only when the grid reaches T.
      return modified_ttl_step(xk, s_hat, sched.grid[k], sched.grid[k + 1], sched.horizon,
                               k + 1 == sched.steps() && sched.delta == 0.0);
  }
  throw ConfigError("unknown sampler");
}

inline NoiseKind sampler_noise(SamplerKind s, NoiseKind requested) {
  if (s == SamplerKind::TauLeaping && requested != NoiseKind::Uniform) throw ConfigError("tau-leaping runs the uniform process");
  if (s == SamplerKind::ModifiedTtl && requested != NoiseKind::Masking) throw ConfigError("modified truncated tau-leaping runs the masking process");
  return requested;
}

// Unif(X) for uniform noise; ((1 - e^{-T}) MASK + e^{-T} Unif[S])^{(x) d} for masking.
inline DensePmf initial_distribution(NoiseKind kind, const StateSpace& data_space, double T) {
  StateSpace sp = process_space(data_space, kind);
  if (kind == NoiseKind::Uniform) return DensePmf::uniform(sp);
  const int S = sp.vocab();
  const double keep = std::exp(-T);
  std::vector<double> m(sp.size());
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double p = 1.0;
    for (int i = 0; i < sp.dim(); ++i) p *= sp.digit(x, i) == S ? -std::expm1(-T) : keep / S;
    m[x] = p;
  }
  return normalize(sp, std::move(m));
}

// e^{-T} d (1 + log S + T).
inline double initialization_bound(double T, int d, int S) { return std::exp(-T) * d * (1.0 + std::log(S) + T); }

// Mass below this is dropped between steps. Zero keeps the law exact: with early stopping
// the target charges states whose mass is far below 1e-15, and dropping them makes KL infinite.
inline constexpr double kPruneThreshold = 0.0;

struct SamplerRun {
  DensePmf output;
  double discarded_mass = 0.0;
  nlohmann::json manifest;
};

inline nlohmann::json sampler_manifest(SamplerKind s, NoiseKind kind, const Schedule& sched, const ScoreProvider& score,
                                       double prune) {
  return {{"sampler", to_string(s)},
          {"noise", to_string(kind)},
          {"schedule", sched.to_json()},
          {"score", score(0, sched.horizon).provenance()},
          {"prune_threshold", prune}};
}

namespace detail {

// Spread mass w at x through the product of kernel rows x^i -> .
inline void scatter_product(const StateSpace& sp, StateIndex x, double w, const StepKernelSet& ks, std::vector<double>& out,
                            std::vector<std::pair<StateIndex, double>>& buf, std::vector<std::pair<StateIndex, double>>& tmp) {
  buf.assign(1, {x, w});
  const int V = sp.symbols();
  for (int i = 0; i < sp.dim(); ++i) {
    const Matrix& k = ks.kernels[i].matrix;
    Symbol a = sp.digit(x, i);
    const double* row = k.row(a);
    if (row[a] == 1.0) continue;
    tmp.clear();
    for (const auto& [y, v] : buf) {
      StateIndex base = y - static_cast<StateIndex>(a) * sp.stride(i);
      for (Symbol b = 0; b < V; ++b)
        if (row[b] != 0.0) tmp.emplace_back(base + static_cast<StateIndex>(b) * sp.stride(i), v * row[b]);
    }
    buf.swap(tmp);
  }
  for (const auto& [y, v] : buf) out[y] += v;
}

}  // namespace detail

// Exact law of the sampler output: the full pmf is pushed through every step.
inline SamplerRun run_sampler_pmf(const DensePmf& q_init, SamplerKind sampler, const Schedule& sched,
                                  const ScoreProvider& score, double prune = kPruneThreshold) {
  validate_schedule(sched);
  const auto& sp = q_init.space();
  std::vector<double> p = q_init.mass(), next(p.size());
  double discarded = 0.0;
  std::vector<std::pair<StateIndex, double>> buf, tmp;
  NoiseKind kind = NoiseKind::Uniform;
  for (int k = 0; k < sched.steps(); ++k) {
    ScoreField f = score(k, sched.remaining(k)).with_off_support(OffSupport::Uninformative);
    if (!(f.space() == sp)) throw DomainError("score field and initial pmf live on different spaces");
    kind = f.kind();
    std::fill(next.begin(), next.end(), 0.0);
    for (StateIndex x = 0; x < sp.size(); ++x) {
      if (p[x] == 0.0) continue;
      if (p[x] < prune) {
        discarded += p[x];
        continue;
      }
      StepKernelSet ks = sampler_step(sampler, x, f, sched, k);
      detail::scatter_product(sp, x, p[x], ks, next, buf, tmp);
    }
    double tot = 0.0;
    for (double v : next) tot += v;
    for (auto& v : next) v /= tot;
    p.swap(next);
  }
  SamplerRun run{normalize(sp, std::move(p)), discarded, {}};
  run.manifest = sampler_manifest(sampler, kind, sched, score, prune);
  run.manifest["discarded_mass"] = discarded;
  run.manifest["mode"] = "pmf";
  return run;
}

struct PathRun {
  std::vector<StateIndex> terminals;
  std::vector<std::vector<StateIndex>> trajectories;  // grid-point states of the first few paths
  nlohmann::json manifest;

  std::vector<double> empirical(std::uint64_t size) const {
    std::vector<double> c(size, 0.0);
    for (auto x : terminals) c[x] += 1.0;
    for (auto& v : c) v /= static_cast<double>(terminals.size());
    return c;
  }
};

// n_paths independent runs; path p draws from the substream hash(seed, p), so the result
// does not depend on evaluation order.
inline PathRun run_sampler_paths(const DensePmf& q_init, SamplerKind sampler, const Schedule& sched, const ScoreProvider& score,
                                 std::uint64_t n_paths, std::uint64_t seed, std::size_t keep_trajectories = 0) {
  validate_schedule(sched);
  const auto& sp = q_init.space();
  std::vector<ScoreField> fields;
  for (int k = 0; k < sched.steps(); ++k) fields.push_back(score(k, sched.remaining(k)).with_off_support(OffSupport::Uninformative));
  for (const auto& f : fields)
    if (!(f.space() == sp)) throw DomainError("score field and initial pmf live on different spaces");
  const CdfSampler init(q_init.mass());
  const int d = sp.dim(), V = sp.symbols();
  // Kernel rows keyed by (k, x); small spaces revisit the same states constantly.
  std::unordered_map<std::uint64_t, std::vector<double>> cache;
  const bool use_cache = sp.size() * static_cast<std::uint64_t>(sched.steps()) <= (std::uint64_t{1} << 22);
  auto rows_for = [&](int k, StateIndex x) {
    std::vector<double> rows(static_cast<std::size_t>(d) * V);
    StepKernelSet ks = sampler_step(sampler, x, fields[k], sched, k);
    for (int i = 0; i < d; ++i) {
      const double* r = ks.kernels[i].matrix.row(sp.digit(x, i));
      std::copy(r, r + V, rows.begin() + static_cast<std::ptrdiff_t>(i) * V);
    }
    return rows;
  };
  PathRun run;
  run.terminals.reserve(n_paths);
  for (std::uint64_t p = 0; p < n_paths; ++p) {
    Rng rng(hash_keys({seed, p}));
    StateIndex x = init(rng);
    std::vector<StateIndex> traj;
    if (p < keep_trajectories) traj.push_back(x);
    for (int k = 0; k < sched.steps(); ++k) {
      std::vector<double> local;
      const std::vector<double>* rows;
      if (use_cache) {
        std::uint64_t key = static_cast<std::uint64_t>(k) * sp.size() + x;
        auto it = cache.find(key);
        if (it == cache.end()) it = cache.emplace(key, rows_for(k, x)).first;
        rows = &it->second;
      } else {
        local = rows_for(k, x);
        rows = &local;
      }
      StateIndex y = x;
      for (int i = 0; i < d; ++i) {
        std::span<const double> row(rows->data() + static_cast<std::ptrdiff_t>(i) * V, V);
        y = sp.substitute_unchecked(y, i, static_cast<Symbol>(rng.categorical(row)));
      }
      x = y;
      if (p < keep_trajectories) traj.push_back(x);
    }
    run.terminals.push_back(x);
    if (p < keep_trajectories) run.trajectories.push_back(std::move(traj));
  }
  run.manifest = sampler_manifest(sampler, fields.empty() ? NoiseKind::Uniform : fields[0].kind(), sched, score, 0.0);
  run.manifest["mode"] = "paths";
  run.manifest["n_paths"] = n_paths;
  run.manifest["seed"] = seed;
  return run;
}

}  // namespace ddlab
