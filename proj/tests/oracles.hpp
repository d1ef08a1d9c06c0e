#pragma once

// Slow reference computations written without the library's fast paths.

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "ddlab/ddlab.hpp"

namespace oracle {

using ddlab::DensePmf;
using ddlab::NoiseKind;
using ddlab::State;
using ddlab::StateIndex;
using ddlab::StateSpace;

// Rate for one token moving a -> b (a != b); mask is the symbol S.
inline double token_rate(NoiseKind kind, int S, int a, int b) {
  if (kind == NoiseKind::Uniform) return 1.0 / S;
  return (a < S && b == S) ? 1.0 : 0.0;
}

// Generator of the whole chain on the process space, rows are "from".
inline Eigen::MatrixXd full_generator(const StateSpace& sp, NoiseKind kind) {
  const auto n = static_cast<Eigen::Index>(sp.size());
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
  for (StateIndex x = 0; x < sp.size(); ++x) {
    State xs = sp.unpack(x);
    for (int i = 0; i < sp.dim(); ++i)
      for (int b = 0; b < sp.symbols(); ++b) {
        if (b == xs[i]) continue;
        double r = token_rate(kind, sp.vocab(), xs[i], b);
        if (r == 0.0) continue;
        State ys = xs;
        ys[i] = b;
        g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(sp.pack(ys))) += r;
        g(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(x)) -= r;
      }
  }
  return g;
}

// q_t = q_0 exp(tG) on the full space.
inline std::vector<double> propagate(const DensePmf& q0_process, NoiseKind kind, double t) {
  const auto& sp = q0_process.space();
  Eigen::MatrixXd k = (t * full_generator(sp, kind)).exp();
  Eigen::RowVectorXd p(static_cast<Eigen::Index>(sp.size()));
  for (StateIndex x = 0; x < sp.size(); ++x) p(static_cast<Eigen::Index>(x)) = q0_process[x];
  Eigen::RowVectorXd out = p * k;
  return {out.data(), out.data() + out.size()};
}

// Uniform noise: per-token kernel entries written out from the closed form.
inline double uniform_token_kernel(int S, double t, int a, int b) {
  return a == b ? 1.0 / S + (1.0 - 1.0 / S) * std::exp(-t) : (1.0 / S) * (1.0 - std::exp(-t));
}

inline double uniform_marginal(const DensePmf& q0, double t, const State& x) {
  const auto& sp = q0.space();
  double tot = 0.0;
  for (StateIndex y = 0; y < sp.size(); ++y) {
    State ys = sp.unpack(y);
    double k = q0[y];
    for (int i = 0; i < sp.dim(); ++i) k *= uniform_token_kernel(sp.vocab(), t, ys[i], x[i]);
    tot += k;
  }
  return tot;
}

// s_t(x (+)_i c, x) for uniform noise as a ratio of expectations over q0.
inline double uniform_score(const DensePmf& q0, double t, StateIndex x, int i, int c) {
  const auto& sp = q0.space();
  State xs = sp.unpack(x), ys = xs;
  ys[i] = (xs[i] + c) % sp.vocab();
  return uniform_marginal(q0, t, ys) / uniform_marginal(q0, t, xs);
}

// s_t(x (.)_i a, x) for masking noise, x having coordinate i masked: the posterior of
// x^i = a given the visible coordinates, times e^{-t} / (1 - e^{-t}).
inline double masking_score(const DensePmf& q0, double t, const State& x, int i, int a) {
  const auto& sp = q0.space();
  const int S = sp.vocab();
  double num = 0.0, den = 0.0;
  for (StateIndex y = 0; y < sp.size(); ++y) {
    State ys = sp.unpack(y);
    bool agree = true;
    for (int j = 0; j < sp.dim(); ++j)
      if (x[j] != S && x[j] != ys[j]) agree = false;
    if (!agree) continue;
    den += q0[y];
    if (ys[i] == a) num += q0[y];
  }
  return std::exp(-t) / -std::expm1(-t) * num / den;
}

inline double entropy_of(const std::map<State, double>& m) {
  double h = 0.0;
  for (const auto& [k, v] : m)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

// Marginal on the listed coordinates, keyed by their values.
inline std::map<State, double> marginal(const DensePmf& p, const std::vector<int>& coords) {
  std::map<State, double> m;
  const auto& sp = p.space();
  for (StateIndex x = 0; x < sp.size(); ++x) {
    State xs = sp.unpack(x), key;
    for (int c : coords) key.push_back(xs[c]);
    m[key] += p[x];
  }
  return m;
}

inline std::vector<int> all_but(int d, std::vector<int> drop) {
  std::vector<int> keep;
  for (int i = 0; i < d; ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  return keep;
}

// C and B straight from entropies of explicit marginals.
inline std::pair<double, double> total_and_dual(const DensePmf& p) {
  const int d = p.space().dim();
  std::vector<int> every = all_but(d, {});
  double h = entropy_of(marginal(p, every)), sum_single = 0.0, sum_cond = 0.0;
  for (int i = 0; i < d; ++i) {
    sum_single += entropy_of(marginal(p, {i}));
    sum_cond += h - entropy_of(marginal(p, all_but(d, {i})));
  }
  return {sum_single - h, h - sum_cond};
}

// I(t) by enumerating which of the other coordinates are still visible.
inline double info_profile(const DensePmf& q0, double t) {
  const int d = q0.space().dim();
  const double keep = std::exp(-t);
  double total = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      if (i == j) continue;
      std::vector<int> others = all_but(d, {i, j});
      const int m = static_cast<int>(others.size());
      for (unsigned mask = 0; mask < (1u << m); ++mask) {
        std::vector<int> r;
        for (int k = 0; k < m; ++k)
          if (mask & (1u << k)) r.push_back(others[k]);
        double w = std::pow(keep, static_cast<double>(r.size()) + 2.0) * std::pow(1.0 - keep, m - static_cast<double>(r.size()));
        auto with = [&](std::vector<int> extra) {
          std::vector<int> c = r;
          c.insert(c.end(), extra.begin(), extra.end());
          return entropy_of(marginal(q0, c));
        };
        double cmi = with({i}) + with({j}) - with({}) - with({i, j});
        total += w * cmi;
      }
    }
  return total;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    if (p[k] > 0.0) s += p[k] * std::log(p[k] / q[k]);
  return s;
}

}  // namespace oracle
