#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "forward.hpp"
#include "quadrature.hpp"
#include "score.hpp"
#include "state_space.hpp"

namespace ddlab {

// KL can be infinite; the flag keeps that distinguishable from a large finite value.
struct KlValue {
  double value = 0.0;
  bool infinite = false;

  double as_double() const { return infinite ? std::numeric_limits<double>::infinity() : value; }
};

inline double entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

inline double entropy(const DensePmf& p) { return entropy(p.mass()); }

inline KlValue kl(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DomainError("kl needs pmfs on the same space");
  KlValue out;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] <= 0.0) continue;
    if (q[x] <= 0.0) return {0.0, true};
    out.value += p[x] * std::log(p[x] / q[x]);
  }
  out.value = std::max(out.value, 0.0);
  return out;
}

inline KlValue kl(const DensePmf& p, const DensePmf& q) {
  if (!(p.space() == q.space())) throw DomainError("kl needs pmfs on the same space");
  return kl(p.mass(), q.mass());
}

// KL between two vectors of equal total mass, summed as p (r - 1 - log r) with r = q/p so
// no cancellation occurs when p and q are close.
inline double kl_equal_mass(const std::vector<double>& p, const std::vector<double>& q) {
  if (p.size() != q.size()) throw DomainError("kl of vectors with different lengths");
  double total = 0.0;
  for (std::size_t x = 0; x < p.size(); ++x) {
    if (p[x] <= 0.0) continue;
    if (q[x] <= 0.0) return std::numeric_limits<double>::infinity();
    double u = q[x] / p[x] - 1.0;
    total += p[x] * (u - std::log1p(u));
  }
  return total;
}

inline double tv(const DensePmf& p, const DensePmf& q) {
  if (!(p.space() == q.space())) throw DomainError("tv needs pmfs on the same space");
  double s = 0.0;
  for (StateIndex x = 0; x < p.size(); ++x) s += std::abs(p[x] - q[x]);
  return 0.5 * s;
}

// Pmf with coordinates `drop` summed out, stored at the index whose dropped digits are 0.
inline std::vector<double> sum_out(const DensePmf& p, std::initializer_list<int> drop) {
  const auto& sp = p.space();
  std::vector<double> out(sp.size(), 0.0);
  for (StateIndex x = 0; x < sp.size(); ++x) {
    if (p[x] == 0.0) continue;
    StateIndex base = x;
    for (int i : drop) base -= static_cast<StateIndex>(sp.digit(x, i)) * sp.stride(i);
    out[base] += p[x];
  }
  return out;
}

inline double coordinate_entropy(const DensePmf& p, int i) {
  const auto& sp = p.space();
  sp.check_coord(i);
  std::vector<double> m(sp.symbols(), 0.0);
  for (StateIndex x = 0; x < sp.size(); ++x) m[sp.digit(x, i)] += p[x];
  return entropy(m);
}

// H(x^i | x^{-i}).
inline double conditional_entropy_given_rest(const DensePmf& p, int i) {
  p.space().check_coord(i);
  return entropy(p) - entropy(sum_out(p, {i}));
}

struct Correlations {
  double total = 0.0;  // C = sum_i H(x^i) - H(x)
  double dual = 0.0;   // B = H(x) - sum_i H(x^i | x^{-i})
};

inline Correlations correlations_direct(const DensePmf& p) {
  const double h = entropy(p);
  Correlations c;
  double sum_marg = 0.0, sum_cond = 0.0;
  for (int i = 0; i < p.space().dim(); ++i) {
    sum_marg += coordinate_entropy(p, i);
    sum_cond += conditional_entropy_given_rest(p, i);
  }
  c.total = sum_marg - h;
  c.dual = h - sum_cond;
  return c;
}

// I(x^i; x^j | x^{-ij}); MASK, if present, is just another value.
inline double conditional_mi(const DensePmf& p, int i, int j) {
  const auto& sp = p.space();
  sp.check_coord(i);
  sp.check_coord(j);
  if (i == j) throw DomainError("conditional_mi needs distinct coordinates");
  std::vector<double> pi = sum_out(p, {i}), pj = sum_out(p, {j}), pij = sum_out(p, {i, j});
  double mi = 0.0;
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double px = p[x];
    if (px <= 0.0) continue;
    StateIndex bi = x - static_cast<StateIndex>(sp.digit(x, i)) * sp.stride(i);
    StateIndex bj = x - static_cast<StateIndex>(sp.digit(x, j)) * sp.stride(j);
    StateIndex bij = bi - static_cast<StateIndex>(sp.digit(x, j)) * sp.stride(j);
    mi += px * std::log(px * pij[bij] / (pi[bi] * pj[bj]));
  }
  return std::max(mi, 0.0);
}

// I(t): sum over ordered pairs i != j of the conditional MI of the masked marginal q_t.
inline double info_profile(const DensePmf& q0, double t) {
  DensePmf qt = propagate_forward(q0, NoiseKind::Masking, t);
  const int d = qt.space().dim();
  double total = 0.0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) total += 2.0 * conditional_mi(qt, i, j);
  return total;
}

// I(t) through the erasure structure of the masking channel: with p = e^{-t},
//   I(t) = sum_{i != j} sum_{R} p^{|R|+2} (1-p)^{d-2-|R|} I(X_i; X_j | X_R),
// R ranging over subsets of the other coordinates. Every subset entropy comes from one
// pass over the masked-marginal table, so large d stays cheap.
class MaskedInfoExpansion {
 public:
  explicit MaskedInfoExpansion(const DensePmf& q0) {
    DensePmf data = strip_mask(q0);
    d_ = data.space().dim();
    if (d_ > 24) throw ResourceError("subset expansion limited to d <= 24");
    StateSpace ms = data.space().with_mask();
    std::vector<double> table = masked_marginal_table(data);
    const Symbol mk = ms.vocab();
    std::vector<double> h(std::size_t{1} << d_, 0.0);
    for (StateIndex x = 0; x < ms.size(); ++x) {
      double v = table[x];
      if (v <= 0.0) continue;
      unsigned visible = 0;
      for (int i = 0; i < d_; ++i)
        if (ms.digit(x, i) != mk) visible |= 1u << i;
      h[visible] -= v * std::log(v);
    }
    coeff_.assign(d_ >= 2 ? d_ - 1 : 0, 0.0);
    const unsigned full = (1u << d_) - 1;
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) {
        if (i == j) continue;
        const unsigned others = full & ~(1u << i) & ~(1u << j);
        // enumerate subsets R of `others`
        for (unsigned r = others;; r = (r - 1) & others) {
          double cmi = h[r | (1u << i)] + h[r | (1u << j)] - h[r] - h[r | (1u << i) | (1u << j)];
          coeff_[std::popcount(r)] += cmi;
          if (r == 0) break;
        }
      }
  }

  double operator()(double t) const {
    if (t < 0.0) throw DomainError("time must be nonnegative");
    const double p = std::exp(-t), m = -std::expm1(-t);
    double total = 0.0;
    for (int k = 0; k < static_cast<int>(coeff_.size()); ++k)
      total += coeff_[k] * std::pow(p, k + 2) * std::pow(m, d_ - 2 - k);
    return std::max(total, 0.0);
  }

  // Aggregated conditional MI over ordered pairs, indexed by |R|.
  const std::vector<double>& coefficients() const { return coeff_; }

 private:
  int d_ = 0;
  std::vector<double> coeff_;
};

enum class InfoRoute { Auto, Dense, Expansion };

struct QuadratureOptions {
  double rel_tol = 1e-4;
  double abs_tol = 1e-13;
  InfoRoute route = InfoRoute::Auto;
  std::uint64_t dense_limit = 20000;  // largest masked space Auto sends to the dense route
};

struct CorrelationQuadrature {
  double dual = 0.0;   // integral of I(t)
  double total = 0.0;  // integral of (e^t - 1) I(t)
  double mixed = 0.0;  // integral of min(1, t) I(t)
  std::vector<double> error;
  double t_max = 0.0;
  std::vector<double> tail_bound;
  int panels = 0;
  int evaluations = 0;
  std::string route;

  nlohmann::json to_json() const {
    return {{"B", dual}, {"C", total}, {"D", mixed}, {"error_estimate", error}, {"T_max", t_max},
            {"tail_bound", tail_bound}, {"panels", panels}, {"evaluations", evaluations}, {"route", route}};
  }
};

inline std::function<double(double)> info_profile_function(const DensePmf& q0, InfoRoute route, std::uint64_t dense_limit,
                                                           std::string* chosen = nullptr) {
  DensePmf data = strip_mask(q0);
  if (route == InfoRoute::Auto) {
    double masked_size = std::pow(data.space().vocab() + 1.0, data.space().dim());
    route = masked_size <= static_cast<double>(dense_limit) ? InfoRoute::Dense : InfoRoute::Expansion;
  }
  if (chosen) *chosen = route == InfoRoute::Dense ? "dense" : "expansion";
  if (route == InfoRoute::Dense) {
    auto shared = std::make_shared<const DensePmf>(std::move(data));
    return [shared](double t) { return info_profile(*shared, t); };
  }
  auto ex = std::make_shared<const MaskedInfoExpansion>(data);
  return [ex](double t) { return (*ex)(t); };
}

// B, C, D by adaptive quadrature of I(t) in u = e^{-t} on [e^{-T_max}, 1], split at
// u = e^{-1} where min(1, t) has its kink. T_max grows until the estimated tail of the
// C integral is below a tenth of the tolerance.
inline CorrelationQuadrature correlations_quadrature(const DensePmf& q0, const QuadratureOptions& opt = {}) {
  if (opt.rel_tol < 1e-6 * (1 - 1e-12)) throw ConfigError("quadrature rel_tol below 1e-6 is not supported");
  CorrelationQuadrature out;
  auto info = info_profile_function(q0, opt.route, opt.dense_limit, &out.route);
  auto integrand = [&](double u) {
    double t = -std::log(u);
    double i = info(t);
    return std::vector<double>{i / u, (1.0 - u) * i / (u * u), std::min(1.0, t) * i / u};
  };
  for (double t_max = 10.0;; t_max *= 2.0) {
    double u_min = std::exp(-t_max);
    QuadratureResult r = integrate_adaptive(integrand, 3, {u_min, std::exp(-1.0), 1.0}, opt.rel_tol, opt.abs_tol);
    std::vector<double> edge = integrand(u_min);
    out.evaluations += r.evaluations + 1;
    out.tail_bound = {u_min * std::abs(edge[0]), u_min * std::abs(edge[1]), u_min * std::abs(edge[2])};
    out.dual = r.value[0];
    out.total = r.value[1];
    out.mixed = r.value[2];
    out.error = r.error;
    out.panels = r.panels;
    out.t_max = t_max;
    if (out.tail_bound[1] <= std::max(opt.abs_tol, 0.1 * opt.rel_tol * std::abs(out.total)) || t_max >= 80.0) break;
  }
  return out;
}

// phi(t) = (1/S) E_{q_t} sum_{Hamming-1 y} -log s_t(y, x) for the uniform process.
inline double phi(const DensePmf& q0, double t) {
  DensePmf qt = propagate_forward(q0, NoiseKind::Uniform, t);
  const auto& sp = qt.space();
  const int S = sp.vocab();
  double total = 0.0;
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double px = qt[x];
    if (px <= 0.0) continue;
    for (int i = 0; i < sp.dim(); ++i)
      for (int c = 1; c < S; ++c) {
        double py = qt[sp.shift(x, i, c)];
        if (py <= 0.0) return std::numeric_limits<double>::infinity();
        // Adding r - 1 (zero in total since the shift is a bijection) keeps each term >= 0.
        double u = py / px - 1.0;
        total += px * (u - std::log1p(u));
      }
  }
  return total / S;
}

// Same quantity as (1/S) sum_{i,c} KL(q_t || q_t o N_{i,c}), N_{i,c} the increment map.
inline double phi_pushforward(const DensePmf& q0, double t) {
  DensePmf qt = propagate_forward(q0, NoiseKind::Uniform, t);
  const auto& sp = qt.space();
  const int S = sp.vocab();
  double total = 0.0;
  std::vector<double> moved(sp.size());
  for (int i = 0; i < sp.dim(); ++i)
    for (int c = 1; c < S; ++c) {
      for (StateIndex x = 0; x < sp.size(); ++x) moved[x] = qt[sp.shift(x, i, c)];
      total += kl_equal_mass(qt.mass(), moved);
    }
  return total / S;
}

inline double kl_to_uniform(const DensePmf& q0, double t) {
  DensePmf qt = propagate_forward(q0, NoiseKind::Uniform, t);
  return kl(qt, DensePmf::uniform(qt.space())).as_double();
}

namespace detail {

// prod_i K(y^i, x^i)
inline double product_transition(const StateSpace& sp, const Matrix& k, StateIndex y, StateIndex x) {
  double p = 1.0;
  for (int i = 0; i < sp.dim() && p != 0.0; ++i) p *= k(sp.digit(y, i), sp.digit(x, i));
  return p;
}

}  // namespace detail

struct MartingaleReport {
  double max_abs_dev = 0.0;
  double max_rel_dev = 0.0;
  std::size_t checked = 0;
};

// Reverse-time martingale of the score. For reverse times ell < t, with the backward
// kernel q_{t|ell}(y|x) = q_{T-t}(y) P_{t-ell}(y -> x) / q_{T-ell}(x):
//   uniform: E[s_{T-t}(x_t (+)_i c, x_t) | x_ell] = s_{T-ell}(x_ell (+)_i c, x_ell)
//   masking: E[s_{T-t}(x_t (.)_i c, x_t) 1{i masked in x_t} | x_ell]
//              = e^{t-ell} s_{T-ell}(x_ell (.)_i c, x_ell) 1{i masked in x_ell}
// `lhs_field`, when given, replaces the exact field at T - t (negative control).
inline MartingaleReport check_martingales(const DensePmf& q0, NoiseKind kind, double T, double ell, double t,
                                          const ScoreField* lhs_field = nullptr) {
  if (!(0.0 <= ell && ell < t && t < T)) throw DomainError("martingale check needs 0 <= ell < t < T");
  DensePmf qa = propagate_forward(q0, kind, T - t), qb = propagate_forward(q0, kind, T - ell);
  const auto& sp = qa.space();
  ScoreField st = lhs_field ? *lhs_field : ScoreField::from_marginal(qa, kind, T - t);
  ScoreField sl = ScoreField::from_marginal(qb, kind, T - ell);
  const Matrix k = forward_token_kernel(kind, sp.vocab(), t - ell).matrix;
  const int S = sp.vocab();
  MartingaleReport rep;
  std::vector<double> w(sp.size());
  for (StateIndex x = 0; x < sp.size(); ++x) {
    if (qb[x] <= 0.0) continue;
    for (StateIndex y = 0; y < sp.size(); ++y) w[y] = qa[y] * detail::product_transition(sp, k, y, x) / qb[x];
    for (int i = 0; i < sp.dim(); ++i) {
      for (int c = (kind == NoiseKind::Uniform ? 1 : 0); c < S; ++c) {
        double lhs = 0.0, rhs;
        if (kind == NoiseKind::Uniform) {
          for (StateIndex y = 0; y < sp.size(); ++y)
            if (w[y] > 0.0) lhs += w[y] * st.by_increment(y, i, c);
          rhs = sl.by_increment(x, i, c);
        } else {
          for (StateIndex y = 0; y < sp.size(); ++y)
            if (w[y] > 0.0 && sp.digit(y, i) == S) lhs += w[y] * st(y, i, c);
          rhs = sp.digit(x, i) == S ? std::exp(t - ell) * sl(x, i, c) : 0.0;
        }
        double dev = std::abs(lhs - rhs);
        rep.max_abs_dev = std::max(rep.max_abs_dev, dev);
        if (rhs != 0.0) rep.max_rel_dev = std::max(rep.max_rel_dev, dev / std::abs(rhs));
        ++rep.checked;
      }
    }
  }
  return rep;
}

struct ControlReport {
  double lhs = 0.0, rhs = 0.0, rel_err = 0.0;
};

// E over (x_ell, x_t) of sum_{i masked in x_t} sum_c s(x_t-pair) D(s(x_ell-pair), s(x_t-pair)),
// all scores at time T - t, against int_ell^t e^{t-v} I(T-v) dv.
inline ControlReport check_control_at_t(const DensePmf& q0, double T, double ell, double t, double rel_tol = 1e-10) {
  if (!(0.0 <= ell && ell < t && t < T)) throw DomainError("control check needs 0 <= ell < t < T");
  DensePmf qa = propagate_forward(q0, NoiseKind::Masking, T - t);
  const auto& sp = qa.space();
  ScoreField s = ScoreField::from_marginal(qa, NoiseKind::Masking, T - t);
  const Matrix k = forward_token_kernel(NoiseKind::Masking, sp.vocab(), t - ell).matrix;
  const int S = sp.vocab();
  ControlReport rep;
  for (StateIndex y = 0; y < sp.size(); ++y) {
    if (qa[y] <= 0.0) continue;
    for (StateIndex x = 0; x < sp.size(); ++x) {
      double w = qa[y] * detail::product_transition(sp, k, y, x);
      if (w <= 0.0) continue;
      double inner = 0.0;
      for (int i = 0; i < sp.dim(); ++i) {
        if (sp.digit(y, i) != S) continue;
        for (Symbol c = 0; c < S; ++c) inner += weighted_bregman(s(x, i, c), s(y, i, c));
      }
      rep.lhs += w * inner;
    }
  }
  DensePmf data = strip_mask(q0);
  rep.rhs = integrate_adaptive_scalar([&](double v) { return std::exp(t - v) * info_profile(data, T - v); }, ell, t, rel_tol);
  rep.rel_err = std::abs(rep.lhs - rep.rhs) / std::max(std::abs(rep.rhs), 1e-300);
  return rep;
}

struct IdentityGap {
  double lhs = 0.0, rhs = 0.0;
  double abs_gap() const { return std::abs(lhs - rhs); }
};

// E sum_{Hamming-1} h(s_t) against E sum -log s_t, h(x) = x log x - x + 1, uniform process.
inline IdentityGap uniform_entropy_identity(const DensePmf& q0, double t) {
  DensePmf qt = propagate_forward(q0, NoiseKind::Uniform, t);
  const auto& sp = qt.space();
  IdentityGap g;
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double px = qt[x];
    if (px <= 0.0) continue;
    for (int i = 0; i < sp.dim(); ++i)
      for (int c = 1; c < sp.vocab(); ++c) {
        double s = qt[sp.shift(x, i, c)] / px;
        g.lhs += px * (s * std::log(s) - s + 1.0);
        g.rhs += px * -std::log(s);
      }
  }
  return g;
}

// (t, value) rows as CSV.
inline std::string profile_csv(const std::vector<std::pair<double, double>>& rows, const std::string& name = "value") {
  std::ostringstream os;
  os.precision(17);
  os << "t," << name << "\n";
  for (const auto& [t, v] : rows) os << t << "," << v << "\n";
  return os.str();
}

inline nlohmann::json profile_json(const std::vector<std::pair<double, double>>& rows, const std::string& name = "value") {
  nlohmann::json a = nlohmann::json::array();
  for (const auto& [t, v] : rows) a.push_back({{"t", t}, {name, v}});
  return a;
}

}  // namespace ddlab
