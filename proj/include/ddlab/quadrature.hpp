#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"

namespace ddlab {

struct QuadratureResult {
  std::vector<double> value;
  std::vector<double> error;
  int panels = 0;
  int evaluations = 0;
};

namespace detail {

// 15-point Kronrod nodes on [0,1] half of [-1,1]; odd-indexed ones are the 7-point Gauss nodes.
inline constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                                   0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                                   0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                                   0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                                   0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                                   0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                                   0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                                  0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b;
  std::vector<double> value, error;
};

template <class F>
Panel gk15(const F& f, double a, double b, std::size_t dim) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  std::vector<double> k(dim, 0.0), g(dim, 0.0);
  auto acc = [&](const std::vector<double>& v, double wk, double wg) {
    for (std::size_t j = 0; j < dim; ++j) {
      k[j] += wk * v[j];
      g[j] += wg * v[j];
    }
  };
  acc(f(c), kWgk[7], kWg[3]);
  for (int n = 0; n < 7; ++n) {
    double wg = (n % 2 == 1) ? kWg[n / 2] : 0.0;
    acc(f(c - h * kXgk[n]), kWgk[n], wg);
    acc(f(c + h * kXgk[n]), kWgk[n], wg);
  }
  Panel p{a, b, std::vector<double>(dim), std::vector<double>(dim)};
  for (std::size_t j = 0; j < dim; ++j) {
    p.value[j] = k[j] * h;
    p.error[j] = std::abs((k[j] - g[j]) * h);
  }
  return p;
}

}  // namespace detail

// Adaptive Gauss-Kronrod (7/15) for a vector-valued integrand. Panels are bisected in
// order of largest scaled error until every component meets max(abs_tol, rel_tol*|I|).
// Breakpoints split the range before adaptation starts.
inline QuadratureResult integrate_adaptive(const std::function<std::vector<double>(double)>& f, std::size_t dim,
                                           std::vector<double> breakpoints, double rel_tol, double abs_tol,
                                           int max_panels = 4000) {
  if (breakpoints.size() < 2) throw DomainError("need at least two breakpoints");
  std::sort(breakpoints.begin(), breakpoints.end());
  QuadratureResult res;
  std::vector<detail::Panel> panels;
  auto scaled = [&](const detail::Panel& p, const std::vector<double>& total) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim; ++j) s = std::max(s, p.error[j] / std::max(abs_tol, rel_tol * std::abs(total[j])));
    return s;
  };
  for (std::size_t k = 0; k + 1 < breakpoints.size(); ++k) {
    if (breakpoints[k + 1] > breakpoints[k]) panels.push_back(detail::gk15(f, breakpoints[k], breakpoints[k + 1], dim));
    res.evaluations += 15;
  }
  while (true) {
    std::vector<double> total(dim, 0.0), err(dim, 0.0);
    for (const auto& p : panels)
      for (std::size_t j = 0; j < dim; ++j) {
        total[j] += p.value[j];
        err[j] += p.error[j];
      }
    bool done = true;
    for (std::size_t j = 0; j < dim; ++j)
      if (err[j] > std::max(abs_tol, rel_tol * std::abs(total[j]))) done = false;
    if (done) {
      res.value = total;
      res.error = err;
      res.panels = static_cast<int>(panels.size());
      return res;
    }
    if (static_cast<int>(panels.size()) >= max_panels)
      throw QuadratureError("adaptive quadrature did not converge within the panel budget");
    auto worst = std::max_element(panels.begin(), panels.end(), [&](const auto& x, const auto& y) {
      return scaled(x, total) < scaled(y, total);
    });
    double a = worst->a, b = worst->b, m = 0.5 * (a + b);
    *worst = detail::gk15(f, a, m, dim);
    panels.push_back(detail::gk15(f, m, b, dim));
    res.evaluations += 30;
  }
}

inline double integrate_adaptive_scalar(const std::function<double(double)>& f, double a, double b, double rel_tol,
                                        double abs_tol = 1e-15) {
  auto r = integrate_adaptive([&](double x) { return std::vector<double>{f(x)}; }, 1, {a, b}, rel_tol, abs_tol);
  return r.value[0];
}

}  // namespace ddlab
