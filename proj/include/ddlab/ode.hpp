#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "errors.hpp"

namespace ddlab {

using OdeRhs = std::function<void(double t, const std::vector<double>& y, std::vector<double>& dy)>;

// Classical fixed-step RK4 from t0 to t1; the step is shrunk so it divides the interval.
inline std::vector<double> rk4_integrate(const OdeRhs& f, std::vector<double> y, double t0, double t1, double max_step) {
  if (!(t1 >= t0) || !(max_step > 0.0)) throw DomainError("rk4 needs t1 >= t0 and a positive step");
  if (t1 == t0) return y;
  const auto n = static_cast<long>(std::ceil((t1 - t0) / max_step));
  const double h = (t1 - t0) / static_cast<double>(n);
  const std::size_t m = y.size();
  std::vector<double> k1(m), k2(m), k3(m), k4(m), tmp(m);
  for (long s = 0; s < n; ++s) {
    double t = t0 + h * static_cast<double>(s);
    f(t, y, k1);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * h * k1[j];
    f(t + 0.5 * h, tmp, k2);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + 0.5 * h * k2[j];
    f(t + 0.5 * h, tmp, k3);
    for (std::size_t j = 0; j < m; ++j) tmp[j] = y[j] + h * k3[j];
    f(t + h, tmp, k4);
    for (std::size_t j = 0; j < m; ++j) y[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return y;
}

}  // namespace ddlab
