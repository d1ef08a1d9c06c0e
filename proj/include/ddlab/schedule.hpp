#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"

namespace ddlab {

enum class ScheduleRecipe { Constant, ExpThenConst, LogLinear, Explicit };

inline std::string to_string(ScheduleRecipe r) {
  switch (r) {
    case ScheduleRecipe::Constant: return "constant";
    case ScheduleRecipe::ExpThenConst: return "exp_then_const";
    case ScheduleRecipe::LogLinear: return "log_linear";
    case ScheduleRecipe::Explicit: return "explicit";
  }
  return "?";
}

inline ScheduleRecipe parse_recipe(const std::string& s) {
  if (s == "constant") return ScheduleRecipe::Constant;
  if (s == "exp_then_const") return ScheduleRecipe::ExpThenConst;
  if (s == "log_linear") return ScheduleRecipe::LogLinear;
  if (s == "explicit") return ScheduleRecipe::Explicit;
  throw ConfigError("unknown schedule recipe '" + s + "'");
}

// 0 = t_0 < ... < t_N = T - delta.
struct Schedule {
  double horizon = 0.0;
  double delta = 0.0;
  std::vector<double> grid;
  ScheduleRecipe recipe = ScheduleRecipe::Constant;
  double kappa = 0.0;  // ExpThenConst: smallest kappa the grid satisfies
  std::vector<std::string> warnings;

  int steps() const { return static_cast<int>(grid.size()) - 1; }
  double step(int k) const { return grid[k + 1] - grid[k]; }
  double remaining(int k) const { return horizon - grid[k]; }

  nlohmann::json to_json() const {
    return {{"recipe", to_string(recipe)}, {"T", horizon}, {"delta", delta},
            {"N", steps()}, {"kappa", kappa}, {"grid", grid}, {"warnings", warnings}};
  }
};

inline void validate_schedule(const Schedule& s) {
  if (s.grid.size() < 2) throw ConfigError("schedule needs at least one step");
  if (s.grid.front() != 0.0) throw ConfigError("schedule must start at 0");
  for (std::size_t k = 1; k < s.grid.size(); ++k)
    if (!(s.grid[k] > s.grid[k - 1])) throw ConfigError("schedule grid must be strictly increasing");
  if (s.delta < 0.0) throw ConfigError("early stopping delta must be nonnegative");
  if (std::abs(s.grid.back() + s.delta - s.horizon) > 1e-12) throw ConfigError("schedule must end at T - delta");
}

// Smallest kappa with h_k <= kappa * min(1, T - t_{k+1}) over the checked steps.
// `all_steps` false skips the final step.
inline double schedule_kappa(const Schedule& s, bool all_steps) {
  double kap = 0.0;
  int last = all_steps ? s.steps() : s.steps() - 1;
  for (int k = 0; k < last; ++k) {
    double rem = s.horizon - s.grid[k + 1];
    if (rem <= 0.0) return INFINITY;
    kap = std::max(kap, s.step(k) / std::min(1.0, rem));
  }
  return kap;
}

namespace detail {

// One largest admissible step of reverse time u = T - t under the kappa constraint.
inline double greedy_step(double u, double kappa) { return u - kappa >= 1.0 ? u - kappa : u / (1.0 + kappa); }

inline double greedy_run(double u, double kappa, int m) {
  for (int k = 0; k < m; ++k) u = greedy_step(u, kappa);
  return u;
}

}  // namespace detail

// terminal_gap only matters for ExpThenConst with delta = 0: it is T - t_{N-1}, the
// gap left for the final free step. Nonpositive means 1e-3 * min(1, T).
inline Schedule build_schedule(ScheduleRecipe recipe, double T, int N, double delta = 0.0, double kappa = 0.0,
                               double terminal_gap = 0.0) {
  if (N < 1) throw ConfigError("schedule needs N >= 1");
  if (!(T > delta) || delta < 0.0) throw ConfigError("schedule needs T > delta >= 0");
  Schedule s;
  s.horizon = T;
  s.delta = delta;
  s.recipe = recipe;
  const double end = T - delta;
  s.grid.assign(N + 1, 0.0);
  switch (recipe) {
    case ScheduleRecipe::Constant:
      for (int k = 1; k < N; ++k) s.grid[k] = end * k / N;
      break;
    case ScheduleRecipe::LogLinear:
      if (!(delta > 0.0)) throw ConfigError("log-linear schedule needs delta > 0");
      for (int k = 1; k < N; ++k) s.grid[k] = T - T * std::pow(delta / T, static_cast<double>(k) / N);
      break;
    case ScheduleRecipe::ExpThenConst: {
      // Greedy maximal steps in u = T - t: constant kappa while u >= 1, geometric below.
      // kappa is solved so the greedy run lands on the target in the available steps.
      const int m = delta > 0.0 ? N : N - 1;
      double target = delta;
      if (delta == 0.0) target = terminal_gap > 0.0 ? terminal_gap : 1e-3 * std::min(1.0, T);
      if (m > 0) {
        if (!(target < T)) throw ConfigError("terminal gap must be smaller than T");
        double lo = 0.0, hi = 1.0;
        while (detail::greedy_run(T, hi, m) > target) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
          double mid = 0.5 * (lo + hi);
          (detail::greedy_run(T, mid, m) > target ? lo : hi) = mid;
        }
        double u = T;
        for (int k = 1; k < m; ++k) {
          u = detail::greedy_step(u, hi);
          s.grid[k] = T - u;
        }
        s.grid[m] = T - target;
      }
      break;
    }
    case ScheduleRecipe::Explicit:
      throw ConfigError("explicit schedules come from schedule_from_grid");
  }
  s.grid[N] = end;
  validate_schedule(s);
  if (recipe == ScheduleRecipe::ExpThenConst) {
    s.kappa = schedule_kappa(s, delta > 0.0);
    if (kappa > 0.0 && s.kappa > kappa * (1.0 + 1e-12))
      s.warnings.push_back("N=" + std::to_string(N) + " needs kappa=" + std::to_string(s.kappa) +
                           " above the requested " + std::to_string(kappa));
    if (s.kappa >= 0.9) s.warnings.push_back("kappa >= 0.9 is outside the analysed regime");
  }
  return s;
}

inline Schedule schedule_from_grid(double T, std::vector<double> grid) {
  Schedule s;
  s.horizon = T;
  s.recipe = ScheduleRecipe::Explicit;
  s.grid = std::move(grid);
  if (s.grid.empty()) throw ConfigError("empty grid");
  s.delta = T - s.grid.back();
  if (std::abs(s.delta) < 1e-15) s.delta = 0.0;
  validate_schedule(s);
  s.kappa = s.delta > 0.0 ? schedule_kappa(s, true) : schedule_kappa(s, false);
  return s;
}

}  // namespace ddlab
