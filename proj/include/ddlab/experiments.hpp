#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <json.hpp>

#include "forward.hpp"
#include "info_metrics.hpp"
#include "pmf_io.hpp"
#include "ode.hpp"
#include "samplers.hpp"
#include "schedule.hpp"
#include "score.hpp"
#include "targets.hpp"

namespace ddlab {

struct ScheduleConfig {
  ScheduleRecipe recipe = ScheduleRecipe::Constant;
  double T = 6.0;
  std::vector<int> N{32};
  double delta = 0.0;
  double kappa = 0.0;
  double terminal_gap = 0.0;
  std::vector<double> grid;  // explicit recipe only

  Schedule make(int n) const {
    if (recipe == ScheduleRecipe::Explicit) return schedule_from_grid(T, grid);
    return build_schedule(recipe, T, n, delta, kappa, terminal_gap);
  }
};

struct ScoreConfig {
  std::optional<CorruptionModel> corruption;
  bool per_grid_point = true;

  ScoreProvider provider(const DensePmf& q0, NoiseKind kind) const {
    if (!corruption) return exact_score_provider(q0, kind);
    return corrupted_score_provider(q0, kind, *corruption, per_grid_point);
  }
  nlohmann::json to_json() const {
    if (!corruption) return {{"type", "exact"}};
    auto j = corruption->to_json();
    j["per_grid_point"] = per_grid_point;
    return j;
  }
};

struct ExperimentConfig {
  DistributionSpec target = UniformSpec{};
  NoiseKind kind = NoiseKind::Uniform;
  SamplerKind sampler = SamplerKind::TauLeaping;
  ScheduleConfig schedule;
  ScoreConfig score;
  std::uint64_t seed = 0;
  std::string output;
  std::string mode = "pmf";
  std::uint64_t n_paths = 10000;
  double slack = 10.0;
  nlohmann::json raw;
};

inline ScoreConfig score_config_from_json(const nlohmann::json& j) {
  ScoreConfig c;
  const std::string type = j.value("type", "exact");
  c.per_grid_point = j.value("per_grid_point", true);
  if (type == "exact") return c;
  CorruptionModel m;
  m.seed = j.value("seed", std::uint64_t{0});
  if (type == "lognormal") m.variant = LogNormal{j.at("sigma").get<double>()};
  else if (type == "constant_bias") m.variant = ConstantBias{j.at("factor").get<double>()};
  else throw ConfigError("unknown score type '" + type + "'");
  m.validate();
  c.corruption = m;
  return c;
}

inline ExperimentConfig experiment_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    c.raw = j;
    c.target = spec_from_json(j.at("target"));
    c.kind = parse_noise_kind(j.value("kind", "uniform"));
    c.sampler = j.contains("sampler") ? parse_sampler(j.at("sampler").get<std::string>())
                                      : (c.kind == NoiseKind::Uniform ? SamplerKind::TauLeaping : SamplerKind::ModifiedTtl);
    sampler_noise(c.sampler, c.kind);
    if (j.contains("schedule")) {
      const auto& s = j.at("schedule");
      c.schedule.recipe = parse_recipe(s.value("recipe", "constant"));
      c.schedule.T = s.value("T", 6.0);
      c.schedule.delta = s.value("delta", 0.0);
      c.schedule.kappa = s.value("kappa", 0.0);
      c.schedule.terminal_gap = s.value("terminal_gap", 0.0);
      if (c.schedule.recipe == ScheduleRecipe::Explicit) {
        c.schedule.grid = s.at("grid").get<std::vector<double>>();
        c.schedule.N = {static_cast<int>(c.schedule.grid.size()) - 1};
      } else if (s.contains("N")) {
        c.schedule.N = s.at("N").is_array() ? s.at("N").get<std::vector<int>>() : std::vector<int>{s.at("N").get<int>()};
      }
    }
    if (c.schedule.N.empty()) throw ConfigError("N list must be nonempty");
    for (std::size_t k = 0; k < c.schedule.N.size(); ++k) {
      if (c.schedule.N[k] < 1) throw ConfigError("N must be positive");
      if (k > 0 && c.schedule.N[k] <= c.schedule.N[k - 1]) throw ConfigError("N list must be ascending");
    }
    if (j.contains("score")) c.score = score_config_from_json(j.at("score"));
    c.seed = j.value("seed", std::uint64_t{0});
    c.output = j.value("output", std::string{});
    c.mode = j.value("mode", "pmf");
    if (c.mode != "pmf" && c.mode != "paths") throw ConfigError("mode must be pmf or paths");
    c.n_paths = j.value("n_paths", std::uint64_t{10000});
    c.slack = j.value("slack", 10.0);
    if (!(c.slack > 0.0)) throw ConfigError("slack must be positive");
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed experiment config: ") + ex.what());
  }
  return c;
}

inline nlohmann::json experiment_to_json(const ExperimentConfig& c) {
  nlohmann::json j = c.raw.is_object() ? c.raw : nlohmann::json::object();
  j["kind"] = to_string(c.kind);
  j["sampler"] = to_string(c.sampler);
  j["seed"] = c.seed;
  j["mode"] = c.mode;
  j["n_paths"] = c.n_paths;
  j["slack"] = c.slack;
  j["score"] = c.score.to_json();
  j["schedule"] = {{"recipe", to_string(c.schedule.recipe)}, {"T", c.schedule.T},         {"N", c.schedule.N},
                   {"delta", c.schedule.delta},              {"kappa", c.schedule.kappa}, {"terminal_gap", c.schedule.terminal_gap}};
  if (!c.schedule.grid.empty()) j["schedule"]["grid"] = c.schedule.grid;
  return j;
}

// q_delta on the process space: the law the sampler output is compared against.
inline DensePmf sampler_target(const DensePmf& q0, NoiseKind kind, double delta) {
  if (delta > 0.0) return propagate_forward(q0, kind, delta);
  return lift_for(kind, q0);
}

struct ConvergenceRow {
  int N = 0;
  double T = 0.0, delta = 0.0;
  double eps_score = 0.0;
  double kl = 0.0;
  bool kl_infinite = false;
  double tv = 0.0;
  double discarded = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const {
    return {{"N", N},
            {"T", T},
            {"delta", delta},
            {"eps_score", eps_score},
            {"kl", kl_infinite ? nlohmann::json("inf") : nlohmann::json(kl)},
            {"tv", tv},
            {"discarded", discarded},
            {"wall_seconds", wall_seconds}};
  }
};

struct SweepResult {
  std::vector<ConvergenceRow> rows;
  std::vector<nlohmann::json> run_manifests;
  std::vector<std::string> warnings;
  nlohmann::json manifest;
};

// One sampler run at a given N; returns the output law (empirical in path mode).
struct SingleRun {
  ConvergenceRow row;
  DensePmf output;
  nlohmann::json manifest;
};

inline SingleRun run_single(const ExperimentConfig& cfg, const DensePmf& q0, int N) {
  auto t0 = std::chrono::steady_clock::now();
  Schedule sched = cfg.schedule.make(N);
  const DensePmf init = initial_distribution(cfg.kind, q0.space(), sched.horizon);
  const DensePmf target = sampler_target(q0, cfg.kind, sched.delta);
  ScoreProvider exact = exact_score_provider(q0, cfg.kind);
  ScoreProvider est = cfg.score.provider(q0, cfg.kind);
  ConvergenceRow row;
  row.N = sched.steps();
  row.T = sched.horizon;
  row.delta = sched.delta;
  row.eps_score = cfg.score.corruption ? score_error_total(sched, est, exact) : 0.0;
  std::vector<double> out;
  nlohmann::json manifest;
  if (cfg.mode == "pmf") {
    SamplerRun run = run_sampler_pmf(init, cfg.sampler, sched, est);
    row.discarded = run.discarded_mass;
    out = run.output.mass();
    manifest = run.manifest;
  } else {
    PathRun run = run_sampler_paths(init, cfg.sampler, sched, est, cfg.n_paths, hash_keys({cfg.seed, static_cast<std::uint64_t>(N)}));
    out = run.empirical(init.space().size());
    manifest = run.manifest;
  }
  DensePmf output(init.space(), out);
  KlValue k = kl(target, output);
  row.kl = k.value;
  row.kl_infinite = k.infinite;
  row.tv = tv(target, output);
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {row, std::move(output), std::move(manifest)};
}

// One row per N. `on_row` sees each row as soon as it exists so partial results survive
// a resource failure later in the sweep.
inline SweepResult run_convergence_sweep(const ExperimentConfig& cfg,
                                         const std::function<void(const ConvergenceRow&)>& on_row = {}) {
  sampler_noise(cfg.sampler, cfg.kind);
  const DensePmf q0 = build(cfg.target);
  SweepResult res;
  for (int N : cfg.schedule.N) {
    SingleRun r = run_single(cfg, q0, N);
    for (const auto& w : r.manifest["schedule"]["warnings"]) res.warnings.push_back("N=" + std::to_string(N) + ": " + w.get<std::string>());
    res.rows.push_back(r.row);
    res.run_manifests.push_back(r.manifest);
    if (on_row) on_row(r.row);
  }
  if (cfg.mode == "pmf" && !cfg.score.corruption)
    for (std::size_t k = 1; k < res.rows.size(); ++k)
      if (res.rows[k].kl > res.rows[k - 1].kl + 1e-10)
        res.warnings.push_back("KL increased from N=" + std::to_string(res.rows[k - 1].N) + " to N=" + std::to_string(res.rows[k].N));
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : res.rows) rows.push_back(r.to_json());
  res.manifest = {{"config", experiment_to_json(cfg)}, {"seed", cfg.seed}, {"rows", rows},
                  {"runs", res.run_manifests}, {"warnings", res.warnings}};
  return res;
}

inline std::string sweep_csv(const std::vector<ConvergenceRow>& rows) {
  std::ostringstream os;
  os.precision(17);
  os << "N,T,delta,eps_score,kl,tv,discarded,wall_seconds\n";
  for (const auto& r : rows) {
    os << r.N << ',' << r.T << ',' << r.delta << ',' << r.eps_score << ',';
    if (r.kl_infinite) os << "inf";
    else os << r.kl;
    os << ',' << r.tv << ',' << r.discarded << ',' << r.wall_seconds << '\n';
  }
  return os.str();
}

struct LinearFit {
  double slope = 0.0, intercept = 0.0, r2 = 0.0;
  std::size_t points = 0;
};

inline LinearFit linear_fit(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("linear fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k] / n;
    my += y[k] / n;
  }
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxx += (x[k] - mx) * (x[k] - mx);
    sxy += (x[k] - mx) * (y[k] - my);
    syy += (y[k] - my) * (y[k] - my);
  }
  if (sxx <= 0.0) throw DomainError("linear fit needs distinct x values");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  f.points = x.size();
  return f;
}

// Slope of log(KL - KL_floor) against log N, with the floor taken as the KL at the
// largest N. Rows at or below the floor are dropped.
struct RateFit {
  LinearFit fit;
  double floor = 0.0;
};

inline RateFit convergence_rate(const std::vector<ConvergenceRow>& rows) {
  if (rows.size() < 3) throw DomainError("rate fit needs three or more rows");
  RateFit r;
  r.floor = rows.back().kl;
  std::vector<double> x, y;
  for (const auto& row : rows) {
    if (row.kl_infinite) throw DomainError("rate fit with infinite KL");
    if (row.kl - r.floor <= 0.0) continue;
    x.push_back(std::log(static_cast<double>(row.N)));
    y.push_back(std::log(row.kl - r.floor));
  }
  r.fit = linear_fit(x, y);
  return r;
}

struct BoundTerm {
  std::string name;
  double value = 0.0;
};

struct BoundReport {
  std::string check;
  int N = 0;
  double lhs = 0.0;
  std::vector<BoundTerm> terms;
  double rhs = 0.0;  // sum of terms, before slack
  double slack = 10.0;
  bool holds = false;
  nlohmann::json extra = nlohmann::json::object();

  double term(const std::string& name) const {
    for (const auto& t : terms)
      if (t.name == name) return t.value;
    throw DomainError("no bound term '" + name + "'");
  }
  nlohmann::json to_json() const {
    nlohmann::json ts = nlohmann::json::object();
    for (const auto& t : terms) ts[t.name] = t.value;
    return {{"check", check}, {"N", N},         {"lhs", lhs},     {"terms", ts},
            {"rhs", rhs},     {"slack", slack}, {"holds", holds}, {"extra", extra}};
  }
};

// sum_k h_k * integral of I over [T - t_{k+1}, T - t_k].
inline double schedule_weighted_info(const Schedule& sched, const std::function<double(double)>& info, double rel_tol = 1e-8) {
  double total = 0.0;
  for (int k = 0; k < sched.steps(); ++k) {
    double lo = sched.horizon - sched.grid[k + 1], hi = sched.horizon - sched.grid[k];
    total += sched.step(k) * integrate_adaptive_scalar(info, lo, hi, rel_tol, 1e-16);
  }
  return total;
}

namespace detail {
inline void finish(BoundReport& r) {
  r.rhs = 0.0;
  for (const auto& t : r.terms) r.rhs += t.value;
  r.holds = r.lhs <= r.slack * r.rhs;
}
}  // namespace detail

// KL(q_delta || output) of the modified sampler against eps_score + e^{-T} d log S + sum_k h_k int I.
inline BoundReport check_masking_upper_bound(const ExperimentConfig& cfg, int N) {
  if (cfg.kind != NoiseKind::Masking || cfg.sampler != SamplerKind::ModifiedTtl)
    throw ConfigError("masking upper bound needs the masking process and the modified sampler");
  ExperimentConfig c = cfg;
  c.mode = "pmf";
  const DensePmf q0 = build(c.target);
  SingleRun run = run_single(c, q0, N);
  Schedule sched = c.schedule.make(N);
  const auto& sp = q0.space();
  BoundReport r;
  r.check = "masking_upper_bound";
  r.N = sched.steps();
  r.slack = c.slack;
  r.lhs = run.row.kl_infinite ? INFINITY : run.row.kl;
  std::string route;
  auto info = info_profile_function(q0, InfoRoute::Auto, 20000, &route);
  r.terms = {{"eps_score", run.row.eps_score},
             {"initialization", std::exp(-sched.horizon) * sp.dim() * std::log(static_cast<double>(sp.vocab()))},
             {"discretization", schedule_weighted_info(sched, info)}};
  r.extra = {{"info_route", route}, {"schedule", sched.to_json()}};
  detail::finish(r);
  return r;
}

// sum_k h_k E_{q_{T-t_k}} sum_{i masked} sum_c s |log(s_hat / s)|.
inline double ttl_score_constant(const Schedule& sched, const ScoreProvider& est, const ScoreProvider& exact) {
  double total = 0.0;
  for (int k = 0; k < sched.steps(); ++k) {
    const double t = sched.remaining(k);
    ScoreField e = exact(k, t), h = est(k, t);
    const auto& sp = e.space();
    const auto& q = e.marginal();
    double acc = 0.0;
    for (StateIndex x = 0; x < sp.size(); ++x) {
      if (q[x] <= 0.0) continue;
      double inner = 0.0;
      for_each_reverse_pair(sp, NoiseKind::Masking, x, [&](int i, Symbol b) {
        double s = e(x, i, b);
        if (s > 0.0) inner += s * std::abs(std::log(h(x, i, b) / s));
      });
      acc += q[x] * inner;
    }
    total += sched.step(k) * acc;
  }
  return total;
}

// Truncated tau-leaping bound: adds kappa^3 N d and kappa C to the modified-sampler terms.
// The modified sampler on the same grid is reported alongside; it is expected to do no worse.
inline BoundReport check_ttl_bound(const ExperimentConfig& cfg, int N) {
  if (cfg.kind != NoiseKind::Masking || cfg.sampler != SamplerKind::TruncatedTtl)
    throw ConfigError("ttl bound needs the masking process and truncated tau-leaping");
  if (cfg.schedule.recipe != ScheduleRecipe::ExpThenConst || !(cfg.schedule.delta > 0.0))
    throw ConfigError("ttl bound needs the exponential-then-constant schedule with delta > 0");
  ExperimentConfig c = cfg;
  c.mode = "pmf";
  const DensePmf q0 = build(c.target);
  SingleRun run = run_single(c, q0, N);
  Schedule sched = c.schedule.make(N);
  const auto& sp = q0.space();
  ScoreProvider exact = exact_score_provider(q0, c.kind), est = c.score.provider(q0, c.kind);
  const double C = ttl_score_constant(sched, est, exact);
  const double kappa = sched.kappa;
  BoundReport r;
  r.check = "ttl_bound";
  r.N = sched.steps();
  r.slack = c.slack;
  r.lhs = run.row.kl_infinite ? INFINITY : run.row.kl;
  auto info = info_profile_function(q0, InfoRoute::Auto, 20000);
  r.terms = {{"eps_score", run.row.eps_score},
             {"initialization", std::exp(-sched.horizon) * sp.dim() * std::log(static_cast<double>(sp.vocab()))},
             {"discretization", schedule_weighted_info(sched, info)},
             {"kappa_cubed_N_d", kappa * kappa * kappa * sched.steps() * sp.dim()},
             {"kappa_C", kappa * C}};
  ExperimentConfig a = c;
  a.sampler = SamplerKind::ModifiedTtl;
  SingleRun alg = run_single(a, q0, N);
  const double alg_kl = alg.row.kl_infinite ? INFINITY : alg.row.kl;
  r.extra = {{"kappa", kappa},
             {"C", C},
             {"modified_kl", alg.row.kl_infinite ? nlohmann::json("inf") : nlohmann::json(alg_kl)},
             {"modified_not_worse", alg_kl <= r.lhs + 1e-12},
             {"schedule", sched.to_json()}};
  detail::finish(r);
  return r;
}

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  int bins = 0;
};

// Pearson goodness of fit of counts against probabilities. Bins with expected count
// below min_expected are pooled (smallest first) until each pooled bin reaches it.
inline ChiSquareResult chi_square_gof(const std::vector<double>& counts, const std::vector<double>& probs, double min_expected = 5.0) {
  if (counts.size() != probs.size()) throw DomainError("counts and probabilities differ in length");
  double n = 0.0;
  for (double c : counts) n += c;
  if (!(n > 0.0)) throw DomainError("no observations");
  std::vector<std::size_t> order(counts.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });
  std::vector<std::pair<double, double>> bins;  // (observed, expected)
  double obs = 0.0, exp = 0.0;
  for (std::size_t k : order) {
    if (probs[k] <= 0.0 && counts[k] > 0.0) return {INFINITY, 0, 0.0, 0};
    obs += counts[k];
    exp += n * probs[k];
    if (exp >= min_expected) {
      bins.emplace_back(obs, exp);
      obs = exp = 0.0;
    }
  }
  if (exp > 0.0 || obs > 0.0) {
    if (bins.empty()) bins.emplace_back(obs, exp);
    else {
      bins.back().first += obs;
      bins.back().second += exp;
    }
  }
  ChiSquareResult r;
  r.bins = static_cast<int>(bins.size());
  for (const auto& [o, e] : bins) r.statistic += (o - e) * (o - e) / e;
  r.dof = r.bins - 1;
  if (r.dof < 1) {
    r.p_value = 1.0;
    return r;
  }
  boost::math::chi_squared dist(r.dof);
  r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  return r;
}

// ---- identity suite ----

struct NamedTarget {
  std::string name;
  DensePmf pmf;
};

struct IdentityResult {
  std::string identity;
  std::string target;
  double max_dev = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string note;

  nlohmann::json to_json() const {
    return {{"identity", identity}, {"target", target}, {"max_dev", max_dev}, {"tolerance", tolerance}, {"pass", pass}, {"note", note}};
  }
};

struct IdentityReport {
  std::vector<IdentityResult> results;

  bool all_pass() const {
    return std::all_of(results.begin(), results.end(), [](const auto& r) { return r.pass; });
  }
  nlohmann::json to_json() const {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& r : results) a.push_back(r.to_json());
    return {{"all_pass", all_pass()}, {"results", a}};
  }
};

struct IdentitySuiteOptions {
  std::uint64_t seed = 20240917;
  int random_lsi_targets = 20;
  int ode_instances = 12;
  double martingale_tol = 1e-8;
  double fd_rel_tol = 1e-4;
  double exact_rel_tol = 1e-10;
  double control_rel_tol = 1e-4;
  double quadrature_rel_tol = 1e-3;
  double ode_tol = 1e-8;
};

inline DensePmf random_pmf(const StateSpace& sp, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> m(sp.size());
  for (auto& v : m) v = rng.exponential(1.0);
  return normalize(sp, std::move(m));
}

// Targets at d <= 4 that cover every structural family.
inline std::vector<NamedTarget> default_corpus(std::uint64_t seed = 20240917) {
  std::vector<NamedTarget> c;
  auto add = [&](const DistributionSpec& s) { c.push_back({spec_name(s), build(s)}); };
  add(two_point_mixture(3));
  add(XorSpec{3});
  add(StructureWithNoiseSpec{4, {0, 1}});
  add(ProductSpec{3, {0.2, 0.3, 0.5}});
  add(HmmSpec{4, 2, 2, 0.2, 0.1, {}});
  add(SbmSpec{3, 2, 0.8, 0.2});
  add(QuantizedLatentSpec{1, 3, 3, 0.5, 32});
  c.push_back({"random_d3_S2", random_pmf(StateSpace(3, Alphabet(2, false)), seed)});
  return c;
}

namespace detail {

inline double rel_dev(double a, double b, double floor) { return std::abs(a - b) / std::max(std::abs(b), floor); }

inline IdentityResult make_result(std::string id, std::string target, double dev, double tol, std::string note = {}) {
  return {std::move(id), std::move(target), dev, tol, dev <= tol, std::move(note)};
}

// Kernel row out of MASK for one modified step against RK4 on the time-varying rates
// s_hat(a) (e^{T - t_k} - 1) / (e^{T - t} - 1).
inline double modified_step_ode_gap(const ScoreField& s_hat, StateIndex xk, int coord, double tk, double tk1, double T) {
  const auto& sp = s_hat.space();
  const int S = sp.vocab();
  StepKernelSet ks = modified_ttl_step(xk, s_hat, tk, tk1, T, false);
  std::vector<double> rate(S);
  for (int a = 0; a < S; ++a) rate[a] = s_hat(xk, coord, a);
  const double scale = std::expm1(T - tk);
  OdeRhs f = [&](double t, const std::vector<double>& y, std::vector<double>& dy) {
    const double g = scale / std::expm1(T - t);
    double out = 0.0;
    for (int a = 0; a < S; ++a) {
      dy[a] = g * rate[a] * y[S];
      out += dy[a];
    }
    dy[S] = -out;
  };
  std::vector<double> y0(S + 1, 0.0);
  y0[S] = 1.0;
  std::vector<double> y = rk4_integrate(f, y0, tk, tk1, 1e-3);
  const double* row = ks.kernels[coord].matrix.row(S);
  double gap = 0.0;
  for (int b = 0; b <= S; ++b) gap = std::max(gap, std::abs(row[b] - y[b]));
  return gap;
}

}  // namespace detail

// Exact identities per corpus target plus corpus-independent random instances. An empty
// corpus yields an empty report.
inline IdentityReport run_identity_suite(const std::vector<NamedTarget>& corpus, const IdentitySuiteOptions& opt = {}) {
  IdentityReport rep;
  if (corpus.empty()) return rep;
  auto push = [&](IdentityResult r) { rep.results.push_back(std::move(r)); };
  const std::vector<std::pair<double, double>> pairs{{0.0, 0.5}, {0.2, 1.0}, {0.5, 1.5}, {1.0, 1.9}, {0.1, 0.3}};
  const double mart_T = 2.0;
  const std::vector<double> probe_times{0.1, 0.5, 1.0, 2.0};

  for (const auto& [name, q0] : corpus) {
    if (q0.space().size() > kDefaultDenseCap) throw ResourceError("corpus target exceeds the dense cap");
    const int d = q0.space().dim(), S = q0.space().vocab();

    for (NoiseKind kind : {NoiseKind::Uniform, NoiseKind::Masking}) {
      double dev = 0.0;
      for (auto [ell, t] : pairs) {
        MartingaleReport m = check_martingales(q0, kind, mart_T, ell, t);
        dev = std::max(dev, std::min(m.max_abs_dev, m.max_rel_dev));
      }
      push(detail::make_result(kind == NoiseKind::Uniform ? "martingale_uniform" : "martingale_masking", name, dev,
                               opt.martingale_tol, "min(abs, rel) deviation over 5 time pairs"));
    }

    // phi on a 50-point grid of [0.01, 5].
    std::vector<double> grid, vals;
    for (int j = 0; j < 50; ++j) {
      grid.push_back(0.01 + (5.0 - 0.01) * j / 49.0);
      vals.push_back(phi(q0, grid.back()));
    }
    double neg = 0.0, rise = 0.0, decay = 0.0;
    for (std::size_t j = 0; j < vals.size(); ++j) {
      neg = std::max(neg, -vals[j]);
      if (j + 1 < vals.size()) {
        rise = std::max(rise, vals[j + 1] - vals[j]);
        double slope = -(vals[j + 1] - vals[j]) / (grid[j + 1] - grid[j]);
        decay = std::max(decay, vals[j + 1] - slope);
      }
    }
    push(detail::make_result("phi_nonnegative", name, std::max(neg, 0.0), 0.0));
    push(detail::make_result("phi_nonincreasing", name, std::max(rise, 0.0), 1e-9));
    push(detail::make_result("phi_decay_rate", name, std::max(decay, 0.0), 1e-6,
                             "-(phi(t+h)-phi(t))/h >= phi(t+h) on the grid"));

    double fd = 0.0, push_dev = 0.0, t3 = 0.0;
    for (double t : probe_times) {
      const double h = 1e-4;
      double deriv = -(kl_to_uniform(q0, t + h) - kl_to_uniform(q0, t - h)) / (2.0 * h);
      double p = phi(q0, t);
      fd = std::max(fd, std::abs(deriv - p) / std::max(std::abs(p), 1e-6));
      push_dev = std::max(push_dev, detail::rel_dev(phi_pushforward(q0, t), p, 1e-12));
      IdentityGap g = uniform_entropy_identity(q0, t);
      t3 = std::max(t3, detail::rel_dev(g.lhs, g.rhs, 1e-12));
    }
    push(detail::make_result("phi_kl_derivative", name, fd, opt.fd_rel_tol, "central difference, h = 1e-4"));
    push(detail::make_result("phi_pushforward", name, push_dev, opt.exact_rel_tol));
    push(detail::make_result("entropy_identity", name, t3, opt.exact_rel_tol));

    ControlReport ctl = check_control_at_t(q0, 3.0, 1.0, 1.5);
    push(detail::make_result("control_at_t", name, detail::rel_dev(ctl.lhs, ctl.rhs, 1e-10), opt.control_rel_tol,
                             "relative to max(|rhs|, 1e-10)"));

    Correlations direct = correlations_direct(q0);
    QuadratureOptions qo;
    qo.rel_tol = 1e-5;
    CorrelationQuadrature quad = correlations_quadrature(q0, qo);
    double qdev = std::max(detail::rel_dev(quad.dual, direct.dual, 1e-9), detail::rel_dev(quad.total, direct.total, 1e-9));
    push(detail::make_result("correlation_quadrature", name, qdev, opt.quadrature_rel_tol, "B and C, quadrature vs entropies"));
    const double tol = 1e-6;
    push(detail::make_result("effective_correlation_order", name, std::max(0.0, quad.mixed - std::min(direct.dual, direct.total)), tol,
                             "D <= min(B, C)"));
    const double ceiling = d * std::log(static_cast<double>(S));
    push(detail::make_result("correlation_ceiling", name,
                             std::max({0.0, direct.dual - ceiling, direct.total - ceiling, quad.mixed - ceiling}), tol,
                             "B, C, D <= d log S"));
  }

  // Log-Sobolev decay on random targets (d = 3, S = 3).
  {
    double worst = 0.0;
    StateSpace sp(3, Alphabet(3, false));
    for (int j = 0; j < opt.random_lsi_targets; ++j) {
      DensePmf q0 = random_pmf(sp, hash_keys({opt.seed, 101, static_cast<std::uint64_t>(j)}));
      double k0 = kl_to_uniform(q0, 0.0);
      for (double t : probe_times) worst = std::max(worst, kl_to_uniform(q0, t) - std::exp(-t) * k0 * (1.0 + 1e-9));
    }
    push(detail::make_result("log_sobolev_decay", "random_d3_S3", std::max(worst, 0.0), 0.0,
                             std::to_string(opt.random_lsi_targets) + " random targets"));
  }

  // Modified-step kernel against the integrated Kolmogorov equation.
  {
    double worst = 0.0;
    for (int j = 0; j < opt.ode_instances; ++j) {
      Rng rng(hash_keys({opt.seed, 202, static_cast<std::uint64_t>(j)}));
      const int S = 2 + static_cast<int>(rng.below(3));
      StateSpace sp(2, Alphabet(S, false));
      DensePmf q0 = random_pmf(sp, hash_keys({opt.seed, 203, static_cast<std::uint64_t>(j)}));
      const double T = 1.0 + 4.0 * rng.uniform();
      double a = rng.uniform() * (T - 0.1), b = rng.uniform() * (T - 0.1);
      const double tk = std::min(a, b), tk1 = std::max(a, b) + 0.05;
      ScoreField s = ScoreField::exact(q0, NoiseKind::Masking, T - tk).corrupted({LogNormal{0.5}, rng.below(1000)});
      const StateSpace& ms = s.space();
      StateIndex xk = ms.pack({S, static_cast<int>(rng.below(S + 1))});
      worst = std::max(worst, detail::modified_step_ode_gap(s, xk, 0, tk, tk1, T));
    }
    push(detail::make_result("modified_step_ode", "random_instances", worst, opt.ode_tol, "RK4, step 1e-3"));
  }

  // Negative control: a corrupted score in the martingale must be caught.
  {
    const auto& q0 = corpus.front().pmf;
    DensePmf qa = propagate_forward(q0, NoiseKind::Uniform, mart_T - 1.0);
    ScoreField bad = ScoreField::from_marginal(qa, NoiseKind::Uniform, mart_T - 1.0).corrupted({LogNormal{0.3}, 7});
    MartingaleReport m = check_martingales(q0, NoiseKind::Uniform, mart_T, 0.5, 1.0, &bad);
    IdentityResult r{"negative_control_martingale", corpus.front().name, m.max_abs_dev, 1e-6, m.max_abs_dev > 1e-6,
                     "corrupted score; passes when the deviation is detected"};
    push(r);
  }
  return rep;
}

}  // namespace ddlab
