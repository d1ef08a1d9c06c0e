#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ddlab/ddlab.hpp"

namespace fs = std::filesystem;
using namespace ddlab;

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "out";
  std::optional<std::string> mode;
  std::optional<double> tolerance;
};

void add_common(CLI::App* app, CommonFlags& f, bool config_required = true) {
  auto* c = app->add_option("--config", f.config, "JSON config file");
  if (config_required) c->required();
  app->add_option("--seed", f.seed, "seed override");
  app->add_option("--out", f.out, "output directory")->capture_default_str();
  app->add_option("--mode", f.mode, "pmf or paths")->check(CLI::IsMember({"pmf", "paths"}));
  app->add_option("--tolerance", f.tolerance, "tolerance override");
}

nlohmann::json read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError("cannot parse config " + path + ": " + ex.what());
  }
}

// A bare distribution spec or an object holding one under "target".
DistributionSpec target_of(const nlohmann::json& j) { return spec_from_json(j.contains("target") ? j.at("target") : j); }

ExperimentConfig experiment_of(const CommonFlags& f) {
  nlohmann::json j = read_config(f.config);
  if (f.seed) j["seed"] = *f.seed;
  if (f.mode) j["mode"] = *f.mode;
  return experiment_from_json(j);
}

int cmd_build(const CommonFlags& f) {
  nlohmann::json j = read_config(f.config);
  DistributionSpec spec = target_of(j);
  DensePmf p = build(spec);
  save_json(fs::path(f.out) / "pmf.json", pmf_to_json(p, 0.0));
  AnalyticValues a = analytic_expectations(spec);
  Correlations c = correlations_direct(p);
  nlohmann::json summary = {{"spec", j}, {"name", spec_name(spec)}, {"entropy", entropy(p)}, {"B", c.dual}, {"C", c.total}};
  if (a.dual_exact) summary["B_expected"] = *a.dual_exact;
  if (a.total_exact) summary["C_expected"] = *a.total_exact;
  if (a.dual_bound) summary["B_bound"] = *a.dual_bound;
  save_json(fs::path(f.out) / "build.json", summary);
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_forward(const CommonFlags& f) {
  nlohmann::json j = read_config(f.config);
  DensePmf q0 = build(target_of(j));
  NoiseKind kind = parse_noise_kind(j.value("kind", "uniform"));
  auto times = j.value("times", std::vector<double>{0.5, 1.0, 2.0});
  std::string mode = f.mode.value_or(j.value("mode", "pmf"));
  std::uint64_t seed = f.seed.value_or(j.value("seed", std::uint64_t{0}));
  if (mode == "pmf") {
    nlohmann::json all = nlohmann::json::array();
    for (double t : times) all.push_back({{"t", t}, {"pmf", pmf_to_json(propagate_forward(q0, kind, t), 0.0)}});
    save_json(fs::path(f.out) / "forward.json", {{"config", j}, {"kind", to_string(kind)}, {"marginals", all}});
  } else {
    double horizon = 0.0;
    for (double t : times) horizon = std::max(horizon, t);
    std::uint64_t n = j.value("n_paths", std::uint64_t{10});
    nlohmann::json paths = nlohmann::json::array();
    DensePmf lifted = lift_for(kind, q0);
    for (std::uint64_t p = 0; p < n; ++p) {
      Rng rng(hash_keys({seed, p}));
      paths.push_back(path_to_json(lifted.space(), sample_forward_path(q0, kind, horizon, rng)));
    }
    save_json(fs::path(f.out) / "forward_paths.json", {{"config", j}, {"seed", seed}, {"horizon", horizon}, {"paths", paths}});
  }
  return 0;
}

int cmd_score(const CommonFlags& f) {
  nlohmann::json j = read_config(f.config);
  DensePmf q0 = build(target_of(j));
  NoiseKind kind = parse_noise_kind(j.value("kind", "uniform"));
  double t = j.value("time", 1.0);
  ScoreField field = ScoreField::exact(q0, kind, t);
  if (j.contains("score")) {
    ScoreConfig sc = score_config_from_json(j.at("score"));
    if (sc.corruption) field = field.corrupted(*sc.corruption);
  }
  save_json(fs::path(f.out) / "scores.json", {{"config", j}, {"provenance", field.provenance()}, {"scores", score_dump(field)}});
  return 0;
}

int cmd_sample(const CommonFlags& f) {
  ExperimentConfig cfg = experiment_of(f);
  DensePmf q0 = build(cfg.target);
  SingleRun run = run_single(cfg, q0, cfg.schedule.N.front());
  nlohmann::json manifest = {{"config", experiment_to_json(cfg)}, {"row", run.row.to_json()}, {"run", run.manifest}};
  save_json(fs::path(f.out) / "output_pmf.json", pmf_to_json(run.output, 0.0));
  save_json(fs::path(f.out) / "manifest.json", manifest);
  std::cout << run.row.to_json().dump() << "\n";
  return 0;
}

int cmd_metrics(const CommonFlags& f) {
  nlohmann::json j = read_config(f.config);
  DensePmf q0 = build(target_of(j));
  QuadratureOptions qo;
  if (f.tolerance) qo.rel_tol = *f.tolerance;
  Correlations c = correlations_direct(q0);
  CorrelationQuadrature quad = correlations_quadrature(q0, qo);
  nlohmann::json out = {{"config", j}, {"entropy", entropy(q0)}, {"B_direct", c.dual}, {"C_direct", c.total}, {"quadrature", quad.to_json()}};
  auto info = info_profile_function(q0, InfoRoute::Auto, qo.dense_limit);
  std::vector<std::pair<double, double>> irows, prows;
  const int points = j.value("profile_points", 50);
  const double t_hi = j.value("profile_t_max", 5.0);
  for (int k = 0; k < points; ++k) {
    double t = 0.01 + (t_hi - 0.01) * k / std::max(1, points - 1);
    irows.emplace_back(t, info(t));
    if (j.value("phi_profile", true)) prows.emplace_back(t, phi(q0, t));
  }
  write_text(fs::path(f.out) / "info_profile.csv", profile_csv(irows, "I"));
  if (!prows.empty()) write_text(fs::path(f.out) / "phi_profile.csv", profile_csv(prows, "phi"));
  save_json(fs::path(f.out) / "metrics.json", out);
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const CommonFlags& f) {
  ExperimentConfig cfg = experiment_of(f);
  const fs::path dir(f.out);
  fs::create_directories(dir);
  std::ofstream partial(dir / "sweep_partial.csv");
  partial << sweep_csv({});
  SweepResult res = run_convergence_sweep(cfg, [&](const ConvergenceRow& r) {
    std::string line = sweep_csv({r});
    partial << line.substr(line.find('\n') + 1) << std::flush;
  });
  partial.close();
  fs::remove(dir / "sweep_partial.csv");
  write_text(dir / "sweep.csv", sweep_csv(res.rows));
  nlohmann::json manifest = res.manifest;
  bool ok = true;
  if (res.rows.size() >= 3) {
    try {
      RateFit rf = convergence_rate(res.rows);
      manifest["rate_fit"] = {{"slope", rf.fit.slope}, {"r2", rf.fit.r2}, {"floor", rf.floor}, {"points", rf.fit.points}};
    } catch (const DomainError& ex) {
      manifest["rate_fit"] = {{"error", ex.what()}};
    }
  }
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& name : cfg.raw.value("checks", std::vector<std::string>{})) {
    BoundReport rep;
    int N = cfg.schedule.N.back();
    if (name == "masking_upper_bound") rep = check_masking_upper_bound(cfg, N);
    else if (name == "ttl_bound") rep = check_ttl_bound(cfg, N);
    else throw ConfigError("unknown check '" + name + "'");
    ok = ok && rep.holds;
    checks.push_back(rep.to_json());
  }
  manifest["checks"] = checks;
  save_json(dir / "manifest.json", manifest);
  std::cout << sweep_csv(res.rows);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& c : checks) std::cout << c["check"].get<std::string>() << ": " << (c["holds"].get<bool>() ? "holds" : "VIOLATED") << "\n";
  return ok ? 0 : 1;
}

int cmd_verify(const CommonFlags& f) {
  std::vector<NamedTarget> corpus;
  IdentitySuiteOptions opt;
  nlohmann::json j = f.config.empty() ? nlohmann::json::object() : read_config(f.config);
  if (f.seed) opt.seed = *f.seed;
  else opt.seed = j.value("seed", opt.seed);
  if (f.tolerance) opt.martingale_tol = opt.exact_rel_tol = *f.tolerance;
  if (!j.contains("corpus") || j.at("corpus") == "default") {
    corpus = default_corpus(opt.seed);
  } else {
    for (const auto& s : j.at("corpus")) {
      DistributionSpec spec = spec_from_json(s);
      corpus.push_back({spec_name(spec), build(spec)});
    }
  }
  IdentityReport rep = run_identity_suite(corpus, opt);
  save_json(fs::path(f.out) / "identities.json", rep.to_json());
  for (const auto& r : rep.results)
    std::printf("%-30s %-28s dev=%.3e tol=%.1e %s\n", r.identity.c_str(), r.target.c_str(), r.max_dev, r.tolerance,
                r.pass ? "PASS" : "FAIL");
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact-law toolkit for discrete diffusion samplers"};
  app.require_subcommand(1);
  CommonFlags f;
  struct Cmd {
    const char* name;
    const char* help;
    int (*run)(const CommonFlags&);
    bool config_required;
  };
  const Cmd cmds[] = {{"build", "build a target distribution and dump its pmf", cmd_build, true},
                      {"forward", "propagate or sample the forward process", cmd_forward, true},
                      {"score", "tabulate exact or corrupted scores", cmd_score, true},
                      {"sample", "single sampler run", cmd_sample, true},
                      {"metrics", "entropy, B, C, D and I(t), phi(t) profiles", cmd_metrics, true},
                      {"sweep", "convergence sweep and bound checks", cmd_sweep, true},
                      {"verify", "identity suite", cmd_verify, false}};
  std::vector<std::pair<CLI::App*, const Cmd*>> subs;
  for (const auto& c : cmds) {
    auto* sub = app.add_subcommand(c.name, c.help);
    add_common(sub, f, c.config_required);
    subs.emplace_back(sub, &c);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  try {
    for (auto& [sub, c] : subs)
      if (sub->parsed()) return c->run(f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
