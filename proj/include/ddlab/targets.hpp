#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "pmf_io.hpp"
#include "state_space.hpp"

namespace ddlab {

struct UniformSpec {
  int d = 2, S = 2;
};

// Independent coordinates sharing one marginal over [S].
struct ProductSpec {
  int d = 2;
  std::vector<double> marginal{0.5, 0.5};
};

struct DiracMixtureSpec {
  int d = 2, S = 2;
  std::vector<State> points;
  std::vector<double> weights;
};

// Uniform on even-parity binary strings.
struct XorSpec {
  int d = 3;
};

// I0 coordinates copy a fair bit b; the other coordinates are fair bits except the last,
// which is b plus the rest of them mod 2.
struct StructureWithNoiseSpec {
  int d = 6;
  std::vector<int> I0{0, 1, 2};
};

// Sticky latent chain on Z states (switch prob p to a uniformly chosen other state);
// token = latent with prob 1 - eta, else uniform. A Z x S emission table overrides that.
struct HmmSpec {
  int d = 6, Z = 2, S = 2;
  double p = 0.2, eta = 0.1;
  std::vector<std::vector<double>> emission;
};

// Adjacency bits of an n-vertex graph, labels uniform over [r]^n, edge prob p within a
// community and q across. Coordinates are the pairs (u < v) in lexicographic order.
struct SbmSpec {
  int n = 4, r = 2;
  double p = 0.8, q = 0.2;
};

// Latent z uniform on a grid^k lattice of cell centres in [0,1]^k, mapped by
// f_i(z) = (S/2)(1 + sin(2 pi (z_{i mod k} + i/d))), plus N(0, sigma^2) noise, then
// quantized by clip(floor(.), 0, S-1).
struct QuantizedLatentSpec {
  int k = 1, d = 4, S = 4;
  double sigma = 0.5;
  int grid = 64;
};

struct FileSpec {
  std::string path;
};

using DistributionSpec = std::variant<UniformSpec, ProductSpec, DiracMixtureSpec, XorSpec, StructureWithNoiseSpec, HmmSpec,
                                      SbmSpec, QuantizedLatentSpec, FileSpec>;

inline DiracMixtureSpec two_point_mixture(int d) {
  return {d, 2, {State(d, 0), State(d, 1)}, {0.5, 0.5}};
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

inline DensePmf build_one(const UniformSpec& s) { return DensePmf::uniform(StateSpace(s.d, Alphabet(s.S, false))); }

inline DensePmf build_one(const ProductSpec& s) {
  const int S = static_cast<int>(s.marginal.size());
  StateSpace sp(s.d, Alphabet(S, false));
  std::vector<double> m(sp.size());
  for (StateIndex x = 0; x < sp.size(); ++x) {
    double v = 1.0;
    for (int i = 0; i < s.d; ++i) v *= s.marginal[sp.digit(x, i)];
    m[x] = v;
  }
  return normalize(sp, std::move(m));
}

inline DensePmf build_one(const DiracMixtureSpec& s) {
  if (s.points.size() != s.weights.size() || s.points.empty()) throw ValidationError("mixture needs one weight per point");
  StateSpace sp(s.d, Alphabet(s.S, false));
  std::vector<double> m(sp.size(), 0.0);
  for (std::size_t k = 0; k < s.points.size(); ++k) {
    if (s.weights[k] < 0.0) throw ValidationError("mixture weights must be nonnegative");
    m[sp.pack(s.points[k])] += s.weights[k];
  }
  double tot = 0.0;
  for (double w : s.weights) tot += w;
  if (std::abs(tot - 1.0) > 1e-12) throw ValidationError("mixture weights must sum to 1");
  return normalize(sp, std::move(m));
}

inline DensePmf build_one(const XorSpec& s) {
  if (s.d < 2) throw DomainError("xor needs d >= 2");
  StateSpace sp(s.d, Alphabet(2, false));
  std::vector<double> m(sp.size(), 0.0);
  for (StateIndex x = 0; x < sp.size(); ++x) m[x] = std::popcount(x) % 2 == 0 ? 1.0 : 0.0;
  return normalize(sp, std::move(m));
}

inline void check_partition(const StructureWithNoiseSpec& s) {
  std::vector<int> I0 = s.I0;
  std::sort(I0.begin(), I0.end());
  if (I0.empty() || static_cast<int>(I0.size()) >= s.d) throw ValidationError("I0 must be a nonempty proper subset");
  if (std::adjacent_find(I0.begin(), I0.end()) != I0.end()) throw ValidationError("I0 has duplicates");
  if (I0.front() < 0 || I0.back() >= s.d) throw ValidationError("I0 index out of range");
}

inline DensePmf build_one(const StructureWithNoiseSpec& s) {
  check_partition(s);
  StateSpace sp(s.d, Alphabet(2, false));
  std::vector<bool> in0(s.d, false);
  for (int i : s.I0) in0[i] = true;
  std::vector<int> I1;
  for (int i = 0; i < s.d; ++i)
    if (!in0[i]) I1.push_back(i);
  const int last = I1.back();
  std::vector<double> m(sp.size(), 0.0);
  const int free_bits = static_cast<int>(I1.size()) - 1;
  for (int b = 0; b < 2; ++b)
    for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << free_bits); ++bits) {
      State x(s.d, 0);
      for (int i : s.I0) x[i] = b;
      int parity = b;
      for (int k = 0; k < free_bits; ++k) {
        x[I1[k]] = static_cast<int>((bits >> k) & 1u);
        parity ^= x[I1[k]];
      }
      x[last] = parity;
      m[sp.pack(x)] += 1.0;
    }
  return normalize(sp, std::move(m));
}

inline std::vector<std::vector<double>> hmm_emission(const HmmSpec& s) {
  if (!s.emission.empty()) {
    if (static_cast<int>(s.emission.size()) != s.Z) throw ValidationError("emission table needs Z rows");
    for (const auto& row : s.emission)
      if (static_cast<int>(row.size()) != s.S) throw ValidationError("emission rows need S entries");
    return s.emission;
  }
  if (s.Z > s.S) throw ValidationError("default emission needs Z <= S");
  std::vector<std::vector<double>> e(s.Z, std::vector<double>(s.S, s.eta / s.S));
  for (int z = 0; z < s.Z; ++z) e[z][z] += 1.0 - s.eta;
  return e;
}

inline DensePmf build_one(const HmmSpec& s) {
  if (s.Z < 2 || !(s.p >= 0.0 && s.p <= 1.0) || !(s.eta >= 0.0 && s.eta <= 1.0)) throw ValidationError("bad hmm parameters");
  StateSpace sp(s.d, Alphabet(s.S, false));
  const auto em = hmm_emission(s);
  const double stay = 1.0 - s.p, move = s.p / (s.Z - 1);
  std::vector<double> m(sp.size()), a(s.Z), next(s.Z);
  for (StateIndex x = 0; x < sp.size(); ++x) {
    for (int z = 0; z < s.Z; ++z) a[z] = em[z][sp.digit(x, 0)] / s.Z;
    for (int i = 1; i < s.d; ++i) {
      double tot = 0.0;
      for (double v : a) tot += v;
      for (int z = 0; z < s.Z; ++z) next[z] = (a[z] * stay + (tot - a[z]) * move) * em[z][sp.digit(x, i)];
      a.swap(next);
    }
    double px = 0.0;
    for (double v : a) px += v;
    m[x] = px;
  }
  return normalize(sp, std::move(m));
}

inline DensePmf build_one(const SbmSpec& s) {
  if (s.n < 2 || s.r < 1) throw ValidationError("bad sbm parameters");
  if (s.n > 5) throw ResourceError("sbm enumeration limited to n <= 5");
  std::vector<std::pair<int, int>> edges;
  for (int u = 0; u < s.n; ++u)
    for (int v = u + 1; v < s.n; ++v) edges.emplace_back(u, v);
  const int d = static_cast<int>(edges.size());
  StateSpace sp(d, Alphabet(2, false));
  std::vector<double> m(sp.size(), 0.0);
  int labelings = 1;
  for (int k = 0; k < s.n; ++k) labelings *= s.r;
  std::vector<int> lab(s.n);
  for (int code = 0; code < labelings; ++code) {
    int c = code;
    for (int k = 0; k < s.n; ++k) {
      lab[k] = c % s.r;
      c /= s.r;
    }
    for (StateIndex x = 0; x < sp.size(); ++x) {
      double w = 1.0 / labelings;
      for (int e = 0; e < d; ++e) {
        double pe = lab[edges[e].first] == lab[edges[e].second] ? s.p : s.q;
        w *= ((x >> e) & 1u) ? pe : 1.0 - pe;
      }
      m[x] += w;
    }
  }
  return normalize(sp, std::move(m));
}

inline double quantized_map(const QuantizedLatentSpec& s, const std::vector<double>& z, int i) {
  return 0.5 * s.S * (1.0 + std::sin(2.0 * std::numbers::pi * (z[i % s.k] + static_cast<double>(i) / s.d)));
}

inline DensePmf build_one(const QuantizedLatentSpec& s) {
  if (s.k < 1 || s.grid < 1 || !(s.sigma > 0.0)) throw ValidationError("bad quantized-latent parameters");
  double cells = std::pow(static_cast<double>(s.grid), s.k);
  if (cells > 1e6) throw ResourceError("latent grid too large");
  StateSpace sp(s.d, Alphabet(s.S, false));
  std::vector<double> m(sp.size(), 0.0);
  std::vector<double> z(s.k);
  std::vector<std::vector<double>> cond(s.d, std::vector<double>(s.S));
  for (long code = 0; code < static_cast<long>(cells); ++code) {
    long c = code;
    for (int j = 0; j < s.k; ++j) {
      z[j] = (static_cast<double>(c % s.grid) + 0.5) / s.grid;
      c /= s.grid;
    }
    for (int i = 0; i < s.d; ++i) {
      double mu = quantized_map(s, z, i);
      for (int a = 0; a < s.S; ++a) {
        double lo = a == 0 ? 0.0 : normal_cdf((a - mu) / s.sigma);
        double hi = a == s.S - 1 ? 1.0 : normal_cdf((a + 1 - mu) / s.sigma);
        cond[i][a] = hi - lo;
      }
    }
    for (StateIndex x = 0; x < sp.size(); ++x) {
      double w = 1.0 / cells;
      for (int i = 0; i < s.d; ++i) w *= cond[i][sp.digit(x, i)];
      m[x] += w;
    }
  }
  return normalize(sp, std::move(m));
}

inline DensePmf build_one(const FileSpec& s) { return load_pmf(s.path); }

}  // namespace detail

inline DensePmf build(const DistributionSpec& spec) {
  return std::visit([](const auto& s) { return detail::build_one(s); }, spec);
}

inline std::string spec_name(const DistributionSpec& spec) {
  struct V {
    std::string operator()(const UniformSpec& s) const { return "uniform_d" + std::to_string(s.d) + "_S" + std::to_string(s.S); }
    std::string operator()(const ProductSpec& s) const { return "product_d" + std::to_string(s.d); }
    std::string operator()(const DiracMixtureSpec& s) const { return "dirac_mixture_d" + std::to_string(s.d); }
    std::string operator()(const XorSpec& s) const { return "xor_d" + std::to_string(s.d); }
    std::string operator()(const StructureWithNoiseSpec& s) const { return "structure_with_noise_d" + std::to_string(s.d); }
    std::string operator()(const HmmSpec& s) const { return "hmm_d" + std::to_string(s.d); }
    std::string operator()(const SbmSpec& s) const { return "sbm_n" + std::to_string(s.n); }
    std::string operator()(const QuantizedLatentSpec& s) const { return "quantized_latent_d" + std::to_string(s.d); }
    std::string operator()(const FileSpec& s) const { return "file:" + s.path; }
  };
  return std::visit(V{}, spec);
}

// Operator norm bound of the Jacobian of the quantized-latent map, and the latent diameter.
inline double quantized_lipschitz(const QuantizedLatentSpec& s) {
  int per = (s.d + s.k - 1) / s.k;
  return std::numbers::pi * s.S * std::sqrt(static_cast<double>(per));
}
inline double quantized_diameter(const QuantizedLatentSpec& s) { return std::sqrt(static_cast<double>(s.k)); }

struct AnalyticValues {
  std::optional<double> dual_exact;   // B
  std::optional<double> total_exact;  // C
  std::optional<double> dual_bound;   // upper bound on B
  std::string source;
};

namespace detail {
inline bool is_two_point_mixture(const DiracMixtureSpec& s) {
  if (s.S != 2 || s.points.size() != 2) return false;
  if (std::abs(s.weights[0] - 0.5) > 1e-15 || std::abs(s.weights[1] - 0.5) > 1e-15) return false;
  State zeros(s.d, 0), ones(s.d, 1);
  return (s.points[0] == zeros && s.points[1] == ones) || (s.points[0] == ones && s.points[1] == zeros);
}
}  // namespace detail

inline AnalyticValues analytic_expectations(const DistributionSpec& spec) {
  const double ln2 = std::numbers::ln2;
  AnalyticValues v;
  if (auto* s = std::get_if<DiracMixtureSpec>(&spec); s && detail::is_two_point_mixture(*s)) {
    v.dual_exact = ln2;
    v.total_exact = (s->d - 1) * ln2;
    v.source = "two-point mixture";
  } else if (auto* x = std::get_if<XorSpec>(&spec)) {
    v.dual_exact = (x->d - 1) * ln2;
    v.total_exact = ln2;
    v.source = "parity";
  } else if (auto* w = std::get_if<StructureWithNoiseSpec>(&spec)) {
    // H(x) = |I1| log 2 and every coordinate is a function of the others.
    int n1 = w->d - static_cast<int>(w->I0.size());
    v.dual_exact = n1 * ln2;
    v.total_exact = static_cast<double>(w->I0.size()) * ln2;
    v.source = "structure with noise";
  } else if (std::holds_alternative<UniformSpec>(spec) || std::holds_alternative<ProductSpec>(spec)) {
    v.dual_exact = 0.0;
    v.total_exact = 0.0;
    v.source = "product";
  } else if (auto* h = std::get_if<HmmSpec>(&spec)) {
    v.dual_bound = h->p * h->d * std::log(h->Z / h->p);
    v.source = "hmm bound p d log(|Z|/p)";
  } else if (auto* g = std::get_if<SbmSpec>(&spec)) {
    v.dual_bound = g->n * std::log(static_cast<double>(g->r));
    v.source = "sbm bound n log r";
  } else if (auto* q = std::get_if<QuantizedLatentSpec>(&spec)) {
    v.dual_bound = q->k * std::log(2.0 + 2.0 * quantized_diameter(*q) * quantized_lipschitz(*q) / q->sigma);
    v.source = "quantized latent bound k log(2 + 2DL/sigma)";
  }
  return v;
}

// Closed-form I(t) for the structure-with-noise target, a = e^{-t}, m = 1 - a, by pair type:
//   both in I0:        log2 a^2 m^{n0-2} (1 - a^{n1})
//   both in I1:        log2 a^{n1} (1 - m^{n0})
//   one in each (x2):  log2 a^{n1+1} m^{n0-1}
inline double structure_with_noise_info(const StructureWithNoiseSpec& s, double t) {
  detail::check_partition(s);
  const double n0 = static_cast<double>(s.I0.size()), n1 = s.d - n0;
  const double a = std::exp(-t), m = -std::expm1(-t), ln2 = std::numbers::ln2;
  const double same0 = n0 >= 2 ? ln2 * a * a * std::pow(m, n0 - 2) * (1.0 - std::pow(a, n1)) : 0.0;
  const double same1 = ln2 * std::pow(a, n1) * (1.0 - std::pow(m, n0));
  const double cross = ln2 * std::pow(a, n1 + 1) * std::pow(m, n0 - 1);
  return n0 * (n0 - 1) * same0 + n1 * (n1 - 1) * same1 + 2.0 * n0 * n1 * cross;
}

inline DistributionSpec spec_from_json(const nlohmann::json& j) {
  try {
    const std::string type = j.at("type").get<std::string>();
    if (type == "uniform") return UniformSpec{j.at("d").get<int>(), j.value("S", 2)};
    if (type == "product") return ProductSpec{j.at("d").get<int>(), j.at("marginal").get<std::vector<double>>()};
    if (type == "dirac_mixture") {
      DiracMixtureSpec s;
      s.d = j.at("d").get<int>();
      s.S = j.value("S", 2);
      s.points = j.at("points").get<std::vector<State>>();
      s.weights = j.at("weights").get<std::vector<double>>();
      return s;
    }
    if (type == "two_point_mixture") return two_point_mixture(j.at("d").get<int>());
    if (type == "xor") return XorSpec{j.at("d").get<int>()};
    if (type == "structure_with_noise") return StructureWithNoiseSpec{j.at("d").get<int>(), j.at("I0").get<std::vector<int>>()};
    if (type == "hmm") {
      HmmSpec s;
      s.d = j.at("d").get<int>();
      s.Z = j.value("Z", 2);
      s.S = j.value("S", s.Z);
      s.p = j.value("p", 0.2);
      s.eta = j.value("eta", 0.1);
      if (j.contains("emission")) s.emission = j.at("emission").get<std::vector<std::vector<double>>>();
      return s;
    }
    if (type == "sbm") return SbmSpec{j.at("n").get<int>(), j.value("r", 2), j.value("p", 0.8), j.value("q", 0.2)};
    if (type == "quantized_latent")
      return QuantizedLatentSpec{j.value("k", 1), j.at("d").get<int>(), j.value("S", 4), j.value("sigma", 0.5), j.value("grid", 64)};
    if (type == "file") return FileSpec{j.at("path").get<std::string>()};
    throw ConfigError("unknown distribution type '" + type + "'");
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("malformed distribution spec: ") + ex.what());
  }
}

}  // namespace ddlab
