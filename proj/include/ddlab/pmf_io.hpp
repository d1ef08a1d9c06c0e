#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "state_space.hpp"

namespace ddlab {

using nlohmann::json;

// {"dim", "vocab_size", "has_mask", "entries": [[symbols, mass], ...]}; omitted states carry zero mass.
inline json pmf_to_json(const DensePmf& p, double min_mass = 0.0) {
  const auto& sp = p.space();
  json entries = json::array();
  for (StateIndex x = 0; x < sp.size(); ++x)
    if (p[x] > min_mass) entries.push_back(json::array({sp.unpack(x), p[x]}));
  return json{{"dim", sp.dim()},
              {"vocab_size", sp.vocab()},
              {"has_mask", sp.has_mask()},
              {"entries", entries}};
}

inline DensePmf pmf_from_json(const json& j) {
  try {
    int d = j.at("dim").get<int>();
    int s = j.at("vocab_size").get<int>();
    bool mask = j.value("has_mask", false);
    StateSpace sp(d, Alphabet(s, mask));
    std::vector<double> raw(sp.size(), 0.0);
    for (const auto& e : j.at("entries")) {
      if (!e.is_array() || e.size() != 2) throw ValidationError("entry must be [state, mass]");
      State st = e[0].get<State>();
      double m = e[1].get<double>();
      if (m < 0.0) throw ValidationError("negative mass in distribution file");
      raw[sp.pack(st)] += m;
    }
    return normalize(sp, std::move(raw));
  } catch (const json::exception& ex) {
    throw ValidationError(std::string("malformed distribution json: ") + ex.what());
  } catch (const DomainError& ex) {
    throw ValidationError(std::string("invalid state in distribution json: ") + ex.what());
  }
}

inline DensePmf load_pmf(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& ex) {
    throw ValidationError("cannot parse " + path + ": " + ex.what());
  }
  return pmf_from_json(j);
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
}

inline void save_json(const std::filesystem::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

}  // namespace ddlab
