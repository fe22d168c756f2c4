#pragma once

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "anonymous.hpp"
#include "counterexamples.hpp"
#include "errors.hpp"
#include "game.hpp"
#include "parallel.hpp"
#include "polymatrix.hpp"
#include "profile.hpp"
#include "purification.hpp"
#include "replication.hpp"

namespace lipgame {

using json = nlohmann::json;

inline constexpr const char* kVersion = "1.0.0";

// ---------------------------------------------------------------------------
// Games.

inline json game_to_json(const Game& g) {
  json j;
  j["kind"] = std::string(kind_name(g.kind()));
  switch (g.kind()) {
    case GameKind::explicit_table: {
      const auto& e = dynamic_cast<const ExplicitGame&>(g);
      j["n"] = e.players();
      j["strategies"] = e.strategy_counts();
      j["payoffs"] = e.table();
      break;
    }
    case GameKind::gale_berlekamp: {
      const auto& gb = dynamic_cast<const GaleBerlekampGame&>(g);
      j["k"] = gb.k();
      j["delta"] = gb.delta();
      if (gb.seed()) j["seed"] = *gb.seed();
      j["matrix"] = gb.matrix().rows();
      break;
    }
    case GameKind::mass_matching_pennies:
      j["k"] = dynamic_cast<const MassMatchingPenniesGame&>(g).k();
      break;
    case GameKind::restaurant: {
      const auto& r = dynamic_cast<const RestaurantGame&>(g);
      j["n"] = r.half();
      j["delta"] = r.delta();
      break;
    }
    case GameKind::anonymous: {
      const auto& a = dynamic_cast<const AnonymousGame&>(g);
      j["n"] = a.n();
      j["m"] = a.m();
      j["delta"] = a.delta();
      if (a.symmetric()) {
        j["symmetric"] = true;
        auto t = a.export_table();
        t.resize(static_cast<std::size_t>(a.m()) * a.opponents_lattice().size());
        j["F"] = std::move(t);
      } else {
        j["F"] = a.export_table();
      }
      break;
    }
    case GameKind::polymatrix: {
      const auto& p = dynamic_cast<const PolymatrixGame&>(g);
      j["n"] = p.n();
      j["m"] = p.m();
      j["delta"] = p.delta();
      if (p.seed()) {
        j["seed"] = *p.seed();
      } else {
        json phi = json::array();
        for (int a = 0; a < p.n(); ++a) {
          json row = json::array();
          for (int b = 0; b < p.n(); ++b) {
            std::vector<double> block;
            for (int x = 0; x < p.m(); ++x)
              for (int y = 0; y < p.m(); ++y) block.push_back(a == b ? 0.0 : p.phi(a, b, x, y));
            row.push_back(std::move(block));
          }
          phi.push_back(std::move(row));
        }
        j["phi"] = std::move(phi);
      }
      break;
    }
    case GameKind::replicated: {
      const auto& r = dynamic_cast<const ReplicatedGame&>(g);
      j["base"] = game_to_json(r.base());
      j["L"] = r.L();
      break;
    }
  }
  return j;
}

namespace detail {

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw InvalidInput(std::string("game json: missing field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("game json: bad field '") + key + "': " + e.what());
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return field<T>(j, key);
}

}  // namespace detail

inline GamePtr game_from_json(const json& j, const Limits& limits = {}) {
  require(j.is_object(), "game json: expected an object");
  const auto kind = detail::field<std::string>(j, "kind");
  if (kind == "explicit") {
    auto strategies = detail::field<std::vector<int>>(j, "strategies");
    if (auto n = detail::optional_field<int>(j, "n"))
      require(*n == static_cast<int>(strategies.size()), "game json: n does not match strategies");
    return std::make_shared<ExplicitGame>(std::move(strategies),
                                          detail::field<std::vector<std::vector<double>>>(j, "payoffs"), limits.budget);
  }
  if (kind == "gale_berlekamp") {
    const int k = detail::field<int>(j, "k");
    const auto seed = detail::optional_field<std::uint64_t>(j, "seed");
    const auto delta = detail::optional_field<double>(j, "delta");
    if (auto rows = detail::optional_field<std::vector<std::vector<int>>>(j, "matrix")) {
      SignMatrix m(std::move(*rows));
      require(m.k() == k, "game json: matrix size does not match k");
      return build_gb_game(m, delta, seed);
    }
    require(seed.has_value(), "game json: gale_berlekamp needs a matrix or a seed");
    return build_gb_game(find_gb_matrix(k, *seed, 100, limits).matrix, delta, seed);
  }
  if (kind == "mass_mp") return build_mass_mp_game(detail::field<int>(j, "k"));
  if (kind == "restaurant") return build_restaurant_game(detail::field<int>(j, "n"), detail::field<double>(j, "delta"));
  if (kind == "anonymous") {
    return std::make_shared<AnonymousGame>(detail::field<int>(j, "n"), detail::field<int>(j, "m"),
                                           detail::field<double>(j, "delta"), detail::field<std::vector<double>>(j, "F"),
                                           detail::optional_field<bool>(j, "symmetric").value_or(false));
  }
  if (kind == "polymatrix") {
    const int n = detail::field<int>(j, "n"), m = detail::field<int>(j, "m");
    const double delta = detail::field<double>(j, "delta");
    if (auto phi = detail::optional_field<std::vector<std::vector<std::vector<double>>>>(j, "phi"))
      return std::make_shared<PolymatrixGame>(n, m, delta, std::move(*phi));
    return polymatrix_random(n, m, delta, detail::field<std::uint64_t>(j, "seed"));
  }
  if (kind == "replicated") {
    require(j.contains("base"), "game json: replicated needs a base game");
    return replicate(game_from_json(j.at("base"), limits), detail::field<int>(j, "L"), limits);
  }
  throw InvalidInput("game json: unknown kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Profiles.

inline json mixed_to_json(const MixedProfile& mu) { return mu.distributions(); }

/// Accepts an array of per-player distributions or {"mixed": [...]}.
inline MixedProfile mixed_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("mixed") ? j.at("mixed") : j;
  try {
    return MixedProfile(arr.get<std::vector<std::vector<double>>>());
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("mixed profile json: ") + e.what());
  }
}

inline json pure_to_json(const PureProfile& a) { return a.strategies(); }

inline PureProfile pure_from_json(const json& j) {
  try {
    return PureProfile(j.get<std::vector<int>>());
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("pure profile json: ") + e.what());
  }
}

inline json certificate_to_json(const PurificationCertificate& c) {
  return {{"eps", c.eps},
          {"delta", c.delta},
          {"n", c.n},
          {"m", c.m},
          {"per_event_bound", c.per_event_bound},
          {"union_bound", c.union_bound},
          {"success_lower_bound", c.success_lower_bound}};
}

// ---------------------------------------------------------------------------
// Files.

inline json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw InvalidInput(origin + ": " + e.what());
  }
}

inline json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_json_text(ss.str(), path);
}

inline void write_json(const json& j, const std::optional<std::string>& path) {
  const std::string text = j.dump(2) + "\n";
  if (!path) {
    std::cout << text;
    return;
  }
  std::ofstream out(*path);
  if (!out) throw InvalidInput("cannot write " + *path);
  out << text;
}

// ---------------------------------------------------------------------------
// Reports.

struct Report {
  std::string command;
  json inputs = json::object();
  json results = json::object();
  std::string version = kVersion;

  bool operator==(const Report&) const = default;
};

inline void to_json(json& j, const Report& r) {
  j = json{{"command", r.command}, {"inputs", r.inputs}, {"results", r.results}, {"version", r.version}};
}

inline void from_json(const json& j, Report& r) {
  j.at("command").get_to(r.command);
  r.inputs = j.at("inputs");
  r.results = j.at("results");
  j.at("version").get_to(r.version);
}

/// Result fields with every "runtime_seconds" entry removed, for comparing
/// runs made under different thread counts.
inline json without_runtimes(json j) {
  if (j.is_object()) {
    j.erase("runtime_seconds");
    for (auto it = j.begin(); it != j.end(); ++it) *it = without_runtimes(*it);
  } else if (j.is_array()) {
    for (auto& value : j) value = without_runtimes(value);
  }
  return j;
}

}  // namespace lipgame
