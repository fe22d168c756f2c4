#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "lipgame/lipgame.hpp"

using namespace lipgame;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kNotFound = 1;
constexpr int kInputError = 2;
constexpr int kBudgetError = 3;

struct Common {
  std::uint64_t budget = 10'000'000;
  unsigned threads = 1;
  double tol = 1e-9;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;

  Limits limits() const { return {budget, threads, tol}; }

  std::uint64_t need_seed(const std::string& command) const {
    if (!seed) throw InvalidInput(command + ": --seed is required");
    return *seed;
  }

  json inputs() const {
    json j{{"budget", budget}, {"threads", threads}, {"tol", tol}};
    if (seed) j["seed"] = *seed;
    return j;
  }
};

int emit(const Common& c, Report report, bool found = true) {
  write_json(report, c.out);
  return found ? kOk : kNotFound;
}

std::optional<MixedProfile> load_mixed(const std::optional<std::string>& path) {
  if (!path) return std::nullopt;
  return mixed_from_json(load_json_file(*path));
}

json parse_param_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return text;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tools for games with small Lipschitz constant"};
  app.require_subcommand(1);

  Common c;
  if (const char* env = std::getenv("LIPGAME_BUDGET")) {
    try {
      c.budget = std::stoull(env);
    } catch (const std::exception&) {
      std::cerr << "LIPGAME_BUDGET must be a positive integer\n";
      return kInputError;
    }
  }
  app.add_option("--budget", c.budget, "Cell budget for exhaustive operations")->check(CLI::PositiveNumber);
  app.add_option("--threads", c.threads, "Worker threads (results do not depend on it)")->check(CLI::PositiveNumber);
  app.add_option("--tol", c.tol, "Slack on equilibrium inequalities");
  app.add_option("--out", c.out, "Write the JSON result here instead of standard output");
  app.add_option("--seed", c.seed, "Seed for stochastic commands");

  std::string game_path;
  std::optional<std::string> mixed_path;
  double eps = 0.0;
  std::function<int()> action;

  auto* lip = app.add_subcommand("lipschitz", "Exact Lipschitz constant, or a sampled lower bound");
  lip->add_option("--game", game_path, "Game JSON")->required();
  std::optional<std::uint64_t> estimate_samples;
  lip->add_option("--estimate", estimate_samples, "Sample this many (profile, player, flip) triples instead of enumerating");
  lip->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      Report r{"lipschitz", c.inputs()};
      r.inputs["game"] = game_path;
      if (estimate_samples) {
        r.inputs["estimate"] = *estimate_samples;
        r.results["delta_lower_bound"] = lipschitz_constant_estimate(*g, *estimate_samples, c.need_seed("lipschitz --estimate"));
      } else {
        r.results["delta"] = lipschitz_constant_exact(*g, c.limits());
      }
      if (auto b = g->lipschitz_bound()) r.results["certified_bound"] = *b;
      return emit(c, std::move(r));
    };
  });

  auto* eta = app.add_subcommand("eta", "Deviation-gain Lipschitz constant");
  eta->add_option("--game", game_path, "Game JSON")->required();
  eta->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      Report r{"eta", c.inputs()};
      r.inputs["game"] = game_path;
      r.results["eta"] = eta_constant_exact(*g, c.limits());
      r.results["delta"] = lipschitz_constant_exact(*g, c.limits());
      return emit(c, std::move(r));
    };
  });

  auto* find = app.add_subcommand("find-pure", "Exhaustive search for pure eps-equilibria");
  find->add_option("--game", game_path, "Game JSON")->required();
  find->add_option("--eps", eps, "Equilibrium slack")->required()->check(CLI::NonNegativeNumber);
  find->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      const auto res = exhaustive_pure_search(*g, eps, c.limits());
      Report r{"find-pure", c.inputs()};
      r.inputs["game"] = game_path;
      r.inputs["eps"] = eps;
      r.results["count"] = res.count;
      r.results["profiles"] = g->profile_count();
      r.results["profile"] = res.first ? pure_to_json(*res.first) : json(nullptr);
      return emit(c, std::move(r), res.first.has_value());
    };
  });

  auto* purify = app.add_subcommand("purify", "Sample a mixed equilibrium until the draw is a pure eps-equilibrium");
  purify->add_option("--game", game_path, "Game JSON")->required();
  purify->add_option("--mixed", mixed_path, "Mixed profile JSON (default: uniform)");
  purify->add_option("--eps", eps, "Equilibrium slack")->required()->check(CLI::PositiveNumber);
  std::optional<std::uint64_t> max_tries;
  purify->add_option("--max-tries", max_tries, "Sample budget (default from the certificate)");
  purify->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      const MixedProfile mu = load_mixed(mixed_path).value_or(MixedProfile::uniform(g->strategy_counts()));
      SelfPurifyOptions opt;
      opt.max_tries = max_tries;
      opt.limits = c.limits();
      const auto res = self_purify(*g, mu, eps, c.need_seed("purify"), opt);
      Report r{"purify", c.inputs()};
      r.inputs["game"] = game_path;
      r.inputs["mixed"] = mixed_path ? json(*mixed_path) : json("uniform");
      r.inputs["eps"] = eps;
      if (max_tries) r.inputs["max_tries"] = *max_tries;
      r.results["found"] = res.profile.has_value();
      r.results["profile"] = res.profile ? pure_to_json(*res.profile) : json(nullptr);
      r.results["tries"] = res.tries;
      r.results["verified_equilibrium"] = res.verified_equilibrium;
      r.results["chain_holds"] = res.chain_holds;
      r.results["regret"] = res.regret;
      r.results["worst_deviation"] = res.worst_deviation;
      r.results["exact_expectations"] = res.exact_expectations;
      r.results["certificate"] = res.cert ? certificate_to_json(*res.cert) : json(nullptr);
      return emit(c, std::move(r), res.profile.has_value());
    };
  });

  auto* cert = app.add_subcommand("certificate", "Union-bound success probability of self-purification");
  int cert_n = 0, cert_m = 0;
  double cert_delta = 0.0;
  cert->add_option("--eps", eps, "Equilibrium slack")->required();
  cert->add_option("--n", cert_n, "Players")->required();
  cert->add_option("--m", cert_m, "Strategies per player")->required();
  cert->add_option("--delta", cert_delta, "Lipschitz constant")->required();
  cert->callback([&] {
    action = [&] {
      Report r{"certificate", c.inputs()};
      r.inputs["eps"] = eps;
      r.inputs["n"] = cert_n;
      r.inputs["m"] = cert_m;
      r.inputs["delta"] = cert_delta;
      r.results = certificate_to_json(certificate(eps, cert_delta, cert_n, cert_m));
      r.results["delta_trivial"] = delta_trivial(eps, cert_n);
      r.results["delta_main"] = delta_main(eps, cert_m, cert_n);
      return emit(c, std::move(r));
    };
  });

  auto* example = app.add_subcommand("example", "Write a built-in game as JSON");
  std::string family;
  int ex_k = 0, ex_n = 0, ex_m = 2;
  std::optional<double> ex_delta;
  example->add_option("family", family, "gb | mass-mp | restaurant | polymatrix")
      ->required()
      ->check(CLI::IsMember({"gb", "mass-mp", "restaurant", "polymatrix"}));
  example->add_option("--k", ex_k, "Size parameter for gb and mass-mp");
  example->add_option("--n", ex_n, "Size parameter for restaurant and polymatrix");
  example->add_option("--m", ex_m, "Strategies for polymatrix");
  example->add_option("--delta", ex_delta, "Lipschitz parameter");
  example->callback([&] {
    action = [&] {
      GamePtr g;
      if (family == "gb") {
        require(ex_k >= 1, "example gb: --k is required");
        const std::uint64_t seed = c.need_seed("example gb");
        const auto found = find_gb_matrix(ex_k, seed, 100, c.limits());
        std::cerr << "discrepancy matrix found after " << found.attempts << " attempt(s)\n";
        g = build_gb_game(found.matrix, ex_delta, seed);
      } else if (family == "mass-mp") {
        require(ex_k >= 1, "example mass-mp: --k is required");
        g = build_mass_mp_game(ex_k);
      } else if (family == "restaurant") {
        require(ex_n >= 1 && ex_delta.has_value(), "example restaurant: --n and --delta are required");
        g = build_restaurant_game(ex_n, *ex_delta);
      } else {
        require(ex_n >= 1 && ex_delta.has_value(), "example polymatrix: --n and --delta are required");
        g = polymatrix_random(ex_n, ex_m, *ex_delta, c.need_seed("example polymatrix"));
      }
      write_json(game_to_json(*g), c.out);
      return kOk;
    };
  });

  auto* disc = app.add_subcommand("verify-discrepancy", "Check the discrepancy property of a Gale-Berlekamp matrix");
  disc->add_option("--game", game_path, "Gale-Berlekamp game JSON")->required();
  std::string mode = "exhaustive";
  std::uint64_t disc_samples = 100'000;
  disc->add_option("--mode", mode, "exhaustive | monte-carlo")->check(CLI::IsMember({"exhaustive", "monte-carlo"}));
  disc->add_option("--samples", disc_samples, "Samples in monte-carlo mode");
  disc->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      const auto* gb = dynamic_cast<const GaleBerlekampGame*>(g.get());
      require(gb != nullptr, "verify-discrepancy: game must be gale_berlekamp");
      const DiscrepancyMode dm = mode == "exhaustive" ? DiscrepancyMode::exhaustive()
                                                      : DiscrepancyMode::monte_carlo(disc_samples, c.need_seed("verify-discrepancy"));
      const auto res = verify_discrepancy(gb->matrix(), dm, c.limits());
      Report r{"verify-discrepancy", c.inputs()};
      r.inputs["game"] = game_path;
      r.inputs["mode"] = mode;
      if (mode != "exhaustive") r.inputs["samples"] = disc_samples;
      r.results["holds"] = res.holds;
      r.results["worst_count"] = res.worst_count;
      r.results["worst_x"] = res.worst_x;
      r.results["checked"] = res.checked;
      return emit(c, std::move(r), res.holds);
    };
  });

  auto* anon = app.add_subcommand("anonymous-purify", "Pure approximate equilibrium of an anonymous game");
  anon->add_option("--game", game_path, "Anonymous game JSON")->required();
  double solver_tol = 1e-6;
  int max_iters = 4000;
  anon->add_option("--solver-tol", solver_tol, "Target slack of the auxiliary-game solver");
  anon->add_option("--max-iters", max_iters, "Damped best-response iterations per restart");
  anon->callback([&] {
    action = [&] {
      const auto g = game_from_json(load_json_file(game_path), c.limits());
      const auto* ag = dynamic_cast<const AnonymousGame*>(g.get());
      require(ag != nullptr, "anonymous-purify: game must be anonymous or restaurant");
      const auto res = anonymous_purify(*ag, solver_tol, c.need_seed("anonymous-purify"), max_iters);
      Report r{"anonymous-purify", c.inputs()};
      r.inputs["game"] = game_path;
      r.inputs["solver_tol"] = solver_tol;
      r.inputs["max_iters"] = max_iters;
      r.results["profile"] = pure_to_json(res.profile);
      r.results["max_regret"] = res.max_regret;
      r.results["bound"] = res.bound;
      r.results["within_bound"] = res.within_bound;
      r.results["chain_holds"] = res.chain_holds;
      r.results["solver"] = {{"converged", res.auxiliary.converged},
                             {"slack", res.auxiliary.slack},
                             {"iterations", res.auxiliary.iterations},
                             {"restarts", res.auxiliary.restarts}};
      r.results["rounding"] = {{"l1_gap", res.rounding.l1_gap},
                               {"max_opponent_gap", res.rounding.max_opponent_gap},
                               {"fractional", res.rounding.fractional},
                               {"pivots", res.rounding.pivots}};
      return emit(c, std::move(r), res.within_bound);
    };
  });

  auto* rep = app.add_subcommand("replicate", "Mixed eps-equilibrium through a pure equilibrium of the L-fold replica");
  rep->add_option("--game", game_path, "Base game JSON")->required();
  rep->add_option("--mixed", mixed_path, "Base mixed profile to lift for self-purify (default: uniform)");
  int L = 1;
  std::string method = "self-purify";
  rep->add_option("--L", L, "Replication factor")->required()->check(CLI::PositiveNumber);
  rep->add_option("--eps", eps, "Equilibrium slack")->required()->check(CLI::PositiveNumber);
  rep->add_option("--method", method, "self-purify | search")->check(CLI::IsMember({"self-purify", "search"}));
  rep->add_option("--max-tries", max_tries, "Sample budget for self-purify");
  rep->callback([&] {
    action = [&] {
      const auto base = game_from_json(load_json_file(game_path), c.limits());
      const auto m = method == "search" ? ReplicationMethod::search : ReplicationMethod::self_purify;
      const std::uint64_t seed = m == ReplicationMethod::search ? c.seed.value_or(0) : c.need_seed("replicate");
      SelfPurifyOptions opt;
      opt.max_tries = max_tries;
      opt.limits = c.limits();
      Report r{"replicate", c.inputs()};
      r.inputs["game"] = game_path;
      r.inputs["L"] = L;
      r.inputs["eps"] = eps;
      r.inputs["method"] = method;
      const auto res = nash_via_replication(base, eps, L, m, seed, load_mixed(mixed_path), opt);
      r.results["mu"] = mixed_to_json(res.mu);
      r.results["mixed_regret"] = res.mixed_regret;
      r.results["within_eps"] = res.within_eps;
      r.results["L"] = res.L;
      r.results["delta_replica"] = res.delta_replica ? json(*res.delta_replica) : json(nullptr);
      r.results["tries"] = res.tries;
      r.results["certificate"] = res.cert ? certificate_to_json(*res.cert) : json(nullptr);
      return emit(c, std::move(r), res.within_eps);
    };
  });

  auto* exp = app.add_subcommand("experiment", "Run a named experiment preset");
  std::string preset;
  std::vector<std::string> params;
  std::vector<std::string> names;
  for (const auto& [name, fn] : experiment_presets()) names.push_back(name);
  exp->add_option("name", preset, "Preset name")->required()->check(CLI::IsMember(names));
  exp->add_option("--param", params, "Override a preset parameter: key=value (value parsed as JSON when possible)");
  exp->callback([&] {
    action = [&] {
      json overrides = json::object();
      for (const auto& kv : params) {
        const auto eq = kv.find('=');
        require(eq != std::string::npos && eq > 0, "experiment: --param expects key=value, got '" + kv + "'");
        overrides[kv.substr(0, eq)] = parse_param_value(kv.substr(eq + 1));
      }
      if (c.seed) overrides["seed"] = *c.seed;
      Report r{"experiment", c.inputs()};
      r.inputs["name"] = preset;
      r.inputs["overrides"] = overrides;
      r.results = run_experiment(preset, overrides, c.limits());
      const bool pass = r.results.at("pass").get<bool>();
      return emit(c, std::move(r), pass);
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    return action();
  } catch (const BudgetExceeded& e) {
    std::cerr << "budget exceeded: " << e.what() << "\n";
    return kBudgetError;
  } catch (const NotFound& e) {
    std::cerr << "not found: " << e.what() << "\n";
    return kNotFound;
  } catch (const InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInputError;
  } catch (const json::exception& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kInputError;
  }
}
