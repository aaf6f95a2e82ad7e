#pragma once

// Batch commands behind the `pgcop` executable: simulate, fit, predict and
// compare. Each command reads one JSON config, validates everything before
// computing, and writes its outputs atomically.
//
// Exit codes: 0 success, 2 validation error, 3 numerical failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "pgcop/copula.hpp"
#include "pgcop/diagnostics.hpp"
#include "pgcop/inference.hpp"
#include "pgcop/io.hpp"
#include "pgcop/joint_model.hpp"

namespace pgcop::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_validation = 2;
inline constexpr int exit_numerical = 3;

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Options {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  bool degrees = false;
  std::size_t chains = 1;
  std::filesystem::path out_dir = ".";
};

using json = nlohmann::json;

namespace detail {

struct LoadedConfig {
  json doc;
  std::string raw;
  std::filesystem::path base;  // relative paths resolve against the config's directory
};

inline LoadedConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  LoadedConfig c;
  c.raw = ss.str();
  try {
    c.doc = json::parse(c.raw);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  if (!c.doc.is_object()) throw ValidationError("config must be a JSON object");
  c.base = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  return c;
}

inline void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, _] : obj.items())
    if (!allowed.contains(key)) throw ValidationError("unknown key '" + key + "' in " + where);
}

inline std::filesystem::path resolve(const LoadedConfig& c, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : c.base / path;
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.contains(key)) throw ValidationError("missing key '" + key + "' in " + where);
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError("bad value for '" + key + "' in " + where + ": " + e.what());
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, T fallback, const std::string& where) {
  return obj.contains(key) ? get<T>(obj, key, where) : fallback;
}

inline std::string compact_echo(const LoadedConfig& c) { return c.doc.dump(); }

inline ModelParams parse_model(const json& doc) {
  const auto family = parse_family(get<std::string>(doc, "family", "config"));
  const auto triples = get<std::vector<std::vector<double>>>(doc, "marginals", "config");
  std::vector<MarginalParams> marginals;
  for (const auto& t : triples) {
    if (t.size() != 3) throw ValidationError("each marginal must be [alpha1, alpha2, beta]");
    marginals.emplace_back(t[0], t[1], t[2]);
  }
  const std::size_t m = marginals.size();
  if (m < 2) throw ValidationError("at least two marginals are required");
  if (doc.contains("rho") == doc.contains("correlation"))
    throw ValidationError("give exactly one of 'rho' (upper triangle, row-wise) or 'correlation' (full matrix)");
  CorrelationMatrix r = doc.contains("rho")
                            ? CorrelationMatrix::from_upper(m, get<std::vector<double>>(doc, "rho", "config"))
                            : CorrelationMatrix(Matrix::from_rows(
                                  get<std::vector<std::vector<double>>>(doc, "correlation", "config")));
  if (family == CopulaFamily::StudentT) {
    return ModelParams(std::move(marginals), CopulaParams::student_t(get<double>(doc, "nu", "config"), std::move(r)));
  }
  if (doc.contains("nu")) throw ValidationError("'nu' is only valid for the t family");
  return ModelParams(std::move(marginals), CopulaParams::gaussian(std::move(r)));
}

inline GammaPrior parse_gamma(const json& v, const std::string& where) {
  const auto pair = v.get<std::vector<double>>();
  if (pair.size() != 2) throw ValidationError(where + " must be [shape, rate]");
  GammaPrior g{pair[0], pair[1]};
  if (!g.valid()) throw ValidationError(where + " hyperparameters must be positive");
  return g;
}

inline MarginalPrior parse_marginal_prior(const json& obj, const std::string& where) {
  reject_unknown(obj, {"alpha1", "alpha2", "beta"}, where);
  MarginalPrior p;
  if (obj.contains("alpha1")) p.alpha1 = parse_gamma(obj["alpha1"], where + ".alpha1");
  if (obj.contains("alpha2")) p.alpha2 = parse_gamma(obj["alpha2"], where + ".alpha2");
  if (obj.contains("beta")) p.beta = parse_gamma(obj["beta"], where + ".beta");
  return p;
}

/// {"alpha1": [a, b], "alpha2": [c, d], "beta": [e, f], "nu_minus_two": [g, h]}
/// or {"marginals": [{...}, ...], "nu_minus_two": [...]}.
inline PriorSpec parse_prior(const json& obj) {
  reject_unknown(obj, {"alpha1", "alpha2", "beta", "marginals", "nu_minus_two"}, "prior");
  PriorSpec p;
  if (obj.contains("marginals")) {
    if (obj.contains("alpha1") || obj.contains("alpha2") || obj.contains("beta"))
      throw ValidationError("prior: use either shared alpha1/alpha2/beta or a 'marginals' list, not both");
    p.marginals.clear();
    for (const auto& e : obj["marginals"]) p.marginals.push_back(parse_marginal_prior(e, "prior.marginals[]"));
  } else {
    json shared = json::object();
    for (const char* k : {"alpha1", "alpha2", "beta"})
      if (obj.contains(k)) shared[k] = obj[k];
    p.marginals = {parse_marginal_prior(shared, "prior")};
  }
  if (obj.contains("nu_minus_two")) p.nu_minus_two = parse_gamma(obj["nu_minus_two"], "prior.nu_minus_two");
  return p;
}

inline McmcConfig parse_mcmc(const json& obj) {
  const std::string w = "mcmc";
  reject_unknown(obj,
                 {"iterations", "burn_in", "thin", "seed", "initial_step", "rho_step", "nu_step", "initial_nu",
                  "adapt_window", "stage2_burn_in", "stage2_sweeps", "target_acceptance"},
                 w);
  McmcConfig c;
  c.iterations = get_or<std::size_t>(obj, "iterations", c.iterations, w);
  c.burn_in = get_or<std::size_t>(obj, "burn_in", c.burn_in, w);
  c.thin = get_or<std::size_t>(obj, "thin", c.thin, w);
  c.seed = get_or<std::uint64_t>(obj, "seed", c.seed, w);
  c.initial_step = get_or<double>(obj, "initial_step", c.initial_step, w);
  c.rho_step = get_or<double>(obj, "rho_step", c.rho_step, w);
  c.nu_step = get_or<double>(obj, "nu_step", c.nu_step, w);
  c.initial_nu = get_or<double>(obj, "initial_nu", c.initial_nu, w);
  c.adapt_window = get_or<std::size_t>(obj, "adapt_window", c.adapt_window, w);
  c.stage2_burn_in = get_or<std::size_t>(obj, "stage2_burn_in", c.stage2_burn_in, w);
  c.stage2_sweeps = get_or<std::size_t>(obj, "stage2_sweeps", c.stage2_sweeps, w);
  c.target_acceptance = get_or<double>(obj, "target_acceptance", c.target_acceptance, w);
  return c;
}

template <class Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numerical;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
  } catch (const DimensionMismatch& e) {
    err << "error: " << e.what() << '\n';
  } catch (const NotPositiveDefinite& e) {
    err << "error: " << e.what() << '\n';
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
  }
  return exit_validation;
}

inline std::filesystem::path numbered(const std::filesystem::path& dir, const std::string& stem, const std::string& ext,
                                      std::size_t k, std::size_t total) {
  return dir / (total == 1 ? stem + ext : stem + "_" + std::to_string(k + 1) + ext);
}

}  // namespace detail

/// Config keys: family, marginals, rho | correlation, nu (t only), n, seed, output.
inline int cmd_simulate(const Options& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::load_config(opt.config);
    detail::reject_unknown(cfg.doc, {"family", "marginals", "rho", "correlation", "nu", "n", "seed", "output"}, "config");
    const ModelParams params = detail::parse_model(cfg.doc);
    const auto n = detail::get<std::size_t>(cfg.doc, "n", "config");
    if (n < 1) throw ValidationError("n must be positive");
    const std::uint64_t seed = opt.seed.value_or(detail::get_or<std::uint64_t>(cfg.doc, "seed", 1, "config"));
    const auto output = opt.out_dir / detail::get_or<std::string>(cfg.doc, "output", "data.csv", "config");

    std::mt19937_64 rng(seed);
    const Dataset data = simulate_dataset(params, n, rng);
    atomic_write(output, [&](std::ostream& os) { write_dataset_csv(data, os, opt.degrees); });
    out << "seed: " << seed << '\n' << "wrote " << data.size() << "x" << data.dimension() << " dataset to " << output.string() << '\n';
    return exit_ok;
  });
}

/// Config keys: data, family, degrees, prior, mcmc, level, chains.
inline int cmd_fit(const Options& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::load_config(opt.config);
    detail::reject_unknown(cfg.doc, {"data", "family", "degrees", "prior", "mcmc", "level", "chains"}, "config");
    const auto family = parse_family(detail::get<std::string>(cfg.doc, "family", "config"));
    const bool degrees = opt.degrees || detail::get_or<bool>(cfg.doc, "degrees", false, "config");
    const Dataset data = read_dataset_csv(detail::resolve(cfg, detail::get<std::string>(cfg.doc, "data", "config")), degrees);
    if (data.dimension() < 2) throw ValidationError("fitting needs at least two angle columns, found " + std::to_string(data.dimension()));

    const PriorSpec prior = cfg.doc.contains("prior") ? detail::parse_prior(cfg.doc["prior"]) : PriorSpec{};
    prior.validate(data.dimension());
    McmcConfig mcmc = cfg.doc.contains("mcmc") ? detail::parse_mcmc(cfg.doc["mcmc"]) : McmcConfig{};
    if (opt.seed) mcmc.seed = *opt.seed;
    mcmc.validate();
    const double level = detail::get_or<double>(cfg.doc, "level", 0.95, "config");
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("level must lie in (0, 1)");
    const std::size_t chains = opt.chains > 1 ? opt.chains : detail::get_or<std::size_t>(cfg.doc, "chains", 1, "config");
    if (chains < 1) throw ValidationError("chains must be at least 1");

    // Independent chains, seeds seed, seed+1, ...; each thread owns its state.
    std::vector<std::optional<Chain>> results(chains);
    std::vector<std::exception_ptr> errors(chains);
    {
      std::vector<std::jthread> workers;
      for (std::size_t k = 0; k < chains; ++k) {
        workers.emplace_back([&, k] {
          try {
            McmcConfig c = mcmc;
            c.seed = mcmc.seed + k;
            results[k] = run_two_stage(data, family, prior, c);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
    }
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);

    const std::string echo = detail::compact_echo(cfg);
    for (std::size_t k = 0; k < chains; ++k) {
      const Chain& chain = *results[k];
      const Summary summary = summarize(chain, level);
      const auto chain_path = detail::numbered(opt.out_dir, "chain", ".csv", k, chains);
      const auto meta_path = detail::numbered(opt.out_dir, "chain", ".meta.txt", k, chains);
      const auto summary_path = detail::numbered(opt.out_dir, "summary", ".json", k, chains);
      atomic_write(chain_path, [&](std::ostream& os) { write_chain_csv(chain, os); });
      atomic_write(meta_path, [&](std::ostream& os) { write_metadata(chain, echo, os); });
      atomic_write(summary_path, [&](std::ostream& os) { os << summary_to_json(summary).dump(2) << '\n'; });
      out << "chain " << k + 1 << " (seed " << chain.config.seed << "): " << chain.size() << " draws -> "
          << chain_path.string() << '\n';
      for (const auto& p : summary.parameters) {
        out << "  " << p.name << ": mean " << p.mean << ", " << static_cast<int>(std::lround(100 * level))
            << "% interval (" << p.interval.lower << ", " << p.interval.upper << ")\n";
        if (p.interval.degenerate) err << "warning: " << p.name << " has a degenerate interval\n";
      }
    }
    return exit_ok;
  });
}

/// Config keys: chain, axes ([a, b], 1-based), resolution, output.
inline int cmd_predict(const Options& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::load_config(opt.config);
    detail::reject_unknown(cfg.doc, {"chain", "axes", "resolution", "output"}, "config");
    const Chain chain = read_chain_csv(detail::resolve(cfg, detail::get<std::string>(cfg.doc, "chain", "config")));
    const auto axes = detail::get_or<std::vector<std::size_t>>(cfg.doc, "axes", {1, 2}, "config");
    if (axes.size() != 2 || axes[0] < 1 || axes[1] < 1) throw ValidationError("axes must be two 1-based column indices");
    const auto resolution = detail::get_or<std::size_t>(cfg.doc, "resolution", 200, "config");
    const auto output = opt.out_dir / detail::get_or<std::string>(cfg.doc, "output", "grid.csv", "config");
    const PredictiveGrid grid = predictive_grid(chain, axes[0] - 1, axes[1] - 1, resolution);
    atomic_write(output, [&](std::ostream& os) { write_grid_csv(grid, os); });
    out << "wrote " << resolution << "x" << resolution << " grid to " << output.string() << " (mass "
        << grid_mass(grid) << ")\n";
    return exit_ok;
  });
}

/// Config keys: data, degrees, models ([{"name": ..., "chain": ...}, ...]), output.
inline int cmd_compare(const Options& opt, std::ostream& out, std::ostream& err) {
  return detail::guarded(err, [&] {
    const auto cfg = detail::load_config(opt.config);
    detail::reject_unknown(cfg.doc, {"data", "degrees", "models", "output"}, "config");
    const bool degrees = opt.degrees || detail::get_or<bool>(cfg.doc, "degrees", false, "config");
    const Dataset data = read_dataset_csv(detail::resolve(cfg, detail::get<std::string>(cfg.doc, "data", "config")), degrees);
    const json models = detail::get<json>(cfg.doc, "models", "config");
    if (!models.is_array() || models.size() != 2) throw ValidationError("'models' must list exactly two entries");

    std::vector<std::string> names;
    std::vector<Chain> chains;
    for (const auto& m : models) {
      detail::reject_unknown(m, {"name", "chain"}, "models[]");
      names.push_back(detail::get<std::string>(m, "name", "models[]"));
      chains.push_back(read_chain_csv(detail::resolve(cfg, detail::get<std::string>(m, "chain", "models[]"))));
      if (chains.back().dimension != data.dimension())
        throw ValidationError("chain for '" + names.back() + "' has dimension " + std::to_string(chains.back().dimension) +
                              " but the dataset has " + std::to_string(data.dimension()) + " columns");
    }
    const double a = lpml(data, chains[0]);
    const double b = lpml(data, chains[1]);
    const double diff = a - b;
    const std::string preferred = diff > 0.0 ? names[0] : diff < 0.0 ? names[1] : "tie";

    nlohmann::ordered_json report;
    report["lpml"] = {{names[0], a}, {names[1], b}};
    report["difference"] = diff;
    report["preferred"] = preferred;
    const auto output = opt.out_dir / detail::get_or<std::string>(cfg.doc, "output", "compare.json", "config");
    atomic_write(output, [&](std::ostream& os) { os << report.dump(2) << '\n'; });
    out << "LPML " << names[0] << ": " << a << '\n'
        << "LPML " << names[1] << ": " << b << '\n'
        << "difference (" << names[0] << " - " << names[1] << "): " << diff << '\n'
        << "preferred: " << preferred << '\n';
    return exit_ok;
  });
}

}  // namespace pgcop::cli
