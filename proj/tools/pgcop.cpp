#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pgcop/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Copula-coupled Projected Gamma models for angles on the quarter circle"};
  app.require_subcommand(1);

  pgcop::cli::Options opt;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "override the configured seed");
    sub->add_flag("--degrees", opt.degrees, "dataset angles are in degrees");
    sub->add_option("--out", opt.out_dir, "output directory");
  };

  auto* simulate = app.add_subcommand("simulate", "simulate a dataset from a fully specified model");
  auto* fit = app.add_subcommand("fit", "run the two-stage sampler and summarize the posterior");
  auto* predict = app.add_subcommand("predict", "posterior predictive density grid for a pair of angles");
  auto* compare = app.add_subcommand("compare", "compare two fitted models by LPML");
  for (auto* sub : {simulate, fit, predict, compare}) add_common(sub);
  fit->add_option("--chains", opt.chains, "number of independent chains")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : pgcop::cli::exit_validation;
  }
  for (auto* sub : {simulate, fit, predict, compare})
    if (sub->count("--seed")) opt.seed = seed;

  if (*simulate) return pgcop::cli::cmd_simulate(opt, std::cout, std::cerr);
  if (*fit) return pgcop::cli::cmd_fit(opt, std::cout, std::cerr);
  if (*predict) return pgcop::cli::cmd_predict(opt, std::cout, std::cerr);
  return pgcop::cli::cmd_compare(opt, std::cout, std::cerr);
}
