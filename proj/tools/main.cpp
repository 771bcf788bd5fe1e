#include <iostream>

#include <CLI11.hpp>

#include "cli.hpp"

int main(int argc, char** argv) {
  using namespace proxobs::cli;
  CLI::App app{"Proximal observers for state estimation under impulsive noise"};
  app.require_subcommand(1);

  ProxArgs prox_args;
  auto* prox = app.add_subcommand("prox", "Evaluate a closed-form prox and cross-check it numerically");
  prox->add_option("--loss", prox_args.loss, "quadratic|absolute|lasso|huber|abslog|vapnik")->required();
  prox->add_option("--alpha", prox_args.alpha, "Outer scale");
  prox->add_option("--lambda", prox_args.lambda, "Lasso quadratic weight");
  prox->add_option("--gamma", prox_args.gamma, "Lasso penalty");
  prox->add_option("--mu", prox_args.mu, "Huber/abslog shape");
  prox->add_option("--eps", prox_args.eps, "Vapnik tube half-width");
  prox->add_option("--x", prox_args.x, "Point (comma separated)")->required()->delimiter(',');
  prox->add_option("--a", prox_args.a, "Direction (comma separated)")->required()->delimiter(',');
  prox->add_option("--b", prox_args.b, "Offset");

  RunArgs run_args;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", run_args.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--set", run_args.overrides, "Override a config key (key=value, dotted)");
    sub->add_option("-o,--output", run_args.output_path, "Output file (stdout if omitted)");
  };
  auto* simulate = app.add_subcommand("simulate", "Run one realization and print states and error norms");
  add_common(simulate);
  simulate->add_option("--seed", run_args.seed, "Master seed");
  simulate->add_option("--realization", run_args.realization, "Realization index");
  auto* experiment = app.add_subcommand("experiment", "Monte-Carlo comparison of estimators");
  add_common(experiment);
  experiment->add_option("--seed", run_args.seed, "Master seed");
  auto* check = app.add_subcommand("check", "Evaluate stability and observability certificates");
  add_common(check);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kUsage;
  }

  auto usage_on_empty = [&](CLI::App* sub, int code) {
    if (code == kUsage) std::cerr << '\n' << sub->help();
    return code;
  };
  if (*prox) return usage_on_empty(prox, cmd_prox(prox_args, std::cout, std::cerr));
  if (*simulate) return usage_on_empty(simulate, cmd_simulate(run_args, std::cout, std::cerr));
  if (*experiment) return usage_on_empty(experiment, cmd_experiment(run_args, std::cout, std::cerr));
  return usage_on_empty(check, cmd_check(run_args, std::cout, std::cerr));
}
