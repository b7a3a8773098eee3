#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"

namespace {

std::vector<double> parse_grid(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace bdr::cli;
  CLI::App app{"Distributed demand-response coordination of building MPC"};
  app.set_version_flag("--version", version());
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  common.argv.assign(argv, argv + argc);
  app.add_option("--workers", common.workers, "Threads for the local steps (0 = sequential)")
      ->check(CLI::NonNegativeNumber);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", common.out, "Output directory")->required();
    sub->add_option("--seed", common.seed, "Seed for synthetic scenarios");
  };

  BenchOptions bench;
  CLI::App* b = app.add_subcommand("bench-paper", "12-building benchmark, cold and warm runs");
  add_common(b);
  b->add_option("--steps", bench.steps, "Closed-loop steps for the warm runs")->check(CLI::PositiveNumber);
  b->add_option("--cold-max-iter", bench.cold_max_iter, "Iteration cap of the cold runs");
  b->add_option("--epsilon", bench.epsilon, "Termination tolerance");
  b->add_option("--noise", bench.noise, "Disturbance noise of the synthetic mix");
  b->add_option("--surge-width", bench.surge_width, "Width in steps of the voltage surge");

  MuSweepOptions sweep;
  std::string grid = "0,0.001,0.01,0.1,1";
  CLI::App* m = app.add_subcommand("mu-sweep", "Centralized gap ||u*(mu) - u*(0)||_inf over a grid");
  add_common(m);
  m->add_option("--scenario", sweep.scenario, "Scenario JSON, or 'toy' / 'paper'");
  m->add_option("--grid", grid, "Comma-separated mu values, must contain 0");

  CompareOptions cmp;
  std::string solvers = "aladin,admm";
  CLI::App* c = app.add_subcommand("compare", "Per-iteration residuals of both solvers");
  add_common(c);
  c->add_option("--scenario", cmp.scenario, "Scenario JSON, or 'toy' / 'paper'");
  c->add_option("--solvers", solvers, "Comma-separated list of aladin, admm");
  c->add_flag("--warm", cmp.warm, "Warm start from a bootstrapped previous step");
  c->add_option("--step", cmp.step, "Closed-loop step solved by warm runs");
  c->add_option("--epsilon", cmp.epsilon, "Termination tolerance");
  c->add_option("--max-iter", cmp.max_iter, "Iteration cap");

  MpcOptions mpc;
  CLI::App* p = app.add_subcommand("mpc", "Closed-loop MPC with one distributed solver");
  add_common(p);
  p->add_option("--scenario", mpc.scenario, "Scenario JSON, or 'toy' / 'paper'");
  p->add_option("--steps", mpc.steps, "Closed-loop steps");
  p->add_option("--solver", mpc.solver, "aladin or admm");
  p->add_option("--epsilon", mpc.epsilon, "Termination tolerance");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*b) {
      bench.common = common;
      return cmd_bench_paper(bench);
    }
    if (*m) {
      sweep.common = common;
      sweep.grid = parse_grid(grid);
      return cmd_mu_sweep(sweep);
    }
    if (*c) {
      cmp.common = common;
      cmp.solvers.clear();
      std::stringstream ss(solvers);
      for (std::string s; std::getline(ss, s, ',');)
        if (!s.empty()) cmp.solvers.push_back(s);
      return cmd_compare(cmp);
    }
    mpc.common = common;
    return cmd_mpc(mpc);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return 2;
  }
}
