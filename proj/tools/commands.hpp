#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bdr/scenario.hpp"

namespace bdr::cli {

/// Written as manifest.json into every output directory.
struct RunManifest {
  std::string command;
  std::string scenario;
  std::vector<std::string> solvers;
  std::uint64_t seed = 42;
  double epsilon = 1e-4;
  double mu = 0.1;
  std::filesystem::path out;
  std::string version;
  std::vector<std::string> argv;
};

void write_manifest(const RunManifest& m);

/// Git-describe string baked in at configure time.
std::string version();

/// Scenario from a JSON path or one of the built-in names: "paper" (the
/// 12-building mix) and "toy" (two Small and one Middle building).
Scenario resolve_scenario(const std::string& spec, std::uint64_t seed);

struct Common {
  std::filesystem::path out;
  std::uint64_t seed = 42;
  int workers = 0;
  std::vector<std::string> argv;
};

struct BenchOptions {
  Common common;
  /// Closed-loop steps for the warm-started runs.
  int steps = 10;
  int cold_max_iter = 500;
  double epsilon = 1e-4;
  /// Disturbance noise and surge width of the synthetic mix; the defaults
  /// give both CaseI and CaseII episodes.
  double noise = 0.15;
  double surge_width = 3.0;
};

struct MuSweepOptions {
  Common common;
  std::string scenario = "toy";
  std::vector<double> grid{0.0, 1e-3, 1e-2, 1e-1, 1.0};
};

struct CompareOptions {
  Common common;
  std::string scenario = "toy";
  std::vector<std::string> solvers{"aladin", "admm"};
  bool warm = false;
  /// Window that is solved; warm runs need step ≥ 1.
  int step = 1;
  double epsilon = 1e-4;
  int max_iter = 2000;
};

struct MpcOptions {
  Common common;
  std::string scenario = "toy";
  std::string solver = "aladin";
  int steps = 10;
  double epsilon = 1e-4;
};

// Each returns the process exit code: 0 on success, 1 on bad input,
// 2 on a solver failure (files are still written).
int cmd_bench_paper(const BenchOptions& o);
int cmd_mu_sweep(const MuSweepOptions& o);
int cmd_compare(const CompareOptions& o);
int cmd_mpc(const MpcOptions& o);

}  // namespace bdr::cli
