#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bdr/model.hpp"
#include "bdr/problem.hpp"

namespace bdr {

/// Everything needed to pose the coordination problem at any time step.
/// Time-indexed profiles are held at their last row beyond their end.
struct Scenario {
  std::string name = "scenario";
  std::vector<BuildingModel> buildings;
  std::vector<Eigen::VectorXd> x0;
  /// Predicted disturbances, one (steps × nx) matrix per building.
  std::vector<Eigen::MatrixXd> disturbance;
  /// Predicted voltage without demand response, one entry per step.
  Eigen::VectorXd v_tilde;
  double v_lo = 0.95;
  double v_hi = 1.05;
  /// Price per step; held at the last entry.
  Eigen::VectorXd pi = Eigen::VectorXd::Ones(1);
  int horizon = 14;
  double dt_hours = 0.5;
  double mu = 0.1;
  /// Realized disturbance = mismatch · predicted disturbance.
  double mismatch = 1.0;

  int num_buildings() const { return static_cast<int>(buildings.size()); }
  void validate() const;
};

/// Stacked w_t..w_{t+N-1} from a steps × nw profile.
Eigen::VectorXd disturbance_window(const Eigen::MatrixXd& profile, int t, int N);

/// Coupling data for the window starting at step t.
CouplingData coupling_at(const Scenario& sc, int t);

/// Local problems for the window starting at step t from the given states.
std::vector<LocalProblem> build_problems(const Scenario& sc, int t,
                                         std::span<const Eigen::VectorXd> states);
std::vector<LocalProblem> build_problems(const Scenario& sc, int t = 0);

struct SynthOptions {
  std::uint64_t seed = 42;
  int horizon = 14;
  /// Length of the generated profiles in steps.
  int steps = 96;
  double mu = 0.1;
  /// Nominal input of every channel, as a fraction of u_hi.
  double u_nominal = 0.5;
  /// Disturbance sinusoid amplitude and noise standard deviation.
  double amplitude = 0.05;
  double noise = 0.0;
  /// Steps per disturbance period (one day at 0.5 h).
  int period = 48;
  /// Every G_i is multiplied by this factor.
  double coupling_scale = 50.0;
  /// ṽ_k = v_base + surge_peak·exp(−½((k − surge_center)/surge_width)²)
  /// minus the voltage shift caused by the nominal inputs.
  double v_base = 1.0;
  double surge_peak = 0.08;
  double surge_center = 24.0;
  double surge_width = 6.0;
};

/// Buildings of the given kinds, started at their nominal steady state.
Scenario synth_scenario(std::span<const BuildingKind> kinds, const SynthOptions& opts);

/// Kinds of the 12-building benchmark: 2 Large, 7 Middle and 3 Small.
std::vector<BuildingKind> paper_mix_kinds();

/// JSON scenario file. Relative disturbance paths resolve against the
/// file's directory.
Scenario load_scenario(const std::filesystem::path& path);
/// Writes a self-contained JSON file (explicit matrices and profiles).
void save_scenario(const std::filesystem::path& path, const Scenario& sc);

}  // namespace bdr
