#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <string_view>

namespace bdr {

/// Discrete-time linear thermal model of one building,
///   x⁺ = A x + B u + w,   y = C x + D u,
/// with output/input boxes, tracking weights and its grid coupling data
/// (active power θ = F u, voltage sensitivity G).
struct BuildingModel {
  Eigen::MatrixXd A, B, C, D;
  Eigen::MatrixXd Q;  // output tracking weight, PSD
  Eigen::MatrixXd R;  // input weight, PD
  Eigen::VectorXd y_ref, y_lo, y_hi;
  Eigen::VectorXd u_lo, u_hi;
  Eigen::RowVectorXd F;
  double G = 0.0;

  int nx() const { return static_cast<int>(A.rows()); }
  int nu() const { return static_cast<int>(B.cols()); }
  int ny() const { return static_cast<int>(C.rows()); }
  /// Disturbances enter the state directly.
  int nw() const { return nx(); }

  /// Throws std::invalid_argument on inconsistent dimensions, R not PD,
  /// Q not PSD, or empty boxes.
  void validate() const;
};

/// Stacked prediction maps over a horizon of N steps with
/// x = (x_1..x_N) = 𝒜 x̂ + ℬᵘ u + ℬʷ w and y = 𝒞 x + 𝒟 u, so the k-th
/// stacked output is C x_{k+1} + D u_k.
struct PredictionMaps {
  Eigen::MatrixXd A;   // N·nx × nx
  Eigen::MatrixXd Bu;  // N·nx × N·nu
  Eigen::MatrixXd Bw;  // N·nx × N·nx
  Eigen::MatrixXd C;   // N·ny × N·nx
  Eigen::MatrixXd D;   // N·ny × N·nu
};

/// Dense tracking QP in the input trajectory u = (u_0..u_{N-1}):
///   cost(u) = uᵀHu + 2hᵀu + constant,   E u ≤ e.
/// Rows of E are stacked as output-upper, output-lower, input-upper,
/// input-lower blocks.
struct CondensedQP {
  int horizon = 0;
  Eigen::MatrixXd H;
  Eigen::VectorXd h;
  Eigen::MatrixXd E;
  Eigen::VectorXd e;
  /// Dropped from the objective; kept for cost bookkeeping.
  double constant = 0.0;
  PredictionMaps maps;
  /// 𝒞ℬᵘ + 𝒟: maps inputs to stacked outputs.
  Eigen::MatrixXd output_map;
  /// 𝒞(𝒜x̂ + ℬʷw): stacked outputs under zero input.
  Eigen::VectorXd free_response;

  int dim() const { return static_cast<int>(H.rows()); }
  Eigen::VectorXd predict_outputs(const Eigen::VectorXd& u) const {
    return output_map * u + free_response;
  }
};

CondensedQP condense(const BuildingModel& model, const Eigen::VectorXd& x_hat,
                     const Eigen::VectorXd& w, int horizon);

struct StepResult {
  Eigen::VectorXd x_next;
  Eigen::VectorXd y;
};

StepResult simulate_step(const BuildingModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w);

enum class BuildingKind { kLarge, kMiddle, kSmall };

std::string_view to_string(BuildingKind kind);
/// Accepts "large", "middle", "small" (case-insensitive).
BuildingKind parse_building_kind(std::string_view name);

/// Number of inputs (= outputs = states) of a synthetic building.
int synth_size(BuildingKind kind);

/// Random stable building: A scaled to spectral radius 0.9, B and C with
/// standard-normal entries, D = 0, Q = I, R = 0.1·I. Deterministic in seed.
BuildingModel synth_building(BuildingKind kind, std::uint64_t seed);

/// Equilibrium that holds y at y_ref under a constant input u_nom:
/// C x_ss + D u_nom = y_ref (least squares) and w_ss = x_ss − A x_ss − B u_nom.
struct OperatingPoint {
  Eigen::VectorXd u_nom;
  Eigen::VectorXd x_ss;
  Eigen::VectorXd w_ss;
};

OperatingPoint steady_operating_point(const BuildingModel& model, const Eigen::VectorXd& u_nom);

/// Smooth daily sinusoid plus Gaussian noise around the equilibrium
/// disturbance, one row per step (steps × nw). `period` is in steps.
Eigen::MatrixXd disturbance_profile(const BuildingModel& model, const OperatingPoint& op,
                                    int steps, double amplitude, double noise, int period,
                                    std::uint64_t seed);

/// Disturbance CSV: header `step,w_1,...,w_nw`, one row per step.
Eigen::MatrixXd read_disturbance_csv(const std::filesystem::path& path);
void write_disturbance_csv(const std::filesystem::path& path, const Eigen::MatrixXd& w);

}  // namespace bdr
