#include "bdr/model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace bdr {

namespace {

void require(bool cond, const char* what) {
  if (!cond) throw std::invalid_argument(std::string("model: ") + what);
}

Eigen::MatrixXd block_diag(const Eigen::MatrixXd& block, int copies) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(block.rows() * copies, block.cols() * copies);
  for (int k = 0; k < copies; ++k) {
    out.block(k * block.rows(), k * block.cols(), block.rows(), block.cols()) = block;
  }
  return out;
}

Eigen::VectorXd repeat(const Eigen::VectorXd& v, int copies) {
  return v.replicate(copies, 1);
}

}  // namespace

void BuildingModel::validate() const {
  const auto n = A.rows();
  require(n > 0 && A.cols() == n, "A must be square and nonempty");
  require(B.rows() == n && B.cols() > 0, "B must have nx rows");
  const auto m = B.cols();
  require(C.cols() == n && C.rows() > 0, "C must have nx columns");
  const auto p = C.rows();
  require(D.rows() == p && D.cols() == m, "D must be ny x nu");
  require(Q.rows() == p && Q.cols() == p, "Q must be ny x ny");
  require(R.rows() == m && R.cols() == m, "R must be nu x nu");
  require(y_ref.size() == p && y_lo.size() == p && y_hi.size() == p,
          "output reference and bounds must have ny entries");
  require(u_lo.size() == m && u_hi.size() == m, "input bounds must have nu entries");
  require(F.size() == m, "F must be 1 x nu");
  require((y_lo.array() < y_hi.array()).all(), "y_lo < y_hi must hold componentwise");
  require((u_lo.array() < u_hi.array()).all(), "u_lo < u_hi must hold componentwise");
  require((R - R.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + R.lpNorm<Eigen::Infinity>()),
          "R must be symmetric");
  require((Q - Q.transpose()).lpNorm<Eigen::Infinity>() <= 1e-12 * (1.0 + Q.lpNorm<Eigen::Infinity>()),
          "Q must be symmetric");
  require(Eigen::LLT<Eigen::MatrixXd>(R).info() == Eigen::Success, "R must be positive definite");
  const double q_min = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().minCoeff();
  require(q_min >= -1e-12 * (1.0 + Q.lpNorm<Eigen::Infinity>()), "Q must be positive semi-definite");
}

CondensedQP condense(const BuildingModel& model, const Eigen::VectorXd& x_hat,
                     const Eigen::VectorXd& w, int horizon) {
  model.validate();
  require(horizon >= 1, "horizon must be at least 1");
  const int nx = model.nx();
  const int nu = model.nu();
  const int ny = model.ny();
  const int N = horizon;
  require(x_hat.size() == nx, "x_hat must have nx entries");
  require(w.size() == static_cast<Eigen::Index>(N) * nx, "w must have N*nw entries");

  std::vector<Eigen::MatrixXd> power(static_cast<size_t>(N + 1));
  power[0] = Eigen::MatrixXd::Identity(nx, nx);
  for (int k = 1; k <= N; ++k) power[k] = model.A * power[k - 1];

  CondensedQP qp;
  qp.horizon = N;
  PredictionMaps& maps = qp.maps;
  maps.A.resize(N * nx, nx);
  maps.Bu = Eigen::MatrixXd::Zero(N * nx, N * nu);
  maps.Bw = Eigen::MatrixXd::Zero(N * nx, N * nx);
  for (int k = 0; k < N; ++k) {
    maps.A.middleRows(k * nx, nx) = power[k + 1];
    for (int j = 0; j <= k; ++j) {
      maps.Bu.block(k * nx, j * nu, nx, nu) = power[k - j] * model.B;
      maps.Bw.block(k * nx, j * nx, nx, nx) = power[k - j];
    }
  }
  maps.C = block_diag(model.C, N);
  maps.D = block_diag(model.D, N);

  qp.output_map = maps.C * maps.Bu + maps.D;
  qp.free_response = maps.C * (maps.A * x_hat + maps.Bw * w);

  const Eigen::MatrixXd Qs = block_diag(model.Q, N);
  const Eigen::MatrixXd Rs = block_diag(model.R, N);
  const Eigen::VectorXd tracking_offset = qp.free_response - repeat(model.y_ref, N);
  const Eigen::MatrixXd ThetaT_Q = qp.output_map.transpose() * Qs;
  qp.H = ThetaT_Q * qp.output_map + Rs;
  qp.H = 0.5 * (qp.H + qp.H.transpose()).eval();
  qp.h = ThetaT_Q * tracking_offset;
  qp.constant = tracking_offset.dot(Qs * tracking_offset);

  const int n_out = N * ny;
  const int n_in = N * nu;
  qp.E.resize(2 * n_out + 2 * n_in, n_in);
  qp.e.resize(2 * n_out + 2 * n_in);
  qp.E.topRows(n_out) = qp.output_map;
  qp.E.middleRows(n_out, n_out) = -qp.output_map;
  qp.E.middleRows(2 * n_out, n_in) = Eigen::MatrixXd::Identity(n_in, n_in);
  qp.E.bottomRows(n_in) = -Eigen::MatrixXd::Identity(n_in, n_in);
  qp.e.head(n_out) = repeat(model.y_hi, N) - qp.free_response;
  qp.e.segment(n_out, n_out) = qp.free_response - repeat(model.y_lo, N);
  qp.e.segment(2 * n_out, n_in) = repeat(model.u_hi, N);
  qp.e.tail(n_in) = -repeat(model.u_lo, N);
  return qp;
}

StepResult simulate_step(const BuildingModel& model, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& u, const Eigen::VectorXd& w) {
  require(x.size() == model.nx(), "x must have nx entries");
  require(u.size() == model.nu(), "u must have nu entries");
  require(w.size() == model.nw(), "w must have nw entries");
  require(model.B.rows() == model.nx() && model.C.cols() == model.nx() &&
              model.D.rows() == model.ny() && model.D.cols() == model.nu(),
          "inconsistent system matrices");
  return {model.A * x + model.B * u + w, model.C * x + model.D * u};
}

std::string_view to_string(BuildingKind kind) {
  switch (kind) {
    case BuildingKind::kLarge:
      return "large";
    case BuildingKind::kMiddle:
      return "middle";
    case BuildingKind::kSmall:
      return "small";
  }
  return "unknown";
}

BuildingKind parse_building_kind(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "large") return BuildingKind::kLarge;
  if (lower == "middle") return BuildingKind::kMiddle;
  if (lower == "small") return BuildingKind::kSmall;
  throw std::invalid_argument("model: unknown building kind '" + std::string(name) + "'");
}

int synth_size(BuildingKind kind) {
  switch (kind) {
    case BuildingKind::kLarge:
      return 18;
    case BuildingKind::kMiddle:
      return 5;
    case BuildingKind::kSmall:
      return 3;
  }
  return 0;
}

BuildingModel synth_building(BuildingKind kind, std::uint64_t seed) {
  const int n = synth_size(kind);
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-1.0, 1.0);
  auto randn = [&](int r, int c) {
    return Eigen::MatrixXd(Eigen::MatrixXd::NullaryExpr(r, c, [&]() { return normal(gen); }));
  };

  BuildingModel m;
  m.A = randn(n, n);
  const double rho = m.A.eigenvalues().cwiseAbs().maxCoeff();
  m.A *= 0.9 / rho;
  m.B = randn(n, n);
  // Re-draw C until it is comfortably invertible so that the reference is
  // reachable in steady state.
  do {
    m.C = randn(n, n);
  } while (Eigen::JacobiSVD<Eigen::MatrixXd>(m.C).singularValues().tail(1)(0) < 0.1);
  m.D = Eigen::MatrixXd::Zero(n, n);
  m.Q = Eigen::MatrixXd::Identity(n, n);
  m.R = 0.1 * Eigen::MatrixXd::Identity(n, n);

  m.y_ref.resize(n);
  for (int i = 0; i < n; ++i) m.y_ref(i) = 22.0 + 0.5 * uniform(gen);
  m.y_lo = m.y_ref.array() - 1.5;
  m.y_hi = m.y_ref.array() + 1.5;
  m.u_lo = Eigen::VectorXd::Zero(n);
  m.u_hi = Eigen::VectorXd::Constant(n, 4.0);
  // θ is the building's mean thermal power; consuming lowers the local voltage.
  m.F = Eigen::RowVectorXd::Constant(n, 1.0 / n);
  m.G = -0.02 * (1.0 + 0.25 * uniform(gen));
  return m;
}

OperatingPoint steady_operating_point(const BuildingModel& model, const Eigen::VectorXd& u_nom) {
  require(u_nom.size() == model.nu(), "u_nom must have nu entries");
  OperatingPoint op;
  op.u_nom = u_nom;
  op.x_ss = model.C.completeOrthogonalDecomposition().solve(model.y_ref - model.D * u_nom);
  op.w_ss = op.x_ss - model.A * op.x_ss - model.B * u_nom;
  return op;
}

Eigen::MatrixXd disturbance_profile(const BuildingModel& model, const OperatingPoint& op,
                                    int steps, double amplitude, double noise, int period,
                                    std::uint64_t seed) {
  require(steps >= 1 && period >= 1, "steps and period must be positive");
  const int nw = model.nw();
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * M_PI);
  Eigen::VectorXd phase(nw), gain(nw);
  for (int i = 0; i < nw; ++i) {
    phase(i) = phase_dist(gen);
    gain(i) = normal(gen);
  }
  Eigen::MatrixXd w(steps, nw);
  for (int k = 0; k < steps; ++k) {
    for (int i = 0; i < nw; ++i) {
      const double wave = std::sin(2.0 * M_PI * k / period + phase(i));
      w(k, i) = op.w_ss(i) + amplitude * gain(i) * wave + noise * normal(gen);
    }
  }
  return w;
}

Eigen::MatrixXd read_disturbance_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("model: cannot open disturbance file " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("model: empty disturbance file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  if (header.size() < 2 || header[0] != "step") {
    throw std::runtime_error("model: disturbance header must be step,w_1,...,w_nw");
  }
  for (size_t i = 1; i < header.size(); ++i) {
    if (header[i] != "w_" + std::to_string(i)) {
      throw std::runtime_error("model: unexpected disturbance column '" + header[i] + "'");
    }
  }
  const size_t nw = header.size() - 1;
  std::vector<std::vector<double>> rows;
  int expected_step = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<double> values;
    while (std::getline(ss, cell, ',')) values.push_back(std::stod(cell));
    if (values.size() != nw + 1) {
      throw std::runtime_error("model: disturbance row has wrong column count");
    }
    if (static_cast<int>(values[0]) != expected_step) {
      throw std::runtime_error("model: disturbance steps must be consecutive from 0");
    }
    ++expected_step;
    rows.emplace_back(values.begin() + 1, values.end());
  }
  Eigen::MatrixXd w(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(nw));
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < nw; ++c) w(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return w;
}

void write_disturbance_csv(const std::filesystem::path& path, const Eigen::MatrixXd& w) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("model: cannot write " + path.string());
  out << "step";
  for (Eigen::Index i = 0; i < w.cols(); ++i) out << ",w_" << (i + 1);
  out << '\n';
  out.precision(17);
  for (Eigen::Index k = 0; k < w.rows(); ++k) {
    out << k;
    for (Eigen::Index i = 0; i < w.cols(); ++i) out << ',' << w(k, i);
    out << '\n';
  }
}

}  // namespace bdr
