#include "bdr/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

namespace bdr {

namespace {

using nlohmann::json;

void require(bool cond, const std::string& what) {
  if (!cond) throw std::invalid_argument("scenario: " + what);
}

int clamp_row(Eigen::Index rows, int t) {
  return static_cast<int>(std::min<Eigen::Index>(t, rows - 1));
}

Eigen::MatrixXd to_matrix(const json& j) {
  if (j.is_number()) return Eigen::MatrixXd::Constant(1, 1, j.get<double>());
  require(j.is_array() && !j.empty(), "matrix must be a nonempty array of rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].is_array() ? j[0].size() : 1);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[r];
    if (!row.is_array()) {
      require(cols == 1, "ragged matrix");
      m(r, 0) = row.get<double>();
      continue;
    }
    require(static_cast<Eigen::Index>(row.size()) == cols, "ragged matrix");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[c].get<double>();
  }
  return m;
}

Eigen::VectorXd to_vector(const json& j) {
  if (j.is_number()) return Eigen::VectorXd::Constant(1, j.get<double>());
  require(j.is_array(), "vector must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json from_matrix(const Eigen::MatrixXd& m) {
  json j = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    j.push_back(row);
  }
  return j;
}

json from_vector(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

SynthOptions read_synth_options(const json& j) {
  SynthOptions o;
  if (j.is_null()) return o;
  o.seed = j.value("seed", o.seed);
  o.horizon = j.value("horizon", o.horizon);
  o.steps = j.value("steps", o.steps);
  o.mu = j.value("mu", o.mu);
  o.u_nominal = j.value("u_nominal", o.u_nominal);
  o.amplitude = j.value("amplitude", o.amplitude);
  o.noise = j.value("noise", o.noise);
  o.period = j.value("period", o.period);
  o.coupling_scale = j.value("coupling_scale", o.coupling_scale);
  o.v_base = j.value("v_base", o.v_base);
  o.surge_peak = j.value("surge_peak", o.surge_peak);
  o.surge_center = j.value("surge_center", o.surge_center);
  o.surge_width = j.value("surge_width", o.surge_width);
  return o;
}

BuildingModel read_building(const json& j) {
  BuildingModel m;
  m.A = to_matrix(j.at("A"));
  m.B = to_matrix(j.at("B"));
  m.C = to_matrix(j.at("C"));
  m.D = j.contains("D") ? to_matrix(j["D"]) : Eigen::MatrixXd::Zero(m.C.rows(), m.B.cols());
  m.Q = to_matrix(j.at("Q"));
  m.R = to_matrix(j.at("R"));
  m.y_ref = to_vector(j.at("y_ref"));
  m.y_lo = to_vector(j.at("y_lo"));
  m.y_hi = to_vector(j.at("y_hi"));
  m.u_lo = to_vector(j.at("u_lo"));
  m.u_hi = to_vector(j.at("u_hi"));
  m.F = to_vector(j.at("F")).transpose();
  m.G = j.at("G").get<double>();
  m.validate();
  return m;
}

}  // namespace

void Scenario::validate() const {
  const size_t M = buildings.size();
  require(M >= 1, "at least one building is required");
  require(x0.size() == M && disturbance.size() == M, "x0 and disturbance need one entry per building");
  require(horizon >= 1, "horizon must be at least 1");
  require(dt_hours > 0.0, "dt_hours must be positive");
  require(mu >= 0.0, "mu must be nonnegative");
  require(v_lo < v_hi, "v_lo < v_hi must hold");
  require(v_tilde.size() >= 1 && pi.size() >= 1, "v_tilde and pi must be nonempty");
  for (size_t i = 0; i < M; ++i) {
    buildings[i].validate();
    require(x0[i].size() == buildings[i].nx(), "x0 has wrong length");
    require(disturbance[i].rows() >= 1 && disturbance[i].cols() == buildings[i].nw(),
            "disturbance profile has wrong width");
  }
}

Eigen::VectorXd disturbance_window(const Eigen::MatrixXd& profile, int t, int N) {
  const Eigen::Index nw = profile.cols();
  Eigen::VectorXd w(N * nw);
  for (int k = 0; k < N; ++k) {
    w.segment(k * nw, nw) = profile.row(clamp_row(profile.rows(), t + k)).transpose();
  }
  return w;
}

CouplingData coupling_at(const Scenario& sc, int t) {
  const int N = sc.horizon;
  Eigen::VectorXd v(N);
  Eigen::VectorXd pi(N);
  for (int k = 0; k < N; ++k) {
    v(k) = sc.v_tilde(clamp_row(sc.v_tilde.size(), t + k));
    pi(k) = sc.pi(clamp_row(sc.pi.size(), t + k));
  }
  return make_coupling(sc.buildings, v, sc.v_lo, sc.v_hi, pi);
}

std::vector<LocalProblem> build_problems(const Scenario& sc, int t,
                                         std::span<const Eigen::VectorXd> states) {
  const int M = sc.num_buildings();
  require(static_cast<int>(states.size()) == M, "one state per building is required");
  const CouplingData coupling = coupling_at(sc, t);
  std::vector<LocalProblem> out;
  out.reserve(M);
  for (int i = 0; i < M; ++i) {
    out.push_back(build_local(sc.buildings[i], states[i],
                              disturbance_window(sc.disturbance[i], t, sc.horizon), coupling, M,
                              sc.mu));
  }
  return out;
}

std::vector<LocalProblem> build_problems(const Scenario& sc, int t) {
  return build_problems(sc, t, sc.x0);
}

std::vector<BuildingKind> paper_mix_kinds() {
  std::vector<BuildingKind> kinds(2, BuildingKind::kLarge);
  kinds.insert(kinds.end(), 7, BuildingKind::kMiddle);
  kinds.insert(kinds.end(), 3, BuildingKind::kSmall);
  return kinds;
}

Scenario synth_scenario(std::span<const BuildingKind> kinds, const SynthOptions& opts) {
  require(!kinds.empty(), "at least one building is required");
  require(opts.steps >= 1 && opts.horizon >= 1, "steps and horizon must be positive");
  std::mt19937_64 gen(opts.seed);
  Scenario sc;
  sc.name = "synthetic";
  sc.horizon = opts.horizon;
  sc.mu = opts.mu;
  const int length = opts.steps + opts.horizon;
  double nominal_shift = 0.0;
  for (BuildingKind kind : kinds) {
    BuildingModel m = synth_building(kind, gen());
    m.G *= opts.coupling_scale;
    const Eigen::VectorXd u_nom = m.u_lo + opts.u_nominal * (m.u_hi - m.u_lo);
    const OperatingPoint op = steady_operating_point(m, u_nom);
    sc.disturbance.push_back(
        disturbance_profile(m, op, length, opts.amplitude, opts.noise, opts.period, gen()));
    sc.x0.push_back(op.x_ss);
    nominal_shift += m.G * m.F.dot(u_nom);
    sc.buildings.push_back(std::move(m));
  }
  sc.v_tilde.resize(length);
  for (int k = 0; k < length; ++k) {
    const double z = (k - opts.surge_center) / opts.surge_width;
    sc.v_tilde(k) = opts.v_base + opts.surge_peak * std::exp(-0.5 * z * z) - nominal_shift;
  }
  sc.pi = Eigen::VectorXd::Ones(1);
  sc.validate();
  return sc;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open " + path.string());
  const json j = json::parse(in);
  const std::filesystem::path base = path.parent_path();

  Scenario sc;
  if (j.contains("synth")) {
    const json& s = j["synth"];
    SynthOptions opts = read_synth_options(s);
    std::vector<BuildingKind> kinds;
    if (s.contains("kinds")) {
      for (const json& k : s["kinds"]) kinds.push_back(parse_building_kind(k.get<std::string>()));
    } else {
      kinds = paper_mix_kinds();
    }
    sc = synth_scenario(kinds, opts);
  } else {
    require(j.contains("buildings"), "either 'synth' or 'buildings' is required");
    for (const json& b : j["buildings"]) {
      BuildingModel m = read_building(b);
      sc.x0.push_back(to_vector(b.at("x0")));
      if (b.contains("disturbance_csv")) {
        std::filesystem::path p = b["disturbance_csv"].get<std::string>();
        if (p.is_relative()) p = base / p;
        sc.disturbance.push_back(read_disturbance_csv(p));
      } else {
        sc.disturbance.push_back(to_matrix(b.at("disturbance")));
      }
      sc.buildings.push_back(std::move(m));
    }
  }
  sc.name = j.value("name", path.stem().string());
  sc.horizon = j.value("horizon", sc.horizon);
  sc.dt_hours = j.value("dt_hours", sc.dt_hours);
  sc.mu = j.value("mu", sc.mu);
  sc.mismatch = j.value("mismatch", sc.mismatch);
  if (j.contains("coupling")) {
    const json& c = j["coupling"];
    if (c.contains("v_tilde")) sc.v_tilde = to_vector(c["v_tilde"]);
    sc.v_lo = c.value("v_lo", sc.v_lo);
    sc.v_hi = c.value("v_hi", sc.v_hi);
    if (c.contains("pi")) sc.pi = to_vector(c["pi"]);
    if (c.contains("G")) {
      const Eigen::VectorXd G = to_vector(c["G"]);
      require(G.size() == sc.num_buildings(), "coupling.G needs one entry per building");
      for (int i = 0; i < sc.num_buildings(); ++i) sc.buildings[i].G = G(i);
    }
  }
  sc.validate();
  return sc;
}

void save_scenario(const std::filesystem::path& path, const Scenario& sc) {
  sc.validate();
  json j;
  j["name"] = sc.name;
  j["horizon"] = sc.horizon;
  j["dt_hours"] = sc.dt_hours;
  j["mu"] = sc.mu;
  j["mismatch"] = sc.mismatch;
  json buildings = json::array();
  for (int i = 0; i < sc.num_buildings(); ++i) {
    const BuildingModel& m = sc.buildings[i];
    json b;
    b["A"] = from_matrix(m.A);
    b["B"] = from_matrix(m.B);
    b["C"] = from_matrix(m.C);
    b["D"] = from_matrix(m.D);
    b["Q"] = from_matrix(m.Q);
    b["R"] = from_matrix(m.R);
    b["y_ref"] = from_vector(m.y_ref);
    b["y_lo"] = from_vector(m.y_lo);
    b["y_hi"] = from_vector(m.y_hi);
    b["u_lo"] = from_vector(m.u_lo);
    b["u_hi"] = from_vector(m.u_hi);
    b["F"] = from_vector(m.F.transpose());
    b["G"] = m.G;
    b["x0"] = from_vector(sc.x0[i]);
    b["disturbance"] = from_matrix(sc.disturbance[i]);
    buildings.push_back(b);
  }
  j["buildings"] = buildings;
  j["coupling"] = {{"v_tilde", from_vector(sc.v_tilde)},
                   {"v_lo", sc.v_lo},
                   {"v_hi", sc.v_hi},
                   {"pi", from_vector(sc.pi)}};
  std::ofstream out(path);
  if (!out) throw std::runtime_error("scenario: cannot write " + path.string());
  out << j.dump(1) << '\n';
}

}  // namespace bdr
