#include "ddfl/plant.hpp"

#include <cmath>
#include <numbers>

namespace ddfl {

void PendulumParams::validate() const {
  if (m1 <= 0 || m2 <= 0 || l1 <= 0 || l2 <= 0 || g <= 0 || Ts <= 0)
    throw StructureError("PendulumParams: masses, lengths, gravity and Ts must be positive");
  if (Ts >= 1.0) throw StructureError("PendulumParams: Ts must be below 1 s");
}

void OmegaBox::validate() const {
  if (tau_lb.size() != tau_ub.size() || xi_lb.size() != xi_ub.size())
    throw DimensionError("OmegaBox: bound vectors must come in equal-sized pairs");
  if (((tau_ub - tau_lb).array() < 0).any() || ((xi_ub - xi_lb).array() < 0).any())
    throw StructureError("OmegaBox: lower bounds must not exceed upper bounds");
}

bool OmegaBox::contains_input(const Eigen::VectorXd& u) const {
  if (u.size() != tau_lb.size()) throw DimensionError("OmegaBox: input dimension does not match the box");
  return (u.array() >= tau_lb.array()).all() && (u.array() <= tau_ub.array()).all();
}

bool OmegaBox::contains_state(const Eigen::VectorXd& xi) const {
  if (xi.size() != xi_lb.size()) throw DimensionError("OmegaBox: state dimension does not match the box");
  return (xi.array() >= xi_lb.array()).all() && (xi.array() <= xi_ub.array()).all();
}

OmegaBox OmegaBox::benchmark() {
  OmegaBox box;
  box.tau_ub = Eigen::VectorXd::Constant(2, 20.0);
  box.tau_lb = -box.tau_ub;
  box.xi_ub = Eigen::VectorXd::Constant(4, std::numbers::pi / 2.0);
  box.xi_lb = -box.xi_ub;
  return box;
}

ManipulatorTerms manipulator_terms(const Eigen::Vector2d& theta, const Eigen::Vector2d& thetadot,
                                   const PendulumParams& p) {
  ManipulatorTerms t;
  const double a = p.m2 * p.l1 * p.l2;
  const double delta = theta(0) - theta(1);
  const double cd = std::cos(delta);
  const double sd = std::sin(delta);
  t.M << (p.m1 + p.m2) * p.l1 * p.l1, a * cd, a * cd, p.m2 * p.l2 * p.l2;
  t.C << 0.0, a * sd * thetadot(1), -a * sd * thetadot(0), 0.0;
  // angles from the hanging vertical: gravity is restoring
  t.Gv << p.g * (p.m1 + p.m2) * p.l1 * std::sin(theta(0)), p.g * p.m2 * p.l2 * std::sin(theta(1));
  return t;
}

PendulumPlant::PendulumPlant(const PendulumParams& p) : params_(p) { p.validate(); }

SystemStructure PendulumPlant::structure() const { return SystemStructure{2, 4, {2, 2}}; }

Eigen::VectorXd PendulumPlant::step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const {
  const Eigen::Vector2d theta(x(0), x(2));
  const Eigen::Vector2d thetadot(x(1), x(3));
  const ManipulatorTerms t = manipulator_terms(theta, thetadot, params_);
  // det(M) = m2 l1^2 l2^2 (m1 + m2 sin^2(delta)) > 0 for positive parameters
  const Eigen::Vector2d z = t.M.inverse() * (u.head<2>() - t.C * thetadot - t.Gv);
  Eigen::VectorXd next(4);
  next << x(0) + params_.Ts * x(1), x(1) + params_.Ts * z(0), x(2) + params_.Ts * x(3), x(3) + params_.Ts * z(1);
  if (!next.allFinite()) throw NumericalError("pendulum step produced a non-finite state");
  return next;
}

Eigen::VectorXd PendulumPlant::output(const Eigen::VectorXd& x) const {
  Eigen::VectorXd y(2);
  y << x(0), x(2);
  return y;
}

Eigen::Vector4d PendulumPlant::transform_state(const PlantState& x) const {
  const double Ts = params_.Ts;
  return Eigen::Vector4d(x(0), x(0) + Ts * x(1), x(2), x(2) + Ts * x(3));
}

PlantState PendulumPlant::inverse_transform(const Eigen::Vector4d& xi) const {
  const double Ts = params_.Ts;
  return PlantState(xi(0), (xi(1) - xi(0)) / Ts, xi(2), (xi(3) - xi(2)) / Ts);
}

Eigen::Vector2d PendulumPlant::synthetic_input(const PlantState& x, const Eigen::Vector2d& tau) const {
  const Eigen::Vector2d theta(x(0), x(2));
  const Eigen::Vector2d thetadot(x(1), x(3));
  const ManipulatorTerms t = manipulator_terms(theta, thetadot, params_);
  const Eigen::Vector2d z = t.M.inverse() * (tau - t.C * thetadot - t.Gv);
  const Eigen::Vector4d xi = transform_state(x);
  const double Ts2 = params_.Ts * params_.Ts;
  return Eigen::Vector2d(2.0 * xi(1) - xi(0) + Ts2 * z(0), 2.0 * xi(3) - xi(2) + Ts2 * z(1));
}

double PendulumPlant::total_energy(const PlantState& x) const {
  const Eigen::Vector2d theta(x(0), x(2));
  const Eigen::Vector2d thetadot(x(1), x(3));
  const ManipulatorTerms t = manipulator_terms(theta, thetadot, params_);
  const double kinetic = 0.5 * thetadot.dot(t.M * thetadot);
  const double potential = -params_.g * ((params_.m1 + params_.m2) * params_.l1 * std::cos(theta(0)) +
                                         params_.m2 * params_.l2 * std::cos(theta(1)));
  return kinetic + potential;
}

ProbeResult estimate_relative_degrees(const DiscretePlant& plant, double probe_amplitude, double threshold,
                                      int horizon) {
  const int n = plant.state_dim();
  const int m = plant.input_dim();
  const int p = plant.output_dim();
  if (horizon <= 0) horizon = n + 2;
  std::vector<int> first(p, -1);
  for (int j = 0; j < m; ++j) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    u(j) = probe_amplitude;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int k = 1; k <= horizon; ++k) {
      x = plant.step(x, u);
      const Eigen::VectorXd y = plant.output(x);
      for (int i = 0; i < p; ++i)
        if (std::abs(y(i)) > threshold && (first[i] < 0 || k < first[i])) first[i] = k;
    }
  }
  ProbeResult res;
  res.d.resize(p);
  for (int i = 0; i < p; ++i) {
    if (first[i] < 0)
      throw ProbeError("relative-degree probe: output " + std::to_string(i + 1) + " did not exceed threshold " +
                       std::to_string(threshold) + " within " + std::to_string(horizon) + " steps");
    res.d[i] = first[i];
  }
  int sum = 0;
  for (int di : res.d) sum += di;
  res.sum_matches_state_dim = (sum == n);
  return res;
}

RolloutData rollout(const DiscretePlant& plant, const Eigen::VectorXd& x0, const Eigen::MatrixXd& inputs,
                    const SystemStructure& structure) {
  structure.validate();
  const int N = static_cast<int>(inputs.cols());
  if (N < 1) throw DimensionError("rollout: need at least one input sample");
  if (inputs.rows() != plant.input_dim()) throw DimensionError("rollout: input channel count mismatch");
  const int dmax = structure.max_degree();
  const int total = N + dmax;  // states x_0 .. x_{N+dmax-1}

  RolloutData data;
  data.states.resize(plant.state_dim(), total);
  data.states.col(0) = x0;
  Eigen::VectorXd x = x0;
  for (int k = 1; k < total; ++k) {
    const Eigen::VectorXd u = (k - 1 < N) ? inputs.col(k - 1).eval() : Eigen::VectorXd::Zero(plant.input_dim()).eval();
    try {
      x = plant.step(x, u);
    } catch (const NumericalError& e) {
      throw NumericalError(std::string(e.what()) + " at step " + std::to_string(k));
    }
    data.states.col(k) = x;
  }

  data.trajectory.structure = structure;
  data.trajectory.inputs = inputs;
  data.trajectory.outputs.resize(structure.m);
  for (int i = 0; i < structure.m; ++i) {
    data.trajectory.outputs[i].resize(N + structure.d[i]);
    for (int k = 0; k < N + structure.d[i]; ++k) data.trajectory.outputs[i](k) = plant.output(data.states.col(k))(i);
  }
  data.trajectory.validate();
  return data;
}

double PdToneController::reference_angle(int joint, double t) const {
  const auto& tones = reference.at(static_cast<std::size_t>(joint));
  double ref = 0.0;
  for (const auto& tone : tones) ref += tone.amplitude * std::sin(tone.frequency * t + tone.phase);
  return ref;
}

Eigen::VectorXd PdToneController::torque(double t, const Eigen::VectorXd& theta, const Eigen::VectorXd& thetadot,
                                         Rng& rng) const {
  const int m = static_cast<int>(reference.size());
  Eigen::VectorXd tau(m);
  for (int j = 0; j < m; ++j) {
    tau(j) = kp * (reference_angle(j, t) - theta(j)) - kd * thetadot(j);
    if (dither > 0.0) tau(j) += rng.uniform(-dither, dither);
    if (torque_limit.size() == m) tau(j) = std::clamp(tau(j), -torque_limit(j), torque_limit(j));
  }
  return tau;
}

PdToneController PdToneController::benchmark(const OmegaBox& omega) {
  PdToneController c;
  // gains sized for the Euler-discretized loop at Ts = 0.1: the velocity
  // feedback passes through M^{-1} (entries up to ~8), so kd must stay below
  // 2 / (Ts * max Minv) ~ 2.5 for the sampled loop to contract
  c.kp = 20.0;
  c.kd = 2.0;
  c.reference = {
      {ToneComponent{0.35, 0.7, 0.0}, ToneComponent{0.25, 1.9, 0.9}},
      {ToneComponent{0.30, 1.1, 0.4}, ToneComponent{0.25, 2.7, 0.0}},
  };
  c.dither = 0.5;
  c.torque_limit = omega.tau_ub;
  return c;
}

PdToneController PdToneController::evaluation(const OmegaBox& omega) {
  PdToneController c;
  c.kp = 20.0;
  c.kd = 2.0;
  c.reference = {
      {ToneComponent{0.30, 0.9, 0.3}, ToneComponent{0.20, 2.3, 0.0}},
      {ToneComponent{0.32, 0.6, 0.0}, ToneComponent{0.18, 3.1, 1.2}},
  };
  c.dither = 0.0;  // evaluation inputs are deterministic given the config
  c.torque_limit = omega.tau_ub;
  return c;
}

CollectResult collect_data(const PendulumPlant& plant, const PdToneController& controller, int N, double w_star,
                           std::uint64_t seed, const OmegaBox& omega) {
  if (N < 1) throw DimensionError("collect_data: N must be at least 1");
  if (w_star < 0) throw StructureError("collect_data: noise bound must be non-negative");
  omega.validate();
  const SystemStructure structure = plant.structure();
  const int dmax = structure.max_degree();
  const double Ts = plant.params().Ts;

  Rng master(seed);
  Rng dither_rng = master.child("collect/dither");

  // closed-loop rollout; the controller only acts over the N input steps
  Eigen::MatrixXd inputs(2, N);
  Eigen::MatrixXd states(4, N + dmax);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(4);
  states.col(0) = x;
  for (int k = 0; k < N + dmax - 1; ++k) {
    Eigen::VectorXd u = Eigen::VectorXd::Zero(2);
    if (k < N) {
      const Eigen::Vector2d theta(x(0), x(2));
      const Eigen::Vector2d thetadot(x(1), x(3));
      u = controller.torque(k * Ts, theta, thetadot, dither_rng);
      inputs.col(k) = u;
    }
    try {
      x = plant.step(x, u);
    } catch (const NumericalError& e) {
      throw CollectionError(std::string(e.what()) + " during collection at step " + std::to_string(k), k);
    }
    states.col(k + 1) = x;
  }

  // omega certification on the realized (tau_k, Xi_k) pairs
  for (int k = 0; k < N; ++k) {
    if (!omega.contains_input(inputs.col(k)))
      throw CollectionError("collected input left the operating box at step " + std::to_string(k), k);
  }
  for (int k = 0; k <= N; ++k) {
    const Eigen::Vector4d xi = plant.transform_state(states.col(k));
    if (!omega.contains_state(xi))
      throw CollectionError("collected state left the operating box at step " + std::to_string(k), k);
  }

  CollectResult result;
  result.states = states;
  result.noiseless.structure = structure;
  result.noiseless.inputs = inputs;
  result.noiseless.outputs.resize(2);
  for (int i = 0; i < 2; ++i) {
    result.noiseless.outputs[i].resize(N + structure.d[i]);
    for (int k = 0; k < N + structure.d[i]; ++k) result.noiseless.outputs[i](k) = plant.output(states.col(k))(i);
  }
  result.noiseless.validate();

  result.noisy = result.noiseless;
  result.noisy.noise_bound = w_star;
  result.noisy.noise_seed = seed;
  if (w_star > 0.0) {
    for (int i = 0; i < 2; ++i) {
      Rng noise = master.child("collect/noise/ch" + std::to_string(i));
      for (Eigen::Index k = 0; k < result.noisy.outputs[i].size(); ++k)
        result.noisy.outputs[i](k) += noise.uniform(-w_star, w_star);
    }
  }
  return result;
}

}  // namespace ddfl
