#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "ddfl/rng.hpp"
#include "ddfl/trajectories.hpp"

namespace ddfl {

struct PendulumParams {
  double m1 = 1.0;  // link masses (kg)
  double m2 = 1.0;
  double l1 = 0.5;  // link lengths (m)
  double l2 = 0.5;
  double g = 9.81;  // gravity (m/s^2)
  double Ts = 0.1;  // sampling time (s)

  void validate() const;
};

using PlantState = Eigen::Vector4d;  // [theta1, thetadot1, theta2, thetadot2]

// Compact input-state operating box.
struct OmegaBox {
  Eigen::VectorXd tau_lb, tau_ub;  // input bounds (N*m)
  Eigen::VectorXd xi_lb, xi_ub;    // transformed-state bounds

  void validate() const;
  bool contains_input(const Eigen::VectorXd& u) const;
  bool contains_state(const Eigen::VectorXd& xi) const;

  // the paper's benchmark box: |tau| <= 20, |xi| <= pi/2
  static OmegaBox benchmark();
};

// Inertia, velocity-product and gravity terms of the two-link arm,
// M(q) qdd + C(q,qd) qd + Gv(q) = tau. Angles are absolute, measured from
// the hanging vertical, point masses at the link ends, no friction; q = theta,
// qd = thetadot.
struct ManipulatorTerms {
  Eigen::Matrix2d M;
  Eigen::Matrix2d C;
  Eigen::Vector2d Gv;
};

ManipulatorTerms manipulator_terms(const Eigen::Vector2d& theta, const Eigen::Vector2d& thetadot,
                                   const PendulumParams& p);

// Minimal simulator interface; enough for probing and rollouts.
class DiscretePlant {
 public:
  virtual ~DiscretePlant() = default;
  virtual int state_dim() const = 0;
  virtual int input_dim() const = 0;
  virtual int output_dim() const = 0;
  virtual Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const = 0;
  virtual Eigen::VectorXd output(const Eigen::VectorXd& x) const = 0;
};

// Euler-discretized fully-actuated double inverted pendulum,
// x+ = x + Ts*(Ax + B z), z = M^{-1}(tau - C thetadot - Gv), y = [theta1, theta2].
class PendulumPlant final : public DiscretePlant {
 public:
  explicit PendulumPlant(const PendulumParams& p);

  int state_dim() const override { return 4; }
  int input_dim() const override { return 2; }
  int output_dim() const override { return 2; }
  Eigen::VectorXd step(const Eigen::VectorXd& x, const Eigen::VectorXd& u) const override;
  Eigen::VectorXd output(const Eigen::VectorXd& x) const override;

  const PendulumParams& params() const { return params_; }
  SystemStructure structure() const;

  // Xi = T(x) = [x1, x1 + Ts x2, x3, x3 + Ts x4]
  Eigen::Vector4d transform_state(const PlantState& x) const;
  PlantState inverse_transform(const Eigen::Vector4d& xi) const;

  // v_i = 2 xi_{2i} - xi_{2i-1} + Ts^2 z_i: the exact linearizing input
  // Phi(u_k, Xi_k), equal to y_{i,k+d_i} along any noiseless run.
  Eigen::Vector2d synthetic_input(const PlantState& x, const Eigen::Vector2d& tau) const;

  double total_energy(const PlantState& x) const;

 private:
  PendulumParams params_;
};

struct ProbeResult {
  std::vector<int> d;
  bool sum_matches_state_dim = false;
};

// Data-driven relative-degree probe: step input of the given amplitude on one
// input channel at a time from rest; d_i is the first step index at which
// |y_i| exceeds the threshold (minimized over input channels).
ProbeResult estimate_relative_degrees(const DiscretePlant& plant, double probe_amplitude, double threshold,
                                      int horizon = 0);

// Open-loop rollout from x0 under the given inputs (m x N). The plant is
// stepped max(d)-1 extra times with zero input so that every output channel
// has its N + d_i samples.
struct RolloutData {
  Eigen::MatrixXd states;  // n_x x (N + max(d))
  Trajectory trajectory;   // noiseless
};

RolloutData rollout(const DiscretePlant& plant, const Eigen::VectorXd& x0, const Eigen::MatrixXd& inputs,
                    const SystemStructure& structure);

// Pre-stabilizing excitation controller: per-joint PD around a two-tone
// sinusoidal reference, with optional uniform torque dither, saturated at
// the torque limit.
struct ToneComponent {
  double amplitude = 0.0;
  double frequency = 0.0;  // rad/s
  double phase = 0.0;
};

struct PdToneController {
  double kp = 20.0;
  double kd = 2.0;
  std::vector<std::array<ToneComponent, 2>> reference;  // one pair of tones per joint
  double dither = 0.0;                                  // uniform torque dither amplitude (N*m)
  Eigen::VectorXd torque_limit;                         // per-joint |tau| saturation

  double reference_angle(int joint, double t) const;
  Eigen::VectorXd torque(double t, const Eigen::VectorXd& theta, const Eigen::VectorXd& thetadot, Rng& rng) const;

  // gains and tones used in the benchmark experiments
  static PdToneController benchmark(const OmegaBox& omega);
  // same structure, different tones; used to generate fresh evaluation inputs
  static PdToneController evaluation(const OmegaBox& omega);
};

struct CollectResult {
  Trajectory noisy;      // outputs contaminated with U(-w*, w*) noise
  Trajectory noiseless;  // same run without measurement noise
  Eigen::MatrixXd states;
};

// Closed-loop data collection: rolls the plant under the controller for N
// steps, adds i.i.d. uniform output noise, and certifies that the realized
// (tau_k, Xi_k) pairs stay inside the omega box.
CollectResult collect_data(const PendulumPlant& plant, const PdToneController& controller, int N, double w_star,
                           std::uint64_t seed, const OmegaBox& omega);

}  // namespace ddfl
