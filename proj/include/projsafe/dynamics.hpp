#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace projsafe {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

namespace dynamics {

/// x' = f(x) + g(x) u. Evaluators are checked for shape and finiteness on
/// every call; a NaN or Inf raises NonFiniteValue.
class ControlAffineSystem {
 public:
  using Drift = std::function<Vec(const Vec&)>;
  using Actuation = std::function<Mat(const Vec&)>;

  ControlAffineSystem(int state_dim, int input_dim, Drift drift, Actuation actuation);

  int state_dim() const { return n_; }
  int input_dim() const { return m_; }

  Vec drift(const Vec& x) const;
  Mat actuation(const Vec& x) const;
  /// f(x) + g(x) u + d
  Vec xdot(const Vec& x, const Vec& u, const Vec& d) const;
  Vec xdot(const Vec& x, const Vec& u) const;

 private:
  void check_state(const Vec& x) const;

  int n_;
  int m_;
  Drift f_;
  Actuation g_;
};

/// Largest finite-difference ratio ||F(x)-F(y)|| / ||x-y|| of x -> f(x)+g(x)u
/// over consecutive pairs of the samples. Diagnostic only.
double lipschitz_probe(const ControlAffineSystem& sys, const std::vector<Vec>& samples,
                       const Vec& u);

/// max over the samples of ||f(x) - f_hat(x)||.
double drift_mismatch(const ControlAffineSystem& true_sys, const ControlAffineSystem& nominal_sys,
                      const std::vector<Vec>& samples);

struct SegwayParams {
  double body_mass = 44.8;
  double wheel_mass = 2.0;
  double com_length = 0.8;
  double body_inertia = 6.0;
  double wheel_radius = 0.195;
  double gravity = 9.81;
  double viscous_friction = 0.1;
  double motor_torque_scale = 1.0;

  /// Throws ConfigError unless all entries are positive (friction >= 0).
  void validate() const;
};

/// Multiplicative parameter scalings applied to build a nominal model.
struct PerturbationSpec {
  double body_mass_scale = 1.0;
  double wheel_mass_scale = 1.0;
  double com_length_scale = 1.0;
  double body_inertia_scale = 1.0;
  double wheel_radius_scale = 1.0;
  double friction_scale = 1.0;
  double torque_scale_scale = 1.0;
  bool drop_friction = false;

  static PerturbationSpec identity() { return {}; }
  /// body_mass x1.15, body_inertia x0.85, friction dropped, torque x0.9.
  static PerturbationSpec benchmark();

  SegwayParams apply(const SegwayParams& p) const;
};

// State layout of the planar Segway.
inline constexpr int kPos = 0;
inline constexpr int kVel = 1;
inline constexpr int kPitch = 2;
inline constexpr int kPitchRate = 3;

/// Planar wheeled inverted pendulum, x = (p, p', theta, theta'), input is
/// the wheel torque. Mass-matrix form D(q) q'' + C(q, q') q' + G(q) = B tau
/// with q = (p, theta), converted to control-affine form through D^-1.
ControlAffineSystem segway_true(const SegwayParams& params);
ControlAffineSystem segway_nominal(const SegwayParams& params, const PerturbationSpec& perturbation);

/// Kinetic plus potential energy; conserved when friction and torque vanish.
double segway_energy(const SegwayParams& params, const Vec& x);

/// Classical RK4 step with u and d held over the step. Throws
/// NumericalBlowUp if any component of the result exceeds 1e8 in magnitude.
Vec step_rk4(const ControlAffineSystem& sys, const Vec& x, const Vec& u, const Vec& d, double dt);

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;
  std::vector<Vec> inputs;  // one per step: size() == times.size() - 1
  bool terminated_early = false;
  std::string termination_reason;

  std::size_t steps() const { return inputs.size(); }
};

/// Additive disturbance d(t, x, u) with a declared sup-norm bound that is
/// checked on every query.
struct DisturbanceSignal {
  std::function<Vec(double, const Vec&, const Vec&)> evaluate;
  double declared_bound = 0.0;
};

using Controller = std::function<Vec(double t, const Vec& x)>;

/// Clamps every input component to [-u_max, u_max]; u_max <= 0 returns the
/// controller unchanged.
Controller saturate(Controller controller, double u_max);

/// Fixed-step closed-loop rollout. Failures inside the loop (blow-up,
/// non-finite dynamics, disturbance over its bound) end the trajectory with
/// terminated_early set; they are not rethrown.
Trajectory simulate(const ControlAffineSystem& sys, const Controller& controller, const Vec& x0,
                    double duration, double dt,
                    const std::optional<DisturbanceSignal>& disturbance = std::nullopt);

/// `t,x1..xn,u1..um`, 17 significant digits. The last row has empty input
/// fields since no input is applied after the final state.
void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
Trajectory read_trajectory_csv(std::istream& is, int state_dim, int input_dim);

}  // namespace dynamics
}  // namespace projsafe
