#include "projsafe/dynamics.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

#include "projsafe/csv.hpp"
#include "projsafe/errors.hpp"

namespace projsafe::dynamics {

namespace {

constexpr double kBlowUp = 1e8;
constexpr double kMinMassDet = 1e-10;

}  // namespace

ControlAffineSystem::ControlAffineSystem(int state_dim, int input_dim, Drift drift,
                                         Actuation actuation)
    : n_(state_dim), m_(input_dim), f_(std::move(drift)), g_(std::move(actuation)) {
  if (n_ <= 0 || m_ <= 0) throw DimensionError("system dimensions must be positive");
  if (!f_ || !g_) throw DimensionError("system needs both drift and actuation evaluators");
}

void ControlAffineSystem::check_state(const Vec& x) const {
  if (x.size() != n_) {
    throw DimensionError("state has dimension " + std::to_string(x.size()) + ", expected " +
                         std::to_string(n_));
  }
}

Vec ControlAffineSystem::drift(const Vec& x) const {
  check_state(x);
  Vec f = f_(x);
  if (f.size() != n_) throw DimensionError("drift returned wrong dimension");
  if (!f.allFinite()) throw NonFiniteValue("drift is not finite");
  return f;
}

Mat ControlAffineSystem::actuation(const Vec& x) const {
  check_state(x);
  Mat g = g_(x);
  if (g.rows() != n_ || g.cols() != m_) throw DimensionError("actuation returned wrong shape");
  if (!g.allFinite()) throw NonFiniteValue("actuation is not finite");
  return g;
}

Vec ControlAffineSystem::xdot(const Vec& x, const Vec& u, const Vec& d) const {
  if (u.size() != m_) throw DimensionError("input has wrong dimension");
  if (d.size() != n_) throw DimensionError("disturbance has wrong dimension");
  return drift(x) + actuation(x) * u + d;
}

Vec ControlAffineSystem::xdot(const Vec& x, const Vec& u) const {
  return xdot(x, u, Vec::Zero(n_));
}

double lipschitz_probe(const ControlAffineSystem& sys, const std::vector<Vec>& samples,
                       const Vec& u) {
  double worst = 0.0;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const double dx = (samples[i] - samples[i - 1]).norm();
    if (dx == 0.0) continue;
    const double df = (sys.xdot(samples[i], u) - sys.xdot(samples[i - 1], u)).norm();
    worst = std::max(worst, df / dx);
  }
  return worst;
}

double drift_mismatch(const ControlAffineSystem& true_sys, const ControlAffineSystem& nominal_sys,
                      const std::vector<Vec>& samples) {
  if (true_sys.state_dim() != nominal_sys.state_dim()) {
    throw DimensionError("true and nominal systems differ in dimension");
  }
  double worst = 0.0;
  for (const Vec& x : samples) {
    worst = std::max(worst, (true_sys.drift(x) - nominal_sys.drift(x)).norm());
  }
  return worst;
}

void SegwayParams::validate() const {
  const auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw ConfigError(std::string("segway parameter '") + name + "' must be positive");
    }
  };
  positive(body_mass, "body_mass");
  positive(wheel_mass, "wheel_mass");
  positive(com_length, "com_length");
  positive(body_inertia, "body_inertia");
  positive(wheel_radius, "wheel_radius");
  positive(gravity, "gravity");
  positive(motor_torque_scale, "motor_torque_scale");
  if (!(viscous_friction >= 0.0) || !std::isfinite(viscous_friction)) {
    throw ConfigError("segway parameter 'viscous_friction' must be non-negative");
  }
}

PerturbationSpec PerturbationSpec::benchmark() {
  PerturbationSpec p;
  p.body_mass_scale = 1.15;
  p.body_inertia_scale = 0.85;
  p.drop_friction = true;
  p.torque_scale_scale = 0.9;
  return p;
}

SegwayParams PerturbationSpec::apply(const SegwayParams& p) const {
  SegwayParams q = p;
  q.body_mass *= body_mass_scale;
  q.wheel_mass *= wheel_mass_scale;
  q.com_length *= com_length_scale;
  q.body_inertia *= body_inertia_scale;
  q.wheel_radius *= wheel_radius_scale;
  q.viscous_friction = drop_friction ? 0.0 : q.viscous_friction * friction_scale;
  q.motor_torque_scale *= torque_scale_scale;
  return q;
}

namespace {

struct MassMatrix {
  double d11;
  double d12;
  double d22;
  double det;
};

MassMatrix mass_matrix(const SegwayParams& p, double pitch) {
  // The wheel is a uniform disk: its rotational inertia adds mw/2 to the
  // translational mass.
  const double wheel_inertia_equiv = 0.5 * p.wheel_mass;
  MassMatrix m{};
  m.d11 = p.body_mass + p.wheel_mass + wheel_inertia_equiv;
  m.d12 = p.body_mass * p.com_length * std::cos(pitch);
  m.d22 = p.body_inertia + p.body_mass * p.com_length * p.com_length;
  m.det = m.d11 * m.d22 - m.d12 * m.d12;
  if (m.det < kMinMassDet) throw SingularMassMatrix("segway mass matrix is singular");
  return m;
}

ControlAffineSystem make_segway(SegwayParams p) {
  p.validate();
  auto drift = [p](const Vec& x) {
    const double vel = x(kVel);
    const double pitch = x(kPitch);
    const double rate = x(kPitchRate);
    const MassMatrix m = mass_matrix(p, pitch);
    // rhs = -C q' - G
    const double r1 =
        p.body_mass * p.com_length * std::sin(pitch) * rate * rate - p.viscous_friction * vel;
    const double r2 = p.body_mass * p.gravity * p.com_length * std::sin(pitch);
    Vec f(4);
    f(kPos) = vel;
    f(kVel) = (m.d22 * r1 - m.d12 * r2) / m.det;
    f(kPitch) = rate;
    f(kPitchRate) = (-m.d12 * r1 + m.d11 * r2) / m.det;
    return f;
  };
  auto actuation = [p](const Vec& x) {
    const MassMatrix m = mass_matrix(p, x(kPitch));
    const double b1 = p.motor_torque_scale / p.wheel_radius;
    const double b2 = -p.motor_torque_scale;
    Mat g = Mat::Zero(4, 1);
    g(kVel, 0) = (m.d22 * b1 - m.d12 * b2) / m.det;
    g(kPitchRate, 0) = (-m.d12 * b1 + m.d11 * b2) / m.det;
    return g;
  };
  return ControlAffineSystem(4, 1, drift, actuation);
}

}  // namespace

ControlAffineSystem segway_true(const SegwayParams& params) { return make_segway(params); }

ControlAffineSystem segway_nominal(const SegwayParams& params,
                                   const PerturbationSpec& perturbation) {
  return make_segway(perturbation.apply(params));
}

double segway_energy(const SegwayParams& p, const Vec& x) {
  const MassMatrix m = mass_matrix(p, x(kPitch));
  const double v = x(kVel);
  const double w = x(kPitchRate);
  const double kinetic = 0.5 * (m.d11 * v * v + 2.0 * m.d12 * v * w + m.d22 * w * w);
  const double potential = p.body_mass * p.gravity * p.com_length * std::cos(x(kPitch));
  return kinetic + potential;
}

Vec step_rk4(const ControlAffineSystem& sys, const Vec& x, const Vec& u, const Vec& d, double dt) {
  if (!(dt > 0.0)) throw DomainError("integration step must be positive");
  const Vec k1 = sys.xdot(x, u, d);
  const Vec k2 = sys.xdot(x + 0.5 * dt * k1, u, d);
  const Vec k3 = sys.xdot(x + 0.5 * dt * k2, u, d);
  const Vec k4 = sys.xdot(x + dt * k3, u, d);
  Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!next.allFinite() || next.cwiseAbs().maxCoeff() > kBlowUp) {
    throw NumericalBlowUp("state magnitude exceeded 1e8");
  }
  return next;
}

Controller saturate(Controller controller, double u_max) {
  if (!(u_max > 0.0)) return controller;
  return [controller = std::move(controller), u_max](double t, const Vec& x) {
    return Vec(controller(t, x).cwiseMax(-u_max).cwiseMin(u_max));
  };
}

Trajectory simulate(const ControlAffineSystem& sys, const Controller& controller, const Vec& x0,
                    double duration, double dt,
                    const std::optional<DisturbanceSignal>& disturbance) {
  if (!(dt > 0.0)) throw DomainError("time step must be positive");
  if (duration < 0.0) throw DomainError("duration must be non-negative");
  const double ratio = duration / dt;
  const double count = std::round(ratio);
  if (std::abs(ratio - count) > 1e-9 * std::max(1.0, ratio)) {
    throw DomainError("duration must be an integer multiple of dt");
  }
  if (x0.size() != sys.state_dim()) throw DimensionError("initial state has wrong dimension");
  const auto steps = static_cast<std::size_t>(count);

  Trajectory traj;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.inputs.reserve(steps);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);

  const Vec zero = Vec::Zero(sys.state_dim());
  for (std::size_t j = 0; j < steps; ++j) {
    const double t = static_cast<double>(j) * dt;
    const Vec& x = traj.states.back();
    try {
      Vec u = controller(t, x);
      if (u.size() != sys.input_dim()) throw DimensionError("controller output has wrong dimension");
      if (!u.allFinite()) throw NonFiniteValue("controller output is not finite");
      Vec d = zero;
      if (disturbance) {
        d = disturbance->evaluate(t, x, u);
        if (d.size() != sys.state_dim()) throw DimensionError("disturbance has wrong dimension");
        if (d.cwiseAbs().maxCoeff() > disturbance->declared_bound * (1.0 + 1e-12)) {
          throw DisturbanceBoundExceeded("disturbance exceeded its declared bound at t = " +
                                         std::to_string(t));
        }
      }
      Vec next = step_rk4(sys, x, u, d, dt);
      traj.inputs.push_back(std::move(u));
      traj.states.push_back(std::move(next));
      traj.times.push_back(static_cast<double>(j + 1) * dt);
    } catch (const Error& e) {
      traj.terminated_early = true;
      traj.termination_reason = e.what();
      break;
    }
  }
  return traj;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  const int n = traj.states.empty() ? 0 : static_cast<int>(traj.states.front().size());
  const int m = traj.inputs.empty() ? 0 : static_cast<int>(traj.inputs.front().size());
  std::vector<std::string> header{"t"};
  for (int i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 1; i <= m; ++i) header.push_back("u" + std::to_string(i));
  csv::write_row(os, header);
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    std::vector<std::string> row{csv::fmt(traj.times[j])};
    for (int i = 0; i < n; ++i) row.push_back(csv::fmt(traj.states[j](i)));
    for (int i = 0; i < m; ++i) {
      row.push_back(j < traj.inputs.size() ? csv::fmt(traj.inputs[j](i)) : std::string());
    }
    csv::write_row(os, row);
  }
}

Trajectory read_trajectory_csv(std::istream& is, int state_dim, int input_dim) {
  Trajectory traj;
  std::string line;
  if (!std::getline(is, line)) throw Error("empty trajectory file");
  const auto header = csv::split(line);
  if (static_cast<int>(header.size()) != 1 + state_dim + input_dim) {
    throw Error("trajectory header does not match dimensions");
  }
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    if (static_cast<int>(fields.size()) != 1 + state_dim + input_dim) {
      throw Error("malformed trajectory row");
    }
    traj.times.push_back(csv::parse_double(fields[0]));
    Vec x(state_dim);
    for (int i = 0; i < state_dim; ++i) x(i) = csv::parse_double(fields[1 + i]);
    traj.states.push_back(std::move(x));
    if (!fields[1 + state_dim].empty()) {
      Vec u(input_dim);
      for (int i = 0; i < input_dim; ++i) u(i) = csv::parse_double(fields[1 + state_dim + i]);
      traj.inputs.push_back(std::move(u));
    }
  }
  return traj;
}

}  // namespace projsafe::dynamics
