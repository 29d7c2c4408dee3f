#include "projsafe/toy.hpp"

namespace projsafe::toy {

dynamics::ControlAffineSystem system() {
  return dynamics::ControlAffineSystem(
      2, 2, [](const Vec&) { return Vec(Vec::Zero(2)); },
      [](const Vec&) { return Mat(Mat::Identity(2, 2)); });
}

barrier::BarrierFunction barrier(double k) {
  return barrier::BarrierFunction{[](const Vec& x) { return 1.0 - x.squaredNorm(); },
                                  [](const Vec& x) { return Vec(-2.0 * x); },
                                  kfun::ComparisonFunction::linear(k)};
}

pssf::Projection projection() {
  return pssf::Projection{1,
                          [](const Vec& x) {
                            Vec y(1);
                            y(0) = x.squaredNorm();
                            return y;
                          },
                          [](const Vec& x) { return Mat(2.0 * x.transpose()); }};
}

pssf::CompatiblePair compatible_pair(double k) {
  return pssf::CompatiblePair{barrier(k), [](const Vec& y) { return 1.0 - y(0); }, projection(),
                              kfun::ComparisonFunction::linear(1.0),
                              kfun::ComparisonFunction::linear(1.0)};
}

dynamics::DisturbanceSignal outward_push(double push) {
  return dynamics::DisturbanceSignal{[push](double, const Vec& x, const Vec&) {
                                       const double r = x.norm();
                                       return r > 0.0 ? Vec(push * x / r) : Vec(Vec::Zero(2));
                                     },
                                     push};
}

dynamics::Controller desired_controller(const Vec& goal) {
  return [goal](double, const Vec& x) { return Vec(2.0 * (goal - x)); };
}

Rollout run(double k, double push, const Vec& x0, double duration, double dt) {
  const auto sys = system();
  const auto bar = barrier(k);
  Vec goal(2);
  goal << 2.0, 0.0;
  const auto controller =
      barrier::filtered_controller(bar, sys, nullptr, desired_controller(goal));
  const auto dist = outward_push(push);

  Rollout out;
  out.trajectory = dynamics::simulate(sys, controller, x0, duration, dt, dist);
  const auto proj = projection();
  const auto& traj = out.trajectory;
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    const Vec& x = traj.states[j];
    const Vec& u = traj.inputs[j];
    const Vec d = dist.evaluate(traj.times[j], x, u);
    Vec delta = pssf::projected_dynamics(proj, sys, x, u, d) -
                pssf::projected_dynamics(proj, sys, x, u, Vec::Zero(2));
    out.projected_delta.push_back(std::move(delta));
  }
  out.delta_bar = out.projected_delta.empty() ? 0.0 : pssf::delta_bound(out.projected_delta);
  return out;
}

kfun::ComparisonFunction transported_gamma(double k) {
  const auto alpha = kfun::ComparisonFunction::linear(k);
  const auto gamma = pssf::issf_gamma(alpha, kfun::ComparisonFunction::linear(1.0));
  return pssf::projected_inflation(compatible_pair(k).sigma_upper, gamma);
}

}  // namespace projsafe::toy
