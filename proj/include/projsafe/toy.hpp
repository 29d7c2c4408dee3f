#pragma once

// Planar toy problem with a non-identity projection:
//   x' = u + d on R^2,  h(x) = 1 - |x|^2,  Pi(x) = |x|^2,  h_proj(y) = 1 - y,
// and sigma_lower = sigma_upper = Linear(1). The disturbance pushes radially
// outward with magnitude `push`, so the projected disturbance is 2 x.d.

#include "projsafe/barrier.hpp"
#include "projsafe/dynamics.hpp"
#include "projsafe/pssf.hpp"

namespace projsafe::toy {

dynamics::ControlAffineSystem system();
barrier::BarrierFunction barrier(double k);
pssf::Projection projection();
pssf::CompatiblePair compatible_pair(double k);
dynamics::DisturbanceSignal outward_push(double push);
/// Drives toward `goal` (outside the unit disk) with gain 2.
dynamics::Controller desired_controller(const Vec& goal);

struct Rollout {
  dynamics::Trajectory trajectory;
  std::vector<Vec> projected_delta;
  double delta_bar = 0.0;
};

/// Filtered closed loop under the outward push; delta is D_Pi(x) d along the
/// trajectory.
Rollout run(double k, double push, const Vec& x0, double duration, double dt);

/// ISSf gain of h_proj on the projected dynamics with iota = Linear(1),
/// transported through sigma_upper: gamma' = sigma_upper^-1 o alpha^-1.
kfun::ComparisonFunction transported_gamma(double k);

}  // namespace projsafe::toy
