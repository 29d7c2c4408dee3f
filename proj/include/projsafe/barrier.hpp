#pragma once

#include <functional>

#include "projsafe/dynamics.hpp"
#include "projsafe/kfun.hpp"

namespace projsafe::barrier {

using dynamics::ControlAffineSystem;

/// Safe set C = {x : h(x) >= 0} with analytic gradient and decay rate alpha.
struct BarrierFunction {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad;
  kfun::ComparisonFunction alpha;
};

/// h(x) = 1 - (x[angle]/angle_max)^2 - (x[rate]/rate_max)^2 on an
/// n-dimensional state.
BarrierFunction ellipse_barrier(int state_dim, int angle_index, int rate_index, double angle_max,
                                double rate_max, kfun::ComparisonFunction alpha);

/// Learned correction to the barrier derivative: hdot ~ hdot_nominal + b(x) + a(x)^T u.
class HdotResidual {
 public:
  virtual ~HdotResidual() = default;
  virtual double b(const Vec& x) const = 0;
  virtual Vec a(const Vec& x) const = 0;
};

/// grad_h(x) . (f(x) + g(x) u)
double h_dot(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
             const Vec& u);

/// hdot(x, u) + alpha(h(x)); u is admissible for the CBF condition iff >= 0.
double cbf_margin(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
                  const Vec& u);

struct IssfMargin {
  double value = 0.0;
  /// grad_h(x) vanished while d_bound > 0. The disturbance cannot act on h
  /// at this state, so value is the d = 0 case.
  bool degenerate_gradient = false;
};

/// inf over ||d|| <= d_bound of hdot(x, u, d) + alpha(h(x)) + iota(||d||).
///
/// The worst direction is d = -r grad_h / ||grad_h||, which leaves the scalar
/// problem min over r in [0, d_bound] of -||grad_h|| r + iota(r). The minimizer
/// is an endpoint when iota is linear or concave; for convex power laws the
/// interior stationary point is also a candidate, and for tables every
/// breakpoint is. Compositions fall back to a dense scan with golden-section
/// refinement.
IssfMargin issf_margin(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
                       const Vec& u, double d_bound, const kfun::ComparisonFunction& iota);

struct FilterResult {
  Vec u;
  double constraint_margin = 0.0;  // a.u - b at the returned u
  bool modified = false;
  bool infeasible = false;
};

/// Min-norm safety filter: argmin ||u - u_des||^2 subject to a.u >= b with
/// a = grad_h^T g_hat(x) (+ a_hat(x)), b = -alpha(h(x)) - grad_h^T f_hat(x) (- b_hat(x)).
/// Closed form projection onto the half-space. When ||a|| <= 1e-10 and u_des
/// violates the constraint the result is flagged infeasible and u_des is
/// returned.
FilterResult safety_filter(const BarrierFunction& bar, const ControlAffineSystem& model,
                           const HdotResidual* residual, const Vec& u_des, const Vec& x);

/// Closed-loop controller x -> safety_filter(desired(t, x)). The residual
/// pointer, if any, must outlive the returned controller.
dynamics::Controller filtered_controller(BarrierFunction bar, ControlAffineSystem model,
                                         const HdotResidual* residual,
                                         dynamics::Controller desired);

}  // namespace projsafe::barrier
