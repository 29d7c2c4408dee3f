#include "projsafe/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <variant>
#include <vector>

#include "projsafe/errors.hpp"

namespace projsafe::barrier {

namespace {

constexpr double kDegenerateA = 1e-10;

// Candidate minimizers of r -> iota(r) - slope * r on [0, bound].
std::vector<double> issf_candidates(const kfun::ComparisonFunction& iota, double slope,
                                    double bound) {
  using CF = kfun::ComparisonFunction;
  std::vector<double> cands{0.0, bound};
  const auto& fam = iota.family();
  if (std::holds_alternative<CF::Linear>(fam)) return cands;
  if (const auto* pw = std::get_if<CF::Power>(&fam)) {
    if (pw->p > 1.0 && slope > 0.0) {
      const double r = std::pow(slope / (pw->c * pw->p), 1.0 / (pw->p - 1.0));
      cands.push_back(std::clamp(r, 0.0, bound));
    }
    return cands;
  }
  if (const auto* tab = std::get_if<CF::Tabulated>(&fam)) {
    for (const auto& [r, v] : tab->points) {
      if (r > 0.0 && r < bound) cands.push_back(r);
    }
    return cands;
  }
  // Composition: no structure to exploit.
  const auto phi = [&](double r) { return iota(r) - slope * r; };
  constexpr int kScan = 2000;
  double best_r = 0.0;
  double best = phi(0.0);
  for (int i = 1; i <= kScan; ++i) {
    const double r = bound * i / kScan;
    const double v = phi(r);
    if (v < best) {
      best = v;
      best_r = r;
    }
  }
  double lo = std::max(0.0, best_r - bound / kScan);
  double hi = std::min(bound, best_r + bound / kScan);
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100 && hi - lo > 1e-15 * std::max(1.0, bound); ++it) {
    const double a = hi - ratio * (hi - lo);
    const double b = lo + ratio * (hi - lo);
    if (phi(a) < phi(b)) {
      hi = b;
    } else {
      lo = a;
    }
  }
  cands.push_back(best_r);
  cands.push_back(0.5 * (lo + hi));
  return cands;
}

}  // namespace

BarrierFunction ellipse_barrier(int state_dim, int angle_index, int rate_index, double angle_max,
                                double rate_max, kfun::ComparisonFunction alpha) {
  if (!(angle_max > 0.0) || !(rate_max > 0.0)) {
    throw ConfigError("ellipse barrier semi-axes must be positive");
  }
  if (angle_index < 0 || angle_index >= state_dim || rate_index < 0 || rate_index >= state_dim) {
    throw DimensionError("ellipse barrier index out of range");
  }
  const double ia = 1.0 / (angle_max * angle_max);
  const double ir = 1.0 / (rate_max * rate_max);
  auto h = [=](const Vec& x) {
    return 1.0 - x(angle_index) * x(angle_index) * ia - x(rate_index) * x(rate_index) * ir;
  };
  auto grad = [=](const Vec& x) {
    Vec g = Vec::Zero(state_dim);
    g(angle_index) = -2.0 * x(angle_index) * ia;
    g(rate_index) = -2.0 * x(rate_index) * ir;
    return g;
  };
  return BarrierFunction{h, grad, std::move(alpha)};
}

double h_dot(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
             const Vec& u) {
  return bar.grad(x).dot(sys.xdot(x, u));
}

double cbf_margin(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
                  const Vec& u) {
  return h_dot(bar, sys, x, u) + bar.alpha(bar.h(x));
}

IssfMargin issf_margin(const BarrierFunction& bar, const ControlAffineSystem& sys, const Vec& x,
                       const Vec& u, double d_bound, const kfun::ComparisonFunction& iota) {
  if (!(d_bound >= 0.0)) throw DomainError("disturbance bound must be non-negative");
  IssfMargin out;
  const double base = cbf_margin(bar, sys, x, u);
  const double slope = bar.grad(x).norm();
  if (d_bound == 0.0) {
    out.value = base;
    return out;
  }
  if (slope == 0.0) {
    out.value = base;
    out.degenerate_gradient = true;
    return out;
  }
  double worst = 0.0;  // r = 0 term: iota(0) = 0
  for (double r : issf_candidates(iota, slope, d_bound)) {
    worst = std::min(worst, iota(r) - slope * r);
  }
  out.value = base + worst;
  return out;
}

FilterResult safety_filter(const BarrierFunction& bar, const ControlAffineSystem& model,
                           const HdotResidual* residual, const Vec& u_des, const Vec& x) {
  if (u_des.size() != model.input_dim()) throw DimensionError("desired input has wrong dimension");
  const Vec grad = bar.grad(x);
  Vec a = model.actuation(x).transpose() * grad;
  double b = -bar.alpha(bar.h(x)) - grad.dot(model.drift(x));
  if (residual != nullptr) {
    a += residual->a(x);
    b -= residual->b(x);
  }

  FilterResult out;
  const double slack = a.dot(u_des) - b;
  if (slack >= 0.0) {
    out.u = u_des;
    out.constraint_margin = slack;
    return out;
  }
  const double a2 = a.squaredNorm();
  if (std::sqrt(a2) <= kDegenerateA) {
    out.u = u_des;
    out.constraint_margin = slack;
    out.infeasible = true;
    return out;
  }
  out.u = u_des + (-slack / a2) * a;
  out.constraint_margin = a.dot(out.u) - b;
  out.modified = true;
  return out;
}

dynamics::Controller filtered_controller(BarrierFunction bar, ControlAffineSystem model,
                                         const HdotResidual* residual,
                                         dynamics::Controller desired) {
  return [bar = std::move(bar), model = std::move(model), residual,
          desired = std::move(desired)](double t, const Vec& x) {
    return safety_filter(bar, model, residual, desired(t, x), x).u;
  };
}

}  // namespace projsafe::barrier
