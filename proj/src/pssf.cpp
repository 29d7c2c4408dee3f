#include "projsafe/pssf.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

#include "projsafe/csv.hpp"
#include "projsafe/errors.hpp"

namespace projsafe::pssf {

namespace {

constexpr double kCompatSlack = 1e-9;

}  // namespace

Projection identity_projection(int state_dim) {
  return Projection{state_dim, [](const Vec& x) { return x; },
                    [state_dim](const Vec&) { return Mat::Identity(state_dim, state_dim); }};
}

Projection barrier_projection(const BarrierFunction& bar) {
  return Projection{1,
                    [h = bar.h](const Vec& x) {
                      Vec y(1);
                      y(0) = h(x);
                      return y;
                    },
                    [grad = bar.grad](const Vec& x) {
                      const Vec g = grad(x);
                      return Mat(g.transpose());
                    }};
}

Vec projected_dynamics(const Projection& proj, const ControlAffineSystem& sys, const Vec& x,
                       const Vec& u, const Vec& d) {
  const Mat jac = proj.jacobian(x);
  if (jac.rows() != proj.output_dim || jac.cols() != sys.state_dim()) {
    throw DimensionError("projection Jacobian has wrong shape");
  }
  return jac * sys.xdot(x, u, d);
}

CompatiblePair identity_pair(const BarrierFunction& bar) {
  return CompatiblePair{bar, [](const Vec& y) { return y(0); }, barrier_projection(bar),
                        ComparisonFunction::linear(1.0), ComparisonFunction::linear(1.0)};
}

CompatibilityReport check_compatibility(const CompatiblePair& pair,
                                        const std::vector<Vec>& samples) {
  if (samples.empty()) throw DomainError("compatibility check needs at least one sample");
  CompatibilityReport rep;
  rep.worst_lower_slack = std::numeric_limits<double>::infinity();
  rep.worst_upper_slack = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Vec& x = samples[i];
    const double hx = pair.h.h(x);
    const double hp = pair.h_proj(pair.projection.map(x));
    const double lower = hp - pair.sigma_lower(hx);
    const double upper = pair.sigma_upper(hx) - hp;
    rep.worst_lower_slack = std::min(rep.worst_lower_slack, lower);
    rep.worst_upper_slack = std::min(rep.worst_upper_slack, upper);
    if (lower < -kCompatSlack) rep.lower_ok = false;
    if (upper < -kCompatSlack) rep.upper_ok = false;
    if ((lower < -kCompatSlack || upper < -kCompatSlack) && !rep.first_violation) {
      rep.first_violation = i;
    }
    if (hx >= 0.0 && hp < 0.0) {
      rep.set_preserved = false;
      if (!rep.first_set_violation) rep.first_set_violation = i;
    }
  }
  rep.pass = rep.lower_ok && rep.upper_ok && rep.set_preserved;
  return rep;
}

double projected_disturbance_model_error(const BarrierFunction& bar,
                                         const ControlAffineSystem& true_sys,
                                         const ControlAffineSystem& nominal_sys, const Vec& x,
                                         const Vec& u) {
  if (true_sys.state_dim() != nominal_sys.state_dim() ||
      true_sys.input_dim() != nominal_sys.input_dim()) {
    throw DimensionError("true and nominal systems differ in dimension");
  }
  return barrier::h_dot(bar, true_sys, x, u) - barrier::h_dot(bar, nominal_sys, x, u);
}

double projected_disturbance_learned(const BarrierFunction& bar,
                                     const ControlAffineSystem& nominal_sys,
                                     const barrier::HdotResidual& residual,
                                     const ControlAffineSystem& true_sys, const Vec& x,
                                     const Vec& u) {
  const double predicted =
      barrier::h_dot(bar, nominal_sys, x, u) + residual.b(x) + residual.a(x).dot(u);
  return barrier::h_dot(bar, true_sys, x, u) - predicted;
}

DeltaTrace delta_trace(const BarrierFunction& bar, const ControlAffineSystem& true_sys,
                       const ControlAffineSystem& nominal_sys,
                       const barrier::HdotResidual* residual, const Trajectory& traj) {
  DeltaTrace trace;
  trace.mode = residual ? DeltaMode::LearnedResidual : DeltaMode::ModelError;
  trace.times.reserve(traj.steps());
  trace.delta.reserve(traj.steps());
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    const Vec& x = traj.states[j];
    const Vec& u = traj.inputs[j];
    trace.times.push_back(traj.times[j]);
    trace.delta.push_back(
        residual ? projected_disturbance_learned(bar, nominal_sys, *residual, true_sys, x, u)
                 : projected_disturbance_model_error(bar, true_sys, nominal_sys, x, u));
  }
  return trace;
}

std::vector<Vec> projected_delta_trace(const Projection& proj, const ControlAffineSystem& true_sys,
                                       const ControlAffineSystem& nominal_sys,
                                       const barrier::HdotResidual* residual,
                                       const Trajectory& traj) {
  if (residual && proj.output_dim != 1) {
    throw DimensionError("a scalar residual needs a scalar projection");
  }
  std::vector<Vec> out;
  out.reserve(traj.steps());
  for (std::size_t j = 0; j < traj.steps(); ++j) {
    const Vec& x = traj.states[j];
    const Vec& u = traj.inputs[j];
    // y' = D_Pi (f_hat + g_hat u) + D_Pi d with d = true - nominal vector field.
    Vec delta = projected_dynamics(proj, true_sys, x, u, Vec::Zero(x.size())) -
                projected_dynamics(proj, nominal_sys, x, u, Vec::Zero(x.size()));
    if (residual) delta(0) -= residual->b(x) + residual->a(x).dot(u);
    out.push_back(std::move(delta));
  }
  return out;
}

double delta_bound(const DeltaTrace& trace) {
  if (trace.delta.empty()) throw DomainError("delta trace is empty");
  double worst = 0.0;
  for (double d : trace.delta) worst = std::max(worst, std::abs(d));
  return worst;
}

double delta_bound(const std::vector<Vec>& projected) {
  if (projected.empty()) throw DomainError("delta trace is empty");
  double worst = 0.0;
  for (const Vec& d : projected) worst = std::max(worst, d.norm());
  return worst;
}

PssfCertificate make_certificate(const ComparisonFunction& alpha, double delta_bar) {
  PssfCertificate cert = certificate_from_gamma(kfun::inverse(alpha), delta_bar);
  cert.alpha = alpha;
  return cert;
}

PssfCertificate certificate_from_gamma(const ComparisonFunction& gamma, double delta_bar) {
  if (!(delta_bar >= 0.0) || !std::isfinite(delta_bar)) {
    throw DomainError("delta_bar must be finite and non-negative");
  }
  PssfCertificate cert;
  cert.delta_bar = delta_bar;
  cert.gamma = gamma;
  cert.inflation = gamma(delta_bar);
  cert.floor = -cert.inflation;
  return cert;
}

ComparisonFunction issf_gamma(const ComparisonFunction& alpha, const ComparisonFunction& iota) {
  return kfun::compose(kfun::inverse(alpha), iota);
}

ComparisonFunction projected_inflation(const ComparisonFunction& sigma_upper,
                                      const ComparisonFunction& gamma) {
  return kfun::compose(kfun::inverse(sigma_upper), gamma);
}

double direct_inflation_floor(const ComparisonFunction& sigma_upper,
                              const ComparisonFunction& gamma, double delta_bar) {
  return kfun::inverse(sigma_upper)(-gamma(delta_bar));
}

std::string to_string(CertificateStatus status) {
  switch (status) {
    case CertificateStatus::Pass:
      return "pass";
    case CertificateStatus::Fail:
      return "fail";
    case CertificateStatus::PreconditionViolated:
      return "precondition_violated";
  }
  return "unknown";
}

CertificateReport verify_certificate(const Trajectory& traj, const BarrierFunction& bar,
                                     const PssfCertificate& cert) {
  if (traj.states.empty()) throw DomainError("cannot verify an empty trajectory");
  CertificateReport rep;
  rep.delta_bar = cert.delta_bar;
  rep.floor = cert.floor;
  if (cert.alpha) rep.k = cert.alpha->linear_gain();
  rep.min_h = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < traj.states.size(); ++j) {
    const double h = bar.h(traj.states[j]);
    if (h < rep.min_h) {
      rep.min_h = h;
      rep.t_min = traj.times[j];
    }
  }
  rep.margin = rep.min_h - rep.floor;
  if (bar.h(traj.states.front()) < cert.floor) {
    rep.status = CertificateStatus::PreconditionViolated;
  } else {
    rep.status =
        rep.margin >= -kCertificateTolerance ? CertificateStatus::Pass : CertificateStatus::Fail;
  }
  return rep;
}

void write_delta_csv(std::ostream& os, const DeltaTrace& trace) {
  csv::write_row(os, {"t", "abs_delta"});
  for (std::size_t j = 0; j < trace.delta.size(); ++j) {
    csv::write_row(os, {csv::fmt(trace.times[j]), csv::fmt(std::abs(trace.delta[j]))});
  }
}

DeltaTrace read_delta_csv(std::istream& is) {
  DeltaTrace trace;
  std::string line;
  if (!std::getline(is, line)) throw Error("empty delta file");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != 2) throw Error("malformed delta row");
    trace.times.push_back(csv::parse_double(f[0]));
    trace.delta.push_back(csv::parse_double(f[1]));
  }
  return trace;
}

nlohmann::json to_json(const CertificateReport& report) {
  nlohmann::json j;
  j["delta_bar"] = report.delta_bar;
  j["k"] = report.k ? nlohmann::json(*report.k) : nlohmann::json(nullptr);
  j["floor"] = report.floor;
  j["min_h"] = report.min_h;
  j["margin"] = report.margin;
  j["pass"] = report.pass();
  j["status"] = to_string(report.status);
  return j;
}

}  // namespace projsafe::pssf
