#pragma once

// Projection-to-state safety.
//
// A model error enters the barrier derivative as a projected disturbance
// delta. If |delta| <= delta_bar along the closed loop, the inflated set
// {h(x) >= -gamma(delta_bar)} stays forward invariant. This header computes
// delta along trajectories (with or without a learned residual), builds the
// resulting certificates and checks them against rollouts.

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "projsafe/barrier.hpp"
#include "projsafe/dynamics.hpp"
#include "projsafe/kfun.hpp"

namespace projsafe::pssf {

using barrier::BarrierFunction;
using dynamics::ControlAffineSystem;
using dynamics::Trajectory;
using kfun::ComparisonFunction;

/// Continuously differentiable map Pi: R^n -> R^k with analytic Jacobian.
struct Projection {
  int output_dim = 1;
  std::function<Vec(const Vec&)> map;
  std::function<Mat(const Vec&)> jacobian;  // k x n
};

Projection identity_projection(int state_dim);
/// Pi = h, k = 1.
Projection barrier_projection(const BarrierFunction& bar);

/// D_Pi(x) (f(x) + g(x) u + d)
Vec projected_dynamics(const Projection& proj, const ControlAffineSystem& sys, const Vec& x,
                       const Vec& u, const Vec& d);

/// sigma_lower(h(x)) <= h_proj(Pi(x)) <= sigma_upper(h(x)).
struct CompatiblePair {
  BarrierFunction h;
  std::function<double(const Vec&)> h_proj;
  Projection projection;
  ComparisonFunction sigma_lower;
  ComparisonFunction sigma_upper;
};

/// The identity compatible pair for Pi = h: h_proj(y) = y, sigma = Linear(1).
CompatiblePair identity_pair(const BarrierFunction& bar);

struct CompatibilityReport {
  bool pass = true;
  bool lower_ok = true;
  bool upper_ok = true;
  bool set_preserved = true;
  /// min over samples of h_proj(Pi(x)) - sigma_lower(h(x)); negative means violated.
  double worst_lower_slack = 0.0;
  /// min over samples of sigma_upper(h(x)) - h_proj(Pi(x)).
  double worst_upper_slack = 0.0;
  std::optional<std::size_t> first_violation;
  std::optional<std::size_t> first_set_violation;
};

/// Checks both sandwich inequalities (slack 1e-9) and that h(x) >= 0 implies
/// h_proj(Pi(x)) >= 0 at every sample.
CompatibilityReport check_compatibility(const CompatiblePair& pair, const std::vector<Vec>& samples);

/// grad_h . [(f - f_hat) + (g - g_hat) u] = hdot_true - hdot_nominal.
double projected_disturbance_model_error(const BarrierFunction& bar,
                                         const ControlAffineSystem& true_sys,
                                         const ControlAffineSystem& nominal_sys, const Vec& x,
                                         const Vec& u);

/// hdot_true - (hdot_nominal + b_hat(x) + a_hat(x)^T u).
double projected_disturbance_learned(const BarrierFunction& bar,
                                     const ControlAffineSystem& nominal_sys,
                                     const barrier::HdotResidual& residual,
                                     const ControlAffineSystem& true_sys, const Vec& x,
                                     const Vec& u);

enum class DeltaMode { ModelError, LearnedResidual };

struct DeltaTrace {
  std::vector<double> times;
  std::vector<double> delta;
  DeltaMode mode = DeltaMode::ModelError;
};

/// delta at every applied input of the trajectory (u_j = k(x_j)). With a
/// residual the trace is in LearnedResidual mode.
DeltaTrace delta_trace(const BarrierFunction& bar, const ControlAffineSystem& true_sys,
                       const ControlAffineSystem& nominal_sys,
                       const barrier::HdotResidual* residual, const Trajectory& traj);

/// Projected disturbance through a general projection: the k-vector
/// D_Pi(x) [(f - f_hat) + (g - g_hat) u], minus the residual prediction when
/// one is given (k must be 1 then).
std::vector<Vec> projected_delta_trace(const Projection& proj, const ControlAffineSystem& true_sys,
                                       const ControlAffineSystem& nominal_sys,
                                       const barrier::HdotResidual* residual,
                                       const Trajectory& traj);

/// Discrete sup-norm: max |delta_j|.
double delta_bound(const DeltaTrace& trace);
double delta_bound(const std::vector<Vec>& projected);

struct PssfCertificate {
  double delta_bar = 0.0;
  /// Decay rate the certificate was built from, when known.
  std::optional<ComparisonFunction> alpha;
  /// gamma such that {h >= -gamma(delta_bar)} is invariant.
  ComparisonFunction gamma = ComparisonFunction::linear(1.0);
  double inflation = 0.0;
  double floor = 0.0;  // -inflation
};

/// gamma = alpha^-1, floor = -alpha^-1(delta_bar). For alpha = Linear(k) the
/// floor is -delta_bar / k.
PssfCertificate make_certificate(const ComparisonFunction& alpha, double delta_bar);
/// floor = -gamma(delta_bar) for an already-constructed gain.
PssfCertificate certificate_from_gamma(const ComparisonFunction& gamma, double delta_bar);

/// ISSf gain of an ISSf-CBF: gamma = alpha^-1 o iota.
ComparisonFunction issf_gamma(const ComparisonFunction& alpha, const ComparisonFunction& iota);

/// gamma' = sigma_upper^-1 o gamma: transports an ISSf certificate on the
/// projected set back to a PSSf certificate on the original one.
ComparisonFunction projected_inflation(const ComparisonFunction& sigma_upper,
                                      const ComparisonFunction& gamma);

/// Diagnostic alternative to the transported floor: sigma_upper^-1(-gamma(delta_bar)).
double direct_inflation_floor(const ComparisonFunction& sigma_upper,
                              const ComparisonFunction& gamma, double delta_bar);

enum class CertificateStatus { Pass, Fail, PreconditionViolated };
std::string to_string(CertificateStatus status);

struct CertificateReport {
  CertificateStatus status = CertificateStatus::Pass;
  double delta_bar = 0.0;
  std::optional<double> k;  // linear gain of alpha when available
  double floor = 0.0;
  double min_h = 0.0;
  double margin = 0.0;  // min_h - floor
  std::optional<double> t_min;

  bool pass() const { return status == CertificateStatus::Pass; }
};

inline constexpr double kCertificateTolerance = 1e-6;

/// Requires h(x0) >= floor; passes iff min_t h(x(t)) - floor >= -1e-6.
CertificateReport verify_certificate(const Trajectory& traj, const BarrierFunction& bar,
                                     const PssfCertificate& cert);

/// `t,abs_delta`
void write_delta_csv(std::ostream& os, const DeltaTrace& trace);
DeltaTrace read_delta_csv(std::istream& is);
/// {delta_bar, k, floor, min_h, pass} plus status and margin.
nlohmann::json to_json(const CertificateReport& report);

}  // namespace projsafe::pssf
