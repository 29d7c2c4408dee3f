#pragma once

// Episodic learning of the barrier-derivative residual
//   hdot_true(x, u) - hdot_nominal(x, u) ~ b(x) + a(x)^T u
// from rollout data: collect under the current filtered controller, refit on
// all data so far, redeploy.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "projsafe/barrier.hpp"
#include "projsafe/dynamics.hpp"

namespace projsafe::learning {

using barrier::BarrierFunction;
using dynamics::ControlAffineSystem;

enum class FeatureKind { Polynomial, RandomFourier };

/// phi(x) over a subset of state coordinates, after per-coordinate affine
/// normalization z = (x - offset) / scale.
class FeatureMap {
 public:
  /// All monomials of total degree <= max_degree in the selected
  /// coordinates, constant term included.
  static FeatureMap polynomial(std::vector<int> coordinates, int max_degree);
  /// sqrt(2/count) cos(w.z + phase), w ~ N(0, I / bandwidth^2), phase ~ U[0, 2 pi).
  static FeatureMap random_fourier(std::vector<int> coordinates, int count, double bandwidth,
                                   std::uint64_t seed);

  FeatureKind kind() const { return kind_; }
  int dimension() const { return dimension_; }
  const std::vector<int>& coordinates() const { return coords_; }

  /// Fits offset/scale to the mean and standard deviation of the selected
  /// coordinates (scale 1 where the spread is zero).
  void fit_normalization(const std::vector<Vec>& states);
  bool normalized() const { return normalized_; }

  Vec operator()(const Vec& x) const;

  nlohmann::json to_json() const;
  static FeatureMap from_json(const nlohmann::json& j);

 private:
  FeatureMap() = default;
  void build();

  FeatureKind kind_ = FeatureKind::Polynomial;
  std::vector<int> coords_;
  int max_degree_ = 0;
  int rff_count_ = 0;
  double bandwidth_ = 1.0;
  std::uint64_t seed_ = 0;
  bool normalized_ = false;
  Vec offset_;
  Vec scale_;

  int dimension_ = 0;
  std::vector<std::vector<int>> exponents_;  // polynomial monomials
  Mat omega_;                                // rff frequencies, count x k
  Vec phase_;
};

struct DataRow {
  int episode = 0;
  double t = 0.0;
  Vec x;
  Vec u;                      // input the target corresponds to
  double hdot_target = 0.0;   // finite difference of measured h
  double hdot_nominal = 0.0;  // grad_h . (f_hat + g_hat u) at the measured state
  double hdot_exact = 0.0;    // simulator ground truth, diagnostics only
  bool central = false;       // central (vs one-sided) difference stencil

  double residual_target() const { return hdot_target - hdot_nominal; }
};

struct Dataset {
  std::vector<DataRow> rows;

  bool empty() const { return rows.empty(); }
  std::size_t size() const { return rows.size(); }
  void append(const Dataset& other);
};

/// `episode,t,x1..xn,u1..um,hdot_target,hdot_nominal`
void write_dataset_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is, int state_dim, int input_dim);

class ResidualModel final : public barrier::HdotResidual {
 public:
  ResidualModel(FeatureMap features, Vec w_b, Mat w_a, double ridge_lambda);

  double b(const Vec& x) const override;
  Vec a(const Vec& x) const override;
  /// b_hat(x) + a_hat(x)^T u
  double predict(const Vec& x, const Vec& u) const;

  const FeatureMap& features() const { return features_; }
  const Vec& w_b() const { return w_b_; }
  const Mat& w_a() const { return w_a_; }  // input_dim x feature dimension
  double ridge_lambda() const { return lambda_; }
  int input_dim() const { return static_cast<int>(w_a_.rows()); }

  double training_rms = 0.0;
  bool ill_conditioned = false;
  double condition_estimate = 0.0;

  nlohmann::json to_json() const;
  static ResidualModel from_json(const nlohmann::json& j);

 private:
  FeatureMap features_;
  Vec w_b_;
  Mat w_a_;
  double lambda_;
};

/// Ridge regression of residual_target on [phi(x), u_1 phi(x), ..., u_m phi(x)]
/// through the regularized normal equations. Flags the model ill-conditioned
/// when the Gram condition number exceeds 1e12 (the solution is still
/// returned).
ResidualModel fit_residual(const Dataset& data, const FeatureMap& features, double ridge_lambda);

inline double predict(const ResidualModel& model, const Vec& x, const Vec& u) {
  return model.predict(x, u);
}

struct NoiseSpec {
  double state_std = 0.0;  // Gaussian measurement noise per state coordinate
  std::uint64_t seed = 0;
};

struct EpisodeResult {
  Dataset data;
  dynamics::Trajectory trajectory;
};

/// Rolls out on the true system and builds one row per applied input. The
/// target uses (h(x_{j+1}) - h(x_{j-1})) / (2 dt) on the measured states,
/// forward difference at j = 0. Under the zero-order hold that stencil sees
/// u_{j-1} and u_j for half of its span each, so a central row records their
/// mean as its input.
EpisodeResult collect_episode(const ControlAffineSystem& true_sys,
                              const ControlAffineSystem& nominal_sys, const BarrierFunction& bar,
                              const dynamics::Controller& controller, const Vec& x0,
                              double duration, double dt, const NoiseSpec& noise, int episode_id);

/// Closed-loop problem shared by training and evaluation.
struct Scenario {
  ControlAffineSystem true_sys;
  ControlAffineSystem nominal_sys;
  BarrierFunction barrier;
  dynamics::Controller desired;  // u_des(t, x) before filtering
  double u_max = 0.0;            // actuator clamp after the filter, 0 = none
};

/// Safety filter around `desired` (nominal model plus residual, if any),
/// followed by the scenario's actuator clamp.
dynamics::Controller closed_loop(const Scenario& scenario, const barrier::HdotResidual* residual,
                                 dynamics::Controller desired);

struct FeatureSpec {
  FeatureKind kind = FeatureKind::Polynomial;
  std::vector<int> coordinates{1, 2, 3};
  int max_degree = 2;
  int rff_count = 100;
  double rff_bandwidth = 1.0;
  std::uint64_t rff_seed = 0;

  FeatureMap build() const;
};

struct EpisodicConfig {
  int episodes = 5;
  double episode_duration = 10.0;
  double dt = 1e-3;
  Vec x0;
  double x0_spread = 0.0;  // uniform perturbation half-width on x0 per episode
  std::uint64_t seed = 0;
  FeatureSpec features;
  double ridge_lambda = 1e-4;
  std::vector<double> lambda_schedule;  // per-episode override when non-empty
  double excitation_amplitude = 0.0;    // bound on the added exploration input
  double excitation_hold = 0.05;        // seconds each excitation value is held
  NoiseSpec noise;
  Vec validation_x0;
  double validation_duration = 10.0;
};

struct EpisodeMetrics {
  int episode = 0;
  double training_rms = 0.0;
  double validation_delta_bar = 0.0;
  bool ill_conditioned = false;
  bool skipped = false;
  std::string note;
};

struct EpisodeHistory {
  /// Validation delta_bar of the nominal filter before any learning.
  double baseline_delta_bar = 0.0;
  std::vector<EpisodeMetrics> episodes;
};

struct TrainingOutcome {
  ResidualModel model;
  EpisodeHistory history;
  Dataset data;
};

/// Bounded, zero-mean, piecewise-constant exploration input added to u_des.
dynamics::Controller with_excitation(dynamics::Controller desired, int input_dim, double amplitude,
                                     double hold, std::uint64_t seed);

/// Episode 0 runs the nominal filter; after every episode the model is refit
/// on all data so far and the next episode deploys it inside the filter. Each
/// refit is validated by a noise- and excitation-free rollout from
/// validation_x0. Throws Error if every episode terminates early.
TrainingOutcome episodic_train(const Scenario& scenario, const EpisodicConfig& config);

/// Validation delta_bar: max |hdot_true - hdot_hat| along a rollout of the
/// filter using the given residual (or none).
double validation_delta_bar(const Scenario& scenario, const barrier::HdotResidual* residual,
                            const Vec& x0, double duration, double dt);

void write_metrics_csv(std::ostream& os, const EpisodeHistory& history);

}  // namespace projsafe::learning
