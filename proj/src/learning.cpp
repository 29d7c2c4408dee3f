#include "projsafe/learning.hpp"

#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>

#include "projsafe/csv.hpp"
#include "projsafe/errors.hpp"
#include "projsafe/pssf.hpp"

namespace projsafe::learning {

namespace {

constexpr double kIllConditioned = 1e12;

void monomials(int vars, int max_degree, std::vector<int>& current, int var,
               std::vector<std::vector<int>>& out) {
  if (var == vars) {
    out.push_back(current);
    return;
  }
  int used = 0;
  for (int e : current) used += e;
  for (int e = 0; used + e <= max_degree; ++e) {
    current[var] = e;
    monomials(vars, max_degree, current, var + 1, out);
  }
  current[var] = 0;
}

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Vec to_vec(const nlohmann::json& j) {
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

nlohmann::json from_vec(const Vec& v) {
  nlohmann::json j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v(i));
  return j;
}

}  // namespace

FeatureMap FeatureMap::polynomial(std::vector<int> coordinates, int max_degree) {
  if (coordinates.empty()) throw ConfigError("feature map needs at least one coordinate");
  if (max_degree < 0) throw ConfigError("polynomial degree must be non-negative");
  FeatureMap fm;
  fm.kind_ = FeatureKind::Polynomial;
  fm.coords_ = std::move(coordinates);
  fm.max_degree_ = max_degree;
  fm.build();
  return fm;
}

FeatureMap FeatureMap::random_fourier(std::vector<int> coordinates, int count, double bandwidth,
                                      std::uint64_t seed) {
  if (coordinates.empty()) throw ConfigError("feature map needs at least one coordinate");
  if (count <= 0 || !(bandwidth > 0.0)) {
    throw ConfigError("random Fourier features need count > 0 and bandwidth > 0");
  }
  FeatureMap fm;
  fm.kind_ = FeatureKind::RandomFourier;
  fm.coords_ = std::move(coordinates);
  fm.rff_count_ = count;
  fm.bandwidth_ = bandwidth;
  fm.seed_ = seed;
  fm.build();
  return fm;
}

void FeatureMap::build() {
  const int k = static_cast<int>(coords_.size());
  for (int c : coords_) {
    if (c < 0) throw ConfigError("feature coordinate index must be non-negative");
  }
  offset_ = Vec::Zero(k);
  scale_ = Vec::Ones(k);
  if (kind_ == FeatureKind::Polynomial) {
    std::vector<int> current(static_cast<std::size_t>(k), 0);
    exponents_.clear();
    monomials(k, max_degree_, current, 0, exponents_);
    std::stable_sort(exponents_.begin(), exponents_.end(), [](const auto& a, const auto& b) {
      int da = 0;
      int db = 0;
      for (int e : a) da += e;
      for (int e : b) db += e;
      return da < db;
    });
    dimension_ = static_cast<int>(exponents_.size());
  } else {
    std::mt19937_64 rng(seed_);
    std::normal_distribution<double> normal(0.0, 1.0 / bandwidth_);
    std::uniform_real_distribution<double> uniform(0.0, 2.0 * std::numbers::pi);
    omega_.resize(rff_count_, k);
    phase_.resize(rff_count_);
    for (int i = 0; i < rff_count_; ++i) {
      for (int c = 0; c < k; ++c) omega_(i, c) = normal(rng);
      phase_(i) = uniform(rng);
    }
    dimension_ = rff_count_;
  }
}

void FeatureMap::fit_normalization(const std::vector<Vec>& states) {
  if (states.empty()) throw DomainError("cannot fit normalization without data");
  const auto k = static_cast<Eigen::Index>(coords_.size());
  Vec mean = Vec::Zero(k);
  Vec sq = Vec::Zero(k);
  for (const Vec& x : states) {
    for (Eigen::Index c = 0; c < k; ++c) {
      const double v = x(coords_[static_cast<std::size_t>(c)]);
      mean(c) += v;
      sq(c) += v * v;
    }
  }
  const double n = static_cast<double>(states.size());
  mean /= n;
  for (Eigen::Index c = 0; c < k; ++c) {
    const double var = std::max(0.0, sq(c) / n - mean(c) * mean(c));
    const double sd = std::sqrt(var);
    offset_(c) = mean(c);
    scale_(c) = sd > 1e-12 ? sd : 1.0;
  }
  normalized_ = true;
}

Vec FeatureMap::operator()(const Vec& x) const {
  const auto k = static_cast<Eigen::Index>(coords_.size());
  Vec z(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const int idx = coords_[static_cast<std::size_t>(c)];
    if (idx >= x.size()) throw DimensionError("feature coordinate exceeds state dimension");
    z(c) = (x(idx) - offset_(c)) / scale_(c);
  }
  Vec phi(dimension_);
  if (kind_ == FeatureKind::Polynomial) {
    for (int i = 0; i < dimension_; ++i) {
      double v = 1.0;
      const auto& e = exponents_[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < k; ++c) {
        for (int p = 0; p < e[static_cast<std::size_t>(c)]; ++p) v *= z(c);
      }
      phi(i) = v;
    }
  } else {
    const double norm = std::sqrt(2.0 / rff_count_);
    phi = ((omega_ * z + phase_).array().cos() * norm).matrix();
  }
  return phi;
}

nlohmann::json FeatureMap::to_json() const {
  nlohmann::json j;
  j["coordinates"] = coords_;
  if (kind_ == FeatureKind::Polynomial) {
    j["kind"] = "polynomial";
    j["max_degree"] = max_degree_;
  } else {
    j["kind"] = "random_fourier";
    j["count"] = rff_count_;
    j["bandwidth"] = bandwidth_;
    j["seed"] = seed_;
  }
  j["offset"] = from_vec(offset_);
  j["scale"] = from_vec(scale_);
  j["normalized"] = normalized_;
  return j;
}

FeatureMap FeatureMap::from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    const auto coords = j.at("coordinates").get<std::vector<int>>();
    FeatureMap fm = kind == "polynomial"
                        ? polynomial(coords, j.at("max_degree").get<int>())
                    : kind == "random_fourier"
                        ? random_fourier(coords, j.at("count").get<int>(),
                                         j.at("bandwidth").get<double>(),
                                         j.at("seed").get<std::uint64_t>())
                        : throw ConfigError("unknown feature kind '" + kind + "'");
    if (j.contains("offset")) fm.offset_ = to_vec(j.at("offset"));
    if (j.contains("scale")) fm.scale_ = to_vec(j.at("scale"));
    if (fm.offset_.size() != static_cast<Eigen::Index>(coords.size()) ||
        fm.scale_.size() != static_cast<Eigen::Index>(coords.size())) {
      throw ConfigError("feature normalization does not match coordinates");
    }
    fm.normalized_ = j.value("normalized", false);
    return fm;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid feature map: ") + e.what());
  }
}

void Dataset::append(const Dataset& other) {
  rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  const int n = data.empty() ? 0 : static_cast<int>(data.rows.front().x.size());
  const int m = data.empty() ? 0 : static_cast<int>(data.rows.front().u.size());
  std::vector<std::string> header{"episode", "t"};
  for (int i = 1; i <= n; ++i) header.push_back("x" + std::to_string(i));
  for (int i = 1; i <= m; ++i) header.push_back("u" + std::to_string(i));
  header.emplace_back("hdot_target");
  header.emplace_back("hdot_nominal");
  csv::write_row(os, header);
  for (const auto& r : data.rows) {
    std::vector<std::string> row{std::to_string(r.episode), csv::fmt(r.t)};
    for (int i = 0; i < n; ++i) row.push_back(csv::fmt(r.x(i)));
    for (int i = 0; i < m; ++i) row.push_back(csv::fmt(r.u(i)));
    row.push_back(csv::fmt(r.hdot_target));
    row.push_back(csv::fmt(r.hdot_nominal));
    csv::write_row(os, row);
  }
}

Dataset read_dataset_csv(std::istream& is, int state_dim, int input_dim) {
  Dataset data;
  std::string line;
  if (!std::getline(is, line)) throw Error("empty dataset file");
  const std::size_t width = static_cast<std::size_t>(4 + state_dim + input_dim);
  if (csv::split(line).size() != width) throw Error("dataset header does not match dimensions");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = csv::split(line);
    if (f.size() != width) throw Error("malformed dataset row");
    DataRow r;
    r.episode = static_cast<int>(csv::parse_double(f[0]));
    r.t = csv::parse_double(f[1]);
    r.x.resize(state_dim);
    r.u.resize(input_dim);
    for (int i = 0; i < state_dim; ++i) r.x(i) = csv::parse_double(f[2 + i]);
    for (int i = 0; i < input_dim; ++i) r.u(i) = csv::parse_double(f[2 + state_dim + i]);
    r.hdot_target = csv::parse_double(f[2 + state_dim + input_dim]);
    r.hdot_nominal = csv::parse_double(f[3 + state_dim + input_dim]);
    data.rows.push_back(std::move(r));
  }
  return data;
}

ResidualModel::ResidualModel(FeatureMap features, Vec w_b, Mat w_a, double ridge_lambda)
    : features_(std::move(features)), w_b_(std::move(w_b)), w_a_(std::move(w_a)),
      lambda_(ridge_lambda) {
  if (w_b_.size() != features_.dimension() || w_a_.cols() != features_.dimension()) {
    throw DimensionError("residual weights do not match the feature dimension");
  }
}

double ResidualModel::b(const Vec& x) const { return w_b_.dot(features_(x)); }

Vec ResidualModel::a(const Vec& x) const { return w_a_ * features_(x); }

double ResidualModel::predict(const Vec& x, const Vec& u) const {
  const Vec phi = features_(x);
  return w_b_.dot(phi) + (w_a_ * phi).dot(u);
}

nlohmann::json ResidualModel::to_json() const {
  nlohmann::json j;
  j["features"] = features_.to_json();
  j["w_b"] = from_vec(w_b_);
  nlohmann::json wa = nlohmann::json::array();
  for (Eigen::Index i = 0; i < w_a_.rows(); ++i) wa.push_back(from_vec(w_a_.row(i).transpose()));
  j["w_a"] = wa;
  j["ridge_lambda"] = lambda_;
  j["training_rms"] = training_rms;
  j["ill_conditioned"] = ill_conditioned;
  return j;
}

ResidualModel ResidualModel::from_json(const nlohmann::json& j) {
  try {
    FeatureMap fm = FeatureMap::from_json(j.at("features"));
    Vec wb = to_vec(j.at("w_b"));
    const auto& wa_j = j.at("w_a");
    Mat wa(static_cast<Eigen::Index>(wa_j.size()), wb.size());
    for (std::size_t i = 0; i < wa_j.size(); ++i) {
      const Vec row = to_vec(wa_j[i]);
      if (row.size() != wb.size()) throw ConfigError("ragged w_a");
      wa.row(static_cast<Eigen::Index>(i)) = row.transpose();
    }
    ResidualModel model(std::move(fm), std::move(wb), std::move(wa),
                        j.at("ridge_lambda").get<double>());
    model.training_rms = j.value("training_rms", 0.0);
    model.ill_conditioned = j.value("ill_conditioned", false);
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid residual model: ") + e.what());
  }
}

ResidualModel fit_residual(const Dataset& data, const FeatureMap& features, double ridge_lambda) {
  if (data.empty()) throw DomainError("cannot fit a residual model without data");
  if (!(ridge_lambda > 0.0)) throw DomainError("ridge lambda must be positive");
  const int dim = features.dimension();
  const auto m = static_cast<int>(data.rows.front().u.size());
  const int p = dim * (1 + m);

  Mat gram = Mat::Zero(p, p);
  Vec rhs = Vec::Zero(p);
  Vec z(p);
  for (const auto& r : data.rows) {
    if (r.u.size() != m) throw DimensionError("dataset rows disagree on input dimension");
    const Vec phi = features(r.x);
    z.head(dim) = phi;
    for (int i = 0; i < m; ++i) z.segment(dim * (1 + i), dim) = r.u(i) * phi;
    gram.selfadjointView<Eigen::Lower>().rankUpdate(z);
    rhs += r.residual_target() * z;
  }
  gram.triangularView<Eigen::StrictlyUpper>() = gram.transpose();
  gram.diagonal().array() += ridge_lambda;

  const Eigen::LDLT<Mat> ldlt(gram);
  const Vec theta = ldlt.solve(rhs);

  const Eigen::SelfAdjointEigenSolver<Mat> eig(gram, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues().minCoeff();
  const double hi = eig.eigenvalues().maxCoeff();
  const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();

  Mat w_a(m, dim);
  for (int i = 0; i < m; ++i) w_a.row(i) = theta.segment(dim * (1 + i), dim).transpose();
  ResidualModel model(features, theta.head(dim), std::move(w_a), ridge_lambda);
  model.condition_estimate = cond;
  model.ill_conditioned = !(cond <= kIllConditioned);

  double sse = 0.0;
  for (const auto& r : data.rows) {
    const double e = r.residual_target() - model.predict(r.x, r.u);
    sse += e * e;
  }
  model.training_rms = std::sqrt(sse / static_cast<double>(data.size()));
  return model;
}

EpisodeResult collect_episode(const ControlAffineSystem& true_sys,
                              const ControlAffineSystem& nominal_sys, const BarrierFunction& bar,
                              const dynamics::Controller& controller, const Vec& x0,
                              double duration, double dt, const NoiseSpec& noise, int episode_id) {
  EpisodeResult out;
  out.trajectory = dynamics::simulate(true_sys, controller, x0, duration, dt);
  const auto& traj = out.trajectory;
  const std::size_t steps = traj.steps();
  if (steps == 0) return out;

  std::vector<Vec> measured = traj.states;
  if (noise.state_std > 0.0) {
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> gauss(0.0, noise.state_std);
    for (Vec& x : measured) {
      for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += gauss(rng);
    }
  }
  std::vector<double> h(measured.size());
  for (std::size_t j = 0; j < measured.size(); ++j) h[j] = bar.h(measured[j]);

  out.data.rows.reserve(steps);
  for (std::size_t j = 0; j < steps; ++j) {
    DataRow r;
    r.episode = episode_id;
    r.t = traj.times[j];
    r.x = measured[j];
    if (j == 0) {
      r.u = traj.inputs[0];
      r.hdot_target = (h[1] - h[0]) / dt;
    } else {
      // The stencil spans two held inputs; hdot is affine in u, so the
      // central difference matches hdot(x_j, mean input) to O(dt^2).
      r.u = 0.5 * (traj.inputs[j - 1] + traj.inputs[j]);
      r.hdot_target = (h[j + 1] - h[j - 1]) / (2.0 * dt);
      r.central = true;
    }
    r.hdot_nominal = barrier::h_dot(bar, nominal_sys, r.x, r.u);
    r.hdot_exact = barrier::h_dot(bar, true_sys, traj.states[j], r.u);
    out.data.rows.push_back(std::move(r));
  }
  return out;
}

FeatureMap FeatureSpec::build() const {
  return kind == FeatureKind::Polynomial
             ? FeatureMap::polynomial(coordinates, max_degree)
             : FeatureMap::random_fourier(coordinates, rff_count, rff_bandwidth, rff_seed);
}

dynamics::Controller with_excitation(dynamics::Controller desired, int input_dim, double amplitude,
                                     double hold, std::uint64_t seed) {
  if (amplitude <= 0.0) return desired;
  if (!(hold > 0.0)) throw ConfigError("excitation hold must be positive");
  return [desired = std::move(desired), input_dim, amplitude, hold, seed](double t, const Vec& x) {
    Vec u = desired(t, x);
    // Small epsilon keeps exact multiples of hold in the segment they start.
    const auto segment = static_cast<std::uint64_t>(std::floor(t / hold + 1e-9));
    for (int i = 0; i < input_dim; ++i) {
      const std::uint64_t bits =
          splitmix64(splitmix64(seed) ^ splitmix64(segment * 131 + static_cast<std::uint64_t>(i)));
      const double unit = static_cast<double>(bits >> 11) * 0x1.0p-53;  // [0, 1)
      u(i) += amplitude * (2.0 * unit - 1.0);
    }
    return u;
  };
}

dynamics::Controller closed_loop(const Scenario& scenario, const barrier::HdotResidual* residual,
                                 dynamics::Controller desired) {
  return dynamics::saturate(barrier::filtered_controller(scenario.barrier, scenario.nominal_sys,
                                                         residual, std::move(desired)),
                            scenario.u_max);
}

double validation_delta_bar(const Scenario& scenario, const barrier::HdotResidual* residual,
                            const Vec& x0, double duration, double dt) {
  const auto controller = closed_loop(scenario, residual, scenario.desired);
  const auto traj = dynamics::simulate(scenario.true_sys, controller, x0, duration, dt);
  if (traj.steps() == 0) throw Error("validation rollout produced no steps: " +
                                     traj.termination_reason);
  return pssf::delta_bound(
      pssf::delta_trace(scenario.barrier, scenario.true_sys, scenario.nominal_sys, residual, traj));
}

TrainingOutcome episodic_train(const Scenario& scenario, const EpisodicConfig& config) {
  if (config.episodes <= 0) throw ConfigError("episode count must be positive");
  const int n = scenario.true_sys.state_dim();
  const int m = scenario.true_sys.input_dim();
  const Vec x0 = config.x0.size() == n ? config.x0 : Vec::Zero(n);
  const Vec vx0 = config.validation_x0.size() == n ? config.validation_x0 : x0;

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> spread(-1.0, 1.0);

  FeatureMap features = config.features.build();
  Dataset aggregate;
  std::optional<ResidualModel> model;
  EpisodeHistory history;
  history.baseline_delta_bar =
      validation_delta_bar(scenario, nullptr, vx0, config.validation_duration, config.dt);

  for (int ep = 0; ep < config.episodes; ++ep) {
    Vec start = x0;
    for (int i = 0; i < n; ++i) start(i) += config.x0_spread * spread(rng);

    const auto desired =
        with_excitation(scenario.desired, m, config.excitation_amplitude, config.excitation_hold,
                        splitmix64(config.seed) + static_cast<std::uint64_t>(ep));
    const auto controller = closed_loop(scenario, model ? &*model : nullptr, desired);
    NoiseSpec noise = config.noise;
    noise.seed += static_cast<std::uint64_t>(ep);
    EpisodeResult result = collect_episode(scenario.true_sys, scenario.nominal_sys,
                                           scenario.barrier, controller, start,
                                           config.episode_duration, config.dt, noise, ep);

    EpisodeMetrics metrics;
    metrics.episode = ep;
    if (result.trajectory.terminated_early || result.data.empty()) {
      metrics.skipped = true;
      metrics.note = "excluded: " + result.trajectory.termination_reason;
      if (model) {
        metrics.training_rms = model->training_rms;
        metrics.validation_delta_bar = history.episodes.empty()
                                           ? history.baseline_delta_bar
                                           : history.episodes.back().validation_delta_bar;
      }
      history.episodes.push_back(metrics);
      continue;
    }
    if (!features.normalized()) {
      std::vector<Vec> states;
      states.reserve(result.data.size());
      for (const auto& r : result.data.rows) states.push_back(r.x);
      features.fit_normalization(states);
    }
    aggregate.append(result.data);
    const double lambda =
        config.lambda_schedule.empty()
            ? config.ridge_lambda
            : config.lambda_schedule[std::min(static_cast<std::size_t>(ep),
                                              config.lambda_schedule.size() - 1)];
    model = fit_residual(aggregate, features, lambda);
    metrics.training_rms = model->training_rms;
    metrics.ill_conditioned = model->ill_conditioned;
    metrics.validation_delta_bar =
        validation_delta_bar(scenario, &*model, vx0, config.validation_duration, config.dt);
    history.episodes.push_back(metrics);
  }
  if (!model) throw Error("every training episode terminated early");
  return TrainingOutcome{std::move(*model), std::move(history), std::move(aggregate)};
}

void write_metrics_csv(std::ostream& os, const EpisodeHistory& history) {
  csv::write_row(os, {"episode", "training_rms", "validation_delta_bar"});
  for (const auto& e : history.episodes) {
    csv::write_row(os, {std::to_string(e.episode), csv::fmt(e.training_rms),
                        csv::fmt(e.validation_delta_bar)});
  }
}

}  // namespace projsafe::learning
