#include "projsafe/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "projsafe/csv.hpp"
#include "projsafe/errors.hpp"

namespace projsafe::scenario {

namespace fs = std::filesystem;

namespace {

using nlohmann::json;

/// Reads keys of one config block, rejecting anything it was not asked for.
class Block {
 public:
  Block(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config block '" + name_ + "' must be an object");
  }
  ~Block() = default;

  void num(const char* key, double& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_number()) throw ConfigError(path(key) + " must be a number");
    out = j_.at(key).get<double>();
  }
  void integer(const char* key, int& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_number_integer()) throw ConfigError(path(key) + " must be an integer");
    out = j_.at(key).get<int>();
  }
  void u64(const char* key, std::uint64_t& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_number_integer() || j_.at(key).get<long long>() < 0) {
      throw ConfigError(path(key) + " must be a non-negative integer");
    }
    out = j_.at(key).get<std::uint64_t>();
  }
  void boolean(const char* key, bool& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_boolean()) throw ConfigError(path(key) + " must be a boolean");
    out = j_.at(key).get<bool>();
  }
  void str(const char* key, std::string& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    if (!j_.at(key).is_string()) throw ConfigError(path(key) + " must be a string");
    out = j_.at(key).get<std::string>();
  }
  template <class T>
  void list(const char* key, std::vector<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const auto& arr = j_.at(key);
    if (!arr.is_array()) throw ConfigError(path(key) + " must be an array");
    out.clear();
    for (const auto& v : arr) {
      if (!v.is_number()) throw ConfigError(path(key) + " must contain numbers");
      out.push_back(v.get<T>());
    }
  }
  std::optional<json> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return std::optional<json>(std::in_place, j_.at(key));
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown config key '" + path(key.c_str()) + "'");
    }
  }

 private:
  std::string path(const char* key) const { return name_ + "." + key; }

  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

json summarize(const ModeResult& r) {
  json j = pssf::to_json(r.report);
  j["terminated_early"] = r.trajectory.terminated_early;
  j["termination_reason"] = r.trajectory.termination_reason;
  j["steps"] = r.trajectory.steps();
  return j;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os << text;
}

template <class Fn>
void write_file(const fs::path& path, Fn&& fn) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  fn(os);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

ScenarioConfig ScenarioConfig::from_json(const json& j) {
  ScenarioConfig cfg;
  Block top(j, "config");
  if (auto s = top.sub("system")) {
    Block b(*s, "system");
    if (auto p = b.sub("params")) {
      Block pb(*p, "system.params");
      auto& sp = cfg.system.params;
      pb.num("body_mass", sp.body_mass);
      pb.num("wheel_mass", sp.wheel_mass);
      pb.num("com_length", sp.com_length);
      pb.num("body_inertia", sp.body_inertia);
      pb.num("wheel_radius", sp.wheel_radius);
      pb.num("gravity", sp.gravity);
      pb.num("viscous_friction", sp.viscous_friction);
      pb.num("motor_torque_scale", sp.motor_torque_scale);
      pb.finish();
    }
    if (auto p = b.sub("perturbation")) {
      Block pb(*p, "system.perturbation");
      auto& ps = cfg.system.perturbation;
      pb.num("body_mass_scale", ps.body_mass_scale);
      pb.num("wheel_mass_scale", ps.wheel_mass_scale);
      pb.num("com_length_scale", ps.com_length_scale);
      pb.num("body_inertia_scale", ps.body_inertia_scale);
      pb.num("wheel_radius_scale", ps.wheel_radius_scale);
      pb.num("friction_scale", ps.friction_scale);
      pb.num("torque_scale_scale", ps.torque_scale_scale);
      pb.boolean("drop_friction", ps.drop_friction);
      pb.finish();
    }
    b.finish();
  }
  if (auto s = top.sub("barrier")) {
    Block b(*s, "barrier");
    b.num("theta_max", cfg.barrier.theta_max);
    b.num("omega_max", cfg.barrier.omega_max);
    b.num("k", cfg.barrier.k);
    b.finish();
  }
  if (auto s = top.sub("controller")) {
    Block b(*s, "controller");
    auto& c = cfg.controller;
    b.num("kp", c.kp);
    b.num("kd", c.kd);
    b.num("u_max", c.u_max);
    if (auto r = b.sub("reference")) {
      Block rb(*r, "controller.reference");
      rb.num("amplitude", c.ref_amplitude);
      rb.num("frequency", c.ref_frequency);
      rb.num("offset", c.ref_offset);
      rb.finish();
    }
    if (auto e = b.sub("excitation")) {
      Block eb(*e, "controller.excitation");
      eb.num("amplitude", c.excitation_amplitude);
      eb.num("hold", c.excitation_hold);
      eb.finish();
    }
    b.finish();
  }
  if (auto s = top.sub("learning")) {
    Block b(*s, "learning");
    auto& l = cfg.learning;
    b.boolean("enabled", l.enabled);
    b.integer("episodes", l.episodes);
    b.num("episode_duration", l.episode_duration);
    b.num("x0_spread", l.x0_spread);
    b.num("ridge_lambda", l.ridge_lambda);
    b.list("lambda_schedule", l.lambda_schedule);
    b.num("noise_std", l.noise_std);
    if (auto f = b.sub("features")) {
      Block fb(*f, "learning.features");
      std::string kind = l.features.kind == learning::FeatureKind::Polynomial ? "polynomial"
                                                                              : "random_fourier";
      fb.str("kind", kind);
      if (kind == "polynomial") {
        l.features.kind = learning::FeatureKind::Polynomial;
      } else if (kind == "random_fourier") {
        l.features.kind = learning::FeatureKind::RandomFourier;
      } else {
        throw ConfigError("learning.features.kind must be 'polynomial' or 'random_fourier'");
      }
      fb.list("coordinates", l.features.coordinates);
      fb.integer("max_degree", l.features.max_degree);
      fb.integer("count", l.features.rff_count);
      fb.num("bandwidth", l.features.rff_bandwidth);
      fb.u64("seed", l.features.rff_seed);
      fb.finish();
    }
    b.finish();
  }
  if (auto s = top.sub("run")) {
    Block b(*s, "run");
    b.num("duration", cfg.run.duration);
    b.num("dt", cfg.run.dt);
    b.u64("seed", cfg.run.seed);
    b.list("x0", cfg.run.x0);
    b.finish();
  }
  top.finish();
  cfg.validate();
  return cfg;
}

void ScenarioConfig::validate() const {
  system.params.validate();
  const auto& ps = system.perturbation;
  for (double s : {ps.body_mass_scale, ps.wheel_mass_scale, ps.com_length_scale,
                   ps.body_inertia_scale, ps.wheel_radius_scale, ps.torque_scale_scale}) {
    require(s > 0.0 && std::isfinite(s), "perturbation scales must be positive");
  }
  require(ps.friction_scale >= 0.0, "system.perturbation.friction_scale must be >= 0");
  require(barrier.theta_max > 0.0, "barrier.theta_max must be positive");
  require(barrier.omega_max > 0.0, "barrier.omega_max must be positive");
  require(barrier.k > 0.0 && std::isfinite(barrier.k), "barrier.k must be positive");
  require(std::isfinite(controller.kp) && std::isfinite(controller.kd),
          "controller gains must be finite");
  require(controller.ref_frequency >= 0.0, "controller.reference.frequency must be >= 0");
  require(controller.excitation_amplitude >= 0.0, "controller.excitation.amplitude must be >= 0");
  require(controller.excitation_hold > 0.0, "controller.excitation.hold must be positive");
  require(controller.u_max >= 0.0, "controller.u_max must be >= 0 (0 disables the clamp)");
  require(learning.episodes >= 1, "learning.episodes must be >= 1");
  require(learning.episode_duration > 0.0, "learning.episode_duration must be positive");
  require(learning.x0_spread >= 0.0, "learning.x0_spread must be >= 0");
  require(learning.ridge_lambda > 0.0, "learning.ridge_lambda must be positive");
  for (double l : learning.lambda_schedule) require(l > 0.0, "lambda_schedule entries must be > 0");
  require(learning.noise_std >= 0.0, "learning.noise_std must be >= 0");
  require(!learning.features.coordinates.empty(), "learning.features.coordinates is empty");
  for (int c : learning.features.coordinates) {
    require(c >= 0 && c < 4, "learning.features.coordinates must index the 4 Segway states");
  }
  require(learning.features.max_degree >= 0, "learning.features.max_degree must be >= 0");
  require(learning.features.rff_count > 0, "learning.features.count must be positive");
  require(learning.features.rff_bandwidth > 0.0, "learning.features.bandwidth must be positive");
  require(run.dt > 0.0, "run.dt must be positive");
  require(run.duration >= 0.0, "run.duration must be >= 0");
  const double steps = run.duration / run.dt;
  require(std::abs(steps - std::round(steps)) <= 1e-9 * std::max(1.0, steps),
          "run.duration must be an integer multiple of run.dt");
  const double ep_steps = learning.episode_duration / run.dt;
  require(std::abs(ep_steps - std::round(ep_steps)) <= 1e-9 * std::max(1.0, ep_steps),
          "learning.episode_duration must be an integer multiple of run.dt");
  require(run.x0.size() == 4, "run.x0 must have 4 entries");
  const double h0 = 1.0 - std::pow(run.x0[2] / barrier.theta_max, 2) -
                    std::pow(run.x0[3] / barrier.omega_max, 2);
  require(h0 >= 0.0, "run.x0 must lie in the safe set");
}

json ScenarioConfig::to_json() const {
  const auto& sp = system.params;
  const auto& ps = system.perturbation;
  const auto& c = controller;
  const auto& l = learning;
  json features = {{"kind", l.features.kind == learning::FeatureKind::Polynomial
                                ? "polynomial"
                                : "random_fourier"},
                   {"coordinates", l.features.coordinates},
                   {"max_degree", l.features.max_degree},
                   {"count", l.features.rff_count},
                   {"bandwidth", l.features.rff_bandwidth},
                   {"seed", l.features.rff_seed}};
  return json{
      {"system",
       {{"params",
         {{"body_mass", sp.body_mass},
          {"wheel_mass", sp.wheel_mass},
          {"com_length", sp.com_length},
          {"body_inertia", sp.body_inertia},
          {"wheel_radius", sp.wheel_radius},
          {"gravity", sp.gravity},
          {"viscous_friction", sp.viscous_friction},
          {"motor_torque_scale", sp.motor_torque_scale}}},
        {"perturbation",
         {{"body_mass_scale", ps.body_mass_scale},
          {"wheel_mass_scale", ps.wheel_mass_scale},
          {"com_length_scale", ps.com_length_scale},
          {"body_inertia_scale", ps.body_inertia_scale},
          {"wheel_radius_scale", ps.wheel_radius_scale},
          {"friction_scale", ps.friction_scale},
          {"torque_scale_scale", ps.torque_scale_scale},
          {"drop_friction", ps.drop_friction}}}}},
      {"barrier",
       {{"theta_max", barrier.theta_max}, {"omega_max", barrier.omega_max}, {"k", barrier.k}}},
      {"controller",
       {{"kp", c.kp},
        {"kd", c.kd},
        {"u_max", c.u_max},
        {"reference",
         {{"amplitude", c.ref_amplitude},
          {"frequency", c.ref_frequency},
          {"offset", c.ref_offset}}},
        {"excitation", {{"amplitude", c.excitation_amplitude}, {"hold", c.excitation_hold}}}}},
      {"learning",
       {{"enabled", l.enabled},
        {"episodes", l.episodes},
        {"episode_duration", l.episode_duration},
        {"x0_spread", l.x0_spread},
        {"features", features},
        {"ridge_lambda", l.ridge_lambda},
        {"lambda_schedule", l.lambda_schedule},
        {"noise_std", l.noise_std}}},
      {"run",
       {{"duration", run.duration}, {"dt", run.dt}, {"seed", run.seed}, {"x0", run.x0}}},
  };
}

json load_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
}

ScenarioConfig load_config(const fs::path& path) { return ScenarioConfig::from_json(load_json(path)); }

barrier::BarrierFunction make_barrier(const ScenarioConfig& cfg) {
  return barrier::ellipse_barrier(4, dynamics::kPitch, dynamics::kPitchRate,
                                  cfg.barrier.theta_max, cfg.barrier.omega_max,
                                  kfun::ComparisonFunction::linear(cfg.barrier.k));
}

dynamics::Controller make_desired_controller(const ControllerBlock& c) {
  return [c](double t, const Vec& x) {
    const double w = 2.0 * std::numbers::pi * c.ref_frequency;
    const double ref = c.ref_offset + c.ref_amplitude * std::sin(w * t);
    const double ref_rate = c.ref_amplitude * w * std::cos(w * t);
    Vec u(1);
    u(0) = c.kp * (x(dynamics::kPitch) - ref) + c.kd * (x(dynamics::kPitchRate) - ref_rate);
    return u;
  };
}

learning::Scenario make_scenario(const ScenarioConfig& cfg) {
  return learning::Scenario{dynamics::segway_true(cfg.system.params),
                            dynamics::segway_nominal(cfg.system.params, cfg.system.perturbation),
                            make_barrier(cfg), make_desired_controller(cfg.controller),
                            cfg.controller.u_max};
}

learning::EpisodicConfig make_episodic_config(const ScenarioConfig& cfg) {
  learning::EpisodicConfig ec;
  ec.episodes = cfg.learning.episodes;
  ec.episode_duration = cfg.learning.episode_duration;
  ec.dt = cfg.run.dt;
  ec.x0 = Eigen::Map<const Vec>(cfg.run.x0.data(), 4);
  ec.x0_spread = cfg.learning.x0_spread;
  ec.seed = cfg.run.seed;
  ec.features = cfg.learning.features;
  ec.ridge_lambda = cfg.learning.ridge_lambda;
  ec.lambda_schedule = cfg.learning.lambda_schedule;
  ec.excitation_amplitude = cfg.controller.excitation_amplitude;
  ec.excitation_hold = cfg.controller.excitation_hold;
  ec.noise.state_std = cfg.learning.noise_std;
  ec.noise.seed = cfg.run.seed;
  ec.validation_x0 = ec.x0;
  ec.validation_duration = cfg.run.duration;
  return ec;
}

ModeResult run_mode(const ScenarioConfig& cfg, const learning::ResidualModel* model) {
  const auto sc = make_scenario(cfg);
  const auto controller = learning::closed_loop(sc, model, sc.desired);
  const Vec x0 = Eigen::Map<const Vec>(cfg.run.x0.data(), 4);
  ModeResult r;
  r.trajectory = dynamics::simulate(sc.true_sys, controller, x0, cfg.run.duration, cfg.run.dt);
  r.delta = pssf::delta_trace(sc.barrier, sc.true_sys, sc.nominal_sys, model, r.trajectory);
  const double delta_bar = r.delta.delta.empty() ? 0.0 : pssf::delta_bound(r.delta);
  r.certificate = pssf::make_certificate(sc.barrier.alpha, delta_bar);
  r.report = pssf::verify_certificate(r.trajectory, sc.barrier, r.certificate);
  return r;
}

namespace {

// sup ||f - f_hat|| over 1000 seeded states in |p|, |p'| <= 1 and the
// barrier's pitch / pitch-rate box.
double sampled_drift_mismatch(const ScenarioConfig& cfg) {
  std::mt19937_64 rng(cfg.run.seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Vec> samples;
  samples.reserve(1000);
  for (int i = 0; i < 1000; ++i) {
    Vec x(4);
    x << u(rng), u(rng), cfg.barrier.theta_max * u(rng), cfg.barrier.omega_max * u(rng);
    samples.push_back(std::move(x));
  }
  return dynamics::drift_mismatch(
      dynamics::segway_true(cfg.system.params),
      dynamics::segway_nominal(cfg.system.params, cfg.system.perturbation), samples);
}

}  // namespace

SimulateOutcome cmd_simulate(const ScenarioConfig& cfg, const learning::ResidualModel* model,
                             const fs::path& out_dir) {
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved_config.json", dump(cfg.to_json()));

  SimulateOutcome out;
  out.no_learning = run_mode(cfg, nullptr);
  if (model) out.learned = run_mode(cfg, model);

  const auto emit = [&out_dir](const std::string& tag, const ModeResult& r) {
    write_file(out_dir / ("trajectory_" + tag + ".csv"),
               [&](std::ostream& os) { dynamics::write_trajectory_csv(os, r.trajectory); });
    write_file(out_dir / ("delta_" + tag + ".csv"),
               [&](std::ostream& os) { pssf::write_delta_csv(os, r.delta); });
    write_text(out_dir / ("certificate_" + tag + ".json"), dump(pssf::to_json(r.report)));
  };
  emit("no_learning", out.no_learning);
  if (out.learned) emit("learned", *out.learned);

  json summary;
  summary["k"] = cfg.barrier.k;
  summary["drift_mismatch_sup"] = sampled_drift_mismatch(cfg);
  summary["no_learning"] = summarize(out.no_learning);
  summary["learned"] = out.learned ? summarize(*out.learned) : json(nullptr);
  if (out.learned) {
    // Uncorrected model error along the learned trajectory, for comparison.
    const auto sc = make_scenario(cfg);
    const auto raw = pssf::delta_trace(sc.barrier, sc.true_sys, sc.nominal_sys, nullptr,
                                       out.learned->trajectory);
    summary["learned"]["model_error_delta_bar"] = raw.delta.empty() ? 0.0 : pssf::delta_bound(raw);
  }
  write_text(out_dir / "summary.json", dump(summary));
  out.summary = summary;

  const bool early = out.no_learning.trajectory.terminated_early ||
                     (out.learned && out.learned->trajectory.terminated_early);
  const bool failed = !out.no_learning.report.pass() || (out.learned && !out.learned->report.pass());
  out.exit_code = early ? kExitEarlyTermination : failed ? kExitCertificateFailure : kExitOk;
  return out;
}

LearnOutcome cmd_learn(const ScenarioConfig& cfg, const fs::path& out_dir) {
  if (!cfg.learning.enabled) throw ConfigError("learning block is disabled");
  fs::create_directories(out_dir);
  write_text(out_dir / "resolved_config.json", dump(cfg.to_json()));

  LearnOutcome out{kExitOk, learning::episodic_train(make_scenario(cfg), make_episodic_config(cfg))};
  const auto& tr = out.training;
  write_text(out_dir / "model.json", dump(tr.model.to_json()));
  write_file(out_dir / "metrics.csv",
             [&](std::ostream& os) { learning::write_metrics_csv(os, tr.history); });
  write_file(out_dir / "dataset.csv",
             [&](std::ostream& os) { learning::write_dataset_csv(os, tr.data); });

  json summary;
  summary["baseline_delta_bar"] = tr.history.baseline_delta_bar;
  summary["final_delta_bar"] = tr.history.episodes.back().validation_delta_bar;
  summary["rows"] = tr.data.size();
  json notes = json::array();
  for (const auto& e : tr.history.episodes) {
    if (e.skipped || e.ill_conditioned) {
      notes.push_back({{"episode", e.episode},
                       {"skipped", e.skipped},
                       {"ill_conditioned", e.ill_conditioned},
                       {"note", e.note}});
    }
  }
  summary["notes"] = notes;
  write_text(out_dir / "learn_summary.json", dump(summary));
  for (const auto& e : tr.history.episodes) {
    if (e.skipped) out.exit_code = kExitEarlyTermination;
  }
  return out;
}

json with_parameter(const json& raw, const std::string& dotted_path, double value) {
  json copy = raw;
  json* node = &copy;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_path.find('.', start);
    const std::string key = dotted_path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty() || !node->is_object()) {
      throw ConfigError("parameter path '" + dotted_path + "' is malformed");
    }
    if (dot == std::string::npos) {
      // Leaves absent from the file resolve to their defaults; address them
      // through the resolved config so typos still fail.
      if (!node->contains(key)) throw ConfigError("parameter path '" + dotted_path + "' not found");
      if (!node->at(key).is_number()) {
        throw ConfigError("parameter path '" + dotted_path + "' is not a numeric leaf");
      }
      if (node->at(key).is_number_integer() && value == std::floor(value)) {
        (*node)[key] = static_cast<long long>(value);
      } else {
        (*node)[key] = value;
      }
      return copy;
    }
    if (!node->contains(key)) throw ConfigError("parameter path '" + dotted_path + "' not found");
    node = &node->at(key);
    start = dot + 1;
  }
}

int cmd_sweep(const json& raw_config, const std::string& dotted_path,
              const std::vector<double>& values, const learning::ResidualModel* model,
              const fs::path& out_dir) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  // Resolve defaults first so every numeric leaf is addressable.
  const json resolved = ScenarioConfig::from_json(raw_config).to_json();
  with_parameter(resolved, dotted_path, values.front());  // validates the path up front
  fs::create_directories(out_dir);

  std::ofstream os(out_dir / "sweep.csv", std::ios::binary);
  if (!os) throw Error("cannot write sweep.csv");
  csv::write_row(os, {"value", "delta_bar_no_learning", "delta_bar_learned", "floor_no_learning",
                      "floor_learned", "min_h_no_learning", "min_h_learned", "exit_code",
                      "error"});
  int worst = kExitOk;
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::vector<std::string> row{csv::fmt(values[i])};
    try {
      const auto cfg = ScenarioConfig::from_json(with_parameter(resolved, dotted_path, values[i]));
      const auto res = cmd_simulate(cfg, model, out_dir / ("run_" + std::to_string(i)));
      const auto& nl = res.no_learning.report;
      row.push_back(csv::fmt(nl.delta_bar));
      row.push_back(res.learned ? csv::fmt(res.learned->report.delta_bar) : "");
      row.push_back(csv::fmt(nl.floor));
      row.push_back(res.learned ? csv::fmt(res.learned->report.floor) : "");
      row.push_back(csv::fmt(nl.min_h));
      row.push_back(res.learned ? csv::fmt(res.learned->report.min_h) : "");
      row.push_back(std::to_string(res.exit_code));
      row.emplace_back();
      worst = std::max(worst, res.exit_code);
    } catch (const Error& e) {
      std::string msg = e.what();
      std::replace(msg.begin(), msg.end(), ',', ';');
      for (int k = 0; k < 6; ++k) row.emplace_back();
      const int code = dynamic_cast<const ConfigError*>(&e) ? kExitConfigError : kExitEarlyTermination;
      row.push_back(std::to_string(code));
      row.push_back(msg);
      worst = std::max(worst, code);
    }
    csv::write_row(os, row);
  }
  return worst;
}

}  // namespace projsafe::scenario
