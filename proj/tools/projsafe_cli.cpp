// Command-line entry point: simulate, learn and sweep over a scenario config.

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "projsafe/errors.hpp"
#include "projsafe/learning.hpp"
#include "projsafe/scenario.hpp"

namespace ps = projsafe;
namespace sc = projsafe::scenario;

namespace {

std::optional<ps::learning::ResidualModel> load_model(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return ps::learning::ResidualModel::from_json(sc::load_json(path));
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> values;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      values.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ps::ConfigError("cannot parse sweep value '" + item + "'");
    }
  }
  return values;
}

void report(const std::string& tag, const sc::ModeResult& r) {
  std::cout << tag << ": delta_bar=" << r.report.delta_bar << " floor=" << r.report.floor
            << " min_h=" << r.report.min_h << " certificate=" << ps::pssf::to_string(r.report.status)
            << (r.trajectory.terminated_early ? " (terminated early: " + r.trajectory.termination_reason + ")"
                                              : "")
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection-to-state safety toolkit: CBF safety filters, episodic residual "
               "learning and certified safe-set inflation bounds"};
  app.require_subcommand(1);

  std::string config;
  std::string model;
  std::string out;
  std::string param;
  std::string values;

  auto* simulate = app.add_subcommand("simulate", "Closed-loop rollouts and PSSf certificates");
  simulate->add_option("--config", config, "Scenario config (JSON)")->required();
  simulate->add_option("--model", model, "Trained residual model (JSON)");
  simulate->add_option("--out", out, "Output directory")->required();

  auto* learn = app.add_subcommand("learn", "Episodic training of the residual model");
  learn->add_option("--config", config, "Scenario config (JSON)")->required();
  learn->add_option("--out", out, "Output directory")->required();

  auto* sweep = app.add_subcommand("sweep", "Repeat simulate over values of one config leaf");
  sweep->add_option("--config", config, "Scenario config (JSON)")->required();
  sweep->add_option("--param", param, "Dotted path of a numeric leaf, e.g. run.dt")->required();
  sweep->add_option("--values", values, "Comma-separated values")->required();
  sweep->add_option("--model", model, "Trained residual model (JSON)");
  sweep->add_option("--out", out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sc::kExitConfigError;
  }

  try {
    if (*simulate) {
      const auto cfg = sc::load_config(config);
      const auto m = load_model(model);
      const auto res = sc::cmd_simulate(cfg, m ? &*m : nullptr, out);
      report("no_learning", res.no_learning);
      if (res.learned) report("learned", *res.learned);
      return res.exit_code;
    }
    if (*learn) {
      const auto cfg = sc::load_config(config);
      const auto res = sc::cmd_learn(cfg, out);
      std::cout << "baseline delta_bar=" << res.training.history.baseline_delta_bar << '\n';
      for (const auto& e : res.training.history.episodes) {
        std::cout << "episode " << e.episode << ": training_rms=" << e.training_rms
                  << " validation_delta_bar=" << e.validation_delta_bar
                  << (e.skipped ? " [" + e.note + "]" : "") << '\n';
      }
      return res.exit_code;
    }
    if (*sweep) {
      const auto raw = sc::load_json(config);
      const auto m = load_model(model);
      const int code = sc::cmd_sweep(raw, param, parse_values(values), m ? &*m : nullptr, out);
      std::cout << "wrote " << out << "/sweep.csv\n";
      return code;
    }
  } catch (const ps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return sc::kExitConfigError;
  } catch (const ps::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sc::kExitEarlyTermination;
  }
  return 0;
}
