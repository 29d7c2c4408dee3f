// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "projsafe/barrier.hpp"
#include "projsafe/kfun.hpp"
#include "projsafe/learning.hpp"
#include "projsafe/pssf.hpp"
#include "projsafe/scenario.hpp"
#include "projsafe/toy.hpp"

using namespace projsafe;
namespace fs = std::filesystem;
using kfun::ComparisonFunction;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const std::function<Verdict()>& check) {
  const auto t0 = Clock::now();
  Verdict v;
  try {
    v = check();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (!v.pass) ++failures;
  char head[64];
  std::snprintf(head, sizeof head, "[%s] %2d ", v.pass ? "PASS" : "FAIL", id);
  std::cout << head << name << ": " << v.detail << " (" << std::fixed;
  std::cout.precision(1);
  std::cout << secs << " s)" << std::endl;
  std::cout.unsetf(std::ios::floatfield);
  std::cout.precision(6);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(4);
  os << v;
  return os.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& diff) {
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || slurp(entry.path()) != slurp(b / rel)) {
      diff = rel.string();
      return false;
    }
  }
  return true;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("projsafe_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// Benchmark model trained once with the default config (seed 0).
const learning::ResidualModel& benchmark_model() {
  static const learning::ResidualModel model = [] {
    const scenario::ScenarioConfig cfg;
    return learning::episodic_train(scenario::make_scenario(cfg),
                                    scenario::make_episodic_config(cfg))
        .model;
  }();
  return model;
}

Verdict undisturbed_invariance() {
  scenario::ScenarioConfig cfg;
  cfg.system.perturbation = dynamics::PerturbationSpec::identity();
  const auto sc = scenario::make_scenario(cfg);
  const auto ctrl = learning::closed_loop(sc, nullptr, sc.desired);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst = std::numeric_limits<double>::infinity();
  int ok = 0;
  for (int i = 0; i < 50; ++i) {
    Vec x0(4);
    do {
      x0 << 2.0 * u(rng), 2.0 * u(rng), cfg.barrier.theta_max * u(rng), cfg.barrier.omega_max * u(rng);
    } while (sc.barrier.h(x0) < 0.0);
    const auto tr = dynamics::simulate(sc.true_sys, ctrl, x0, cfg.run.duration, cfg.run.dt);
    double min_h = std::numeric_limits<double>::infinity();
    for (const Vec& x : tr.states) min_h = std::min(min_h, sc.barrier.h(x));
    worst = std::min(worst, min_h);
    if (!tr.terminated_early && min_h >= -1e-6) ++ok;
  }
  return {ok == 50, std::to_string(ok) + "/50 rollouts keep h >= -1e-6, worst min h " + num(worst)};
}

Verdict certificate_validity() {
  const scenario::ScenarioConfig cfg;
  const auto nl = scenario::run_mode(cfg, nullptr);
  const auto ln = scenario::run_mode(cfg, &benchmark_model());
  const double k = cfg.barrier.k;
  const bool nl_ok = nl.report.pass() && nl.report.floor == -nl.report.delta_bar / k &&
                     !nl.trajectory.terminated_early;
  const bool ln_ok = ln.report.pass() && ln.report.floor == -ln.report.delta_bar / k &&
                     !ln.trajectory.terminated_early;
  return {nl_ok && ln_ok, "no learning: min h " + num(nl.report.min_h) + " >= floor " +
                              num(nl.report.floor) + "; learned: min h " + num(ln.report.min_h) +
                              " >= floor " + num(ln.report.floor)};
}

Verdict learning_improves() {
  int within_half = 0;
  int improved = 0;
  double worst_ratio = 0.0;
  bool benchmark_half = false;
  bool floors_ok = true;
  bool monotone_history = false;
  int rms_monotone = 0;
  for (int seed = 0; seed < 20; ++seed) {
    scenario::ScenarioConfig cfg;
    cfg.run.seed = static_cast<std::uint64_t>(seed);
    const auto out = learning::episodic_train(scenario::make_scenario(cfg),
                                              scenario::make_episodic_config(cfg));
    const auto nl = scenario::run_mode(cfg, nullptr);
    const auto ln = scenario::run_mode(cfg, &out.model);
    const double ratio = ln.report.delta_bar / nl.report.delta_bar;
    bool rms_down = true;
    for (std::size_t e = 1; e < out.history.episodes.size(); ++e) {
      rms_down = rms_down && out.history.episodes[e].training_rms <=
                                 out.history.episodes[e - 1].training_rms;
    }
    rms_monotone += rms_down ? 1 : 0;
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio <= 0.5) ++within_half;
    if (ratio < 1.0) ++improved;
    if (seed == 0) {
      benchmark_half = ratio <= 0.5;
      floors_ok = ln.report.floor > nl.report.floor;
      monotone_history =
          out.history.episodes.back().validation_delta_bar < out.history.baseline_delta_bar;
    }
  }
  const bool pass = benchmark_half && floors_ok && monotone_history &&
                    (within_half == 20 || improved >= 19);
  return {pass, "ratio <= 0.5 in " + std::to_string(within_half) + "/20 seeds, improved in " +
                    std::to_string(improved) + "/20, worst ratio " + num(worst_ratio) +
                    "; training rms non-increasing in " + std::to_string(rms_monotone) +
                    "/20 (diagnostic)"};
}

Verdict filter_oracle() {
  std::mt19937_64 rng(404);
  double worst_u = 0.0;
  double worst_margin = std::numeric_limits<double>::infinity();
  int active = 0;
  for (int i = 0; i < 1000; ++i) {
    const int m = i % 2 == 0 ? 1 : 3;
    const int n = 2 + i % 3;
    const auto sys = fixtures::random_system(rng, n, m).sys();
    const auto bar = fixtures::random_ellipsoid(rng, n, ComparisonFunction::linear(1.0 + i % 4));
    const Vec x = fixtures::random_vec(rng, n, 0.8);
    const Vec u_des = fixtures::random_vec(rng, m, 3.0);
    const auto r = barrier::safety_filter(bar, sys, nullptr, u_des, x);
    const Vec a = sys.actuation(x).transpose() * bar.grad(x);
    const double b = -bar.alpha(bar.h(x)) - bar.grad(x).dot(sys.drift(x));
    worst_u = std::max(worst_u, (r.u - oracle::qp_half_space(a, b, u_des)).norm());
    if (!r.infeasible) worst_margin = std::min(worst_margin, r.constraint_margin);
    active += r.modified ? 1 : 0;
  }
  return {worst_u <= 1e-6 && worst_margin >= -1e-9,
          "max |u - u_oracle| " + num(worst_u) + ", min margin " + num(worst_margin) + ", " +
              std::to_string(active) + "/1000 active"};
}

Verdict issf_oracle() {
  const std::vector<ComparisonFunction> iotas{
      ComparisonFunction::linear(0.5), ComparisonFunction::linear(3.0),
      ComparisonFunction::power(1.0, 2.0), ComparisonFunction::power(0.5, 3.0),
      ComparisonFunction::power(2.0, 0.5),
      ComparisonFunction::tabulated({{0.0, 0.0}, {0.2, 0.3}, {0.8, 0.5}, {1.5, 2.5}, {5.0, 4.0}})};
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> ud(0.05, 2.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const int n = 1 + i % 4;
    const auto& iota = iotas[static_cast<std::size_t>(i) % iotas.size()];
    const auto sys = fixtures::random_system(rng, n, 1).sys();
    const auto bar = fixtures::random_ellipsoid(rng, n, ComparisonFunction::linear(1.0));
    const Vec x = fixtures::random_vec(rng, n, 0.6);
    const Vec u = fixtures::random_vec(rng, 1, 1.0);
    const double D = ud(rng);
    const double brute =
        barrier::cbf_margin(bar, sys, x, u) +
        oracle::ball_minimum(bar.grad(x), D, [&](double r) { return iota(r); }, 10000,
                             static_cast<std::uint64_t>(i));
    worst = std::max(worst, std::abs(barrier::issf_margin(bar, sys, x, u, D, iota).value - brute));
  }
  return {worst <= 1e-6, "max |margin - brute force| " + num(worst) + " over 200 instances"};
}

Verdict regression_oracle() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> rows_d(1, 20);
  std::uniform_real_distribution<double> lam(1e-6, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const auto fm = i % 2 == 0 ? learning::FeatureMap::polynomial({0, 1}, 1)
                               : learning::FeatureMap::random_fourier({0, 1}, 4, 1.0, 7);
    learning::Dataset data;
    std::vector<Vec> rows;
    std::vector<double> y;
    const int count = rows_d(rng);
    for (int r = 0; r < count; ++r) {
      learning::DataRow row;
      row.x = fixtures::random_vec(rng, 2, 1.0);
      row.u = Vec::Constant(1, g(rng));
      row.hdot_target = g(rng);
      row.hdot_nominal = g(rng);
      const Vec phi = fm(row.x);
      Vec z(2 * phi.size());
      z << phi, row.u(0) * phi;
      rows.push_back(z);
      y.push_back(row.residual_target());
      data.rows.push_back(row);
    }
    const double lambda = lam(rng);
    const auto model = learning::fit_residual(data, fm, lambda);
    const Vec ref = oracle::ridge(rows, y, lambda);
    Vec got(ref.size());
    got << model.w_b(), model.w_a().row(0).transpose();
    worst = std::max(worst, (got - ref).norm() / std::max(1.0, ref.norm()));
  }

  auto fm = learning::FeatureMap::polynomial({1, 2, 3}, 2);
  const Vec wb = fixtures::random_vec(rng, fm.dimension(), 2.0);
  Mat wa(1, fm.dimension());
  wa.row(0) = fixtures::random_vec(rng, fm.dimension(), 2.0).transpose();
  learning::Dataset planted;
  for (int r = 0; r < 10 * 2 * fm.dimension(); ++r) {
    learning::DataRow row;
    row.x = fixtures::random_vec(rng, 4, 1.0);
    row.u = Vec::Constant(1, g(rng));
    const Vec phi = fm(row.x);
    row.hdot_target = wb.dot(phi) + (wa * phi).dot(row.u);
    planted.rows.push_back(row);
  }
  const auto pm = learning::fit_residual(planted, fm, 1e-10);
  const double rel = std::max((pm.w_b() - wb).norm() / wb.norm(), (pm.w_a() - wa).norm() / wa.norm());
  return {worst <= 1e-8 && rel <= 1e-4,
          "max oracle deviation " + num(worst) + ", planted relative error " + num(rel)};
}

Verdict kfun_algebra() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> ur(-100.0, 100.0);
  std::uniform_real_distribution<double> uc(0.01, 50.0);
  const std::vector<ComparisonFunction> fams{
      ComparisonFunction::linear(0.3), ComparisonFunction::linear(7.0),
      ComparisonFunction::power(1.0, 2.0), ComparisonFunction::power(3.0, 0.4),
      kfun::compose(ComparisonFunction::linear(2.0), ComparisonFunction::power(0.5, 1.5))};
  double worst = 0.0;
  for (const auto& a : fams) {
    const auto ai = kfun::inverse(a);
    for (int i = 0; i < 200; ++i) {
      const double r = ur(rng);
      worst = std::max(worst, std::abs(ai(a(r)) - r) / std::max(1.0, std::abs(r)));
    }
  }
  bool exact = true;
  const auto gamma = ComparisonFunction::power(1.3, 1.7);
  for (int i = 0; i < 200; ++i) {
    const double c = uc(rng);
    const double r = std::abs(ur(rng));
    const auto g2 = pssf::projected_inflation(ComparisonFunction::linear(c), gamma);
    exact = exact && g2(r) == gamma(r) / c;
  }
  const auto bad = ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 0.5}, {2.0, 0.4}});
  const std::vector<double> grid{0.0, 1.0, 2.0};
  const auto rep = kfun::verify_class_membership(bad, grid);
  const bool caught = !rep.pass && rep.first_violation &&
                      rep.first_violation->first == 1.0 && rep.first_violation->second == 2.0;
  return {worst <= 1e-9 && exact && caught,
          "round-trip error " + num(worst) + ", inflation exact: " + (exact ? "yes" : "no") +
              ", violation caught: " + (caught ? "yes" : "no")};
}

Verdict identity_reduction() {
  const scenario::ScenarioConfig cfg;
  const auto sc = scenario::make_scenario(cfg);
  const auto pair = pssf::identity_pair(sc.barrier);
  double worst = 0.0;
  bool verdicts_agree = true;
  for (const learning::ResidualModel* model : {static_cast<const learning::ResidualModel*>(nullptr),
                                               &benchmark_model()}) {
    const auto mode = scenario::run_mode(cfg, model);
    // Direct: delta from the hdot mismatch, floor -alpha^-1(delta_bar).
    const auto direct = pssf::make_certificate(
        sc.barrier.alpha,
        pssf::delta_bound(pssf::delta_trace(sc.barrier, sc.true_sys, sc.nominal_sys, model,
                                            mode.trajectory)));
    // Projection pipeline with Pi = h: projected delta, ISSf gain with
    // iota = identity, transported through sigma_upper = identity.
    const double dbar = pssf::delta_bound(pssf::projected_delta_trace(
        pair.projection, sc.true_sys, sc.nominal_sys, model, mode.trajectory));
    const auto gamma = pssf::projected_inflation(
        pair.sigma_upper, pssf::issf_gamma(sc.barrier.alpha, ComparisonFunction::linear(1.0)));
    const auto via = pssf::certificate_from_gamma(gamma, dbar);
    worst = std::max({worst, std::abs(direct.delta_bar - via.delta_bar),
                      std::abs(direct.floor - via.floor)});
    const auto r1 = pssf::verify_certificate(mode.trajectory, sc.barrier, direct);
    const auto r2 = pssf::verify_certificate(mode.trajectory, pair.h, via);
    verdicts_agree = verdicts_agree && r1.status == r2.status && std::abs(r1.margin - r2.margin) <= 1e-12;
  }
  return {worst <= 1e-12 && verdicts_agree,
          "max |direct - projected| over delta_bar and floor " + num(worst) +
              (verdicts_agree ? ", verdicts identical" : ", verdicts differ")};
}

Verdict toy_transport() {
  const double k = 1.0;
  const double push = 0.25;
  const auto gamma = toy::transported_gamma(k);
  const auto bar = toy::barrier(k);
  int total = 0;
  int held = 0;
  int falsified = 0;
  double least_margin = std::numeric_limits<double>::infinity();
  double least_half_margin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 25; ++i) {
    for (int j = 0; j < 25; ++j) {
      Vec x0(2);
      x0 << -1.0 + 2.0 * i / 24.0, -1.0 + 2.0 * j / 24.0;
      if (bar.h(x0) < 0.0) continue;
      ++total;
      const auto ro = toy::run(k, push, x0, 4.0, 1e-3);
      const auto rep = pssf::verify_certificate(ro.trajectory, bar,
                                                pssf::certificate_from_gamma(gamma, ro.delta_bar));
      if (rep.pass() && !ro.trajectory.terminated_early) ++held;
      least_margin = std::min(least_margin, rep.margin);
      const auto half = pssf::verify_certificate(
          ro.trajectory, bar, pssf::certificate_from_gamma(gamma, 0.5 * ro.delta_bar));
      if (half.status == pssf::CertificateStatus::Fail) ++falsified;
      least_half_margin = std::min(least_half_margin, half.margin);
    }
  }
  std::string detail = std::to_string(held) + "/" + std::to_string(total) +
                       " grid rollouts inside the transported set (least margin " +
                       num(least_margin) + "); understated certificate ";
  detail += falsified > 0 ? "falsified by " + std::to_string(falsified) + " rollouts"
                          : "unfalsified, least margin " + num(least_half_margin);
  return {total >= 400 && held == total, detail};
}

Verdict determinism() {
  scenario::ScenarioConfig cfg;
  const auto& model = benchmark_model();
  const auto a = scratch("det_sim_a");
  const auto b = scratch("det_sim_b");
  scenario::cmd_simulate(cfg, &model, a);
  scenario::cmd_simulate(cfg, &model, b);
  const auto la = scratch("det_learn_a");
  const auto lb = scratch("det_learn_b");
  scenario::cmd_learn(cfg, la);
  scenario::cmd_learn(cfg, lb);
  const auto sa = scratch("det_sweep_a");
  const auto sb = scratch("det_sweep_b");
  const auto raw = cfg.to_json();
  scenario::cmd_sweep(raw, "barrier.k", {1.0, 2.0}, &model, sa);
  scenario::cmd_sweep(raw, "barrier.k", {1.0, 2.0}, &model, sb);
  std::string diff;
  const bool ok = same_tree(a, b, diff) && same_tree(la, lb, diff) && same_tree(sa, sb, diff);
  return {ok, ok ? "simulate, learn and sweep artifacts byte-identical across reruns"
                 : "artifact differs: " + diff};
}

Verdict dt_refinement() {
  const auto& model = benchmark_model();
  std::string detail;
  bool ok = true;
  for (const learning::ResidualModel* m : {static_cast<const learning::ResidualModel*>(nullptr), &model}) {
    std::vector<double> dbar;
    for (double dt : {1e-2, 1e-3, 1e-4}) {
      scenario::ScenarioConfig cfg;
      cfg.run.dt = dt;
      dbar.push_back(scenario::run_mode(cfg, m).report.delta_bar);
    }
    const double rel = std::abs(dbar[1] - dbar[2]) / dbar[2];
    ok = ok && rel < 0.05;
    detail += std::string(m ? "learned" : "no learning") + " " + num(dbar[0]) + " / " +
              num(dbar[1]) + " / " + num(dbar[2]) + " (finest change " + num(100.0 * rel) +
              "%)" + (m ? "" : "; ");
  }
  return {ok, detail};
}

}  // namespace

int main() {
  report(1, "undisturbed invariance", undisturbed_invariance);
  report(2, "certificate validity", certificate_validity);
  report(3, "learning improves the bound", learning_improves);
  report(4, "filter QP oracle", filter_oracle);
  report(5, "ISSf margin oracle", issf_oracle);
  report(6, "regression oracle and planted recovery", regression_oracle);
  report(7, "class-K algebra", kfun_algebra);
  report(8, "identity projection reduction", identity_reduction);
  report(9, "toy projection transport", toy_transport);
  report(10, "determinism", determinism);
  report(11, "dt refinement", dt_refinement);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
