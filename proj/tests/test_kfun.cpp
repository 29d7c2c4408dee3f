#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "projsafe/errors.hpp"
#include "projsafe/kfun.hpp"

using projsafe::kfun::ClassKind;
using projsafe::kfun::ComparisonFunction;
namespace kf = projsafe::kfun;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = a + (b - a) * i / (n - 1);
  return g;
}

}  // namespace

TEST_CASE("evaluate hand values") {
  const auto lin2 = ComparisonFunction::linear(2.0);
  CHECK(kf::evaluate(lin2, 0.0) == 0.0);
  CHECK(kf::evaluate(lin2, 0.3) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(kf::evaluate(ComparisonFunction::power(1.0, 2.0), -2.0) == -4.0);
  CHECK(kf::evaluate(ComparisonFunction::power(3.0, 0.5), 4.0) == doctest::Approx(6.0));
}

TEST_CASE("tabulated interpolation and domain") {
  const auto t = ComparisonFunction::tabulated({{-1.0, -2.0}, {0.0, 0.0}, {2.0, 1.0}});
  CHECK(t(1.0) == doctest::Approx(0.5));
  CHECK(t(-0.5) == doctest::Approx(-1.0));
  CHECK(t.kind() == ClassKind::ExtendedClassK);
  CHECK_THROWS_AS(t(2.5), projsafe::DomainError);
  CHECK_THROWS_AS(ComparisonFunction::tabulated({{0.5, 0.1}, {1.0, 0.2}}), projsafe::Error);
  CHECK_THROWS_AS(ComparisonFunction::tabulated({{0.0, 0.0}, {0.0, 1.0}}), projsafe::Error);
}

TEST_CASE("factory preconditions") {
  CHECK_THROWS_AS(ComparisonFunction::linear(0.0), projsafe::Error);
  CHECK_THROWS_AS(ComparisonFunction::linear(-1.0), projsafe::Error);
  CHECK_THROWS_AS(ComparisonFunction::power(1.0, 0.0), projsafe::Error);
}

TEST_CASE("inverse closed forms") {
  const auto id_inv = kf::inverse(ComparisonFunction::linear(1.0));
  CHECK(id_inv.linear_gain() == 1.0);

  const auto inv4 = kf::inverse(ComparisonFunction::linear(4.0));
  REQUIRE(inv4.linear_gain().has_value());
  CHECK(*inv4.linear_gain() == doctest::Approx(0.25));
  CHECK(inv4(1.0) == 0.25);

  const auto sq_inv = kf::inverse(ComparisonFunction::power(1.0, 2.0));
  const auto& pw = std::get<ComparisonFunction::Power>(sq_inv.family());
  CHECK(pw.c == doctest::Approx(1.0));
  CHECK(pw.p == doctest::Approx(0.5));
  CHECK(sq_inv(9.0) == doctest::Approx(3.0));
}

TEST_CASE("inverse of a non-increasing table throws") {
  const auto t = ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 0.5}, {2.0, 0.4}});
  CHECK_THROWS_AS(kf::inverse(t), projsafe::NotInvertibleError);
}

TEST_CASE("round trip on every invertible family") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ur(-50.0, 50.0);
  std::uniform_real_distribution<double> ut(-0.99, 2.99);
  const std::vector<ComparisonFunction> fams{
      ComparisonFunction::linear(1.0),
      ComparisonFunction::linear(3.7),
      ComparisonFunction::linear(0.01),
      ComparisonFunction::power(1.0, 2.0),
      ComparisonFunction::power(2.5, 0.3),
      ComparisonFunction::power(0.2, 3.0),
      kf::compose(ComparisonFunction::linear(2.0), ComparisonFunction::power(1.5, 1.7)),
  };
  for (const auto& a : fams) {
    const auto ai = kf::inverse(a);
    for (int i = 0; i < 100; ++i) {
      const double r = ur(rng);
      CHECK(std::abs(ai(a(r)) - r) <= 1e-9 * std::max(1.0, std::abs(r)));
    }
  }
  const auto t = ComparisonFunction::tabulated({{-1.0, -3.0}, {0.0, 0.0}, {1.0, 0.5}, {3.0, 4.0}});
  const auto ti = kf::inverse(t);
  for (int i = 0; i < 100; ++i) {
    const double r = ut(rng);
    CHECK(std::abs(ti(t(r)) - r) <= 1e-9 * std::max(1.0, std::abs(r)));
  }
}

TEST_CASE("compose hand values") {
  const auto sq = ComparisonFunction::power(1.0, 2.0);
  const auto same = kf::compose(ComparisonFunction::linear(1.0), sq);
  for (double r : {-3.0, 0.0, 0.7, 5.0}) CHECK(same(r) == sq(r));
  CHECK(kf::compose(ComparisonFunction::linear(0.5), sq)(2.0) == doctest::Approx(2.0));
  CHECK(kf::compose(kf::inverse(ComparisonFunction::linear(2.0)),
                    ComparisonFunction::linear(6.0))(1.0) == doctest::Approx(3.0));
}

TEST_CASE("compose rejects a range outside the outer domain") {
  const auto outer = ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 1.0}});
  CHECK_THROWS_AS(kf::compose(outer, ComparisonFunction::linear(2.0)), projsafe::DomainError);
}

TEST_CASE("composition is associative on evaluation") {
  const auto a = ComparisonFunction::linear(1.3);
  const auto b = ComparisonFunction::power(0.8, 1.4);
  const auto c = ComparisonFunction::power(2.0, 0.6);
  const auto left = kf::compose(a, kf::compose(b, c));
  const auto right = kf::compose(kf::compose(a, b), c);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ur(-20.0, 20.0);
  for (int i = 0; i < 200; ++i) {
    const double r = ur(rng);
    CHECK(std::abs(left(r) - right(r)) <= 1e-12 * std::max(1.0, std::abs(left(r))));
  }
}

TEST_CASE("class membership examples") {
  const std::vector<double> g3{-1.0, 0.0, 1.0};
  CHECK(kf::verify_class_membership(ComparisonFunction::linear(1.0), g3).pass);

  const auto bad = ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 0.5}, {2.0, 0.4}});
  const std::vector<double> g{0.0, 1.0, 2.0};
  const auto rep = kf::verify_class_membership(bad, g);
  CHECK_FALSE(rep.pass);
  CHECK_FALSE(rep.monotone);
  REQUIRE(rep.first_violation.has_value());
  CHECK(rep.first_violation->first == 1.0);
  CHECK(rep.first_violation->second == 2.0);

  CHECK(kf::verify_class_membership(ComparisonFunction::power(1.0, 3.0), linspace(-5, 5, 101)).pass);
}

TEST_CASE("composition of class-K functions stays in the class") {
  const auto grid = linspace(-10.0, 10.0, 201);
  const std::vector<ComparisonFunction> fams{
      ComparisonFunction::linear(0.3), ComparisonFunction::power(1.0, 0.5),
      ComparisonFunction::power(2.0, 2.0), ComparisonFunction::linear(5.0)};
  for (const auto& a : fams) {
    for (const auto& b : fams) {
      const auto ab = kf::compose(a, b);
      INFO(ab.describe());
      CHECK(kf::verify_class_membership(ab, grid).pass);
    }
  }
  const auto t = ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 2.0}, {4.0, 3.0}});
  const auto tg = linspace(0.0, 4.0, 41);
  CHECK(kf::verify_class_membership(kf::compose(ComparisonFunction::linear(2.0), t), tg).pass);
}

TEST_CASE("linear coincidence of the inflation") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uc(0.05, 20.0);
  std::uniform_real_distribution<double> ur(0.0, 10.0);
  const auto gamma = ComparisonFunction::power(1.7, 1.3);
  for (int i = 0; i < 100; ++i) {
    const double c = uc(rng);
    const double r = ur(rng);
    const auto g2 = kf::compose(kf::inverse(ComparisonFunction::linear(c)), gamma);
    CHECK(g2(r) == gamma(r) / c);
  }
}

TEST_CASE("tabulate samples the function") {
  const auto sq = ComparisonFunction::power(1.0, 2.0);
  const auto grid = linspace(0.0, 2.0, 5);
  const auto t = kf::tabulate(sq, grid);
  CHECK(t(1.0) == doctest::Approx(1.0));
  CHECK(t(0.75) == doctest::Approx(0.5 * (0.25 + 1.0)));
}

TEST_CASE("unbounded probe grid") {
  const auto g = kf::unboundedness_probe_grid();
  CHECK(g.size() == 14);
  CHECK(g.front() == -1000.0);
  CHECK(g.back() == 1000.0);
}

TEST_CASE("json round trip") {
  const std::vector<ComparisonFunction> fams{
      ComparisonFunction::linear(2.5), kf::inverse(ComparisonFunction::linear(3.0)),
      ComparisonFunction::power(1.2, 0.7),
      ComparisonFunction::tabulated({{0.0, 0.0}, {1.0, 1.5}, {2.0, 2.0}}),
      kf::compose(ComparisonFunction::linear(2.0), ComparisonFunction::power(1.0, 2.0))};
  for (const auto& a : fams) {
    const auto b = kf::from_json(kf::to_json(a));
    for (double r : {0.0, 0.4, 1.0, 1.9}) CHECK(b(r) == a(r));
  }
  CHECK_THROWS_AS(kf::from_json(nlohmann::json{{"family", "linear"}, {"k", 1.0}, {"extra", 1}}),
                  projsafe::ConfigError);
  CHECK_THROWS_AS(kf::from_json(nlohmann::json{{"family", "cubic"}}), projsafe::ConfigError);
}
