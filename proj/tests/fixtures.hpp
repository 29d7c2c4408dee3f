#pragma once

// Small systems and barriers shared by the unit tests and the acceptance
// binary.

#include <random>

#include "projsafe/barrier.hpp"
#include "projsafe/dynamics.hpp"
#include "projsafe/kfun.hpp"

namespace fixtures {

using projsafe::Mat;
using projsafe::Vec;
using projsafe::barrier::BarrierFunction;
using projsafe::dynamics::ControlAffineSystem;
using projsafe::kfun::ComparisonFunction;

/// x' = u on R.
inline ControlAffineSystem scalar_integrator() {
  return {1, 1, [](const Vec&) { return Vec::Zero(1); }, [](const Vec&) { return Mat::Ones(1, 1); }};
}

/// h = 1 - x^2 on R.
inline BarrierFunction unit_interval(double k = 1.0) {
  return {[](const Vec& x) { return 1.0 - x(0) * x(0); },
          [](const Vec& x) { return Vec::Constant(1, -2.0 * x(0)); },
          ComparisonFunction::linear(k)};
}

/// x' = A x + sin(x) + B(x) u with a state-dependent B.
struct RandomSystem {
  Mat A;
  Mat B0;
  Mat B1;
  ControlAffineSystem sys() const {
    const Mat a = A;
    const Mat b0 = B0;
    const Mat b1 = B1;
    const auto n = static_cast<int>(A.rows());
    const auto m = static_cast<int>(B0.cols());
    return {n, m, [a](const Vec& x) { return Vec(a * x + x.array().sin().matrix()); },
            [b0, b1](const Vec& x) { return Mat(b0 + std::cos(x(0)) * b1); }};
  }
};

inline RandomSystem random_system(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> g(0.0, 1.0);
  RandomSystem s{Mat(n, n), Mat(n, m), Mat(n, m)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) s.A(i, j) = g(rng);
    for (int j = 0; j < m; ++j) {
      s.B0(i, j) = g(rng);
      s.B1(i, j) = 0.3 * g(rng);
    }
  }
  return s;
}

/// h = 1 - x^T P x with P = L L^T + 0.1 I.
inline BarrierFunction random_ellipsoid(std::mt19937_64& rng, int n, ComparisonFunction alpha) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat L(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) L(i, j) = 0.5 * g(rng);
  const Mat P = L * L.transpose() + 0.1 * Mat::Identity(n, n);
  return {[P](const Vec& x) { return 1.0 - x.dot(P * x); },
          [P](const Vec& x) { return Vec(-2.0 * P * x); }, std::move(alpha)};
}

inline Vec random_vec(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = u(rng);
  return v;
}

}  // namespace fixtures
