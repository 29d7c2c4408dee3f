#pragma once

// Comparison functions (class K, K-infinity and their extended variants).
//
// Every safety condition in the toolkit is phrased through these: the CBF
// decay rate alpha, the ISSf gain iota, the compatibility bounds of a
// projection and the inflation gamma of a certified set. Values are
// immutable after construction and can be shared across threads.

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace projsafe::kfun {

enum class ClassKind {
  ClassK,             // [0, a)
  ClassKInf,          // [0, inf), unbounded above
  ExtendedClassK,     // (-b, a)
  ExtendedClassKInf,  // all of R, unbounded both ways
};

std::string to_string(ClassKind kind);

/// Closed interval [lower, upper]; infinite ends mean unbounded.
struct Interval {
  double lower;
  double upper;

  bool contains(double r) const { return r >= lower && r <= upper; }
  bool contains(const Interval& other) const {
    return other.lower >= lower && other.upper <= upper;
  }
};

class ComparisonFunction {
 public:
  struct Linear {
    double k;
    // Evaluate as r / k instead of r * k. Keeps the inverse of Linear(k)
    // bit-exact, so sigma^-1(gamma(r)) == gamma(r) / c.
    bool divides = false;
  };
  struct Power {
    double c;
    double p;
  };
  struct Tabulated {
    std::vector<std::pair<double, double>> points;
  };
  struct Composition {
    std::shared_ptr<const ComparisonFunction> outer;
    std::shared_ptr<const ComparisonFunction> inner;
  };
  using Family = std::variant<Linear, Power, Tabulated, Composition>;

  /// k * r. Requires k > 0.
  static ComparisonFunction linear(double k);
  /// c * |r|^p * sign(r): odd extension to negative arguments.
  static ComparisonFunction power(double c, double p);
  /// Piecewise-linear interpolation through (r, value) breakpoints. The
  /// breakpoints must be strictly increasing in r and include (0, 0).
  /// Monotonicity of the values is not enforced here; see
  /// verify_class_membership.
  static ComparisonFunction tabulated(std::vector<std::pair<double, double>> points);

  double operator()(double r) const;

  const Family& family() const { return family_; }
  ClassKind kind() const;
  Interval domain() const;
  /// Image of the domain. Exact for the monotone families; for tables it
  /// is the hull of the breakpoint values.
  Interval range() const;

  /// Gain if this is a linear function (possibly nested in compositions of
  /// linear functions), nullopt otherwise.
  std::optional<double> linear_gain() const;

  std::string describe() const;

 private:
  explicit ComparisonFunction(Family family) : family_(std::move(family)) {}
  friend ComparisonFunction compose(const ComparisonFunction&, const ComparisonFunction&);
  friend ComparisonFunction inverse(const ComparisonFunction&);

  Family family_;
};

double evaluate(const ComparisonFunction& alpha, double r);

/// Closed-form inverse for Linear and Power, table transposition for
/// Tabulated, reversed composition of inverses for Composition. Throws
/// NotInvertibleError when a table is not strictly increasing.
ComparisonFunction inverse(const ComparisonFunction& alpha);

/// r -> outer(inner(r)). Throws DomainError if the range of inner is not
/// contained in the domain of outer. Composing with the identity returns the
/// other operand unchanged.
ComparisonFunction compose(const ComparisonFunction& outer, const ComparisonFunction& inner);

/// Samples alpha on a sorted grid and returns the tabulated function.
ComparisonFunction tabulate(const ComparisonFunction& alpha, std::span<const double> grid);

struct MembershipReport {
  bool pass = true;
  bool zero_ok = true;
  bool monotone = true;
  bool signs_ok = true;
  bool unbounded_ok = true;
  std::optional<std::pair<double, double>> first_violation;
  std::string message;
};

/// Sampling check of the class definition on a sorted grid containing 0:
/// alpha(0) = 0, strict increase across consecutive grid points, positive
/// for r > 0 and (for extended classes) negative for r < 0. For the
/// unbounded classes the values on the probe grid {±10^j, j = -3..3} must
/// keep increasing in magnitude.
MembershipReport verify_class_membership(const ComparisonFunction& alpha,
                                         std::span<const double> grid);

/// Geometric probe grid {-10^3, ..., -10^-3, 10^-3, ..., 10^3}.
std::vector<double> unboundedness_probe_grid();

nlohmann::json to_json(const ComparisonFunction& alpha);
ComparisonFunction from_json(const nlohmann::json& j);

}  // namespace projsafe::kfun
