#include "projsafe/kfun.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "projsafe/errors.hpp"

namespace projsafe::kfun {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

double interpolate(const std::vector<std::pair<double, double>>& pts, double r) {
  auto it = std::upper_bound(pts.begin(), pts.end(), r,
                             [](double v, const auto& p) { return v < p.first; });
  if (it == pts.begin()) return pts.front().second;
  if (it == pts.end()) return pts.back().second;
  const auto& [r1, v1] = *(it - 1);
  const auto& [r2, v2] = *it;
  if (r == r1) return v1;
  return v1 + (v2 - v1) * (r - r1) / (r2 - r1);
}

bool is_identity(const ComparisonFunction& f) {
  const auto* lin = std::get_if<ComparisonFunction::Linear>(&f.family());
  return lin != nullptr && lin->k == 1.0;
}

}  // namespace

std::string to_string(ClassKind kind) {
  switch (kind) {
    case ClassKind::ClassK:
      return "class_k";
    case ClassKind::ClassKInf:
      return "class_k_inf";
    case ClassKind::ExtendedClassK:
      return "extended_class_k";
    case ClassKind::ExtendedClassKInf:
      return "extended_class_k_inf";
  }
  return "unknown";
}

ComparisonFunction ComparisonFunction::linear(double k) {
  if (!(k > 0.0) || !std::isfinite(k)) {
    throw DomainError("linear comparison function needs a finite gain k > 0");
  }
  return ComparisonFunction(Linear{k, false});
}

ComparisonFunction ComparisonFunction::power(double c, double p) {
  if (!(c > 0.0) || !(p > 0.0) || !std::isfinite(c) || !std::isfinite(p)) {
    throw DomainError("power comparison function needs finite c > 0 and p > 0");
  }
  return ComparisonFunction(Power{c, p});
}

ComparisonFunction ComparisonFunction::tabulated(std::vector<std::pair<double, double>> points) {
  if (points.size() < 2) throw DomainError("tabulated comparison function needs >= 2 breakpoints");
  bool has_origin = false;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& [r, v] = points[i];
    if (!std::isfinite(r) || !std::isfinite(v)) throw DomainError("non-finite breakpoint");
    if (i > 0 && !(r > points[i - 1].first)) {
      throw DomainError("tabulated breakpoints must be strictly increasing in r");
    }
    if (r == 0.0) {
      if (v != 0.0) throw DomainError("tabulated comparison function must map 0 to 0");
      has_origin = true;
    }
  }
  if (!has_origin) throw DomainError("tabulated comparison function needs a breakpoint at (0, 0)");
  return ComparisonFunction(Tabulated{std::move(points)});
}

double ComparisonFunction::operator()(double r) const {
  if (!domain().contains(r)) {
    std::ostringstream os;
    os << "argument " << r << " outside domain of " << describe();
    throw DomainError(os.str());
  }
  return std::visit(
      Overloaded{
          [r](const Linear& f) { return f.divides ? r / f.k : r * f.k; },
          [r](const Power& f) {
            const double mag = f.c * std::pow(std::abs(r), f.p);
            return r < 0.0 ? -mag : mag;
          },
          [r](const Tabulated& f) { return interpolate(f.points, r); },
          [r](const Composition& f) { return (*f.outer)((*f.inner)(r)); },
      },
      family_);
}

ClassKind ComparisonFunction::kind() const {
  return std::visit(
      Overloaded{
          [](const Linear&) { return ClassKind::ExtendedClassKInf; },
          [](const Power&) { return ClassKind::ExtendedClassKInf; },
          [](const Tabulated& f) {
            return f.points.front().first < 0.0 ? ClassKind::ExtendedClassK : ClassKind::ClassK;
          },
          [](const Composition& f) {
            const ClassKind a = f.outer->kind();
            const ClassKind b = f.inner->kind();
            const auto extended = [](ClassKind k) {
              return k == ClassKind::ExtendedClassK || k == ClassKind::ExtendedClassKInf;
            };
            const auto unbounded = [](ClassKind k) {
              return k == ClassKind::ClassKInf || k == ClassKind::ExtendedClassKInf;
            };
            const bool ext = extended(a) && extended(b);
            const bool inf = unbounded(a) && unbounded(b);
            if (ext) return inf ? ClassKind::ExtendedClassKInf : ClassKind::ExtendedClassK;
            return inf ? ClassKind::ClassKInf : ClassKind::ClassK;
          },
      },
      family_);
}

Interval ComparisonFunction::domain() const {
  return std::visit(Overloaded{
                        [](const Linear&) { return Interval{-kInf, kInf}; },
                        [](const Power&) { return Interval{-kInf, kInf}; },
                        [](const Tabulated& f) {
                          return Interval{f.points.front().first, f.points.back().first};
                        },
                        [](const Composition& f) { return f.inner->domain(); },
                    },
                    family_);
}

Interval ComparisonFunction::range() const {
  return std::visit(
      Overloaded{
          [](const Linear&) { return Interval{-kInf, kInf}; },
          [](const Power&) { return Interval{-kInf, kInf}; },
          [](const Tabulated& f) {
            double lo = kInf;
            double hi = -kInf;
            for (const auto& [r, v] : f.points) {
              lo = std::min(lo, v);
              hi = std::max(hi, v);
            }
            return Interval{lo, hi};
          },
          [](const Composition& f) {
            const Interval inner = f.inner->range();
            const double lo = std::isfinite(inner.lower) ? (*f.outer)(inner.lower)
                                                         : f.outer->range().lower;
            const double hi = std::isfinite(inner.upper) ? (*f.outer)(inner.upper)
                                                         : f.outer->range().upper;
            return Interval{lo, hi};
          },
      },
      family_);
}

std::optional<double> ComparisonFunction::linear_gain() const {
  return std::visit(Overloaded{
                        [](const Linear& f) -> std::optional<double> {
                          return f.divides ? 1.0 / f.k : f.k;
                        },
                        [](const Power&) -> std::optional<double> { return std::nullopt; },
                        [](const Tabulated&) -> std::optional<double> { return std::nullopt; },
                        [](const Composition& f) -> std::optional<double> {
                          auto a = f.outer->linear_gain();
                          auto b = f.inner->linear_gain();
                          if (a && b) return *a * *b;
                          return std::nullopt;
                        },
                    },
                    family_);
}

std::string ComparisonFunction::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&os](const Linear& f) {
                   if (f.divides) {
                     os << "Linear(1/" << f.k << ")";
                   } else {
                     os << "Linear(" << f.k << ")";
                   }
                 },
                 [&os](const Power& f) { os << "Power(" << f.c << ", " << f.p << ")"; },
                 [&os](const Tabulated& f) { os << "Tabulated[" << f.points.size() << "]"; },
                 [&os](const Composition& f) {
                   os << f.outer->describe() << " o " << f.inner->describe();
                 },
             },
             family_);
  return os.str();
}

double evaluate(const ComparisonFunction& alpha, double r) { return alpha(r); }

ComparisonFunction inverse(const ComparisonFunction& alpha) {
  using CF = ComparisonFunction;
  return std::visit(
      Overloaded{
          [](const CF::Linear& f) {
            if (f.k == 1.0) return CF(f);
            return CF(CF::Linear{f.k, !f.divides});
          },
          [](const CF::Power& f) {
            return CF::power(std::pow(f.c, -1.0 / f.p), 1.0 / f.p);
          },
          [](const CF::Tabulated& f) {
            std::vector<std::pair<double, double>> flipped;
            flipped.reserve(f.points.size());
            for (std::size_t i = 0; i < f.points.size(); ++i) {
              if (i > 0 && !(f.points[i].second > f.points[i - 1].second)) {
                throw NotInvertibleError(
                    "tabulated comparison function is not strictly increasing");
              }
              flipped.emplace_back(f.points[i].second, f.points[i].first);
            }
            return CF::tabulated(std::move(flipped));
          },
          [](const CF::Composition& f) {
            // (outer o inner)^-1 = inner^-1 o outer^-1
            return compose(inverse(*f.inner), inverse(*f.outer));
          },
      },
      alpha.family());
}

ComparisonFunction compose(const ComparisonFunction& outer, const ComparisonFunction& inner) {
  if (!outer.domain().contains(inner.range())) {
    throw DomainError("range of " + inner.describe() + " not contained in domain of " +
                      outer.describe());
  }
  if (is_identity(outer)) return inner;
  if (is_identity(inner)) return outer;
  return ComparisonFunction(ComparisonFunction::Composition{
      std::make_shared<const ComparisonFunction>(outer),
      std::make_shared<const ComparisonFunction>(inner)});
}

ComparisonFunction tabulate(const ComparisonFunction& alpha, std::span<const double> grid) {
  std::vector<std::pair<double, double>> pts;
  pts.reserve(grid.size());
  for (double r : grid) pts.emplace_back(r, alpha(r));
  return ComparisonFunction::tabulated(std::move(pts));
}

std::vector<double> unboundedness_probe_grid() {
  std::vector<double> grid;
  for (int j = 3; j >= -3; --j) grid.push_back(-std::pow(10.0, j));
  for (int j = -3; j <= 3; ++j) grid.push_back(std::pow(10.0, j));
  return grid;
}

MembershipReport verify_class_membership(const ComparisonFunction& alpha,
                                         std::span<const double> grid) {
  MembershipReport report;
  std::ostringstream msg;
  const ClassKind kind = alpha.kind();
  const bool extended = kind == ClassKind::ExtendedClassK || kind == ClassKind::ExtendedClassKInf;

  if (alpha(0.0) != 0.0) {
    report.zero_ok = false;
    msg << "alpha(0) = " << alpha(0.0) << "; ";
  }
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double r = grid[i];
    const double v = alpha(r);
    if ((r > 0.0 && !(v > 0.0)) || (r < 0.0 && extended && !(v < 0.0))) {
      if (report.signs_ok) msg << "sign condition fails at r = " << r << "; ";
      report.signs_ok = false;
    }
    if (i > 0) {
      const double r0 = grid[i - 1];
      if (!(alpha(r0) < v)) {
        if (report.monotone) {
          report.first_violation = std::make_pair(r0, r);
          msg << "not strictly increasing on (" << r0 << ", " << r << "); ";
        }
        report.monotone = false;
      }
    }
  }
  if (kind == ClassKind::ClassKInf || kind == ClassKind::ExtendedClassKInf) {
    const auto probe = unboundedness_probe_grid();
    for (std::size_t i = 1; i < probe.size(); ++i) {
      if (!extended && probe[i - 1] < 0.0) continue;
      if (!(alpha(probe[i - 1]) < alpha(probe[i]))) {
        report.unbounded_ok = false;
        msg << "probe grid not increasing near r = " << probe[i] << "; ";
        break;
      }
    }
    const double top = alpha(probe.back());
    if (!(top > alpha(1.0))) report.unbounded_ok = false;
    if (extended && !(alpha(probe.front()) < alpha(-1.0))) report.unbounded_ok = false;
  }
  report.pass = report.zero_ok && report.monotone && report.signs_ok && report.unbounded_ok;
  report.message = report.pass ? "ok" : msg.str();
  return report;
}

nlohmann::json to_json(const ComparisonFunction& alpha) {
  using CF = ComparisonFunction;
  return std::visit(Overloaded{
                        [](const CF::Linear& f) {
                          nlohmann::json j{{"family", "linear"}, {"k", f.k}};
                          if (f.divides) j["inverted"] = true;
                          return j;
                        },
                        [](const CF::Power& f) {
                          return nlohmann::json{{"family", "power"}, {"c", f.c}, {"p", f.p}};
                        },
                        [](const CF::Tabulated& f) {
                          nlohmann::json pts = nlohmann::json::array();
                          for (const auto& [r, v] : f.points) pts.push_back({r, v});
                          return nlohmann::json{{"family", "tabulated"}, {"points", pts}};
                        },
                        [](const CF::Composition& f) {
                          return nlohmann::json{{"family", "composition"},
                                                {"outer", to_json(*f.outer)},
                                                {"inner", to_json(*f.inner)}};
                        },
                    },
                    alpha.family());
}

namespace {

void require_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&key](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in comparison function");
    }
  }
}

double number(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(std::string("comparison function needs numeric '") + key + "'");
  }
  return j.at(key).get<double>();
}

}  // namespace

ComparisonFunction from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("family") || !j.at("family").is_string()) {
    throw ConfigError("comparison function must be an object with a 'family' string");
  }
  const std::string family = j.at("family").get<std::string>();
  try {
    if (family == "linear") {
      require_keys(j, {"family", "k", "inverted"});
      auto f = ComparisonFunction::linear(number(j, "k"));
      if (j.value("inverted", false)) f = inverse(f);
      return f;
    }
    if (family == "power") {
      require_keys(j, {"family", "c", "p"});
      return ComparisonFunction::power(number(j, "c"), number(j, "p"));
    }
    if (family == "tabulated") {
      require_keys(j, {"family", "points"});
      std::vector<std::pair<double, double>> pts;
      for (const auto& p : j.at("points")) {
        if (!p.is_array() || p.size() != 2) throw ConfigError("tabulated points are [r, value] pairs");
        pts.emplace_back(p[0].get<double>(), p[1].get<double>());
      }
      return ComparisonFunction::tabulated(std::move(pts));
    }
    if (family == "composition") {
      require_keys(j, {"family", "outer", "inner"});
      return compose(from_json(j.at("outer")), from_json(j.at("inner")));
    }
  } catch (const DomainError& e) {
    throw ConfigError(std::string("invalid comparison function: ") + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid comparison function: ") + e.what());
  }
  throw ConfigError("unknown comparison function family '" + family + "'");
}

}  // namespace projsafe::kfun
