#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hmmlab {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Named failure modes that callers are expected to catch and handle.
struct HorizonTooShortError : Error { using Error::Error; };
struct UnobservableParameterError : Error { using Error::Error; };
struct GridTooSmallError : Error { using Error::Error; };
struct DegenerateLikelihoodError : Error { using Error::Error; };
struct NoMinorizationError : Error { using Error::Error; };
struct RejectionBudgetError : Error { using Error::Error; };
struct NotSeparatedError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };

enum class CheckStatus { pass, fail, indeterminate };

inline const char* to_string(CheckStatus s) {
  switch (s) {
    case CheckStatus::pass: return "pass";
    case CheckStatus::fail: return "fail";
    default: return "indeterminate";
  }
}

struct CheckItem {
  std::string name;
  CheckStatus status = CheckStatus::indeterminate;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
};

/// Outcome of an assumption battery; each item is pass/fail/indeterminate.
struct AssumptionReport {
  std::vector<CheckItem> items;

  bool all_pass() const {
    for (const auto& it : items)
      if (it.status != CheckStatus::pass) return false;
    return true;
  }
  bool any_fail() const {
    for (const auto& it : items)
      if (it.status == CheckStatus::fail) return true;
    return false;
  }
  const CheckItem* find(const std::string& name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
};

enum class Equivalence { identity, label_permutation, custom_finite_orbit };

/// Compact box parameter space with a finite equivalence orbit per point.
struct ParameterBox {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  Equivalence equivalence = Equivalence::identity;
  // Index permutations of theta generating the orbit (label permutations).
  std::vector<std::vector<int>> permutations;
  // Enumerator for custom_finite_orbit; must return points inside the box.
  std::function<std::vector<Eigen::VectorXd>(const Eigen::VectorXd&)> custom_orbit;

  int dims() const { return static_cast<int>(lower.size()); }

  void validate() const {
    if (lower.size() != upper.size() || lower.size() == 0)
      throw Error("parameter box: lower/upper size mismatch");
    for (Eigen::Index i = 0; i < lower.size(); ++i)
      if (!(lower[i] < upper[i]))
        throw Error("parameter box: lower must be < upper in every coordinate");
  }

  bool contains(const Eigen::VectorXd& theta) const {
    if (theta.size() != lower.size()) return false;
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      if (theta[i] < lower[i] || theta[i] > upper[i]) return false;
    return true;
  }

  /// The equivalence class [theta], always including theta itself.
  std::vector<Eigen::VectorXd> orbit(const Eigen::VectorXd& theta) const {
    std::vector<Eigen::VectorXd> out{theta};
    if (equivalence == Equivalence::label_permutation) {
      for (const auto& perm : permutations) {
        Eigen::VectorXd b(theta.size());
        for (std::size_t i = 0; i < perm.size(); ++i) b[static_cast<Eigen::Index>(i)] = theta[perm[i]];
        out.push_back(b);
      }
    } else if (equivalence == Equivalence::custom_finite_orbit && custom_orbit) {
      for (auto& b : custom_orbit(theta)) out.push_back(std::move(b));
    }
    return out;
  }
};

/// Initial state measure for simulation and likelihood evaluation.
struct InitialMeasure {
  enum class Kind { point_mass, stationary, weights, gaussian };

  Kind kind = Kind::stationary;
  int state = 0;                 // point_mass, finite state spaces
  Eigen::VectorXd point;         // point_mass, continuous state spaces
  Eigen::VectorXd weights;       // weights, finite state spaces
  Eigen::VectorXd mean;          // gaussian
  Eigen::MatrixXd cov;           // gaussian
  int burn_in = 10000;           // stationary init for nonlinear families

  static InitialMeasure PointMass(int s) {
    InitialMeasure m;
    m.kind = Kind::point_mass;
    m.state = s;
    m.point = Eigen::VectorXd::Constant(1, static_cast<double>(s));
    return m;
  }
  static InitialMeasure PointMass(const Eigen::VectorXd& x) {
    InitialMeasure m;
    m.kind = Kind::point_mass;
    m.point = x;
    return m;
  }
  static InitialMeasure Stationary(int burn_in = 10000) {
    InitialMeasure m;
    m.kind = Kind::stationary;
    m.burn_in = burn_in;
    return m;
  }
  static InitialMeasure Weights(const Eigen::VectorXd& w) {
    InitialMeasure m;
    m.kind = Kind::weights;
    m.weights = w;
    return m;
  }
  static InitialMeasure Gaussian(const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    InitialMeasure m;
    m.kind = Kind::gaussian;
    m.mean = mean;
    m.cov = cov;
    return m;
  }
};

/// Log-sum-exp over a vector with max subtraction, ascending index order.
inline double log_sum_exp(const Eigen::VectorXd& v) {
  double m = kNegInf;
  for (Eigen::Index i = 0; i < v.size(); ++i) m = std::max(m, v[i]);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace hmmlab
