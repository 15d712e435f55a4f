#pragma once

#include <string>
#include <variant>

#include "hmmlab/finite_hmm.hpp"
#include "hmmlab/gaussian_ssm.hpp"
#include "hmmlab/nonlinear_ssm.hpp"

namespace hmmlab {

/// One of the three concrete HMM families together with its parameter box and
/// the distinguished true parameter.
struct ModelSpec {
  std::string name;
  std::variant<std::monostate, FiniteHmm, LinearGaussianModel, ArchModel> family;
  ParameterBox box;
  Eigen::VectorXd true_theta;
  // Quadrature setup used when the family needs a gridded likelihood.
  QuadratureGrid quadrature;

  bool is_finite() const { return std::holds_alternative<FiniteHmm>(family); }
  bool is_linear_gaussian() const { return std::holds_alternative<LinearGaussianModel>(family); }
  bool is_arch() const { return std::holds_alternative<ArchModel>(family); }

  const FiniteHmm& finite() const { return std::get<FiniteHmm>(family); }
  const LinearGaussianModel& linear_gaussian() const {
    return std::get<LinearGaussianModel>(family);
  }
  const ArchModel& arch() const { return std::get<ArchModel>(family); }

  void validate() const {
    box.validate();
    if (!box.contains(true_theta)) throw Error("model spec: true theta outside the box");
  }
};

/// Simulation output with family-independent storage: one row per time index,
/// finite states stored as their integer index.
struct Simulation {
  Eigen::MatrixXd states;
  Eigen::MatrixXd obs;
};

Simulation simulate(const ModelSpec& spec, const Eigen::VectorXd& theta,
                    const InitialMeasure& init, int n, RngStream& rng);

/// Observation log-density log g_theta(x, y) against the family reference
/// measure (counting measure on finite alphabets, Lebesgue otherwise).
double log_g(const ModelSpec& spec, const Eigen::VectorXd& theta,
             const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// l-step transition log-density (l = 1 for finite and ARCH families, l = d
/// for linear-Gaussian via the controllability Gaussian).
double log_q(const ModelSpec& spec, const Eigen::VectorXd& theta,
             const Eigen::VectorXd& x, const Eigen::VectorXd& x2);

/// Proper log-likelihood log p^nu(y_0^n; theta) for the given initial measure,
/// dispatched to the family evaluator.
double loglik(const ModelSpec& spec, const Eigen::VectorXd& theta,
              const InitialMeasure& init, const Eigen::Ref<const Eigen::MatrixXd>& y);

ModelSpec make_remark13_spec();
ModelSpec make_two_state_gaussian_spec(double stay_prob, double mu0, double mu1, double sd,
                                       double box_lo, double box_hi);
ModelSpec make_scalar_lg_spec(double a, double r, double b, double s,
                              double box_lo, double box_hi);
ModelSpec make_stoch_vol_spec(double phi, double sigma, double beta);

}  // namespace hmmlab
