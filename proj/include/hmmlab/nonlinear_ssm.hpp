#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hmmlab/core.hpp"
#include "hmmlab/rng.hpp"

namespace hmmlab {

/// Vector-ARCH state recursion X_k = G(X_{k-1}) + Sigma(X_{k-1}) zeta_k with
/// drift split G(x) = A(x) x + h(x), plus an observation density.
struct ArchModel {
  int state_dim = 1;
  int obs_dim = 1;

  using VecFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;
  using MatFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&, const Eigen::VectorXd&)>;

  MatFn coef;        // A_theta(x)
  VecFn shift;       // h_theta(x)
  MatFn diffusion;   // Sigma_theta(x)

  std::function<double(const Eigen::VectorXd&)> log_noise_density;  // log rho_zeta
  std::function<Eigen::VectorXd(int, RngStream&)> sample_noise;
  double log_noise_sup = 0.0;  // log |rho_zeta|_inf

  std::function<double(const Eigen::VectorXd&, const Eigen::VectorXd&, const Eigen::VectorXd&)>
      log_obs_density;  // log g_theta(x, y)
  std::function<Eigen::VectorXd(const Eigen::VectorXd&, const Eigen::VectorXd&, RngStream&)>
      sample_obs;

  // Declared bound sup_x |det Sigma(x)|^{-1}; |q_theta|_inf = this * |rho|_inf.
  std::function<double(const Eigen::VectorXd&)> sup_inv_det_diffusion;

  Eigen::VectorXd drift(const Eigen::VectorXd& theta, const Eigen::VectorXd& x) const {
    return coef(theta, x) * x + shift(theta, x);
  }
  double log_q(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
               const Eigen::VectorXd& x2) const;
  double sup_log_q(const Eigen::VectorXd& theta) const {
    return std::log(sup_inv_det_diffusion(theta)) + log_noise_sup;
  }
};

struct ArchPath {
  Eigen::MatrixXd states;
  Eigen::MatrixXd obs;
};

ArchPath simulate(const ArchModel& model, const Eigen::VectorXd& theta,
                  const InitialMeasure& init, int n, RngStream& rng);

/// Stochastic volatility instance: X' = phi X + sigma zeta, Y = beta e^{X/2} eps,
/// theta = (phi, sigma, beta).
struct StochVolModel {
  ArchModel model;
  ParameterBox box;
  Eigen::VectorXd theta_star;
};
StochVolModel stoch_vol_model(double phi, double sigma, double beta);

/// log g for the stochastic volatility observation density.
double sv_log_g(const Eigen::VectorXd& theta, double x, double y);

struct SvIdentities {
  double sup_g;  // sup_x g_theta(x, y) = (2 pi e)^{-1/2} / |y|
  double int_g;  // integral of g_theta(., y) d lambda = 1 / |y|
};
SvIdentities sv_identities(const Eigen::VectorXd& theta, double y);

struct QuadratureGrid {
  double lo = -20.0;
  double hi = 20.0;
  int nodes = 1000;
};

/// Scalar-state likelihood by deterministic grid quadrature: a forward
/// recursion over midpoint nodes with transition weights q(x_i, x_j) dx.
/// init_log_density gives log nu at the nodes. Signals GridTooSmallError when
/// more than 1e-6 of the one-step transition mass from an active node falls
/// outside the grid.
double quadrature_loglik(const ArchModel& model, const Eigen::VectorXd& theta,
                         const std::function<double(double)>& init_log_density,
                         const QuadratureGrid& grid,
                         const Eigen::Ref<const Eigen::MatrixXd>& y);

/// Upper bound on the joint spectral radius: min over m <= depth of
/// (max over length-m products |.|)^{1/m}, operator 2-norm.
double jsr_upper_bound(const std::vector<Eigen::MatrixXd>& matrices, int depth);

struct NlCheckConfig {
  int sampled_states = 256;
  int path_length = 100000;
  double quantile = 0.999;  // radius quantile defining the far-field region
  int jsr_depth = 6;
};

AssumptionReport check_assumptions_NL(const ArchModel& model, const ParameterBox& box,
                                      const Eigen::VectorXd& theta, RngStream& rng,
                                      const NlCheckConfig& cfg = {});

}  // namespace hmmlab
