#pragma once

#include <functional>

#include <Eigen/Dense>

#include "hmmlab/core.hpp"
#include "hmmlab/rng.hpp"

namespace hmmlab {

struct LgMatrices {
  Eigen::MatrixXd A;  // d x d
  Eigen::MatrixXd R;  // d x q
  Eigen::MatrixXd B;  // p x d
  Eigen::MatrixXd S;  // p x p, full rank under L3
};

/// Linear-Gaussian state space family
///   X_{k+1} = A X_k + R U_k,   Y_k = B X_k + S V_k
/// with i.i.d. standard Gaussian (U_k, V_k).
class LinearGaussianModel {
 public:
  using MatricesFn = std::function<LgMatrices(const Eigen::VectorXd&)>;

  LinearGaussianModel(int d, int q, int p, MatricesFn matrices)
      : d_(d), q_(q), p_(p), matrices_(std::move(matrices)) {}

  int state_dim() const { return d_; }
  int noise_dim() const { return q_; }
  int obs_dim() const { return p_; }

  LgMatrices matrices(const Eigen::VectorXd& theta) const;

  double log_g(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
               const Eigen::VectorXd& y) const;
  /// d-step transition log-density log q_theta(x, x2) (controllability Gaussian).
  double log_q(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
               const Eigen::VectorXd& x2) const;
  /// log sup_{x,y} g_theta = -(p/2) log 2pi - (1/2) log det S S^T.
  double sup_log_g(const Eigen::VectorXd& theta) const;
  /// log sup_x g_theta(x, y) for a fixed y.
  double sup_log_g_at(const Eigen::VectorXd& theta, const Eigen::VectorXd& y) const;
  /// log |q_theta|_inf = -(d/2) log 2pi - (1/2) log det C_d C_d^T.
  double sup_log_q(const Eigen::VectorXd& theta) const;

  /// Stationary state covariance: solution of P = A P A^T + R R^T.
  Eigen::MatrixXd stationary_cov(const Eigen::VectorXd& theta) const;

 private:
  int d_, q_, p_;
  MatricesFn matrices_;
};

LinearGaussianModel constant_lgm(const LgMatrices& m);
/// Scalar family with theta = (a): X' = a X + r U, Y = b X + s V.
LinearGaussianModel scalar_lgm(double r, double b, double s);

struct LgPath {
  Eigen::MatrixXd states;  // (n+1) x d
  Eigen::MatrixXd obs;     // (n+1) x p
};

LgPath simulate(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                const InitialMeasure& init, int n, RngStream& rng);

/// Block observability/controllability structure at window length r.
struct StructuralMatrices {
  Eigen::MatrixXd obs;     // O_{theta,r}: rp x d
  Eigen::MatrixXd ctrl;    // C_{theta,r}: d x rq
  Eigen::MatrixXd hankel;  // H_{theta,r}: rp x (r-1)q, block lower-triangular
  Eigen::MatrixXd sdiag;   // S_{theta,r}: rp x rp block diagonal
  Eigen::MatrixXd gamma;   // Gamma = hankel hankel^T + sdiag sdiag^T
  Eigen::MatrixXd hmat;    // Gamma^{-1} - Gamma^{-1} O (O^T Gamma^{-1} O)^{-1} O^T Gamma^{-1}
};

StructuralMatrices structural(const LinearGaussianModel& model,
                              const Eigen::VectorXd& theta, int r);

AssumptionReport check_assumptions_L(const LinearGaussianModel& model,
                                     const Eigen::VectorXd& theta);

/// Exact log p^nu(y_0^n; theta) for a Gaussian initial law, by the Kalman
/// predict/update recursion with Joseph-form covariance updates.
double kalman_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_cov,
                     const Eigen::Ref<const Eigen::MatrixXd>& y);

/// Brute-force likelihood: build the stacked observation Gaussian and evaluate
/// a single multivariate normal log-density. For small n only.
double joint_density_oracle(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_cov,
                            const Eigen::Ref<const Eigen::MatrixXd>& y);

/// Closed-form improper likelihood log p^lambda(y_0^{r-1}; theta) for a window
/// of r >= d observations, lambda the Lebesgue measure on the state space.
/// Window-length convention: r counts observations, so the last index is
/// r - 1; callers working with the index convention should map r_theta = r - 1.
double improper_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                       const Eigen::Ref<const Eigen::MatrixXd>& y);

/// log p^lambda(y_0^n; theta) for any n >= d - 1 observations: closed form on
/// the first d observations, then the exact Gaussian posterior of X_d feeds a
/// Kalman continuation.
double improper_forward_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                               const Eigen::Ref<const Eigen::MatrixXd>& y);

}  // namespace hmmlab
