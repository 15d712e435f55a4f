#pragma once

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "hmmlab/core.hpp"
#include "hmmlab/rng.hpp"

namespace hmmlab {

/// Per-state observation density over a finite alphabet (counting measure)
/// or over the real line (Lebesgue).
struct FiniteEmission {
  enum class Kind { categorical, gaussian };

  Kind kind = Kind::categorical;
  Eigen::MatrixXd probs;   // categorical: d x K, rows sum to one
  Eigen::VectorXd means;   // gaussian: per state
  Eigen::VectorXd sds;     // gaussian: per state

  double log_density(int state, double y) const;
  double sample(int state, RngStream& rng) const;
  int num_symbols() const {
    return kind == Kind::categorical ? static_cast<int>(probs.cols()) : 0;
  }
};

/// Finite-state HMM family: theta maps to a row-stochastic transition matrix
/// and a per-state emission density.
class FiniteHmm {
 public:
  using TransFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;
  using EmissionFn = std::function<FiniteEmission(const Eigen::VectorXd&)>;

  FiniteHmm(int num_states, TransFn trans, EmissionFn emission)
      : d_(num_states), trans_(std::move(trans)), emission_(std::move(emission)) {}

  int num_states() const { return d_; }

  Eigen::MatrixXd trans(const Eigen::VectorXd& theta) const;
  FiniteEmission emission(const Eigen::VectorXd& theta) const { return emission_(theta); }

  double log_g(const Eigen::VectorXd& theta, int x, double y) const {
    return emission_(theta).log_density(x, y);
  }
  double log_q(const Eigen::VectorXd& theta, int x, int x2) const;

  /// log sup_{x,x'} q_theta(x,x'); at most zero for a stochastic matrix.
  double sup_log_q(const Eigen::VectorXd& theta) const;

  Eigen::VectorXd stationary(const Eigen::VectorXd& theta) const;

 private:
  int d_;
  TransFn trans_;
  EmissionFn emission_;
};

struct FinitePath {
  std::vector<int> states;
  Eigen::VectorXd obs;
};

FinitePath simulate(const FiniteHmm& model, const Eigen::VectorXd& theta,
                    const InitialMeasure& init, int n, RngStream& rng);

/// log p^{init}(y_0^n; theta) by the scaled forward recursion. Non-negative
/// init weights; a probability vector gives a proper log-likelihood, all-ones
/// gives the counting-measure improper likelihood. Returns -inf on a
/// zero-likelihood path.
double forward_loglik(const FiniteHmm& model, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& init_weights,
                      const Eigen::Ref<const Eigen::VectorXd>& y);

/// log p^lambda(y_0^n; theta) with lambda the counting measure.
double counting_p_lambda(const FiniteHmm& model, const Eigen::VectorXd& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& y);

struct ErgodicDecomposition {
  std::vector<std::vector<int>> classes;  // closed irreducible classes
  std::vector<int> transient;
  std::vector<int> period;                // per class
};

/// Ergodic classes, transient states, and per-class periods of a stochastic
/// matrix, from SCC analysis of the positive-entry digraph.
ErgodicDecomposition ergodic_decomposition(const Eigen::MatrixXd& trans);

AssumptionReport check_assumptions_F(const FiniteHmm& model,
                                     const Eigen::VectorXd& theta_star,
                                     const ParameterBox& box, RngStream& rng);

/// The periodic two-state counterexample model: Theta = [0.5, 0.9],
/// theta* = 0.7, alternating transition matrix, symmetric emission.
struct Remark13 {
  FiniteHmm model;
  ParameterBox box;
  Eigen::VectorXd theta_star;
};
Remark13 remark13_model();

/// Closed-form limit of (2n)^{-1} log p^{delta_1}(Y_0^{2n}; theta) given the
/// chain started in x0 (states numbered 1 and 2).
double remark13_limit(double theta, double theta_star, int x0);

/// Two-state symmetric-transition HMM with unit-variance Gaussian emissions;
/// theta = (mu_0, mu_1) with label-permutation equivalence.
struct TwoStateGaussian {
  FiniteHmm model;
  ParameterBox box;
  Eigen::VectorXd theta_star;
};
TwoStateGaussian two_state_gaussian(double stay_prob, double mu0, double mu1,
                                    double sd, double box_lo, double box_hi);

}  // namespace hmmlab
