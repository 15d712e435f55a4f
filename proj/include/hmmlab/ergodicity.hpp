#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hmmlab/core.hpp"
#include "hmmlab/rng.hpp"

namespace hmmlab {

/// Finite-state Markov chain given by its transition matrix.
struct FiniteChain {
  Eigen::MatrixXd trans;

  int num_states() const { return static_cast<int>(trans.rows()); }
  Eigen::VectorXd stationary() const;
  int step(int x, RngStream& rng) const {
    return rng.categorical(trans.row(x).transpose());
  }
};

/// Scalar continuous-state chain with a one-step transition density, used by
/// the splitting construction through rejection sampling.
struct ContinuousChain {
  std::function<double(double, RngStream&)> step;
  std::function<double(double, double)> log_density;  // log q(x, x')
};

/// Minorization certificate: Q^m(x, .) >= epsilon nu(.) for all x in C.
struct MinorizationCert {
  int m = 1;
  double epsilon = 0.0;
  // Small set C: per-state flags for finite chains, predicate otherwise.
  std::vector<char> small_set_finite;
  std::function<bool(double)> small_set;
  // Minorizing measure nu: weights for finite chains, sampler + log-density
  // for continuous chains.
  Eigen::VectorXd nu_weights;
  std::function<double(RngStream&)> nu_sample;
  std::function<double(double)> nu_log_density;

  bool in_small_set_finite(int x) const {
    return small_set_finite.empty() || small_set_finite[x];
  }
};

/// Exact full-space minorization of a finite chain at step count m:
/// nu(x') proportional to min_x Q^m(x, x'), epsilon the column-minimum mass.
/// Signals NoMinorizationError when epsilon = 0.
MinorizationCert exact_minorization(const Eigen::MatrixXd& trans, int m);

/// Entrywise verification of a finite-chain certificate.
bool verify_minorization(const Eigen::MatrixXd& trans, const MinorizationCert& cert);

/// Foster-Lyapunov drift certificate Q V <= rate V + b 1_C.
struct DriftCert {
  std::function<double(double)> v;  // V >= 1
  Eigen::VectorXd v_finite;         // per-state values for finite chains
  double rate = 0.0;                // the contraction factor in [0,1)
  double b = 0.0;
};

/// Exact drift check for finite chains: (QV)(x) <= rate V(x) + b 1_C(x) at
/// every state.
CheckItem verify_drift(const Eigen::MatrixXd& trans, const DriftCert& drift,
                       const MinorizationCert& cert);

/// Sampled drift check for scalar continuous chains: QV is estimated by
/// Monte-Carlo at states drawn from a long run plus a tail grid, and the
/// inequality is asserted up to three standard errors. Evidence, not proof.
CheckItem verify_drift_sampled(const ContinuousChain& chain, const DriftCert& drift,
                               const MinorizationCert& cert, RngStream& rng,
                               long run_length = 10000, int draws_per_state = 200);

/// Split-chain sample: states, bell times, bells, and regeneration times.
struct RegenerationTrace {
  std::vector<double> states;   // finite chains store the state index
  std::vector<long> sigma;      // small-set hits spaced >= m apart
  std::vector<char> bells;      // Bernoulli(epsilon) coin at each sigma
  std::vector<long> regen;      // regeneration times sigma_i + m with bell = 1
  int m = 1;
  double epsilon = 0.0;
};

struct SplitOptions {
  long rejection_budget = 1000;  // residual-kernel rejection attempts per draw
};

/// Splitting construction for a finite chain; the split-chain marginal state
/// law equals the plain chain's law. Exact categorical residual kernels; for
/// m >= 2 intermediate states are bridged by exact endpoint conditioning.
RegenerationTrace split_simulate(const FiniteChain& chain, int init_state,
                                 const MinorizationCert& cert, long steps, RngStream& rng,
                                 const SplitOptions& options = {});

/// Splitting construction for a scalar continuous chain, m = 1 certificates
/// only; the residual kernel is sampled by rejection against Q(x, .).
RegenerationTrace split_simulate(const ContinuousChain& chain, double init_state,
                                 const MinorizationCert& cert, long steps, RngStream& rng,
                                 const SplitOptions& options = {});

/// Block sums xi_i = sum_{k=sigma_check_i}^{sigma_check_{i+1}-1} (f(X_k) - target_mean).
std::vector<double> block_sums(const RegenerationTrace& trace,
                               const std::function<double(double)>& f, double target_mean);

struct RegenTail {
  std::vector<double> k_grid;
  std::vector<double> exp_moment;   // mean exp(gap / K) over the K grid
  double geometric_slope = 0.0;     // least-squares slope of log tail frequency
  long samples = 0;
};

/// Empirical exponential moments and geometric-tail fit of the
/// inter-regeneration times sigma_check_{i+1} - sigma_check_i.
RegenTail regen_tail(const RegenerationTrace& trace);

struct TailTable {
  long n = 0;
  std::vector<double> t_grid;
  std::vector<double> tail;        // empirical P(|S_n| >= t); rule-of-three
                                   // upper bound where no exceedance was seen
  std::vector<char> upper_bound;   // marks rule-of-three entries
  double k_hat = 1.0;              // fitted constant of K exp(-(t^2/n ^ t)/K)
};

/// Empirical tail of window sums sum_{i=1}^n (f(Y_i^{i+s}) - target_mean) over
/// independent replicates, plus the fitted bound constant.
TailTable empirical_tail(const std::function<std::vector<double>(long, RngStream&)>& sampler,
                         const std::function<double(const double*, int)>& window_f, int s,
                         long n, const std::vector<double>& t_grid, long replicates,
                         double target_mean, RngStream base, int parallelism = 1);

}  // namespace hmmlab
