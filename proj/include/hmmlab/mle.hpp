#pragma once

#include <functional>
#include <vector>

#include "hmmlab/model.hpp"

namespace hmmlab {

struct MleOptions {
  int coarse_grid_per_dim = 33;
  double refine_tol = 1e-4;
  int refine_sweeps = 3;
};

struct MleResult {
  Eigen::VectorXd theta_hat;
  double value = kNegInf;
  // n^{-1} l(theta_hat) >= sup over the coarse grid minus this; refinement
  // never moves below the best grid point, so it is zero by construction.
  double gap_bound = 0.0;
  long evaluations = 0;
};

/// Derivative-free approximate maximizer over the box: coarse grid scan, then
/// coordinate-wise golden-section sweeps from the best grid point. Ties on the
/// grid break towards the lexicographically smallest theta.
MleResult approx_mle(const std::function<double(const Eigen::VectorXd&)>& loglik,
                     const ParameterBox& box, const MleOptions& options = {});

/// Min Euclidean distance from theta_hat to the equivalence orbit of theta_star.
double orbit_distance(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_star,
                      const ParameterBox& box);

struct EntropyRatePoint {
  long n;
  double norm_loglik;  // n^{-1} log p^nu(Y_0^n)
};

/// Normalized log-likelihoods along a horizon schedule for one path simulated
/// under theta*; estimates the entropy rate l(theta*).
std::vector<EntropyRatePoint> entropy_rate(const ModelSpec& spec,
                                           const Eigen::VectorXd& theta_star,
                                           const InitialMeasure& init,
                                           const std::vector<long>& schedule, RngStream& rng);

struct ConsistencyRow {
  int replicate;
  long n;
  Eigen::VectorXd theta_hat;
  double value;
  double distance;  // orbit distance to theta*
};

struct ConsistencyReport {
  std::vector<long> schedule;
  std::vector<ConsistencyRow> rows;      // ordered by (horizon, replicate)
  // Orbit-distance summary quantiles per horizon.
  std::vector<double> q25_distance;
  std::vector<double> median_distance;
  std::vector<double> q75_distance;
};

struct ConsistencyOptions {
  MleOptions mle;
  InitialMeasure likelihood_init;            // nu in l_{nu,n}
  InitialMeasure data_init;                  // law of the simulated data
  int parallelism = 1;
};

/// Simulate under theta*, fit by approx_mle at each horizon, and record the
/// orbit distance per (horizon, replicate). Deterministic given the seed and
/// independent of the replicate execution order.
ConsistencyReport consistency_experiment(const ModelSpec& spec, const Eigen::VectorXd& theta_star,
                                         const std::vector<long>& schedule, int replicates,
                                         RngStream base, const ConsistencyOptions& options);

}  // namespace hmmlab
