#include "hmmlab/mle.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace hmmlab {

namespace {

constexpr double kGolden = 0.61803398874989484820;

}  // namespace

MleResult approx_mle(const std::function<double(const Eigen::VectorXd&)>& loglik,
                     const ParameterBox& box, const MleOptions& options) {
  box.validate();
  const int dims = box.dims();
  const int g = std::max(options.coarse_grid_per_dim, 2);

  MleResult result;
  result.theta_hat = Eigen::VectorXd::Zero(dims);
  long evals = 0;

  auto eval = [&](const Eigen::VectorXd& theta) {
    ++evals;
    return loglik(theta);
  };

  // Coarse scan in lexicographic order; strict improvement keeps the first
  // (smallest) maximizer on ties.
  std::vector<int> idx(dims, 0);
  Eigen::VectorXd theta(dims);
  while (true) {
    for (int c = 0; c < dims; ++c)
      theta[c] = box.lower[c] + (box.upper[c] - box.lower[c]) * idx[c] / (g - 1);
    const double v = eval(theta);
    if (v > result.value) {
      result.value = v;
      result.theta_hat = theta;
    }
    int c = dims - 1;
    while (c >= 0 && ++idx[c] == g) idx[c--] = 0;
    if (c < 0) break;
  }
  if (!(result.value > kNegInf))
    throw DegenerateLikelihoodError("approx_mle: likelihood is -inf on the whole grid");
  const double grid_best = result.value;

  // Coordinate-wise golden-section refinement around the incumbent.
  for (int sweep = 0; sweep < options.refine_sweeps; ++sweep) {
    for (int c = 0; c < dims; ++c) {
      const double spacing = (box.upper[c] - box.lower[c]) / (g - 1);
      double lo = std::max(box.lower[c], result.theta_hat[c] - spacing);
      double hi = std::min(box.upper[c], result.theta_hat[c] + spacing);
      Eigen::VectorXd probe = result.theta_hat;

      double x1 = hi - kGolden * (hi - lo);
      double x2 = lo + kGolden * (hi - lo);
      probe[c] = x1;
      double f1 = eval(probe);
      probe[c] = x2;
      double f2 = eval(probe);
      while (hi - lo > options.refine_tol) {
        if (f1 < f2) {
          lo = x1;
          x1 = x2;
          f1 = f2;
          x2 = lo + kGolden * (hi - lo);
          probe[c] = x2;
          f2 = eval(probe);
        } else {
          hi = x2;
          x2 = x1;
          f2 = f1;
          x1 = hi - kGolden * (hi - lo);
          probe[c] = x1;
          f1 = eval(probe);
        }
        const double best = std::max(f1, f2);
        if (best > result.value) {
          result.value = best;
          result.theta_hat[c] = f1 >= f2 ? x1 : x2;
        }
      }
      // Also probe the bracket edges so boundary maxima are reachable.
      for (double edge : {lo, hi}) {
        probe[c] = edge;
        const double v = eval(probe);
        if (v > result.value) {
          result.value = v;
          result.theta_hat[c] = edge;
        }
      }
    }
  }

  result.gap_bound = std::max(0.0, grid_best - result.value);
  result.evaluations = evals;
  return result;
}

double orbit_distance(const Eigen::VectorXd& theta_hat, const Eigen::VectorXd& theta_star,
                      const ParameterBox& box) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& member : box.orbit(theta_star))
    best = std::min(best, (theta_hat - member).norm());
  return best;
}

std::vector<EntropyRatePoint> entropy_rate(const ModelSpec& spec,
                                           const Eigen::VectorXd& theta_star,
                                           const InitialMeasure& init,
                                           const std::vector<long>& schedule, RngStream& rng) {
  if (schedule.empty()) throw Error("entropy_rate: empty schedule");
  const long n_max = *std::max_element(schedule.begin(), schedule.end());
  const Simulation sim = simulate(spec, theta_star, init, static_cast<int>(n_max), rng);

  std::vector<EntropyRatePoint> out;
  out.reserve(schedule.size());
  for (long n : schedule) {
    const double value = loglik(spec, theta_star, init, sim.obs.topRows(n + 1));
    out.push_back({n, value / static_cast<double>(n)});
  }
  return out;
}

ConsistencyReport consistency_experiment(const ModelSpec& spec, const Eigen::VectorXd& theta_star,
                                         const std::vector<long>& schedule, int replicates,
                                         RngStream base, const ConsistencyOptions& options) {
  if (schedule.empty()) throw Error("consistency_experiment: empty schedule");
  if (replicates < 1) throw Error("consistency_experiment: need at least one replicate");
  const long n_max = *std::max_element(schedule.begin(), schedule.end());

  ConsistencyReport report;
  report.schedule = schedule;
  report.rows.resize(schedule.size() * static_cast<std::size_t>(replicates));

  // One task per replicate, one derived stream per replicate; the report is
  // assembled by (horizon, replicate) slot, so any execution order (and any
  // worker count) produces the same result.
  auto run_replicate = [&](int rep) {
    RngStream rng = base.child(static_cast<std::uint64_t>(rep));
    const Simulation sim =
        simulate(spec, theta_star, options.data_init, static_cast<int>(n_max), rng);
    for (std::size_t h = 0; h < schedule.size(); ++h) {
      const long n = schedule[h];
      const auto obs = sim.obs.topRows(n + 1);
      auto objective = [&](const Eigen::VectorXd& theta) {
        return loglik(spec, theta, options.likelihood_init, obs) / static_cast<double>(n);
      };
      MleResult fit = approx_mle(objective, spec.box, options.mle);
      report.rows[h * replicates + rep] =
          ConsistencyRow{rep, n, fit.theta_hat, fit.value,
                         orbit_distance(fit.theta_hat, theta_star, spec.box)};
    }
  };

  const int workers = std::max(1, std::min(options.parallelism, replicates));
  if (workers == 1) {
    for (int rep = 0; rep < replicates; ++rep) run_replicate(rep);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int rep = next.fetch_add(1); rep < replicates; rep = next.fetch_add(1))
          run_replicate(rep);
      });
    for (auto& t : pool) t.join();
  }

  auto quantile = [](const std::vector<double>& sorted, double p) {
    const double pos = p * (sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  for (std::size_t h = 0; h < schedule.size(); ++h) {
    std::vector<double> dist(replicates);
    for (int rep = 0; rep < replicates; ++rep) dist[rep] = report.rows[h * replicates + rep].distance;
    std::sort(dist.begin(), dist.end());
    report.q25_distance.push_back(quantile(dist, 0.25));
    report.median_distance.push_back(quantile(dist, 0.5));
    report.q75_distance.push_back(quantile(dist, 0.75));
  }
  return report;
}

}  // namespace hmmlab
