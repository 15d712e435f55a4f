#include "hmmlab/ergodicity.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace hmmlab {

Eigen::VectorXd FiniteChain::stationary() const {
  const int d = num_states();
  Eigen::MatrixXd a = trans.transpose() - Eigen::MatrixXd::Identity(d, d);
  a.row(d - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  b[d - 1] = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  for (int i = 0; i < d; ++i) pi[i] = std::max(pi[i], 0.0);
  return pi / pi.sum();
}

MinorizationCert exact_minorization(const Eigen::MatrixXd& trans, int m) {
  if (m < 1) throw Error("exact_minorization: m must be >= 1");
  const int d = static_cast<int>(trans.rows());
  Eigen::MatrixXd qm = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < m; ++i) qm = qm * trans;

  Eigen::VectorXd colmin(d);
  for (int j = 0; j < d; ++j) colmin[j] = qm.col(j).minCoeff();
  const double eps = colmin.sum();
  if (eps <= 0.0)
    throw NoMinorizationError("exact_minorization: no m-step overlap (try larger m)");

  MinorizationCert cert;
  cert.m = m;
  cert.epsilon = eps;
  cert.small_set_finite.assign(d, 1);
  cert.nu_weights = colmin / eps;
  return cert;
}

bool verify_minorization(const Eigen::MatrixXd& trans, const MinorizationCert& cert) {
  const int d = static_cast<int>(trans.rows());
  Eigen::MatrixXd qm = Eigen::MatrixXd::Identity(d, d);
  for (int i = 0; i < cert.m; ++i) qm = qm * trans;
  for (int x = 0; x < d; ++x) {
    if (!cert.in_small_set_finite(x)) continue;
    for (int y = 0; y < d; ++y)
      if (qm(x, y) < cert.epsilon * cert.nu_weights[y] - 1e-12) return false;
  }
  return cert.epsilon > 0.0;
}

CheckItem verify_drift(const Eigen::MatrixXd& trans, const DriftCert& drift,
                       const MinorizationCert& cert) {
  const int d = static_cast<int>(trans.rows());
  if (drift.v_finite.size() != d)
    throw Error("verify_drift: V values missing for finite chain");
  if (drift.v_finite.minCoeff() < 1.0)
    return {"drift", CheckStatus::fail, drift.v_finite.minCoeff(), "V must be >= 1"};
  if (drift.rate < 0.0 || drift.rate >= 1.0)
    return {"drift", CheckStatus::fail, drift.rate, "rate must lie in [0,1)"};

  double worst = kNegInf;
  for (int x = 0; x < d; ++x) {
    const double qv = trans.row(x).dot(drift.v_finite);
    const double budget =
        drift.rate * drift.v_finite[x] + (cert.in_small_set_finite(x) ? drift.b : 0.0);
    worst = std::max(worst, qv - budget);
  }
  return {"drift", worst <= 1e-12 ? CheckStatus::pass : CheckStatus::fail, worst,
          "max over states of QV - rate V - b 1_C"};
}

CheckItem verify_drift_sampled(const ContinuousChain& chain, const DriftCert& drift,
                               const MinorizationCert& cert, RngStream& rng,
                               long run_length, int draws_per_state) {
  if (!drift.v) throw Error("verify_drift_sampled: drift certificate needs V");
  if (drift.rate < 0.0 || drift.rate >= 1.0)
    return {"drift-sampled", CheckStatus::fail, drift.rate, "rate must lie in [0,1)"};

  // Probe states: thinned long run plus a symmetric tail grid.
  std::vector<double> probes;
  double x = 0.0;
  double radius = 1.0;
  for (long k = 0; k < run_length; ++k) {
    x = chain.step(x, rng);
    radius = std::max(radius, std::abs(x));
    if (k % std::max<long>(1, run_length / 10000) == 0) probes.push_back(x);
  }
  for (int i = 0; i <= 16; ++i) probes.push_back(-2.0 * radius + 4.0 * radius * i / 16);

  double worst = kNegInf;
  bool violated = false;
  for (double state : probes) {
    if (drift.v(state) < 1.0)
      return {"drift-sampled", CheckStatus::fail, drift.v(state), "V must be >= 1"};
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < draws_per_state; ++i) {
      const double v = drift.v(chain.step(state, rng));
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / draws_per_state;
    const double var = std::max(0.0, sumsq / draws_per_state - mean * mean);
    const double se = std::sqrt(var / draws_per_state);
    const double budget = drift.rate * drift.v(state) +
                          (cert.small_set && cert.small_set(state) ? drift.b : 0.0);
    const double slack = mean - budget;
    worst = std::max(worst, slack);
    if (slack > 3.0 * se) violated = true;
  }
  return {"drift-sampled", violated ? CheckStatus::fail : CheckStatus::pass, worst,
          "max sampled QV - rate V - b 1_C over probe states"};
}

namespace {

// Exact bridge for finite chains: sample X_{t+1} given X_t = i and the m-step
// endpoint X_m = k, using P(j | i, k) = Q(i,j) Q^{m-t-1}(j,k) / Q^{m-t}(i,k).
std::vector<int> bridge_finite(const Eigen::MatrixXd& trans,
                               const std::vector<Eigen::MatrixXd>& powers, int from, int to,
                               int m, RngStream& rng) {
  std::vector<int> inner;
  int cur = from;
  for (int t = 0; t < m - 1; ++t) {
    const int remaining = m - t;
    Eigen::VectorXd w(trans.rows());
    for (int j = 0; j < trans.rows(); ++j)
      w[j] = trans(cur, j) * powers[remaining - 1](j, to);
    cur = rng.categorical(w);
    inner.push_back(cur);
  }
  return inner;
}

void record_hit(RegenerationTrace& trace, long time, int bell) {
  trace.sigma.push_back(time);
  trace.bells.push_back(static_cast<char>(bell));
  if (bell) trace.regen.push_back(time + trace.m);
}

}  // namespace

RegenerationTrace split_simulate(const FiniteChain& chain, int init_state,
                                 const MinorizationCert& cert, long steps, RngStream& rng,
                                 const SplitOptions&) {
  if (cert.epsilon <= 0.0 || cert.epsilon > 1.0)
    throw Error("split_simulate: epsilon must lie in (0, 1]");
  if (!verify_minorization(chain.trans, cert))
    throw Error("split_simulate: certificate fails the entrywise minorization check");

  const int d = chain.num_states();
  const int m = cert.m;
  std::vector<Eigen::MatrixXd> powers(m + 1);  // Q^0 .. Q^m
  powers[0] = Eigen::MatrixXd::Identity(d, d);
  for (int i = 1; i <= m; ++i) powers[i] = powers[i - 1] * chain.trans;

  // Residual m-step kernels R(x, .) = (Q^m(x, .) - eps nu) / (1 - eps).
  Eigen::MatrixXd residual = powers[m];
  for (int x = 0; x < d; ++x) {
    if (!cert.in_small_set_finite(x)) continue;
    for (int y = 0; y < d; ++y)
      residual(x, y) = std::max(residual(x, y) - cert.epsilon * cert.nu_weights[y], 0.0);
  }

  RegenerationTrace trace;
  trace.m = m;
  trace.epsilon = cert.epsilon;
  trace.states.reserve(steps + 1);

  int x = init_state;
  trace.states.push_back(x);
  long k = 0;
  long next_hit_allowed = 0;
  while (k < steps) {
    if (k >= next_hit_allowed && cert.in_small_set_finite(x)) {
      const int bell = cert.epsilon >= 1.0 ? 1 : rng.bernoulli(cert.epsilon);
      record_hit(trace, k, bell);
      next_hit_allowed = k + m;

      // Endpoint at k + m, then the exact in-between bridge.
      const int endpoint =
          bell ? rng.categorical(cert.nu_weights) : rng.categorical(residual.row(x).transpose());
      const std::vector<int> inner = bridge_finite(chain.trans, powers, x, endpoint, m, rng);
      for (int t = 0; t < m && k < steps; ++t) {
        x = t + 1 == m ? endpoint : inner[t];
        trace.states.push_back(x);
        ++k;
      }
    } else {
      x = chain.step(x, rng);
      trace.states.push_back(x);
      ++k;
    }
  }
  // A final block cut off by the horizon has no nu draw; drop its bell time.
  while (!trace.regen.empty() && trace.regen.back() > steps) trace.regen.pop_back();
  return trace;
}

RegenerationTrace split_simulate(const ContinuousChain& chain, double init_state,
                                 const MinorizationCert& cert, long steps, RngStream& rng,
                                 const SplitOptions& options) {
  if (cert.m != 1)
    throw UnsupportedError(
        "split_simulate: m >= 2 needs model-specific bridge sampling on continuous spaces");
  if (cert.epsilon <= 0.0 || cert.epsilon > 1.0)
    throw Error("split_simulate: epsilon must lie in (0, 1]");
  if (!cert.small_set || !cert.nu_sample || !cert.nu_log_density)
    throw Error("split_simulate: continuous certificate needs predicate and nu");

  RegenerationTrace trace;
  trace.m = 1;
  trace.epsilon = cert.epsilon;
  trace.states.reserve(steps + 1);

  double x = init_state;
  trace.states.push_back(x);
  for (long k = 0; k < steps; ++k) {
    if (cert.small_set(x)) {
      const int bell = cert.epsilon >= 1.0 ? 1 : rng.bernoulli(cert.epsilon);
      record_hit(trace, k, bell);
      if (bell) {
        x = cert.nu_sample(rng);
      } else {
        // Rejection for R(x,.) = (Q(x,.) - eps nu)/(1 - eps): propose from
        // Q(x,.), accept with probability 1 - eps nu(x') / q(x, x').
        long attempts = 0;
        while (true) {
          if (++attempts > options.rejection_budget)
            throw RejectionBudgetError("split_simulate: residual rejection budget exceeded");
          const double proposal = chain.step(x, rng);
          const double accept =
              1.0 - cert.epsilon *
                        std::exp(cert.nu_log_density(proposal) - chain.log_density(x, proposal));
          if (accept < -1e-9)
            throw Error("split_simulate: certificate violates minorization at a proposal");
          if (rng.uniform() < accept) {
            x = proposal;
            break;
          }
        }
      }
    } else {
      x = chain.step(x, rng);
    }
    trace.states.push_back(x);
  }
  return trace;
}

std::vector<double> block_sums(const RegenerationTrace& trace,
                               const std::function<double(double)>& f, double target_mean) {
  if (trace.regen.size() < 2)
    throw Error("block_sums: need at least two regenerations");
  std::vector<double> out;
  out.reserve(trace.regen.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.regen.size(); ++i) {
    const long hi = std::min<long>(trace.regen[i + 1], static_cast<long>(trace.states.size()));
    double sum = 0.0;
    for (long k = trace.regen[i]; k < hi; ++k) sum += f(trace.states[k]) - target_mean;
    out.push_back(sum);
  }
  return out;
}

RegenTail regen_tail(const RegenerationTrace& trace) {
  if (trace.regen.size() < 1001)
    throw Error("regen_tail: need at least 1000 inter-regeneration samples");

  std::vector<long> gaps;
  gaps.reserve(trace.regen.size() - 1);
  for (std::size_t i = 0; i + 1 < trace.regen.size(); ++i)
    gaps.push_back(trace.regen[i + 1] - trace.regen[i]);

  RegenTail out;
  out.samples = static_cast<long>(gaps.size());

  const double base = 5.0 / trace.epsilon;
  for (double mult : {1.0, 2.0, 4.0, 8.0}) out.k_grid.push_back(base * mult);
  for (double k : out.k_grid) {
    double sum = 0.0;
    for (long gap : gaps) sum += std::exp(static_cast<double>(gap) / k);
    out.exp_moment.push_back(sum / gaps.size());
  }

  // Least-squares slope of log P(gap > t) against t, over t with >= 5 hits.
  const long max_gap = *std::max_element(gaps.begin(), gaps.end());
  std::vector<double> xs, ys;
  for (long t = 0; t < max_gap; ++t) {
    long count = 0;
    for (long gap : gaps) count += gap > t;
    if (count < 5) break;
    xs.push_back(static_cast<double>(t));
    ys.push_back(std::log(static_cast<double>(count) / gaps.size()));
  }
  if (xs.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double n = static_cast<double>(xs.size());
    out.geometric_slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return out;
}

TailTable empirical_tail(const std::function<std::vector<double>(long, RngStream&)>& sampler,
                         const std::function<double(const double*, int)>& window_f, int s,
                         long n, const std::vector<double>& t_grid, long replicates,
                         double target_mean, RngStream base, int parallelism) {
  if (n < 1 || replicates < 1) throw Error("empirical_tail: bad sizes");

  std::vector<std::atomic<long>> exceed(t_grid.size());
  for (auto& e : exceed) e.store(0);

  auto run_chunk = [&](long first, long last) {
    for (long rep = first; rep < last; ++rep) {
      RngStream rng = base.child(static_cast<std::uint64_t>(rep));
      const std::vector<double> path = sampler(n + s + 1, rng);
      double sum = 0.0;
      for (long i = 1; i <= n; ++i) sum += window_f(path.data() + i, s + 1) - target_mean;
      const double mag = std::abs(sum);
      for (std::size_t j = 0; j < t_grid.size(); ++j)
        if (mag >= t_grid[j]) exceed[j].fetch_add(1, std::memory_order_relaxed);
    }
  };

  const int workers = std::max(1, parallelism);
  if (workers == 1) {
    run_chunk(0, replicates);
  } else {
    std::vector<std::thread> pool;
    const long chunk = (replicates + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      const long first = w * chunk;
      const long last = std::min<long>(replicates, first + chunk);
      if (first < last) pool.emplace_back(run_chunk, first, last);
    }
    for (auto& t : pool) t.join();
  }

  TailTable table;
  table.n = n;
  table.t_grid = t_grid;
  table.tail.resize(t_grid.size());
  table.upper_bound.assign(t_grid.size(), 0);
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const long count = exceed[j].load();
    if (count == 0) {
      // Rule of three keeps the downstream log-probability fit finite.
      table.tail[j] = 3.0 / static_cast<double>(replicates);
      table.upper_bound[j] = 1;
    } else {
      table.tail[j] = static_cast<double>(count) / static_cast<double>(replicates);
    }
  }

  // Fit K by least squares on log tail = log K - (t^2/n ^ t) / K, golden
  // section over log K.
  auto objective = [&](double log_k) {
    const double k = std::exp(log_k);
    double sse = 0.0;
    for (std::size_t j = 0; j < t_grid.size(); ++j) {
      if (table.upper_bound[j]) continue;
      const double shape = std::min(t_grid[j] * t_grid[j] / n, t_grid[j]);
      const double resid = std::log(table.tail[j]) - (std::log(k) - shape / k);
      sse += resid * resid;
    }
    return sse;
  };
  double lo = std::log(1e-3), hi = std::log(1e6);
  const double golden = 0.61803398874989484820;
  double x1 = hi - golden * (hi - lo), x2 = lo + golden * (hi - lo);
  double f1 = objective(x1), f2 = objective(x2);
  while (hi - lo > 1e-10) {
    if (f1 > f2) {
      lo = x1; x1 = x2; f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = objective(x2);
    } else {
      hi = x2; x2 = x1; f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = objective(x1);
    }
  }
  table.k_hat = std::exp(0.5 * (lo + hi));
  return table;
}

}  // namespace hmmlab
