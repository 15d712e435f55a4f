#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "hmmlab/ergodicity.hpp"
#include "oracles.hpp"

using namespace hmmlab;

namespace {

Eigen::MatrixXd two_state() {
  Eigen::MatrixXd q(2, 2);
  q << 0.9, 0.1, 0.2, 0.8;
  return q;
}

std::vector<double> plain_occupancy(const FiniteChain& chain, long steps, RngStream& rng) {
  std::vector<double> counts(chain.num_states(), 0.0);
  int x = 0;
  for (long k = 0; k <= steps; ++k) {
    counts[x] += 1.0;
    if (k < steps) x = chain.step(x, rng);
  }
  for (auto& c : counts) c /= static_cast<double>(steps + 1);
  return counts;
}

}  // namespace

TEST_CASE("exact minorization certificates") {
  SUBCASE("rank-one matrix: epsilon = 1 and nu = the common row") {
    Eigen::MatrixXd q(2, 2);
    q << 0.3, 0.7, 0.3, 0.7;
    const MinorizationCert cert = exact_minorization(q, 1);
    CHECK(cert.epsilon == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cert.nu_weights[0] == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(cert.nu_weights[1] == doctest::Approx(0.7).epsilon(1e-14));
  }

  SUBCASE("periodic alternating matrix has no overlap at m = 1 or m = 2") {
    Eigen::MatrixXd q(2, 2);
    q << 0.0, 1.0, 1.0, 0.0;
    CHECK_THROWS_AS(exact_minorization(q, 1), NoMinorizationError);
    // Q^2 = I: point masses at different states still do not overlap.
    CHECK_THROWS_AS(exact_minorization(q, 2), NoMinorizationError);
  }

  SUBCASE("generic two-state chain: columnwise minima") {
    const MinorizationCert cert = exact_minorization(two_state(), 1);
    CHECK(cert.epsilon == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(cert.nu_weights[0] == doctest::Approx(0.2 / 0.3).epsilon(1e-12));
    CHECK(cert.nu_weights[1] == doctest::Approx(0.1 / 0.3).epsilon(1e-12));
    CHECK(verify_minorization(two_state(), cert));
  }
}

TEST_CASE("drift certificate verification on a finite chain") {
  const Eigen::MatrixXd q = two_state();
  MinorizationCert cert = exact_minorization(q, 1);
  DriftCert drift;
  drift.v_finite = Eigen::VectorXd::Ones(2);
  drift.rate = 0.5;
  drift.b = 0.5;
  CHECK(verify_drift(q, drift, cert).status == CheckStatus::pass);

  drift.b = 0.1;  // QV = 1 > 0.5 V + 0.1
  CHECK(verify_drift(q, drift, cert).status == CheckStatus::fail);
}

TEST_CASE("full minorization makes every step a regeneration") {
  Eigen::MatrixXd q(2, 2);
  q << 0.3, 0.7, 0.3, 0.7;
  const MinorizationCert cert = exact_minorization(q, 1);
  RngStream rng(501, 0);
  const RegenerationTrace trace = split_simulate(FiniteChain{q}, 0, cert, 5000, rng);
  REQUIRE(trace.regen.size() > 4000);
  for (std::size_t i = 0; i + 1 < trace.regen.size(); ++i)
    CHECK(trace.regen[i + 1] - trace.regen[i] == 1);

  // After the first step, states are i.i.d. nu draws.
  double frac0 = 0.0;
  for (std::size_t k = 1; k < trace.states.size(); ++k) frac0 += trace.states[k] == 0.0;
  frac0 /= (trace.states.size() - 1);
  CHECK(frac0 == doctest::Approx(0.3).epsilon(0.1));
}

TEST_CASE("split-chain marginal matches the plain chain (m = 1)") {
  const FiniteChain chain{two_state()};
  const MinorizationCert cert = exact_minorization(chain.trans, 1);
  const long steps = 1000000;

  RngStream split_rng(502, 0), plain_rng(503, 0);
  const RegenerationTrace trace = split_simulate(chain, 0, cert, steps, split_rng);
  std::vector<double> split_occ(2, 0.0);
  for (double s : trace.states) split_occ[static_cast<int>(s)] += 1.0;
  for (auto& c : split_occ) c /= trace.states.size();
  const std::vector<double> plain_occ = plain_occupancy(chain, steps, plain_rng);

  double tv = 0.0;
  for (int i = 0; i < 2; ++i) tv += 0.5 * std::abs(split_occ[i] - plain_occ[i]);
  CHECK(tv < 0.005);
}

TEST_CASE("split-chain marginal matches the plain chain (m = 2, exact bridge)") {
  const FiniteChain chain{two_state()};
  const MinorizationCert cert = exact_minorization(chain.trans, 2);
  CHECK(cert.epsilon > 0.3);
  const long steps = 400000;

  RngStream split_rng(504, 0), plain_rng(505, 0);
  const RegenerationTrace trace = split_simulate(chain, 0, cert, steps, split_rng);
  std::vector<double> split_occ(2, 0.0);
  for (double s : trace.states) split_occ[static_cast<int>(s)] += 1.0;
  for (auto& c : split_occ) c /= trace.states.size();
  const std::vector<double> plain_occ = plain_occupancy(chain, steps, plain_rng);

  double tv = 0.0;
  for (int i = 0; i < 2; ++i) tv += 0.5 * std::abs(split_occ[i] - plain_occ[i]);
  CHECK(tv < 0.005);

  // Regeneration spacing respects the m-step gap.
  for (std::size_t i = 0; i + 1 < trace.sigma.size(); ++i)
    CHECK(trace.sigma[i + 1] - trace.sigma[i] >= 2);
}

TEST_CASE("bells are independent of the pre-bell state") {
  const FiniteChain chain{two_state()};
  const MinorizationCert cert = exact_minorization(chain.trans, 1);
  RngStream rng(506, 0);
  const RegenerationTrace trace = split_simulate(chain, 0, cert, 200000, rng);

  std::vector<double> bells, states;
  for (std::size_t i = 0; i < trace.sigma.size(); ++i) {
    bells.push_back(trace.bells[i]);
    states.push_back(trace.states[trace.sigma[i]]);
  }
  const double corr = oracles::sample_correlation(bells, states);
  CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(bells.size())));

  // Bell frequency matches epsilon.
  double freq = 0.0;
  for (double b : bells) freq += b;
  freq /= bells.size();
  CHECK(freq == doctest::Approx(cert.epsilon).epsilon(0.05));
}

TEST_CASE("block sums: centered, one-dependent, identically distributed") {
  const FiniteChain chain{two_state()};
  const MinorizationCert cert = exact_minorization(chain.trans, 1);
  const Eigen::VectorXd pi = chain.stationary();
  RngStream rng(507, 0);
  const RegenerationTrace trace = split_simulate(chain, 0, cert, 300000, rng);
  auto f = [](double x) { return x == 0.0 ? 1.0 : 0.0; };

  SUBCASE("constant f with matching target gives identically zero blocks") {
    const auto zeros = block_sums(trace, [](double) { return 2.5; }, 2.5);
    for (double z : zeros) CHECK(z == doctest::Approx(0.0).epsilon(1e-12));
  }

  const std::vector<double> xs = block_sums(trace, f, pi[0]);
  REQUIRE(xs.size() > 10000);

  SUBCASE("mean zero within three standard errors") {
    const auto ms = oracles::mean_se(xs);
    CHECK(std::abs(ms.mean) < 3.0 * ms.se);
  }

  SUBCASE("lag-2 autocorrelation vanishes (one-dependence)") {
    std::vector<double> head(xs.begin(), xs.end() - 2);
    std::vector<double> lag2(xs.begin() + 2, xs.end());
    const double corr = oracles::sample_correlation(head, lag2);
    CHECK(std::abs(corr) < 3.0 / std::sqrt(static_cast<double>(head.size())));
  }

  SUBCASE("first and second halves share a distribution (KS at 1%)") {
    std::vector<double> first(xs.begin(), xs.begin() + xs.size() / 2);
    std::vector<double> second(xs.begin() + xs.size() / 2, xs.end());
    const double d = oracles::ks_statistic(first, second);
    CHECK(d < oracles::ks_critical_1pct(first.size(), second.size()));
  }

  SUBCASE("too few regenerations signal an error") {
    RegenerationTrace tiny;
    tiny.states = {0.0, 1.0};
    tiny.regen = {1};
    CHECK_THROWS_AS(block_sums(tiny, f, 0.0), Error);
  }
}

TEST_CASE("regeneration gap tails") {
  const FiniteChain chain{two_state()};
  const MinorizationCert cert = exact_minorization(chain.trans, 1);
  RngStream rng(508, 0);
  const RegenerationTrace trace = split_simulate(chain, 0, cert, 300000, rng);
  const RegenTail tail = regen_tail(trace);
  REQUIRE(tail.samples > 1000);

  // Full-space m = 1 splitting is Bernoulli(eps) thinning: geometric gaps.
  CHECK(tail.geometric_slope == doctest::Approx(std::log(1.0 - cert.epsilon)).epsilon(0.1));

  // Exponential moments exist and are stable for K >= 5 / eps.
  for (double moment : tail.exp_moment) {
    CHECK(std::isfinite(moment));
    CHECK(moment < 10.0);
  }
  CHECK(tail.exp_moment.front() >= tail.exp_moment.back());

  RegenerationTrace small;
  small.regen = {0, 1, 2};
  small.epsilon = 0.5;
  CHECK_THROWS_AS(regen_tail(small), Error);
}

TEST_CASE("continuous-state splitting by rejection (m = 1)") {
  // AR(1) chain X' = a X + N(0,1) with small set C = [-1, 1] and the exact
  // minorizing density nu(y) proportional to the normal density at |y| + a.
  const double a = 0.5;
  ContinuousChain chain;
  chain.step = [a](double x, RngStream& rng) { return a * x + rng.normal(); };
  chain.log_density = [a](double x, double y) {
    const double z = y - a * x;
    return -0.91893853320467274178 - 0.5 * z * z;
  };

  // eps = 2 Phi(-a); nu log-density = log phi(|y| + a) - log eps.
  const double eps = 2.0 * 0.5 * std::erfc(a / std::sqrt(2.0));
  MinorizationCert cert;
  cert.m = 1;
  cert.epsilon = eps;
  cert.small_set = [](double x) { return std::abs(x) <= 1.0; };
  cert.nu_log_density = [eps](double y) {
    const double z = std::abs(y) + 0.5;
    return -0.91893853320467274178 - 0.5 * z * z - std::log(eps);
  };
  cert.nu_sample = [eps, &cert](RngStream& rng) {
    // Rejection from the standard normal against the folded-shifted density.
    for (int i = 0; i < 100000; ++i) {
      const double y = rng.normal();
      const double log_target = cert.nu_log_density(y);
      const double log_prop = -0.91893853320467274178 - 0.5 * y * y;
      // target / (M prop) with M = 2 exp(a^2/2) / eps is a valid envelope.
      const double log_m = std::log(2.0) + 0.125 - std::log(eps);
      if (std::log(rng.uniform() + 1e-300) < log_target - log_prop - log_m) return y;
    }
    throw Error("nu_sample: envelope rejection failed");
  };

  RngStream split_rng(509, 0), plain_rng(510, 0);
  const RegenerationTrace trace = split_simulate(chain, 0.0, cert, 100000, split_rng);
  CHECK(trace.regen.size() > 1000);

  std::vector<double> plain(100001);
  double x = 0.0;
  for (std::size_t k = 0; k < plain.size(); ++k) {
    plain[k] = x;
    x = chain.step(x, plain_rng);
  }
  // Thinned samples to soften serial dependence before the KS comparison.
  std::vector<double> split_thin, plain_thin;
  for (std::size_t k = 0; k < trace.states.size(); k += 20) split_thin.push_back(trace.states[k]);
  for (std::size_t k = 0; k < plain.size(); k += 20) plain_thin.push_back(plain[k]);
  CHECK(oracles::ks_statistic(split_thin, plain_thin) <
        oracles::ks_critical_1pct(split_thin.size(), plain_thin.size()));

  SUBCASE("m >= 2 is reported unsupported on continuous spaces") {
    MinorizationCert cert2 = cert;
    cert2.m = 2;
    RngStream rng(511, 0);
    CHECK_THROWS_AS(split_simulate(chain, 0.0, cert2, 100, rng), UnsupportedError);
  }

  SUBCASE("an inflated epsilon violates minorization and is caught") {
    MinorizationCert bad = cert;
    bad.epsilon = 0.999;
    RngStream rng(512, 0);
    CHECK_THROWS_AS(split_simulate(chain, 0.0, bad, 2000, rng), Error);
  }
}

TEST_CASE("sampled drift verification on a continuous chain") {
  // AR(1) with a = 0.5 and unit noise: QV(x) = 2 + 0.25 x^2 for V = 1 + x^2,
  // so rate 0.5 with C = [-3, 3] and b = 2 is a valid certificate.
  ContinuousChain chain;
  chain.step = [](double x, RngStream& rng) { return 0.5 * x + rng.normal(); };
  chain.log_density = [](double x, double y) {
    const double z = y - 0.5 * x;
    return -0.91893853320467274178 - 0.5 * z * z;
  };
  MinorizationCert cert;
  cert.small_set = [](double x) { return std::abs(x) <= 3.0; };

  DriftCert good;
  good.v = [](double x) { return 1.0 + x * x; };
  good.rate = 0.5;
  good.b = 2.0;
  RngStream rng(515, 0);
  CHECK(verify_drift_sampled(chain, good, cert, rng).status == CheckStatus::pass);

  DriftCert bad = good;
  bad.rate = 0.1;
  bad.b = 0.1;
  RngStream rng2(516, 0);
  CHECK(verify_drift_sampled(chain, bad, cert, rng2).status == CheckStatus::fail);
}

TEST_CASE("empirical tails: i.i.d. reduction obeys the Hoeffding bound") {
  // Rank-one transition matrix: the chain is i.i.d. Bernoulli-like.
  Eigen::MatrixXd q(2, 2);
  q << 0.5, 0.5, 0.5, 0.5;
  const FiniteChain chain{q};
  auto sampler = [&chain](long len, RngStream& rng) {
    std::vector<double> out(len);
    int x = rng.bernoulli(0.5);
    for (long k = 0; k < len; ++k) {
      out[k] = x;
      x = chain.step(x, rng);
    }
    return out;
  };
  auto f = [](const double* w, int) { return w[0]; };

  const long n = 400;
  const std::vector<double> t_grid{5, 10, 15, 20, 25, 30, 35, 40};
  const long reps = 40000;
  const TailTable table =
      empirical_tail(sampler, f, 0, n, t_grid, reps, 0.5, RngStream(513, 0), 1);

  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double hoeffding = 2.0 * std::exp(-2.0 * t_grid[j] * t_grid[j] / n);
    const double se = std::sqrt(table.tail[j] * (1.0 - table.tail[j]) / reps);
    CHECK(table.tail[j] <= std::min(1.0, hoeffding) + 3.0 * se + 3.0 / reps);
  }

  SUBCASE("tails are non-increasing in t") {
    for (std::size_t j = 0; j + 1 < t_grid.size(); ++j) {
      if (table.upper_bound[j] || table.upper_bound[j + 1]) continue;
      CHECK(table.tail[j] >= table.tail[j + 1]);
    }
  }

  SUBCASE("gaussian-regime scaling: doubling t quadruples the log-tail") {
    // P(|S| >= t) ~ 2 exp(-t^2 / 2 sigma^2) with sigma^2 = n/4 here.
    const double logp1 = std::log(table.tail[1]);  // t = 10
    const double logt2 = std::log(table.tail[3]);  // t = 20
    CHECK(logt2 / logp1 == doctest::Approx(4.0).epsilon(0.25));
  }
}

TEST_CASE("empirical tails on the dependent two-state chain with fitted constant") {
  const FiniteChain chain{two_state()};
  const Eigen::VectorXd pi = chain.stationary();
  auto sampler = [&chain, pi](long len, RngStream& rng) {
    std::vector<double> out(len);
    int x = rng.categorical(pi);
    for (long k = 0; k < len; ++k) {
      out[k] = x;
      x = chain.step(x, rng);
    }
    return out;
  };
  auto f = [](const double* w, int) { return w[0] == 0.0 ? 1.0 : 0.0; };

  const long n = 1000;
  std::vector<double> t_grid;
  for (int i = 1; i <= 10; ++i) t_grid.push_back(10.0 * i);
  const TailTable table =
      empirical_tail(sampler, f, 0, n, t_grid, 20000, pi[0], RngStream(514, 0), 1);

  CHECK(std::isfinite(table.k_hat));
  CHECK(table.k_hat > 0.0);

  // The doubled fitted constant dominates every observed tail point.
  const double k2 = 2.0 * table.k_hat;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    const double shape = std::min(t_grid[j] * t_grid[j] / n, t_grid[j]);
    CHECK(k2 * std::exp(-shape / k2) >= table.tail[j]);
  }
}
