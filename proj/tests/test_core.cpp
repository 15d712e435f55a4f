#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hmmlab/model.hpp"
#include "oracles.hpp"

using namespace hmmlab;

TEST_CASE("rng streams are deterministic and distinct") {
  RngStream a(123, 4), b(123, 4), c(123, 5);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
  int collisions = 0;
  RngStream a2(123, 4);
  for (int i = 0; i < 1000; ++i) collisions += a2.next_u64() == c.next_u64();
  CHECK(collisions == 0);
}

TEST_CASE("rng uniform and normal moments") {
  RngStream rng(1, 0);
  double sum = 0.0, sumsq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
    sumsq += u * u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sumsq / n == doctest::Approx(1.0 / 3.0).epsilon(0.01));

  double zsum = 0.0, zsumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    zsum += z;
    zsumsq += z * z;
  }
  CHECK(std::abs(zsum / n) < 0.01);
  CHECK(zsumsq / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("parameter box validation and orbits") {
  ParameterBox box;
  box.lower = Eigen::VectorXd::Constant(2, 0.0);
  box.upper = Eigen::VectorXd::Constant(2, 1.0);
  box.validate();

  box.upper[1] = 0.0;
  CHECK_THROWS_AS(box.validate(), Error);
  box.upper[1] = 1.0;

  Eigen::VectorXd theta(2);
  theta << 0.25, 0.75;
  CHECK(box.orbit(theta).size() == 1);

  box.equivalence = Equivalence::label_permutation;
  box.permutations = {{1, 0}};
  const auto orbit = box.orbit(theta);
  REQUIRE(orbit.size() == 2);
  CHECK(orbit[1][0] == 0.75);
  CHECK(orbit[1][1] == 0.25);

  box.equivalence = Equivalence::custom_finite_orbit;
  box.custom_orbit = [](const Eigen::VectorXd& t) {
    return std::vector<Eigen::VectorXd>{Eigen::VectorXd::Constant(2, t[0])};
  };
  CHECK(box.orbit(theta).size() == 2);
}

TEST_CASE("simulate is bit-identical for equal seeds and streams") {
  const ModelSpec spec = make_two_state_gaussian_spec(0.7, 0.0, 2.0, 1.0, -4.0, 4.0);
  RngStream r1(99, 3), r2(99, 3);
  const Simulation a = simulate(spec, spec.true_theta, InitialMeasure::Stationary(), 500, r1);
  const Simulation b = simulate(spec, spec.true_theta, InitialMeasure::Stationary(), 500, r2);
  CHECK((a.states - b.states).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.obs - b.obs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("simulate: degenerate horizon n = 0 returns single-point paths") {
  const ModelSpec spec = make_remark13_spec();
  RngStream rng(5, 0);
  const Simulation sim = simulate(spec, spec.true_theta, InitialMeasure::PointMass(1), 0, rng);
  CHECK(sim.states.rows() == 1);
  CHECK(sim.obs.rows() == 1);
  CHECK(sim.states(0, 0) == 1.0);
}

TEST_CASE("remark13 transition forces deterministic alternation") {
  const ModelSpec spec = make_remark13_spec();
  RngStream rng(7, 0);
  const Simulation sim = simulate(spec, spec.true_theta, InitialMeasure::PointMass(0), 9, rng);
  for (int k = 0; k <= 9; ++k) CHECK(sim.states(k, 0) == (k % 2 == 0 ? 0.0 : 1.0));
}

TEST_CASE("scalar linear-gaussian stationary variance matches 1/(1 - A^2)") {
  const ModelSpec spec = make_scalar_lg_spec(0.5, 1.0, 1.0, 1.0, -0.95, 0.95);
  RngStream rng(11, 0);
  const Simulation sim =
      simulate(spec, spec.true_theta, InitialMeasure::Stationary(), 1000000, rng);
  const double var = sim.states.col(0).squaredNorm() / sim.states.rows();
  CHECK(var == doctest::Approx(4.0 / 3.0).epsilon(0.01));
}

TEST_CASE("log_g closed-form spot checks") {
  const ModelSpec r13 = make_remark13_spec();
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(1), y0 = Eigen::VectorXd::Zero(1);
  CHECK(log_g(r13, r13.true_theta, x0, y0) == doctest::Approx(std::log(0.7)).epsilon(1e-12));
  Eigen::VectorXd y1 = Eigen::VectorXd::Ones(1);
  CHECK(log_g(r13, r13.true_theta, x0, y1) == doctest::Approx(std::log(0.3)).epsilon(1e-12));

  // Stochastic volatility at x = 0, y = 0, beta = 1: density (2 pi)^{-1/2}.
  Eigen::VectorXd theta(3);
  theta << 0.9, 0.5, 1.0;
  const double value = sv_log_g(theta, 0.0, 0.0);
  CHECK(std::isfinite(value));
  CHECK(value == doctest::Approx(-0.5 * std::log(2.0 * 3.14159265358979323846)).epsilon(1e-12));
}

TEST_CASE("exp(log_g) integrates to one for every family") {
  RngStream rng(17, 0);

  SUBCASE("finite categorical: exact sum") {
    const FiniteHmm hmm = oracles::random_categorical_hmm(3, 4, rng);
    const Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
    for (int x = 0; x < 3; ++x) {
      long double sum = 0.0L;
      for (int ysym = 0; ysym < 4; ++ysym)
        sum += std::exp(static_cast<long double>(hmm.log_g(theta, x, ysym)));
      CHECK(std::abs(static_cast<double>(sum) - 1.0) < 1e-12);
    }
  }

  SUBCASE("finite gaussian emission: quadrature") {
    const ModelSpec spec = make_two_state_gaussian_spec(0.7, 0.0, 2.0, 1.0, -4.0, 4.0);
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd theta(2);
      theta << rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0);
      const int x = trial % 2;
      const int m = 40001;
      const double lo = theta[x] - 14.0, hi = theta[x] + 14.0;
      std::vector<double> logs(m);
      Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, x), yv(1);
      for (int i = 0; i < m; ++i) {
        yv[0] = lo + (hi - lo) * i / (m - 1);
        logs[i] = log_g(spec, theta, xv, yv);
      }
      const double integral = std::exp(oracles::log_trapezoid(logs, (hi - lo) / (m - 1)));
      CHECK(std::abs(integral - 1.0) < 1e-6);
    }
  }

  SUBCASE("scalar linear-gaussian and stochastic volatility: quadrature") {
    const ModelSpec lg = make_scalar_lg_spec(0.5, 1.0, 1.0, 1.0, -0.95, 0.95);
    const ModelSpec sv = make_stoch_vol_spec(0.9, 0.5, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const double xval = rng.uniform(-2.0, 2.0);
      Eigen::VectorXd xv = Eigen::VectorXd::Constant(1, xval), yv(1);
      const int m = 40001;
      {
        const double lo = xval - 14.0, hi = xval + 14.0;
        std::vector<double> logs(m);
        for (int i = 0; i < m; ++i) {
          yv[0] = lo + (hi - lo) * i / (m - 1);
          logs[i] = log_g(lg, lg.true_theta, xv, yv);
        }
        CHECK(std::abs(std::exp(oracles::log_trapezoid(logs, (hi - lo) / (m - 1))) - 1.0) < 1e-6);
      }
      {
        const double sd = 1.0 * std::exp(0.5 * xval);  // beta = 1 in true_theta? use model
        Eigen::VectorXd theta = sv.true_theta;
        const double obs_sd = theta[2] * std::exp(0.5 * xval);
        const double lo = -14.0 * obs_sd, hi = 14.0 * obs_sd;
        std::vector<double> logs(m);
        for (int i = 0; i < m; ++i) {
          yv[0] = lo + (hi - lo) * i / (m - 1);
          logs[i] = log_g(sv, theta, xv, yv);
        }
        (void)sd;
        CHECK(std::abs(std::exp(oracles::log_trapezoid(logs, (hi - lo) / (m - 1))) - 1.0) < 1e-6);
      }
    }
  }
}

TEST_CASE("log_q spot checks and sup bound") {
  RngStream rng(23, 0);
  const FiniteHmm hmm = oracles::random_categorical_hmm(3, 2, rng);
  const Eigen::VectorXd theta = Eigen::VectorXd::Zero(1);
  const Eigen::MatrixXd trans = hmm.trans(theta);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(hmm.log_q(theta, i, j) == doctest::Approx(std::log(trans(i, j))).epsilon(1e-12));

  // ARCH transition density formula against a hand-computed Gaussian, and the
  // declared sup bound over sampled pairs.
  const ModelSpec sv = make_stoch_vol_spec(0.9, 0.5, 1.0);
  const auto& arch = sv.arch();
  const double sup_log = arch.sup_log_q(sv.true_theta);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::VectorXd x = Eigen::VectorXd::Constant(1, rng.uniform(-3.0, 3.0));
    Eigen::VectorXd x2 = Eigen::VectorXd::Constant(1, rng.uniform(-3.0, 3.0));
    const double lq = arch.log_q(sv.true_theta, x, x2);
    const double z = (x2[0] - 0.9 * x[0]) / 0.5;
    const double manual = -0.5 * std::log(2.0 * 3.14159265358979323846) - 0.5 * z * z -
                          std::log(0.5);
    CHECK(lq == doctest::Approx(manual).epsilon(1e-10));
    CHECK(lq <= sup_log + 1e-12);
  }
}

TEST_CASE("markov property: transition law invariant over time (chi-square)") {
  RngStream rng(31, 0);
  const ModelSpec spec = make_two_state_gaussian_spec(0.65, 0.0, 2.0, 1.0, -4.0, 4.0);
  const int n = 100000;
  const Simulation sim = simulate(spec, spec.true_theta, InitialMeasure::Stationary(), n, rng);

  // Homogeneity of the per-state transition counts between the two halves.
  Eigen::Matrix2d first = Eigen::Matrix2d::Zero(), second = Eigen::Matrix2d::Zero();
  for (int k = 0; k + 1 <= n; ++k) {
    const int i = static_cast<int>(sim.states(k, 0));
    const int j = static_cast<int>(sim.states(k + 1, 0));
    (k < n / 2 ? first : second)(i, j) += 1.0;
  }
  double chi2 = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double total = first(i, j) + second(i, j);
      const double n1 = first.row(i).sum(), n2 = second.row(i).sum();
      const double e1 = total * n1 / (n1 + n2), e2 = total * n2 / (n1 + n2);
      chi2 += (first(i, j) - e1) * (first(i, j) - e1) / e1 +
              (second(i, j) - e2) * (second(i, j) - e2) / e2;
    }
  // 1% critical value of chi-square with 2 degrees of freedom.
  CHECK(chi2 < 9.21);
}

TEST_CASE("stationary init for nonlinear models requires burn-in") {
  const ModelSpec sv = make_stoch_vol_spec(0.9, 0.5, 1.0);
  RngStream rng(3, 0);
  CHECK_THROWS_AS(simulate(sv, sv.true_theta, InitialMeasure::Stationary(0), 10, rng),
                  UnsupportedError);
}
