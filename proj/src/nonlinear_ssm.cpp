#include "hmmlab/nonlinear_ssm.hpp"

#include <algorithm>
#include <cmath>

namespace hmmlab {

namespace {

constexpr double kTwoPi = 6.2831853071795864769;
constexpr double kEuler = 2.7182818284590452354;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

}  // namespace

double ArchModel::log_q(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& x2) const {
  const Eigen::MatrixXd sigma = diffusion(theta, x);
  const Eigen::VectorXd z = sigma.fullPivLu().solve(x2 - drift(theta, x));
  const double det = std::abs(sigma.determinant());
  if (det <= 0.0) throw Error("arch log_q: singular diffusion matrix");
  return log_noise_density(z) - std::log(det);
}

ArchPath simulate(const ArchModel& model, const Eigen::VectorXd& theta,
                  const InitialMeasure& init, int n, RngStream& rng) {
  if (n < 0) throw Error("simulate: n must be non-negative");
  const int d = model.state_dim;

  Eigen::VectorXd x(d);
  switch (init.kind) {
    case InitialMeasure::Kind::point_mass:
      if (init.point.size() != d) throw Error("simulate: point-mass dimension mismatch");
      x = init.point;
      break;
    case InitialMeasure::Kind::stationary: {
      // No closed-form stationary sampler for a general ARCH recursion; run a
      // burn-in from the origin instead. burn_in = 0 is a request for the
      // exact sampler, which does not exist here.
      if (init.burn_in <= 0)
        throw UnsupportedError("simulate: stationary init needs burn-in for nonlinear models");
      x = Eigen::VectorXd::Zero(d);
      for (int k = 0; k < init.burn_in; ++k)
        x = model.drift(theta, x) + model.diffusion(theta, x) * model.sample_noise(d, rng);
      break;
    }
    case InitialMeasure::Kind::gaussian: {
      Eigen::LLT<Eigen::MatrixXd> llt(init.cov);
      if (llt.info() != Eigen::Success) throw Error("simulate: init covariance not PD");
      x = init.mean + llt.matrixL() * rng.normal_vector(d);
      break;
    }
    default:
      throw Error("simulate: unsupported init kind for nonlinear model");
  }

  ArchPath path;
  path.states.resize(n + 1, d);
  path.obs.resize(n + 1, model.obs_dim);
  for (int k = 0; k <= n; ++k) {
    path.states.row(k) = x.transpose();
    path.obs.row(k) = model.sample_obs(theta, x, rng).transpose();
    if (k < n) x = model.drift(theta, x) + model.diffusion(theta, x) * model.sample_noise(d, rng);
  }
  return path;
}

double sv_log_g(const Eigen::VectorXd& theta, double x, double y) {
  const double beta = theta[2];
  if (beta <= 0.0) throw Error("sv_log_g: beta must be positive");
  return -0.5 * std::log(kTwoPi * beta * beta) -
         std::exp(-x) * y * y / (2.0 * beta * beta) - 0.5 * x;
}

SvIdentities sv_identities(const Eigen::VectorXd& theta, double y) {
  (void)theta;
  if (y == 0.0) throw Error("sv_identities: undefined at y = 0");
  SvIdentities out;
  out.sup_g = 1.0 / (std::sqrt(kTwoPi * kEuler) * std::abs(y));
  out.int_g = 1.0 / std::abs(y);
  return out;
}

StochVolModel stoch_vol_model(double phi, double sigma, double beta) {
  if (std::abs(phi) >= 1.0 || sigma <= 0.0 || beta <= 0.0)
    throw Error("stoch_vol_model: need |phi| < 1, sigma > 0, beta > 0");

  ArchModel m;
  m.state_dim = 1;
  m.obs_dim = 1;
  m.coef = [](const Eigen::VectorXd& th, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, th[0]);
  };
  m.shift = [](const Eigen::VectorXd&, const Eigen::VectorXd&) {
    return Eigen::VectorXd::Zero(1);
  };
  m.diffusion = [](const Eigen::VectorXd& th, const Eigen::VectorXd&) {
    return Eigen::MatrixXd::Constant(1, 1, th[1]);
  };
  m.log_noise_density = [](const Eigen::VectorXd& z) {
    return -kHalfLog2Pi - 0.5 * z.squaredNorm();
  };
  m.sample_noise = [](int d, RngStream& rng) { return rng.normal_vector(d); };
  m.log_noise_sup = -kHalfLog2Pi;
  m.log_obs_density = [](const Eigen::VectorXd& th, const Eigen::VectorXd& x,
                         const Eigen::VectorXd& y) { return sv_log_g(th, x[0], y[0]); };
  m.sample_obs = [](const Eigen::VectorXd& th, const Eigen::VectorXd& x, RngStream& rng) {
    return Eigen::VectorXd::Constant(1, th[2] * std::exp(0.5 * x[0]) * rng.normal());
  };
  m.sup_inv_det_diffusion = [](const Eigen::VectorXd& th) { return 1.0 / th[1]; };

  StochVolModel out{std::move(m), ParameterBox{}, Eigen::VectorXd(3)};
  out.theta_star << phi, sigma, beta;
  out.box.lower = Eigen::VectorXd(3);
  out.box.upper = Eigen::VectorXd(3);
  out.box.lower << -0.995, 0.05, 0.05;
  out.box.upper << 0.995, 4.0, 4.0;
  return out;
}

double quadrature_loglik(const ArchModel& model, const Eigen::VectorXd& theta,
                         const std::function<double(double)>& init_log_density,
                         const QuadratureGrid& grid,
                         const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (model.state_dim != 1)
    throw UnsupportedError("quadrature_loglik: scalar state spaces only");
  if (grid.nodes < 2 || !(grid.lo < grid.hi)) throw Error("quadrature_loglik: bad grid");
  if (y.rows() == 0) throw Error("quadrature_loglik: empty observation path");

  const int m = grid.nodes;
  const double dx = (grid.hi - grid.lo) / m;
  Eigen::VectorXd nodes(m);
  for (int i = 0; i < m; ++i) nodes[i] = grid.lo + (i + 0.5) * dx;

  // Transition weights T(i,j) = q(x_i, x_j) dx, precomputed once.
  Eigen::MatrixXd trans(m, m);
  Eigen::VectorXd xi(1), xj(1);
  for (int i = 0; i < m; ++i) {
    xi[0] = nodes[i];
    for (int j = 0; j < m; ++j) {
      xj[0] = nodes[j];
      trans(i, j) = std::exp(model.log_q(theta, xi, xj)) * dx;
    }
  }
  const Eigen::VectorXd row_mass = trans.rowwise().sum();

  constexpr double kLeakTol = 1e-6;
  constexpr double kActiveTol = 1e-12;

  Eigen::VectorXd alpha(m), next(m);
  double log_scale = 0.0;
  for (int i = 0; i < m; ++i) {
    xi[0] = nodes[i];
    const double lg = model.log_obs_density(theta, xi, y.row(0).transpose());
    alpha[i] = std::exp(init_log_density(nodes[i])) * dx * std::exp(lg);
  }
  double peak = alpha.maxCoeff();
  if (peak <= 0.0) return kNegInf;
  alpha /= peak;
  log_scale += std::log(peak);

  for (Eigen::Index k = 1; k < y.rows(); ++k) {
    for (int i = 0; i < m; ++i)
      if (alpha[i] > kActiveTol && 1.0 - row_mass[i] > kLeakTol)
        throw GridTooSmallError("quadrature_loglik: transition mass leaves the grid");
    next.noalias() = trans.transpose() * alpha;
    for (int j = 0; j < m; ++j) {
      xj[0] = nodes[j];
      next[j] *= std::exp(model.log_obs_density(theta, xj, y.row(k).transpose()));
    }
    peak = next.maxCoeff();
    if (peak <= 0.0) return kNegInf;
    alpha = next / peak;
    log_scale += std::log(peak);
  }
  return log_scale + std::log(alpha.sum());
}

double jsr_upper_bound(const std::vector<Eigen::MatrixXd>& matrices, int depth) {
  if (matrices.empty()) throw Error("jsr_upper_bound: empty matrix set");
  if (depth < 1) throw Error("jsr_upper_bound: depth must be >= 1");

  // Budget on the total number of products enumerated.
  double total = 0.0;
  double count = static_cast<double>(matrices.size());
  for (int m = 1; m <= depth; ++m) {
    total += count;
    count *= static_cast<double>(matrices.size());
    if (total > 1e6) throw Error("jsr_upper_bound: product budget exceeded");
  }

  auto norm2 = [](const Eigen::MatrixXd& a) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(a).singularValues()[0];
  };

  double bound = std::numeric_limits<double>::infinity();
  std::vector<Eigen::MatrixXd> products{
      Eigen::MatrixXd::Identity(matrices[0].rows(), matrices[0].cols())};
  for (int m = 1; m <= depth; ++m) {
    std::vector<Eigen::MatrixXd> extended;
    extended.reserve(products.size() * matrices.size());
    double level_max = 0.0;
    for (const auto& prod : products)
      for (const auto& mat : matrices) {
        extended.push_back(prod * mat);
        level_max = std::max(level_max, norm2(extended.back()));
      }
    bound = std::min(bound, std::pow(level_max, 1.0 / m));
    products = std::move(extended);
  }
  return bound;
}

namespace {

CheckItem mc_proxy(const std::string& name, double mean, double mean_half,
                   const std::string& what) {
  CheckItem item{name, CheckStatus::pass, mean, what};
  if (!std::isfinite(mean)) {
    item.status = CheckStatus::fail;
    item.detail = "estimate diverged";
  } else if (std::abs(mean - mean_half) > 0.01 * std::max(std::abs(mean), 1e-12)) {
    item.status = CheckStatus::indeterminate;
    item.detail = what + " (running mean not stabilized)";
  }
  return item;
}

}  // namespace

AssumptionReport check_assumptions_NL(const ArchModel& model, const ParameterBox& box,
                                      const Eigen::VectorXd& theta, RngStream& rng,
                                      const NlCheckConfig& cfg) {
  AssumptionReport report;
  const int d = model.state_dim;

  // NL1: noise density positive with finite sup, sampled over a wide grid.
  {
    double sup = kNegInf;
    bool positive = true;
    Eigen::VectorXd z(d);
    for (int i = 0; i < 4096; ++i) {
      for (int c = 0; c < d; ++c) z[c] = rng.uniform(-8.0, 8.0);
      const double lr = model.log_noise_density(z);
      if (!(lr > kNegInf)) positive = false;
      sup = std::max(sup, lr);
    }
    const bool ok = positive && sup <= model.log_noise_sup + 1e-9;
    report.items.push_back({"NL1-noise", ok ? CheckStatus::pass : CheckStatus::fail,
                            std::exp(sup), "noise density positive, sup within declared bound"});
  }

  // Far-field sampling region: radius quantile of a long simulated path.
  ArchPath path = simulate(model, theta, InitialMeasure::Stationary(1000),
                           cfg.path_length, rng);
  std::vector<double> radii(path.states.rows());
  for (Eigen::Index k = 0; k < path.states.rows(); ++k) radii[k] = path.states.row(k).norm();
  std::sort(radii.begin(), radii.end());
  const double far_radius =
      radii[static_cast<std::size_t>(cfg.quantile * (radii.size() - 1))];

  // NL2: eigenvalue floor of Sigma Sigma^T over sampled states. The probe set
  // mixes a deterministic symmetric grid (which contains the origin) with
  // random draws.
  {
    double floor = std::numeric_limits<double>::infinity();
    const double radius = 2.0 * far_radius + 1.0;
    Eigen::VectorXd x(d);
    auto probe = [&](const Eigen::VectorXd& point) {
      const Eigen::MatrixXd ss =
          model.diffusion(theta, point) * model.diffusion(theta, point).transpose();
      floor = std::min(floor,
                       Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(ss).eigenvalues().minCoeff());
    };
    for (int i = 0; i < 33; ++i) probe(Eigen::VectorXd::Constant(d, -radius + 2.0 * radius * i / 32));
    for (int i = 0; i < cfg.sampled_states; ++i) {
      for (int c = 0; c < d; ++c) x[c] = rng.uniform(-radius, radius);
      probe(x);
    }
    report.items.push_back({"NL2-diffusion-floor",
                            floor > 0.0 ? CheckStatus::pass : CheckStatus::fail, floor,
                            "min eigenvalue of Sigma Sigma^T over sampled states"});
  }

  // NL3: joint-spectral-radius bound of A_theta(x) sampled in the far field.
  {
    std::vector<Eigen::MatrixXd> sampled;
    Eigen::VectorXd x(d);
    for (int i = 0; i < 32; ++i) {
      Eigen::VectorXd dir = rng.normal_vector(d);
      dir.normalize();
      x = dir * rng.uniform(far_radius, 3.0 * far_radius + 1.0);
      sampled.push_back(model.coef(theta, x));
    }
    // Deduplicate constant-coefficient families to keep the product budget small.
    std::vector<Eigen::MatrixXd> distinct;
    for (const auto& a : sampled) {
      bool seen = false;
      for (const auto& b : distinct)
        if ((a - b).cwiseAbs().maxCoeff() < 1e-12) { seen = true; break; }
      if (!seen) distinct.push_back(a);
      if (distinct.size() >= 8) break;
    }
    const double bound = jsr_upper_bound(distinct, cfg.jsr_depth);
    report.items.push_back({"NL3-joint-spectral-radius",
                            bound < 1.0 ? CheckStatus::pass : CheckStatus::fail, bound,
                            "sampled-evidence bound, not a proof over all |x| >= R"});
  }

  // NL4: Monte-Carlo integrability proxies under the simulated stationary law.
  {
    const Eigen::Index half = path.obs.rows() / 2;
    double sum = 0.0, sum_half = 0.0;
    for (Eigen::Index k = 0; k < path.obs.rows(); ++k) {
      const double lg =
          model.log_obs_density(theta, path.states.row(k).transpose(), path.obs.row(k).transpose());
      sum += std::abs(lg);
      if (k + 1 == half) sum_half = sum / half;
    }
    report.items.push_back(mc_proxy("NL4-log-g-integrable", sum / path.obs.rows(), sum_half,
                                    "E|log g| proxy under the stationary law"));
  }

  // NL5: finite-difference continuity probes in theta.
  {
    double worst_ratio = 0.0;
    Eigen::VectorXd x = Eigen::VectorXd::Zero(d), yy = Eigen::VectorXd::Constant(model.obs_dim, 0.7);
    for (Eigen::Index c = 0; c < theta.size(); ++c) {
      Eigen::VectorXd t1 = theta, t2 = theta;
      const double span = box.upper[c] - box.lower[c];
      t1[c] = std::min(theta[c] + 1e-3 * span, box.upper[c]);
      t2[c] = std::min(theta[c] + 1e-6 * span, box.upper[c]);
      auto gap = [&](const Eigen::VectorXd& t) {
        return std::abs(model.log_obs_density(t, x, yy) - model.log_obs_density(theta, x, yy)) +
               (model.drift(t, x) - model.drift(theta, x)).norm() +
               (model.diffusion(t, x) - model.diffusion(theta, x)).norm();
      };
      const double d1 = gap(t1), d2 = gap(t2);
      if (d1 > 0.0) worst_ratio = std::max(worst_ratio, d2 / d1);
    }
    report.items.push_back({"NL5-continuity",
                            worst_ratio < 0.1 ? CheckStatus::pass : CheckStatus::fail, worst_ratio,
                            "finite-difference continuity probe"});
  }

  return report;
}

}  // namespace hmmlab
