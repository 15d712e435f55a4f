#include "hmmlab/gaussian_ssm.hpp"

#include <cmath>

namespace hmmlab {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kRankTol = 1e-8;  // relative singular-value threshold

double gaussian_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                       const Eigen::MatrixXd& cov) {
  const Eigen::Index n = x.size();
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success)
    throw Error("gaussian_logpdf: covariance not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) logdet += 2.0 * std::log(l(i, i));
  const Eigen::VectorXd z = llt.matrixL().solve(x - mean);
  return -0.5 * (n * kLog2Pi + logdet + z.squaredNorm());
}

int numerical_rank(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv[0] <= 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv[i] > kRankTol * sv[0]) ++rank;
  return rank;
}

double spectral_radius(const Eigen::MatrixXd& a) {
  return Eigen::EigenSolver<Eigen::MatrixXd>(a, false).eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

LgMatrices LinearGaussianModel::matrices(const Eigen::VectorXd& theta) const {
  LgMatrices m = matrices_(theta);
  if (m.A.rows() != d_ || m.A.cols() != d_ || m.R.rows() != d_ || m.R.cols() != q_ ||
      m.B.rows() != p_ || m.B.cols() != d_ || m.S.rows() != p_ || m.S.cols() != p_)
    throw Error("linear-gaussian model: inconsistent matrix dimensions");
  return m;
}

double LinearGaussianModel::log_g(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) const {
  if (y.size() != p_) throw Error("log_g: observation dimension mismatch");
  const LgMatrices m = matrices(theta);
  return gaussian_logpdf(y, m.B * x, m.S * m.S.transpose());
}

double LinearGaussianModel::log_q(const Eigen::VectorXd& theta, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& x2) const {
  const LgMatrices m = matrices(theta);
  // d-step transition: X_d | X_0 = x is Gaussian with mean A^d x and
  // covariance C_d C_d^T (the controllability Gramian).
  Eigen::MatrixXd ad = Eigen::MatrixXd::Identity(d_, d_);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(d_, d_);
  const Eigen::MatrixXd rr = m.R * m.R.transpose();
  for (int j = 0; j < d_; ++j) {
    gram += ad * rr * ad.transpose();
    ad = m.A * ad;
  }
  return gaussian_logpdf(x2, ad * x, gram);
}

double LinearGaussianModel::sup_log_g(const Eigen::VectorXd& theta) const {
  const LgMatrices m = matrices(theta);
  Eigen::LLT<Eigen::MatrixXd> llt(m.S * m.S.transpose());
  if (llt.info() != Eigen::Success) throw Error("sup_log_g: S S^T not positive definite");
  double logdet = 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < p_; ++i) logdet += 2.0 * std::log(l(i, i));
  return -0.5 * (p_ * kLog2Pi + logdet);
}

double LinearGaussianModel::sup_log_g_at(const Eigen::VectorXd& theta,
                                         const Eigen::VectorXd& y) const {
  const LgMatrices m = matrices(theta);
  Eigen::LLT<Eigen::MatrixXd> llt(m.S * m.S.transpose());
  if (llt.info() != Eigen::Success) throw Error("sup_log_g_at: S S^T not positive definite");
  // Whitened least squares: the best x drives y towards range(B); the residual
  // is the distance from y to that range in the (S S^T)^{-1} metric.
  const Eigen::MatrixXd wb = llt.matrixL().solve(m.B);
  const Eigen::VectorXd wy = llt.matrixL().solve(y);
  const Eigen::VectorXd xstar = wb.colPivHouseholderQr().solve(wy);
  const double resid = (wy - wb * xstar).squaredNorm();
  double logdet = 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < p_; ++i) logdet += 2.0 * std::log(l(i, i));
  return -0.5 * (p_ * kLog2Pi + logdet + resid);
}

double LinearGaussianModel::sup_log_q(const Eigen::VectorXd& theta) const {
  const StructuralMatrices sm = structural(*this, theta, d_);
  Eigen::LLT<Eigen::MatrixXd> llt(sm.ctrl * sm.ctrl.transpose());
  if (llt.info() != Eigen::Success)
    throw Error("sup_log_q: controllability Gramian not positive definite");
  double logdet = 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < d_; ++i) logdet += 2.0 * std::log(l(i, i));
  return -0.5 * (d_ * kLog2Pi + logdet);
}

Eigen::MatrixXd LinearGaussianModel::stationary_cov(const Eigen::VectorXd& theta) const {
  const LgMatrices m = matrices(theta);
  if (spectral_radius(m.A) >= 1.0)
    throw Error("stationary_cov: state matrix is not stable");
  // Doubling iteration for the discrete Lyapunov equation P = A P A^T + R R^T.
  Eigen::MatrixXd p = m.R * m.R.transpose();
  Eigen::MatrixXd a = m.A;
  for (int it = 0; it < 200; ++it) {
    const Eigen::MatrixXd next = p + a * p * a.transpose();
    const double delta = (next - p).cwiseAbs().maxCoeff();
    p = next;
    a = a * a;
    if (delta <= 1e-15 * std::max(1.0, p.cwiseAbs().maxCoeff())) break;
  }
  return 0.5 * (p + p.transpose());
}

LinearGaussianModel constant_lgm(const LgMatrices& m) {
  return LinearGaussianModel(static_cast<int>(m.A.rows()), static_cast<int>(m.R.cols()),
                             static_cast<int>(m.B.rows()),
                             [m](const Eigen::VectorXd&) { return m; });
}

LinearGaussianModel scalar_lgm(double r, double b, double s) {
  return LinearGaussianModel(1, 1, 1, [r, b, s](const Eigen::VectorXd& theta) {
    LgMatrices m;
    m.A = Eigen::MatrixXd::Constant(1, 1, theta[0]);
    m.R = Eigen::MatrixXd::Constant(1, 1, r);
    m.B = Eigen::MatrixXd::Constant(1, 1, b);
    m.S = Eigen::MatrixXd::Constant(1, 1, s);
    return m;
  });
}

LgPath simulate(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                const InitialMeasure& init, int n, RngStream& rng) {
  if (n < 0) throw Error("simulate: n must be non-negative");
  const LgMatrices m = model.matrices(theta);
  const int d = model.state_dim(), q = model.noise_dim(), p = model.obs_dim();

  Eigen::VectorXd x(d);
  switch (init.kind) {
    case InitialMeasure::Kind::point_mass:
      if (init.point.size() != d) throw Error("simulate: point-mass dimension mismatch");
      x = init.point;
      break;
    case InitialMeasure::Kind::stationary: {
      const Eigen::MatrixXd cov = model.stationary_cov(theta);
      x = Eigen::LLT<Eigen::MatrixXd>(cov).matrixL() * rng.normal_vector(d);
      break;
    }
    case InitialMeasure::Kind::gaussian: {
      Eigen::LLT<Eigen::MatrixXd> llt(init.cov);
      if (llt.info() != Eigen::Success) {
        // PSD but singular covariances are legal initial laws.
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(init.cov);
        if (es.eigenvalues().minCoeff() < -1e-12)
          throw Error("simulate: initial covariance not PSD");
        const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        x = init.mean + es.eigenvectors() * root.asDiagonal() * rng.normal_vector(d);
      } else {
        x = init.mean + llt.matrixL() * rng.normal_vector(d);
      }
      break;
    }
    default:
      throw Error("simulate: unsupported init kind for linear-gaussian model");
  }

  LgPath path;
  path.states.resize(n + 1, d);
  path.obs.resize(n + 1, p);
  for (int k = 0; k <= n; ++k) {
    path.states.row(k) = x.transpose();
    path.obs.row(k) = (m.B * x + m.S * rng.normal_vector(p)).transpose();
    if (k < n) x = m.A * x + m.R * rng.normal_vector(q);
  }
  return path;
}

StructuralMatrices structural(const LinearGaussianModel& model,
                              const Eigen::VectorXd& theta, int r) {
  if (r < 1) throw Error("structural: r must be >= 1");
  const LgMatrices m = model.matrices(theta);
  const int d = model.state_dim(), q = model.noise_dim(), p = model.obs_dim();

  StructuralMatrices sm;
  sm.obs.resize(r * p, d);
  sm.ctrl.resize(d, r * q);
  Eigen::MatrixXd ak = Eigen::MatrixXd::Identity(d, d);  // A^k
  for (int k = 0; k < r; ++k) {
    sm.obs.middleRows(k * p, p) = m.B * ak;
    sm.ctrl.middleCols(k * q, q) = ak * m.R;
    ak = m.A * ak;
  }

  sm.hankel = Eigen::MatrixXd::Zero(r * p, (r - 1) * q);
  for (int i = 1; i < r; ++i) {
    Eigen::MatrixXd aj = Eigen::MatrixXd::Identity(d, d);
    for (int j = i - 1; j >= 0; --j) {
      sm.hankel.block(i * p, j * q, p, q) = m.B * aj * m.R;
      aj = m.A * aj;
    }
  }

  sm.sdiag = Eigen::MatrixXd::Zero(r * p, r * p);
  for (int k = 0; k < r; ++k) sm.sdiag.block(k * p, k * p, p, p) = m.S;

  sm.gamma = sm.hankel * sm.hankel.transpose() + sm.sdiag * sm.sdiag.transpose();

  Eigen::LLT<Eigen::MatrixXd> llt(sm.gamma);
  if (llt.info() != Eigen::Success)
    throw Error("structural: Gamma not positive definite (is S full rank?)");
  const Eigen::MatrixXd gio = llt.solve(sm.obs);                // Gamma^{-1} O
  const Eigen::MatrixXd core = sm.obs.transpose() * gio;        // O^T Gamma^{-1} O
  Eigen::LLT<Eigen::MatrixXd> core_llt(core);
  if (core_llt.info() != Eigen::Success)
    sm.hmat = Eigen::MatrixXd();  // O rank-deficient: H undefined at this r
  else
    sm.hmat = llt.solve(Eigen::MatrixXd::Identity(r * p, r * p)) -
              gio * core_llt.solve(gio.transpose());
  return sm;
}

AssumptionReport check_assumptions_L(const LinearGaussianModel& model,
                                     const Eigen::VectorXd& theta) {
  AssumptionReport report;
  const int d = model.state_dim();
  const StructuralMatrices sm = structural(model, theta, d);
  const LgMatrices m = model.matrices(theta);

  const int obs_rank = numerical_rank(sm.obs);
  const int ctrl_rank = numerical_rank(sm.ctrl);
  report.items.push_back({"L1-observable", obs_rank == d ? CheckStatus::pass : CheckStatus::fail,
                          static_cast<double>(obs_rank), "rank of O_{theta,d}"});
  report.items.push_back({"L1-controllable", ctrl_rank == d ? CheckStatus::pass : CheckStatus::fail,
                          static_cast<double>(ctrl_rank), "rank of C_{theta,d}"});

  const double rho = spectral_radius(m.A);
  report.items.push_back({"L2-stable", rho < 1.0 ? CheckStatus::pass : CheckStatus::fail, rho,
                          "spectral radius of A"});

  const int s_rank = numerical_rank(m.S);
  report.items.push_back({"L3-noise-full-rank",
                          s_rank == model.obs_dim() ? CheckStatus::pass : CheckStatus::fail,
                          static_cast<double>(s_rank), "rank of S"});

  // L4: finite-difference continuity probe of theta -> (A, R, B, S).
  double worst_ratio = 0.0;
  for (Eigen::Index c = 0; c < theta.size(); ++c) {
    Eigen::VectorXd t1 = theta, t2 = theta;
    t1[c] += 1e-3;
    t2[c] += 1e-6;
    auto diff = [&](const LgMatrices& a, const LgMatrices& b) {
      return std::max({(a.A - b.A).cwiseAbs().maxCoeff(), (a.R - b.R).cwiseAbs().maxCoeff(),
                       (a.B - b.B).cwiseAbs().maxCoeff(), (a.S - b.S).cwiseAbs().maxCoeff()});
    };
    const double d1 = diff(model.matrices(t1), m);
    const double d2 = diff(model.matrices(t2), m);
    if (d1 > 0.0) worst_ratio = std::max(worst_ratio, d2 / d1);
  }
  report.items.push_back({"L4-continuity", worst_ratio < 0.1 ? CheckStatus::pass : CheckStatus::fail,
                          worst_ratio, "finite-difference continuity probe"});
  return report;
}

double kalman_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                     const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_cov,
                     const Eigen::Ref<const Eigen::MatrixXd>& y) {
  const int d = model.state_dim(), p = model.obs_dim();
  if (y.cols() != p) throw Error("kalman_loglik: observation dimension mismatch");
  if (init_mean.size() != d || init_cov.rows() != d || init_cov.cols() != d)
    throw Error("kalman_loglik: init dimension mismatch");
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(init_cov);
    if (es.eigenvalues().minCoeff() < -1e-10)
      throw Error("kalman_loglik: init covariance not PSD");
  }

  const LgMatrices m = model.matrices(theta);
  const Eigen::MatrixXd rr = m.R * m.R.transpose();
  const Eigen::MatrixXd ss = m.S * m.S.transpose();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);

  Eigen::VectorXd x = init_mean;
  Eigen::MatrixXd cov = 0.5 * (init_cov + init_cov.transpose());
  double loglik = 0.0;

  for (Eigen::Index k = 0; k < y.rows(); ++k) {
    const Eigen::VectorXd innov = y.row(k).transpose() - m.B * x;
    const Eigen::MatrixXd innov_cov = m.B * cov * m.B.transpose() + ss;
    Eigen::LLT<Eigen::MatrixXd> llt(innov_cov);
    if (llt.info() != Eigen::Success)
      throw Error("kalman_loglik: innovation covariance not positive definite");
    double logdet = 0.0;
    const Eigen::MatrixXd l = llt.matrixL();
    for (int i = 0; i < p; ++i) logdet += 2.0 * std::log(l(i, i));
    loglik += -0.5 * (p * kLog2Pi + logdet + llt.matrixL().solve(innov).squaredNorm());

    const Eigen::MatrixXd gain = llt.solve(m.B * cov).transpose();
    x += gain * innov;
    // Joseph form keeps the covariance symmetric PSD.
    const Eigen::MatrixXd j = eye - gain * m.B;
    cov = j * cov * j.transpose() + gain * ss * gain.transpose();
    cov = 0.5 * (cov + cov.transpose());

    if (k + 1 < y.rows()) {
      x = m.A * x;
      cov = m.A * cov * m.A.transpose() + rr;
      cov = 0.5 * (cov + cov.transpose());
    }
  }
  return loglik;
}

double joint_density_oracle(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                            const Eigen::VectorXd& init_mean, const Eigen::MatrixXd& init_cov,
                            const Eigen::Ref<const Eigen::MatrixXd>& y) {
  const int p = model.obs_dim();
  const int r = static_cast<int>(y.rows());
  const StructuralMatrices sm = structural(model, theta, r);

  Eigen::VectorXd stacked(r * p);
  for (int k = 0; k < r; ++k) stacked.segment(k * p, p) = y.row(k).transpose();

  const Eigen::VectorXd mean = sm.obs * init_mean;
  const Eigen::MatrixXd cov = sm.obs * init_cov * sm.obs.transpose() + sm.gamma;
  return gaussian_logpdf(stacked, mean, cov);
}

double improper_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                       const Eigen::Ref<const Eigen::MatrixXd>& y) {
  const int d = model.state_dim(), p = model.obs_dim();
  const int r = static_cast<int>(y.rows());
  if (r < d)
    throw HorizonTooShortError("improper_loglik: window shorter than the state dimension");
  const StructuralMatrices sm = structural(model, theta, r);
  if (numerical_rank(sm.obs) < d)
    throw UnobservableParameterError("improper_loglik: observability matrix rank-deficient");

  Eigen::LLT<Eigen::MatrixXd> gamma_llt(sm.gamma);
  if (gamma_llt.info() != Eigen::Success)
    throw Error("improper_loglik: Gamma not positive definite");
  double logdet_gamma = 0.0;
  {
    const Eigen::MatrixXd l = gamma_llt.matrixL();
    for (int i = 0; i < r * p; ++i) logdet_gamma += 2.0 * std::log(l(i, i));
  }
  const Eigen::MatrixXd core = sm.obs.transpose() * gamma_llt.solve(sm.obs);
  Eigen::LLT<Eigen::MatrixXd> core_llt(core);
  if (core_llt.info() != Eigen::Success)
    throw UnobservableParameterError("improper_loglik: O^T Gamma^{-1} O singular");
  double logdet_core = 0.0;
  {
    const Eigen::MatrixXd l = core_llt.matrixL();
    for (int i = 0; i < d; ++i) logdet_core += 2.0 * std::log(l(i, i));
  }

  Eigen::VectorXd stacked(r * p);
  for (int k = 0; k < r; ++k) stacked.segment(k * p, p) = y.row(k).transpose();

  return 0.5 * (d - p * r) * kLog2Pi - 0.5 * logdet_core - 0.5 * logdet_gamma -
         0.5 * stacked.dot(sm.hmat * stacked);
}

double improper_forward_loglik(const LinearGaussianModel& model, const Eigen::VectorXd& theta,
                               const Eigen::Ref<const Eigen::MatrixXd>& y) {
  const int d = model.state_dim(), q = model.noise_dim(), p = model.obs_dim();
  const int len = static_cast<int>(y.rows());
  if (len < d)
    throw HorizonTooShortError("improper_forward_loglik: need at least d observations");

  const double head = improper_loglik(model, theta, y.topRows(d));
  if (len == d) return head;

  // Exact Gaussian posterior of X_d given y_0^{d-1} under the flat initial
  // measure. With Y = O x0 + eta, X_d = A^d x0 + xi:
  //   x0 | y   ~ N(P0 O^T Gamma^{-1} y, P0),  P0 = (O^T Gamma^{-1} O)^{-1}
  //   X_d | x0, y ~ N(A^d x0 + C Gamma^{-1} (y - O x0), Sctrl - C Gamma^{-1} C^T)
  // where C = Cov(X_d, Y) comes from the shared state-noise terms.
  const LgMatrices m = model.matrices(theta);
  const StructuralMatrices sm = structural(model, theta, d);

  Eigen::MatrixXd ad = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd load(d, d * q);  // X_d loadings on U_0..U_{d-1}, reverse powers
  for (int j = d - 1; j >= 0; --j) {
    load.middleCols(j * q, q) = ad * m.R;
    ad = m.A * ad;
  }
  Eigen::MatrixXd hankel_ext = Eigen::MatrixXd::Zero(d * p, d * q);
  hankel_ext.leftCols((d - 1) * q) = sm.hankel;
  const Eigen::MatrixXd cross = load * hankel_ext.transpose();  // d x dp
  const Eigen::MatrixXd sctrl = load * load.transpose();

  Eigen::LLT<Eigen::MatrixXd> gamma_llt(sm.gamma);
  if (gamma_llt.info() != Eigen::Success)
    throw Error("improper_forward_loglik: Gamma not positive definite");
  const Eigen::MatrixXd core = sm.obs.transpose() * gamma_llt.solve(sm.obs);
  Eigen::LLT<Eigen::MatrixXd> core_llt(core);
  if (core_llt.info() != Eigen::Success)
    throw UnobservableParameterError("improper_forward_loglik: unobservable at horizon d");
  const Eigen::MatrixXd p0 = core_llt.solve(Eigen::MatrixXd::Identity(d, d));

  Eigen::VectorXd stacked(d * p);
  for (int k = 0; k < d; ++k) stacked.segment(k * p, p) = y.row(k).transpose();

  const Eigen::VectorXd x0_hat = p0 * sm.obs.transpose() * gamma_llt.solve(stacked);
  const Eigen::MatrixXd cg = cross * gamma_llt.solve(Eigen::MatrixXd::Identity(d * p, d * p));
  const Eigen::MatrixXd j = ad - cg * sm.obs;  // ad holds A^d after the loop
  const Eigen::VectorXd post_mean = j * x0_hat + cg * stacked;
  Eigen::MatrixXd post_cov = sctrl - cg * cross.transpose() + j * p0 * j.transpose();
  post_cov = 0.5 * (post_cov + post_cov.transpose());

  return head + kalman_loglik(model, theta, post_mean, post_cov, y.bottomRows(len - d));
}

}  // namespace hmmlab
