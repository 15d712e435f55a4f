#include "hmmlab/model.hpp"

#include <cmath>

namespace hmmlab {

Simulation simulate(const ModelSpec& spec, const Eigen::VectorXd& theta,
                    const InitialMeasure& init, int n, RngStream& rng) {
  if (!spec.box.contains(theta)) throw Error("simulate: theta outside the box");

  Simulation out;
  if (spec.is_finite()) {
    const FinitePath path = simulate(spec.finite(), theta, init, n, rng);
    out.states.resize(n + 1, 1);
    out.obs.resize(n + 1, 1);
    for (int k = 0; k <= n; ++k) {
      out.states(k, 0) = static_cast<double>(path.states[k]);
      out.obs(k, 0) = path.obs[k];
    }
  } else if (spec.is_linear_gaussian()) {
    LgPath path = simulate(spec.linear_gaussian(), theta, init, n, rng);
    out.states = std::move(path.states);
    out.obs = std::move(path.obs);
  } else {
    ArchPath path = simulate(spec.arch(), theta, init, n, rng);
    out.states = std::move(path.states);
    out.obs = std::move(path.obs);
  }
  return out;
}

double log_g(const ModelSpec& spec, const Eigen::VectorXd& theta,
             const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (!spec.box.contains(theta)) throw Error("log_g: theta outside the box");
  if (spec.is_finite()) {
    if (y.size() != 1) throw Error("log_g: finite family expects scalar observations");
    return spec.finite().log_g(theta, static_cast<int>(x[0]), y[0]);
  }
  if (spec.is_linear_gaussian()) return spec.linear_gaussian().log_g(theta, x, y);
  return spec.arch().log_obs_density(theta, x, y);
}

double log_q(const ModelSpec& spec, const Eigen::VectorXd& theta,
             const Eigen::VectorXd& x, const Eigen::VectorXd& x2) {
  if (!spec.box.contains(theta)) throw Error("log_q: theta outside the box");
  if (spec.is_finite())
    return spec.finite().log_q(theta, static_cast<int>(x[0]), static_cast<int>(x2[0]));
  if (spec.is_linear_gaussian()) return spec.linear_gaussian().log_q(theta, x, x2);
  return spec.arch().log_q(theta, x, x2);
}

namespace {

Eigen::VectorXd finite_init_weights(const FiniteHmm& model, const Eigen::VectorXd& theta,
                                    const InitialMeasure& init) {
  const int d = model.num_states();
  switch (init.kind) {
    case InitialMeasure::Kind::point_mass: {
      Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
      w[init.state] = 1.0;
      return w;
    }
    case InitialMeasure::Kind::stationary:
      return model.stationary(theta);
    case InitialMeasure::Kind::weights:
      return init.weights;
    default:
      throw Error("loglik: unsupported init for finite family");
  }
}

}  // namespace

double loglik(const ModelSpec& spec, const Eigen::VectorXd& theta,
              const InitialMeasure& init, const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (spec.is_finite())
    return forward_loglik(spec.finite(), theta, finite_init_weights(spec.finite(), theta, init),
                          y.col(0));

  if (spec.is_linear_gaussian()) {
    const auto& model = spec.linear_gaussian();
    const int d = model.state_dim();
    switch (init.kind) {
      case InitialMeasure::Kind::point_mass:
        return kalman_loglik(model, theta, init.point, Eigen::MatrixXd::Zero(d, d), y);
      case InitialMeasure::Kind::stationary:
        return kalman_loglik(model, theta, Eigen::VectorXd::Zero(d),
                             model.stationary_cov(theta), y);
      case InitialMeasure::Kind::gaussian:
        return kalman_loglik(model, theta, init.mean, init.cov, y);
      default:
        throw Error("loglik: unsupported init for linear-gaussian family");
    }
  }

  const auto& model = spec.arch();
  std::function<double(double)> init_logpdf;
  switch (init.kind) {
    case InitialMeasure::Kind::gaussian: {
      const double mean = init.mean[0];
      const double sd = std::sqrt(init.cov(0, 0));
      init_logpdf = [mean, sd](double x) {
        const double z = (x - mean) / sd;
        return -0.91893853320467274178 - std::log(sd) - 0.5 * z * z;
      };
      break;
    }
    case InitialMeasure::Kind::stationary: {
      // AR(1)-core families have a Gaussian stationary state law when the
      // coefficient and diffusion do not depend on x; evaluate it from the
      // model at the origin.
      const double a = model.coef(theta, Eigen::VectorXd::Zero(1))(0, 0);
      const double s = model.diffusion(theta, Eigen::VectorXd::Zero(1))(0, 0);
      if (std::abs(a) >= 1.0) throw Error("loglik: nonstationary ARCH state recursion");
      const double sd = s / std::sqrt(1.0 - a * a);
      init_logpdf = [sd](double x) {
        const double z = x / sd;
        return -0.91893853320467274178 - std::log(sd) - 0.5 * z * z;
      };
      break;
    }
    default:
      throw Error("loglik: unsupported init for nonlinear family (use gaussian)");
  }
  return quadrature_loglik(model, theta, init_logpdf, spec.quadrature, y);
}

ModelSpec make_remark13_spec() {
  Remark13 built = remark13_model();
  ModelSpec spec;
  spec.name = "remark13";
  spec.family = std::move(built.model);
  spec.box = built.box;
  spec.true_theta = built.theta_star;
  return spec;
}

ModelSpec make_two_state_gaussian_spec(double stay_prob, double mu0, double mu1, double sd,
                                       double box_lo, double box_hi) {
  TwoStateGaussian built = two_state_gaussian(stay_prob, mu0, mu1, sd, box_lo, box_hi);
  ModelSpec spec;
  spec.name = "two-state-gaussian";
  spec.family = std::move(built.model);
  spec.box = built.box;
  spec.true_theta = built.theta_star;
  return spec;
}

ModelSpec make_scalar_lg_spec(double a, double r, double b, double s,
                              double box_lo, double box_hi) {
  ModelSpec spec;
  spec.name = "scalar-linear-gaussian";
  spec.family = scalar_lgm(r, b, s);
  spec.box.lower = Eigen::VectorXd::Constant(1, box_lo);
  spec.box.upper = Eigen::VectorXd::Constant(1, box_hi);
  spec.true_theta = Eigen::VectorXd::Constant(1, a);
  return spec;
}

ModelSpec make_stoch_vol_spec(double phi, double sigma, double beta) {
  StochVolModel built = stoch_vol_model(phi, sigma, beta);
  ModelSpec spec;
  spec.name = "stochastic-volatility";
  spec.family = std::move(built.model);
  spec.box = built.box;
  spec.true_theta = built.theta_star;
  spec.quadrature = QuadratureGrid{-25.0, 25.0, 1200};
  return spec;
}

}  // namespace hmmlab
