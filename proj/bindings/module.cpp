#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "hmmlab/ergodicity.hpp"
#include "hmmlab/experiment.hpp"
#include "hmmlab/mle.hpp"
#include "hmmlab/separation.hpp"

namespace py = pybind11;
using namespace hmmlab;

namespace {

InitialMeasure init_from_kwargs(const ModelSpec& spec, const py::object& init) {
  if (init.is_none()) return InitialMeasure::Stationary();
  if (py::isinstance<InitialMeasure>(init)) return init.cast<InitialMeasure>();
  if (py::isinstance<py::int_>(init)) return InitialMeasure::PointMass(init.cast<int>());
  if (spec.is_finite()) throw Error("init: pass an int state or an InitialMeasure");
  return InitialMeasure::PointMass(init.cast<Eigen::VectorXd>());
}

py::dict report_to_dict(const AssumptionReport& report) {
  py::dict out;
  for (const auto& item : report.items) {
    py::dict entry;
    entry["status"] = to_string(item.status);
    entry["value"] = item.value;
    entry["detail"] = item.detail;
    out[py::str(item.name)] = entry;
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Hidden Markov model likelihood laboratory: simulation, exact and "
            "improper likelihoods, approximate MLE, regeneration and "
            "separation experiments.";

  py::register_exception<Error>(m, "LabError");

  py::class_<RngStream>(m, "RngStream")
      .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"), py::arg("stream") = 0)
      .def("uniform", [](RngStream& rng) { return rng.uniform(); })
      .def("normal", [](RngStream& rng) { return rng.normal(); })
      .def("child", &RngStream::child, py::arg("index"));

  py::class_<InitialMeasure>(m, "InitialMeasure");
  m.def("init_point_mass", [](int state) { return InitialMeasure::PointMass(state); });
  m.def("init_point_mass_vec",
        [](const Eigen::VectorXd& x) { return InitialMeasure::PointMass(x); });
  m.def("init_stationary", [](int burn_in) { return InitialMeasure::Stationary(burn_in); },
        py::arg("burn_in") = 10000);
  m.def("init_weights", [](const Eigen::VectorXd& w) { return InitialMeasure::Weights(w); });
  m.def("init_gaussian", [](const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
    return InitialMeasure::Gaussian(mean, cov);
  });

  py::class_<ModelSpec>(m, "Model")
      .def_readonly("name", &ModelSpec::name)
      .def_property_readonly("true_theta", [](const ModelSpec& s) { return s.true_theta; })
      .def_property_readonly("box_lower", [](const ModelSpec& s) { return s.box.lower; })
      .def_property_readonly("box_upper", [](const ModelSpec& s) { return s.box.upper; })
      .def("orbit", [](const ModelSpec& s, const Eigen::VectorXd& theta) {
        return s.box.orbit(theta);
      });

  m.def("remark13", &make_remark13_spec);
  m.def("two_state_gaussian", &make_two_state_gaussian_spec, py::arg("stay_prob") = 0.7,
        py::arg("mu0") = 0.0, py::arg("mu1") = 2.0, py::arg("sd") = 1.0,
        py::arg("box_lo") = -4.0, py::arg("box_hi") = 4.0);
  m.def("scalar_linear_gaussian", &make_scalar_lg_spec, py::arg("a") = 0.5, py::arg("r") = 1.0,
        py::arg("b") = 1.0, py::arg("s") = 1.0, py::arg("box_lo") = -0.95,
        py::arg("box_hi") = 0.95);
  m.def("stochastic_volatility", &make_stoch_vol_spec, py::arg("phi") = 0.95,
        py::arg("sigma") = 0.4, py::arg("beta") = 0.7);

  m.def(
      "simulate",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const py::object& init, int n,
         std::uint64_t seed, std::uint64_t stream) {
        RngStream rng(seed, stream);
        const Simulation sim = simulate(spec, theta, init_from_kwargs(spec, init), n, rng);
        return py::make_tuple(sim.states, sim.obs);
      },
      py::arg("model"), py::arg("theta"), py::arg("init"), py::arg("n"), py::arg("seed"),
      py::arg("stream") = 0,
      "Simulate a state/observation path; returns (states, observations) with one row per time");

  m.def("log_g", &log_g, py::arg("model"), py::arg("theta"), py::arg("x"), py::arg("y"));
  m.def("log_q", &log_q, py::arg("model"), py::arg("theta"), py::arg("x"), py::arg("x2"));
  m.def(
      "loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const py::object& init,
         const Eigen::MatrixXd& y) { return loglik(spec, theta, init_from_kwargs(spec, init), y); },
      py::arg("model"), py::arg("theta"), py::arg("init"), py::arg("y"));

  // Finite-state machinery.
  m.def(
      "forward_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& weights,
         const Eigen::VectorXd& y) { return forward_loglik(spec.finite(), theta, weights, y); },
      py::arg("model"), py::arg("theta"), py::arg("init_weights"), py::arg("y"));
  m.def(
      "counting_p_lambda",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& y) {
        return counting_p_lambda(spec.finite(), theta, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("y"));
  m.def("ergodic_decomposition", [](const Eigen::MatrixXd& trans) {
    const ErgodicDecomposition d = ergodic_decomposition(trans);
    py::dict out;
    out["classes"] = d.classes;
    out["transient"] = d.transient;
    out["period"] = d.period;
    return out;
  });
  m.def("remark13_limit", &remark13_limit, py::arg("theta"), py::arg("theta_star"),
        py::arg("x0"));

  // Linear-Gaussian machinery; theta selects the member of the family.
  m.def("linear_gaussian",
        [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& r, const Eigen::MatrixXd& b,
           const Eigen::MatrixXd& s) {
          ModelSpec spec;
          spec.name = "linear-gaussian";
          spec.family = constant_lgm(LgMatrices{a, r, b, s});
          spec.box.lower = Eigen::VectorXd::Constant(1, 0.0);
          spec.box.upper = Eigen::VectorXd::Constant(1, 1.0);
          spec.true_theta = Eigen::VectorXd::Constant(1, 0.5);
          return spec;
        },
        py::arg("A"), py::arg("R"), py::arg("B"), py::arg("S"),
        "Constant linear-Gaussian model; theta is ignored by the matrices");
  m.def(
      "kalman_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& mean,
         const Eigen::MatrixXd& cov, const Eigen::MatrixXd& y) {
        return kalman_loglik(spec.linear_gaussian(), theta, mean, cov, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("init_mean"), py::arg("init_cov"), py::arg("y"));
  m.def(
      "joint_density_oracle",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& mean,
         const Eigen::MatrixXd& cov, const Eigen::MatrixXd& y) {
        return joint_density_oracle(spec.linear_gaussian(), theta, mean, cov, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("init_mean"), py::arg("init_cov"), py::arg("y"));
  m.def(
      "improper_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::MatrixXd& y) {
        return improper_loglik(spec.linear_gaussian(), theta, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("y"));
  m.def(
      "improper_forward_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::MatrixXd& y) {
        return improper_forward_loglik(spec.linear_gaussian(), theta, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("y"));
  m.def(
      "structural",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, int r) {
        const StructuralMatrices sm = structural(spec.linear_gaussian(), theta, r);
        py::dict out;
        out["obs"] = sm.obs;
        out["ctrl"] = sm.ctrl;
        out["hankel"] = sm.hankel;
        out["sdiag"] = sm.sdiag;
        out["gamma"] = sm.gamma;
        out["hmat"] = sm.hmat;
        return out;
      },
      py::arg("model"), py::arg("theta"), py::arg("r"));

  // Nonlinear machinery.
  m.def("sv_log_g", [](const Eigen::VectorXd& theta, double x, double y) {
    return sv_log_g(theta, x, y);
  });
  m.def("sv_identities", [](const Eigen::VectorXd& theta, double y) {
    const SvIdentities ids = sv_identities(theta, y);
    return py::make_tuple(ids.sup_g, ids.int_g);
  });
  m.def(
      "quadrature_loglik",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, double init_mean, double init_sd,
         double lo, double hi, int nodes, const Eigen::MatrixXd& y) {
        auto init = [init_mean, init_sd](double x) {
          const double z = (x - init_mean) / init_sd;
          return -0.91893853320467274178 - std::log(init_sd) - 0.5 * z * z;
        };
        return quadrature_loglik(spec.arch(), theta, init, QuadratureGrid{lo, hi, nodes}, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("init_mean"), py::arg("init_sd"), py::arg("lo"),
      py::arg("hi"), py::arg("nodes"), py::arg("y"));
  m.def("jsr_upper_bound", &jsr_upper_bound, py::arg("matrices"), py::arg("depth"));

  // Estimation.
  py::class_<MleResult>(m, "MleResult")
      .def_readonly("theta_hat", &MleResult::theta_hat)
      .def_readonly("value", &MleResult::value)
      .def_readonly("gap_bound", &MleResult::gap_bound)
      .def_readonly("evaluations", &MleResult::evaluations);
  m.def(
      "approx_mle",
      [](const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& lower,
         const Eigen::VectorXd& upper, int coarse_grid, double refine_tol) {
        ParameterBox box;
        box.lower = lower;
        box.upper = upper;
        MleOptions opts;
        opts.coarse_grid_per_dim = coarse_grid;
        opts.refine_tol = refine_tol;
        return approx_mle(f, box, opts);
      },
      py::arg("loglik"), py::arg("lower"), py::arg("upper"), py::arg("coarse_grid") = 33,
      py::arg("refine_tol") = 1e-4);
  m.def(
      "orbit_distance",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta_hat,
         const Eigen::VectorXd& theta_star) {
        return orbit_distance(theta_hat, theta_star, spec.box);
      },
      py::arg("model"), py::arg("theta_hat"), py::arg("theta_star"));

  // Regeneration and separation.
  m.def("exact_minorization", [](const Eigen::MatrixXd& trans, int mm) {
    const MinorizationCert cert = exact_minorization(trans, mm);
    py::dict out;
    out["m"] = cert.m;
    out["epsilon"] = cert.epsilon;
    out["nu"] = cert.nu_weights;
    return out;
  });
  m.def("kl_lower_bound", &kl_lower_bound, py::arg("p_a"), py::arg("q_a"));
  m.def(
      "improper_law_weight",
      [](const ModelSpec& spec, const Eigen::VectorXd& theta, const Eigen::VectorXd& theta_star,
         int r_theta, const Eigen::MatrixXd& y) {
        return improper_law_weight(spec, theta, theta_star, r_theta, y);
      },
      py::arg("model"), py::arg("theta"), py::arg("theta_star"), py::arg("r_theta"), py::arg("y"));

  // Assumption batteries.
  m.def("check_assumptions", [](const ModelSpec& spec, std::uint64_t seed) {
    RngStream rng(seed, 0);
    if (spec.is_finite())
      return report_to_dict(check_assumptions_F(spec.finite(), spec.true_theta, spec.box, rng));
    if (spec.is_linear_gaussian())
      return report_to_dict(check_assumptions_L(spec.linear_gaussian(), spec.true_theta));
    return report_to_dict(check_assumptions_NL(spec.arch(), spec.box, spec.true_theta, rng));
  }, py::arg("model"), py::arg("seed") = 1);

  // Config tooling mirrors the lab CLI.
  m.def("validate_config", &validate_config_text, py::arg("text"));
}
