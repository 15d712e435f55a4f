#include "hmmlab/finite_hmm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hmmlab {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double log_gaussian(double y, double mean, double sd) {
  const double z = (y - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

}  // namespace

double FiniteEmission::log_density(int state, double y) const {
  if (kind == Kind::categorical) {
    const auto symbol = static_cast<Eigen::Index>(y);
    if (symbol < 0 || symbol >= probs.cols() || static_cast<double>(symbol) != y)
      throw Error("categorical emission: observation is not a valid symbol");
    const double p = probs(state, symbol);
    return p > 0.0 ? std::log(p) : kNegInf;
  }
  return log_gaussian(y, means[state], sds[state]);
}

double FiniteEmission::sample(int state, RngStream& rng) const {
  if (kind == Kind::categorical)
    return static_cast<double>(rng.categorical(probs.row(state).transpose()));
  return means[state] + sds[state] * rng.normal();
}

Eigen::MatrixXd FiniteHmm::trans(const Eigen::VectorXd& theta) const {
  Eigen::MatrixXd q = trans_(theta);
  if (q.rows() != d_ || q.cols() != d_) throw Error("transition matrix: wrong shape");
  for (int i = 0; i < d_; ++i) {
    if (q.row(i).minCoeff() < 0.0) throw Error("transition matrix: negative entry");
    if (std::abs(q.row(i).sum() - 1.0) > kRowSumTol)
      throw Error("transition matrix: row does not sum to one");
  }
  return q;
}

double FiniteHmm::log_q(const Eigen::VectorXd& theta, int x, int x2) const {
  const double p = trans(theta)(x, x2);
  return p > 0.0 ? std::log(p) : kNegInf;
}

double FiniteHmm::sup_log_q(const Eigen::VectorXd& theta) const {
  return std::log(trans(theta).maxCoeff());
}

Eigen::VectorXd FiniteHmm::stationary(const Eigen::VectorXd& theta) const {
  // pi Q = pi with sum(pi) = 1: replace one equation by the normalization.
  const Eigen::MatrixXd q = trans(theta);
  Eigen::MatrixXd a = q.transpose() - Eigen::MatrixXd::Identity(d_, d_);
  a.row(d_ - 1).setOnes();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d_);
  b[d_ - 1] = 1.0;
  Eigen::VectorXd pi = a.fullPivLu().solve(b);
  for (int i = 0; i < d_; ++i) pi[i] = std::max(pi[i], 0.0);
  return pi / pi.sum();
}

FinitePath simulate(const FiniteHmm& model, const Eigen::VectorXd& theta,
                    const InitialMeasure& init, int n, RngStream& rng) {
  if (n < 0) throw Error("simulate: n must be non-negative");
  const Eigen::MatrixXd q = model.trans(theta);
  const FiniteEmission emit = model.emission(theta);

  int x;
  switch (init.kind) {
    case InitialMeasure::Kind::point_mass:
      x = init.state;
      break;
    case InitialMeasure::Kind::stationary:
      x = rng.categorical(model.stationary(theta));
      break;
    case InitialMeasure::Kind::weights:
      x = rng.categorical(init.weights);
      break;
    default:
      throw Error("simulate: gaussian init is not meaningful for a finite chain");
  }
  if (x < 0 || x >= model.num_states()) throw Error("simulate: initial state out of range");

  FinitePath path;
  path.states.resize(n + 1);
  path.obs.resize(n + 1);
  path.states[0] = x;
  path.obs[0] = emit.sample(x, rng);
  for (int k = 1; k <= n; ++k) {
    x = rng.categorical(q.row(x).transpose());
    path.states[k] = x;
    path.obs[k] = emit.sample(x, rng);
  }
  return path;
}

double forward_loglik(const FiniteHmm& model, const Eigen::VectorXd& theta,
                      const Eigen::VectorXd& init_weights,
                      const Eigen::Ref<const Eigen::VectorXd>& y) {
  const int d = model.num_states();
  if (init_weights.size() != d) throw Error("forward_loglik: init weight size mismatch");
  if (init_weights.minCoeff() < 0.0) throw Error("forward_loglik: negative init weight");
  if (init_weights.maxCoeff() <= 0.0) throw Error("forward_loglik: all-zero init weights");
  if (y.size() == 0) throw Error("forward_loglik: empty observation path");

  const Eigen::MatrixXd q = model.trans(theta);
  const FiniteEmission emit = model.emission(theta);

  // Forward recursion with per-step max rescaling. Keeping the filter vector
  // scaled so its max is one is the probability-domain form of log-sum-exp
  // with max subtraction; sums run in ascending state order.
  Eigen::VectorXd alpha(d), next(d);
  double log_scale = 0.0;
  for (int j = 0; j < d; ++j) {
    const double lg = emit.log_density(j, y[0]);
    alpha[j] = lg == kNegInf ? 0.0 : init_weights[j] * std::exp(lg);
  }
  double m = alpha.maxCoeff();
  if (m <= 0.0) return kNegInf;
  alpha /= m;
  log_scale += std::log(m);

  for (Eigen::Index k = 1; k < y.size(); ++k) {
    for (int j = 0; j < d; ++j) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += alpha[i] * q(i, j);
      const double lg = emit.log_density(j, y[k]);
      next[j] = lg == kNegInf ? 0.0 : s * std::exp(lg);
    }
    m = next.maxCoeff();
    if (m <= 0.0) return kNegInf;
    alpha = next / m;
    log_scale += std::log(m);
  }

  double total = 0.0;
  for (int j = 0; j < d; ++j) total += alpha[j];
  return log_scale + std::log(total);
}

double counting_p_lambda(const FiniteHmm& model, const Eigen::VectorXd& theta,
                         const Eigen::Ref<const Eigen::VectorXd>& y) {
  return forward_loglik(model, theta, Eigen::VectorXd::Ones(model.num_states()), y);
}

namespace {

// Iterative Tarjan SCC on the positive-entry digraph.
std::vector<std::vector<int>> strongly_connected_components(const Eigen::MatrixXd& trans) {
  const int n = static_cast<int>(trans.rows());
  std::vector<std::vector<int>> adj(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (trans(i, j) > 0.0) adj[i].push_back(j);

  std::vector<int> index(n, -1), low(n, 0), on_stack(n, 0), stack;
  std::vector<std::vector<int>> sccs;
  int counter = 0;

  struct Frame { int v; std::size_t edge; };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::vector<Frame> frames{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!frames.empty()) {
      auto& [v, edge] = frames.back();
      if (edge < adj[v].size()) {
        const int w = adj[v][edge++];
        if (index[w] == -1) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = 1;
          frames.push_back({w, 0});
        } else if (on_stack[w]) {
          low[v] = std::min(low[v], index[w]);
        }
      } else {
        if (low[v] == index[v]) {
          std::vector<int> comp;
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp.push_back(w);
          } while (w != v);
          std::sort(comp.begin(), comp.end());
          sccs.push_back(std::move(comp));
        }
        const int done = v;
        frames.pop_back();
        if (!frames.empty()) low[frames.back().v] = std::min(low[frames.back().v], low[done]);
      }
    }
  }
  return sccs;
}

// Period of a closed irreducible class: gcd of (level[u] + 1 - level[v]) over
// in-class edges, with BFS levels from an arbitrary root. Avoids matrix powers.
int class_period(const Eigen::MatrixXd& trans, const std::vector<int>& cls) {
  std::vector<int> level(trans.rows(), -1);
  std::vector<int> queue{cls.front()};
  level[cls.front()] = 0;
  std::vector<char> in_class(trans.rows(), 0);
  for (int s : cls) in_class[s] = 1;
  for (std::size_t head = 0; head < queue.size(); ++head) {
    const int u = queue[head];
    for (int v = 0; v < trans.cols(); ++v) {
      if (trans(u, v) > 0.0 && in_class[v] && level[v] == -1) {
        level[v] = level[u] + 1;
        queue.push_back(v);
      }
    }
  }
  int g = 0;
  for (int u : cls)
    for (int v : cls)
      if (trans(u, v) > 0.0) g = std::gcd(g, std::abs(level[u] + 1 - level[v]));
  return g == 0 ? 1 : g;
}

}  // namespace

ErgodicDecomposition ergodic_decomposition(const Eigen::MatrixXd& trans) {
  const int n = static_cast<int>(trans.rows());
  if (trans.cols() != n) throw Error("ergodic_decomposition: matrix not square");
  for (int i = 0; i < n; ++i) {
    if (trans.row(i).minCoeff() < 0.0 || std::abs(trans.row(i).sum() - 1.0) > kRowSumTol)
      throw Error("ergodic_decomposition: matrix not row-stochastic");
  }

  ErgodicDecomposition out;
  for (auto& comp : strongly_connected_components(trans)) {
    std::vector<char> in_comp(n, 0);
    for (int s : comp) in_comp[s] = 1;
    bool closed = true;
    for (int s : comp)
      for (int t = 0; t < n && closed; ++t)
        if (trans(s, t) > 0.0 && !in_comp[t]) closed = false;
    if (closed) {
      out.period.push_back(class_period(trans, comp));
      out.classes.push_back(std::move(comp));
    } else {
      for (int s : comp) out.transient.push_back(s);
    }
  }
  std::sort(out.transient.begin(), out.transient.end());
  return out;
}

namespace {

// Monte-Carlo integrability proxy: running mean of |log g(x, Y)| under the
// stationary observation law. Indeterminate when the mean has not stabilized
// (relative change over the last doubling above 1%).
CheckItem mc_log_g_moment(const std::string& name, const FiniteHmm& model,
                          const Eigen::VectorXd& theta, int samples, RngStream& rng) {
  const Eigen::VectorXd pi = model.stationary(theta);
  const FiniteEmission emit = model.emission(theta);
  const int d = model.num_states();

  double sum = 0.0;
  double mean_half = 0.0;
  for (int i = 0; i < samples; ++i) {
    const int x = rng.categorical(pi);
    const double y = emit.sample(x, rng);
    double worst = 0.0;
    for (int s = 0; s < d; ++s) {
      const double lg = emit.log_density(s, y);
      if (lg == kNegInf) {
        worst = std::numeric_limits<double>::infinity();
        break;
      }
      worst = std::max(worst, std::abs(lg));
    }
    sum += worst;
    if (i + 1 == samples / 2) mean_half = sum / (samples / 2);
  }
  const double mean = sum / samples;

  CheckItem item{name, CheckStatus::pass, mean, ""};
  if (!std::isfinite(mean)) {
    item.status = CheckStatus::fail;
    item.detail = "infinite |log g| encountered";
  } else if (std::abs(mean - mean_half) > 0.01 * std::max(std::abs(mean), 1e-12)) {
    item.status = CheckStatus::indeterminate;
    item.detail = "running mean not stabilized over last doubling";
  } else {
    item.detail = "Monte-Carlo estimate of E|log g| finite";
  }
  return item;
}

}  // namespace

AssumptionReport check_assumptions_F(const FiniteHmm& model,
                                     const Eigen::VectorXd& theta_star,
                                     const ParameterBox& box, RngStream& rng) {
  AssumptionReport report;

  const auto decomp = ergodic_decomposition(model.trans(theta_star));
  const bool irreducible = decomp.classes.size() == 1 && decomp.transient.empty();
  report.items.push_back({"F1-irreducible",
                          irreducible ? CheckStatus::pass : CheckStatus::fail,
                          static_cast<double>(decomp.classes.size()),
                          irreducible ? "transition matrix irreducible"
                                      : "multiple classes or transient states"});

  report.items.push_back(mc_log_g_moment("F2-log-g-integrable", model, theta_star, 100000, rng));
  report.items.push_back(mc_log_g_moment("F3-locally-dominated", model, theta_star, 100000, rng));

  // F4: finite-difference continuity probe of theta -> Q_theta across the box.
  double worst_ratio = 0.0;
  const int probes = 8;
  for (int i = 0; i < probes; ++i) {
    Eigen::VectorXd theta(box.dims());
    for (int c = 0; c < box.dims(); ++c) theta[c] = rng.uniform(box.lower[c], box.upper[c]);
    for (int c = 0; c < box.dims(); ++c) {
      const double span = box.upper[c] - box.lower[c];
      const double h1 = 1e-3 * span, h2 = 1e-6 * span;
      Eigen::VectorXd t1 = theta, t2 = theta;
      t1[c] = std::min(theta[c] + h1, box.upper[c]);
      t2[c] = std::min(theta[c] + h2, box.upper[c]);
      const double d1 = (model.trans(t1) - model.trans(theta)).cwiseAbs().maxCoeff();
      const double d2 = (model.trans(t2) - model.trans(theta)).cwiseAbs().maxCoeff();
      if (d1 > 0.0) worst_ratio = std::max(worst_ratio, d2 / d1);
    }
  }
  const bool continuous = worst_ratio < 0.1;  // shrinks roughly with the step
  report.items.push_back({"F4-matrix-continuity",
                          continuous ? CheckStatus::pass : CheckStatus::fail, worst_ratio,
                          "finite-difference continuity probe of theta -> Q_theta"});
  return report;
}

Remark13 remark13_model() {
  Eigen::MatrixXd q(2, 2);
  q << 0.0, 1.0, 1.0, 0.0;

  auto trans = [q](const Eigen::VectorXd&) { return q; };
  auto emission = [](const Eigen::VectorXd& theta) {
    FiniteEmission e;
    e.kind = FiniteEmission::Kind::categorical;
    e.probs.resize(2, 2);
    const double t = theta[0];
    e.probs << t, 1.0 - t, 1.0 - t, t;
    return e;
  };

  Remark13 out{FiniteHmm(2, trans, emission), ParameterBox{}, Eigen::VectorXd::Constant(1, 0.7)};
  out.box.lower = Eigen::VectorXd::Constant(1, 0.5);
  out.box.upper = Eigen::VectorXd::Constant(1, 0.9);
  return out;
}

double remark13_limit(double theta, double theta_star, int x0) {
  if (theta <= 0.0 || theta >= 1.0 || theta_star <= 0.0 || theta_star >= 1.0)
    throw Error("remark13_limit: parameters must lie in (0,1)");
  if (x0 == 1) return theta_star * std::log(theta) + (1.0 - theta_star) * std::log(1.0 - theta);
  if (x0 == 2) return (1.0 - theta_star) * std::log(theta) + theta_star * std::log(1.0 - theta);
  throw Error("remark13_limit: x0 must be 1 or 2");
}

TwoStateGaussian two_state_gaussian(double stay_prob, double mu0, double mu1,
                                    double sd, double box_lo, double box_hi) {
  if (stay_prob <= 0.0 || stay_prob >= 1.0) throw Error("two_state_gaussian: stay_prob in (0,1)");
  Eigen::MatrixXd q(2, 2);
  q << stay_prob, 1.0 - stay_prob, 1.0 - stay_prob, stay_prob;

  auto trans = [q](const Eigen::VectorXd&) { return q; };
  auto emission = [sd](const Eigen::VectorXd& theta) {
    FiniteEmission e;
    e.kind = FiniteEmission::Kind::gaussian;
    e.means = theta;
    e.sds = Eigen::VectorXd::Constant(2, sd);
    return e;
  };

  TwoStateGaussian out{FiniteHmm(2, trans, emission), ParameterBox{}, Eigen::VectorXd(2)};
  out.theta_star << mu0, mu1;
  out.box.lower = Eigen::VectorXd::Constant(2, box_lo);
  out.box.upper = Eigen::VectorXd::Constant(2, box_hi);
  out.box.equivalence = Equivalence::label_permutation;
  out.box.permutations = {{1, 0}};
  return out;
}

}  // namespace hmmlab
