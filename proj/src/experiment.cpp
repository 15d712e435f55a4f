#include "hmmlab/experiment.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "hmmlab/ergodicity.hpp"
#include "hmmlab/mle.hpp"
#include "hmmlab/separation.hpp"

namespace hmmlab {

using nlohmann::json;

namespace {

const char* const kCommands[] = {"simulate",      "loglik",     "mle",
                                 "consistency",   "entropy-rate", "concentration",
                                 "separation",    "counterexample", "check-assumptions"};

bool known_command(const std::string& cmd) {
  for (const char* c : kCommands)
    if (cmd == c) return true;
  return false;
}

void check_keys(const json& obj, const std::vector<std::string>& allowed,
                const std::string& where, std::vector<std::string>& diags) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const auto& k : allowed)
      if (it.key() == k) ok = true;
    if (!ok) diags.push_back(where + ": unknown key '" + it.key() + "'");
  }
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_long(long long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%lld", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Model registry

struct ModelBuild {
  ModelSpec spec;
  bool finite_alphabet = false;
  int alphabet_size = 0;
};

ModelBuild build_model(const json& m, std::vector<std::string>& diags) {
  ModelBuild out;
  if (!m.is_object() || !m.contains("name") || !m["name"].is_string()) {
    diags.push_back("model: need an object with a 'name'");
    return out;
  }
  const std::string name = m["name"];

  auto num = [&](const char* key, double fallback) {
    return m.contains(key) ? m[key].get<double>() : fallback;
  };

  try {
    if (name == "remark13") {
      check_keys(m, {"name", "theta_star"}, "model", diags);
      out.spec = make_remark13_spec();
      if (m.contains("theta_star"))
        out.spec.true_theta = Eigen::VectorXd::Constant(1, m["theta_star"].get<double>());
      out.finite_alphabet = true;
      out.alphabet_size = 2;
    } else if (name == "two-state-gaussian") {
      check_keys(m, {"name", "stay_prob", "means", "sd", "box"}, "model", diags);
      double mu0 = 0.0, mu1 = 2.0;
      if (m.contains("means")) {
        mu0 = m["means"][0].get<double>();
        mu1 = m["means"][1].get<double>();
      }
      double lo = -4.0, hi = 4.0;
      if (m.contains("box")) {
        lo = m["box"][0].get<double>();
        hi = m["box"][1].get<double>();
      }
      out.spec = make_two_state_gaussian_spec(num("stay_prob", 0.7), mu0, mu1, num("sd", 1.0),
                                              lo, hi);
    } else if (name == "scalar-linear-gaussian") {
      check_keys(m, {"name", "a", "r", "b", "s", "box"}, "model", diags);
      double lo = -0.95, hi = 0.95;
      if (m.contains("box")) {
        lo = m["box"][0].get<double>();
        hi = m["box"][1].get<double>();
      }
      out.spec = make_scalar_lg_spec(num("a", 0.5), num("r", 1.0), num("b", 1.0), num("s", 1.0),
                                     lo, hi);
    } else if (name == "stochastic-volatility") {
      check_keys(m, {"name", "phi", "sigma", "beta", "grid_lo", "grid_hi", "grid_nodes"},
                 "model", diags);
      out.spec = make_stoch_vol_spec(num("phi", 0.95), num("sigma", 0.4), num("beta", 0.7));
      if (m.contains("grid_lo")) out.spec.quadrature.lo = m["grid_lo"].get<double>();
      if (m.contains("grid_hi")) out.spec.quadrature.hi = m["grid_hi"].get<double>();
      if (m.contains("grid_nodes")) out.spec.quadrature.nodes = m["grid_nodes"].get<int>();
    } else {
      diags.push_back("model: unknown name '" + name + "'");
      return out;
    }
  } catch (const std::exception& e) {
    diags.push_back(std::string("model: ") + e.what());
    return out;
  }

  for (int c = 0; c < out.spec.box.dims(); ++c) {
    if (out.spec.true_theta[c] < out.spec.box.lower[c] ||
        out.spec.true_theta[c] > out.spec.box.upper[c])
      diags.push_back("model: theta_star coordinate " + std::to_string(c) +
                      " lies outside the box");
  }
  return out;
}

InitialMeasure parse_init(const json& j, const ModelSpec& spec,
                          std::vector<std::string>& diags) {
  if (!j.is_object() || !j.contains("kind")) {
    diags.push_back("init: need an object with a 'kind'");
    return InitialMeasure::Stationary();
  }
  const std::string kind = j["kind"];
  if (kind == "point-mass") {
    check_keys(j, {"kind", "state", "point"}, "init", diags);
    if (spec.is_finite()) {
      if (!j.contains("state")) {
        diags.push_back("init: point-mass on a finite model needs 'state'");
        return InitialMeasure::Stationary();
      }
      return InitialMeasure::PointMass(j["state"].get<int>());
    }
    if (!j.contains("point")) {
      diags.push_back("init: point-mass needs 'point'");
      return InitialMeasure::Stationary();
    }
    const auto vals = j["point"].get<std::vector<double>>();
    return InitialMeasure::PointMass(
        Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
  }
  if (kind == "stationary") {
    check_keys(j, {"kind", "burn_in"}, "init", diags);
    return InitialMeasure::Stationary(j.value("burn_in", 10000));
  }
  if (kind == "weights") {
    check_keys(j, {"kind", "weights"}, "init", diags);
    const auto vals = j.value("weights", std::vector<double>{});
    if (vals.empty()) diags.push_back("init: weights must be non-empty");
    return InitialMeasure::Weights(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
  }
  if (kind == "gaussian") {
    check_keys(j, {"kind", "mean", "cov"}, "init", diags);
    const auto mean = j.value("mean", std::vector<double>{});
    const auto cov_rows = j.value("cov", std::vector<std::vector<double>>{});
    Eigen::VectorXd mu = Eigen::Map<const Eigen::VectorXd>(mean.data(), mean.size());
    Eigen::MatrixXd cov(cov_rows.size(), cov_rows.size());
    for (std::size_t i = 0; i < cov_rows.size(); ++i)
      for (std::size_t k = 0; k < cov_rows.size(); ++k) cov(i, k) = cov_rows[i][k];
    return InitialMeasure::Gaussian(mu, cov);
  }
  diags.push_back("init: unknown kind '" + kind + "'");
  return InitialMeasure::Stationary();
}

// Per-command option allowlists; defaults are applied at run time.
const std::vector<std::string>& allowed_options(const std::string& command) {
  static const std::vector<std::string> simulate{"n", "init", "theta"};
  static const std::vector<std::string> loglik{"init", "thetas", "improper"};
  static const std::vector<std::string> mle{"init", "coarse_grid", "refine_tol"};
  static const std::vector<std::string> entropy{"inits"};
  static const std::vector<std::string> concentration{
      "n", "t_grid", "replicates", "f_state", "s", "use_observations",
      "regen", "regen_steps", "minorization_m", "mean_run"};
  static const std::vector<std::string> separation{"theta", "s", "calibration_samples",
                                                   "replicates"};
  static const std::vector<std::string> counterexample{"n", "replicates_per_branch",
                                                       "coarse_grid", "refine_tol"};
  static const std::vector<std::string> check{};
  static const std::vector<std::string> none{};
  if (command == "simulate") return simulate;
  if (command == "loglik") return loglik;
  if (command == "mle" || command == "consistency") return mle;
  if (command == "entropy-rate") return entropy;
  if (command == "concentration") return concentration;
  if (command == "separation") return separation;
  if (command == "counterexample") return counterexample;
  if (command == "check-assumptions") return check;
  return none;
}

std::vector<std::string> validate_json(const json& root) {
  std::vector<std::string> diags;
  if (!root.is_object()) {
    diags.push_back("config: top level must be a JSON object");
    return diags;
  }
  check_keys(root, {"command", "model", "seed", "replicates", "schedule", "options"},
             "config", diags);

  std::string command;
  if (!root.contains("command") || !root["command"].is_string()) {
    diags.push_back("config: 'command' is required");
  } else {
    command = root["command"];
    if (!known_command(command)) diags.push_back("config: unknown command '" + command + "'");
  }

  if (!root.contains("model")) {
    diags.push_back("config: 'model' is required");
  } else {
    build_model(root["model"], diags);
  }

  if (root.contains("seed") && !root["seed"].is_number_unsigned())
    diags.push_back("config: 'seed' must be an unsigned integer");

  if (root.contains("replicates")) {
    if (!root["replicates"].is_number_integer() || root["replicates"].get<long>() < 1)
      diags.push_back("config: 'replicates' must be a positive integer");
  }

  if (root.contains("schedule")) {
    if (!root["schedule"].is_array() || root["schedule"].empty()) {
      diags.push_back("config: 'schedule' must be a non-empty array");
    } else {
      long prev = 0;
      for (const auto& v : root["schedule"]) {
        if (!v.is_number_integer() || v.get<long>() < 1) {
          diags.push_back("config: schedule entries must be positive integers");
          break;
        }
        const long cur = v.get<long>();
        if (cur <= prev && prev != 0) {
          diags.push_back("config: schedule must be strictly increasing");
          break;
        }
        prev = cur;
      }
    }
  }

  if (root.contains("options")) {
    if (!root["options"].is_object()) {
      diags.push_back("config: 'options' must be an object");
    } else if (!command.empty() && known_command(command)) {
      check_keys(root["options"], allowed_options(command), "options", diags);
      const json& opt = root["options"];
      if (opt.contains("refine_tol") && !(opt["refine_tol"].get<double>() > 0.0))
        diags.push_back("options: refine_tol must be positive");
      if (opt.contains("coarse_grid") && opt["coarse_grid"].get<int>() < 2)
        diags.push_back("options: coarse_grid must be at least 2");
      if (opt.contains("replicates") && opt["replicates"].get<long>() < 1)
        diags.push_back("options: replicates must be positive");
      if (opt.contains("t_grid")) {
        double prev = 0.0;
        for (const auto& v : opt["t_grid"]) {
          if (v.get<double>() <= prev) {
            diags.push_back("options: t_grid must be positive and strictly increasing");
            break;
          }
          prev = v.get<double>();
        }
      }
    }
  }
  return diags;
}

// ---------------------------------------------------------------------------
// CSV assembly

struct Csv {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string render() const {
    std::string out;
    for (std::size_t i = 0; i < header.size(); ++i) {
      out += header[i];
      out += i + 1 < header.size() ? ',' : '\n';
    }
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        out += row[i];
        out += i + 1 < row.size() ? ',' : '\n';
      }
    }
    return out;
  }
};

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream stream(tmp, std::ios::binary | std::ios::trunc);
    if (!stream) throw Error("cannot open output file " + tmp);
    stream << content;
    if (!stream.good()) throw Error("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

struct ParsedConfig {
  ExperimentConfig config;
  bool finite_alphabet = false;
  int alphabet_size = 0;
};

ParsedConfig parse_json(const json& root) {
  auto diags = validate_json(root);
  if (!diags.empty()) throw ConfigError(diags.front());

  std::vector<std::string> ignored;
  ParsedConfig out;
  ModelBuild built = build_model(root["model"], ignored);
  out.config.spec = std::move(built.spec);
  out.finite_alphabet = built.finite_alphabet;
  out.alphabet_size = built.alphabet_size;
  out.config.command = root["command"];
  out.config.seed = root.value("seed", 1ULL);
  out.config.replicates = root.value("replicates", 20);
  out.config.schedule = root.value("schedule", std::vector<long>{});
  out.config.options = root.value("options", json::object());
  return out;
}

// ---------------------------------------------------------------------------
// Per-command runners (each fills a CSV; parallel sections split over
// per-replicate child streams so output is parallelism-invariant)

void run_tasks(int count, int parallelism, const std::function<void(int)>& task) {
  const int workers = std::max(1, std::min(parallelism, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) task(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) task(i);
    });
  for (auto& t : pool) t.join();
}

Csv run_simulate(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  const int n = opt.value("n", 100);
  std::vector<std::string> diags;
  const InitialMeasure init = opt.contains("init")
                                  ? parse_init(opt["init"], cfg.spec, diags)
                                  : InitialMeasure::Stationary();
  if (!diags.empty()) throw ConfigError(diags.front());
  Eigen::VectorXd theta = cfg.spec.true_theta;
  if (opt.contains("theta")) {
    const auto vals = opt["theta"].get<std::vector<double>>();
    theta = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  }

  // Determine dimensions from a probe run.
  RngStream probe_rng(cfg.seed, 0);
  const Simulation probe = simulate(cfg.spec, theta, init, 0, probe_rng);
  const int dx = static_cast<int>(probe.states.cols());
  const int dy = static_cast<int>(probe.obs.cols());

  Csv csv;
  csv.header = {"replicate", "t"};
  for (int c = 0; c < dx; ++c) csv.header.push_back(dx == 1 ? "x" : "x" + std::to_string(c));
  for (int c = 0; c < dy; ++c) csv.header.push_back(dy == 1 ? "y" : "y" + std::to_string(c));

  std::vector<Simulation> sims(cfg.replicates);
  RngStream base(cfg.seed, 0);
  run_tasks(cfg.replicates, parallelism, [&](int rep) {
    RngStream rng = base.child(static_cast<std::uint64_t>(rep));
    sims[rep] = simulate(cfg.spec, theta, init, n, rng);
  });

  for (int rep = 0; rep < cfg.replicates; ++rep)
    for (int t = 0; t <= n; ++t) {
      std::vector<std::string> row{format_long(rep), format_long(t)};
      for (int c = 0; c < dx; ++c) row.push_back(format_double(sims[rep].states(t, c)));
      for (int c = 0; c < dy; ++c) row.push_back(format_double(sims[rep].obs(t, c)));
      csv.rows.push_back(std::move(row));
    }
  return csv;
}

Csv run_loglik(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  std::vector<std::string> diags;
  const InitialMeasure init = opt.contains("init")
                                  ? parse_init(opt["init"], cfg.spec, diags)
                                  : InitialMeasure::Stationary();
  if (!diags.empty()) throw ConfigError(diags.front());

  std::vector<Eigen::VectorXd> thetas{cfg.spec.true_theta};
  if (opt.contains("thetas")) {
    thetas.clear();
    for (const auto& t : opt["thetas"]) {
      const auto vals = t.get<std::vector<double>>();
      thetas.push_back(Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size()));
    }
  }
  if (cfg.schedule.empty()) throw ConfigError("loglik: schedule is required");
  const long n_max = cfg.schedule.back();
  // Improper column: lambda-initialized likelihood, defined for the
  // linear-Gaussian family via the closed form plus Kalman continuation.
  const bool improper = opt.value("improper", false);
  if (improper && !cfg.spec.is_linear_gaussian())
    throw ConfigError("loglik: improper column is linear-gaussian only");

  struct Cell { double loglik; double improper; };
  std::vector<std::vector<Cell>> results(
      cfg.replicates, std::vector<Cell>(thetas.size() * cfg.schedule.size()));
  RngStream base(cfg.seed, 0);
  run_tasks(cfg.replicates, parallelism, [&](int rep) {
    RngStream rng = base.child(static_cast<std::uint64_t>(rep));
    const Simulation sim =
        simulate(cfg.spec, cfg.spec.true_theta, init, static_cast<int>(n_max), rng);
    for (std::size_t ti = 0; ti < thetas.size(); ++ti)
      for (std::size_t h = 0; h < cfg.schedule.size(); ++h) {
        const long n = cfg.schedule[h];
        Cell& cell = results[rep][ti * cfg.schedule.size() + h];
        cell.loglik = loglik(cfg.spec, thetas[ti], init, sim.obs.topRows(n + 1));
        cell.improper =
            improper ? improper_forward_loglik(cfg.spec.linear_gaussian(), thetas[ti],
                                               sim.obs.topRows(n + 1))
                     : std::numeric_limits<double>::quiet_NaN();
      }
  });

  Csv csv;
  csv.header = {"replicate", "theta_index", "n", "loglik", "norm_loglik",
                "improper_norm_loglik"};
  for (int rep = 0; rep < cfg.replicates; ++rep)
    for (std::size_t ti = 0; ti < thetas.size(); ++ti)
      for (std::size_t h = 0; h < cfg.schedule.size(); ++h) {
        const long n = cfg.schedule[h];
        const Cell& cell = results[rep][ti * cfg.schedule.size() + h];
        csv.rows.push_back({format_long(rep), format_long(static_cast<long>(ti)), format_long(n),
                            format_double(cell.loglik), format_double(cell.loglik / n),
                            format_double(cell.improper / n)});
      }
  return csv;
}

Csv run_mle_like(const ParsedConfig& pc, int parallelism, bool consistency_layout) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  if (cfg.schedule.empty()) throw ConfigError("mle: schedule is required");

  // The likelihood init nu is one fixed measure per experiment; the default
  // avoids theta-dependence (uniform weights on finite states, a unit
  // Gaussian otherwise). Data is always simulated from the stationary law
  // under theta*.
  InitialMeasure init;
  if (opt.contains("init")) {
    std::vector<std::string> diags;
    init = parse_init(opt["init"], cfg.spec, diags);
    if (!diags.empty()) throw ConfigError(diags.front());
  } else if (cfg.spec.is_finite()) {
    const int d = cfg.spec.finite().num_states();
    init = InitialMeasure::Weights(Eigen::VectorXd::Constant(d, 1.0 / d));
  } else {
    const int d = cfg.spec.is_linear_gaussian() ? cfg.spec.linear_gaussian().state_dim() : 1;
    init = InitialMeasure::Gaussian(Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Identity(d, d));
  }

  ConsistencyOptions copts;
  copts.mle.coarse_grid_per_dim = opt.value("coarse_grid", 33);
  copts.mle.refine_tol = opt.value("refine_tol", 1e-4);
  copts.likelihood_init = init;
  copts.data_init = InitialMeasure::Stationary();
  copts.parallelism = parallelism;

  RngStream base(cfg.seed, 0);
  const ConsistencyReport report = consistency_experiment(
      cfg.spec, cfg.spec.true_theta, cfg.schedule, cfg.replicates, base, copts);

  const int dims = cfg.spec.box.dims();
  Csv csv;
  if (consistency_layout) {
    csv.header = {"replicate", "n", "orbit_distance"};
    for (int c = 0; c < dims; ++c) csv.header.push_back("theta_hat_" + std::to_string(c));
  } else {
    csv.header = {"replicate", "n"};
    for (int c = 0; c < dims; ++c) csv.header.push_back("theta_hat_" + std::to_string(c));
    csv.header.insert(csv.header.end(), {"value", "orbit_distance"});
  }
  for (const auto& row : report.rows) {
    std::vector<std::string> cells{format_long(row.replicate), format_long(row.n)};
    if (consistency_layout) cells.push_back(format_double(row.distance));
    for (int c = 0; c < dims; ++c) cells.push_back(format_double(row.theta_hat[c]));
    if (!consistency_layout) {
      cells.push_back(format_double(row.value));
      cells.push_back(format_double(row.distance));
    }
    csv.rows.push_back(std::move(cells));
  }
  return csv;
}

Csv run_entropy_rate(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  if (cfg.schedule.empty()) throw ConfigError("entropy-rate: schedule is required");

  std::vector<std::string> diags;
  std::vector<InitialMeasure> inits;
  if (opt.contains("inits")) {
    for (const auto& j : opt["inits"]) inits.push_back(parse_init(j, cfg.spec, diags));
  } else {
    inits.push_back(InitialMeasure::Stationary());
  }
  if (!diags.empty()) throw ConfigError(diags.front());

  struct Row { int rep; int init_index; long n; double value; };
  std::vector<std::vector<Row>> results(cfg.replicates);
  RngStream base(cfg.seed, 0);
  run_tasks(cfg.replicates, parallelism, [&](int rep) {
    // One path per replicate; the inits only change the likelihood evaluation,
    // matching the initial-measure robustness statement under test.
    RngStream rng = base.child(static_cast<std::uint64_t>(rep));
    const long n_max = cfg.schedule.back();
    const Simulation sim = simulate(cfg.spec, cfg.spec.true_theta,
                                    InitialMeasure::Stationary(), static_cast<int>(n_max), rng);
    for (std::size_t ii = 0; ii < inits.size(); ++ii)
      for (long n : cfg.schedule) {
        const double value = loglik(cfg.spec, cfg.spec.true_theta, inits[ii],
                                    sim.obs.topRows(n + 1));
        results[rep].push_back({rep, static_cast<int>(ii), n, value / n});
      }
  });

  Csv csv;
  csv.header = {"replicate", "init_index", "n", "norm_loglik"};
  for (const auto& rows : results)
    for (const auto& r : rows)
      csv.rows.push_back({format_long(r.rep), format_long(r.init_index), format_long(r.n),
                          format_double(r.value)});
  return csv;
}

Csv run_concentration(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  if (!cfg.spec.is_finite())
    throw ConfigError("concentration: finite-chain models only");

  const long n = opt.value("n", 1000L);
  const long replicates = opt.value("replicates", 100000L);
  const int f_state = opt.value("f_state", 0);
  const int s = opt.value("s", 0);
  const bool use_obs = opt.value("use_observations", false);
  std::vector<double> t_grid = opt.value("t_grid", std::vector<double>{});
  if (t_grid.empty())
    for (int i = 1; i <= 10; ++i) t_grid.push_back(10.0 * i);

  const FiniteChain chain{cfg.spec.finite().trans(cfg.spec.true_theta)};
  const Eigen::VectorXd pi = chain.stationary();

  PathSampler sampler;
  double target_mean;
  if (use_obs) {
    sampler = observation_sampler(cfg.spec, cfg.spec.true_theta);
    const long run = opt.value("mean_run", 10000000L);
    RngStream rng(cfg.seed, 1);
    const auto long_path = sampler(run, rng);
    double sum = 0.0;
    for (double v : long_path) sum += v == f_state ? 1.0 : 0.0;
    target_mean = sum / static_cast<double>(run);
  } else {
    const Eigen::VectorXd pi_copy = pi;
    sampler = [chain, pi_copy](long len, RngStream& rng) {
      std::vector<double> out(len);
      int x = rng.categorical(pi_copy);
      for (long k = 0; k < len; ++k) {
        out[k] = x;
        x = chain.step(x, rng);
      }
      return out;
    };
    target_mean = pi[f_state];
  }

  auto window_f = [f_state](const double* w, int len) {
    // Window functional: indicator that the window starts in f_state.
    (void)len;
    return w[0] == static_cast<double>(f_state) ? 1.0 : 0.0;
  };

  RngStream base(cfg.seed, 0);
  const TailTable table =
      empirical_tail(sampler, window_f, s, n, t_grid, replicates, target_mean, base, parallelism);

  double regen_slope = std::numeric_limits<double>::quiet_NaN();
  double regen_eps = std::numeric_limits<double>::quiet_NaN();
  if (opt.value("regen", true)) {
    const int m = opt.value("minorization_m", 1);
    const MinorizationCert cert = exact_minorization(chain.trans, m);
    RngStream rng(cfg.seed, 2);
    const long steps = opt.value("regen_steps", 1000000L);
    const RegenerationTrace trace = split_simulate(chain, 0, cert, steps, rng);
    const RegenTail tail = regen_tail(trace);
    regen_slope = tail.geometric_slope;
    regen_eps = cert.epsilon;
  }

  Csv csv;
  csv.header = {"replicates", "n", "t", "tail", "tail_is_upper_bound",
                "k_hat", "regen_slope", "regen_epsilon"};
  for (std::size_t j = 0; j < t_grid.size(); ++j)
    csv.rows.push_back({format_long(replicates), format_long(n), format_double(t_grid[j]),
                        format_double(table.tail[j]),
                        format_long(table.upper_bound[j] ? 1 : 0), format_double(table.k_hat),
                        format_double(regen_slope), format_double(regen_eps)});
  return csv;
}

Csv run_separation(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  if (cfg.schedule.empty()) throw ConfigError("separation: schedule is required");
  if (!opt.contains("theta")) throw ConfigError("separation: options.theta is required");
  const auto vals = opt["theta"].get<std::vector<double>>();
  const Eigen::VectorXd theta = Eigen::Map<const Eigen::VectorXd>(vals.data(), vals.size());
  if (!cfg.spec.box.contains(theta)) throw ConfigError("separation: theta outside the box");

  const int s = opt.value("s", pc.finite_alphabet ? 1 : 0);
  const long replicates = opt.value("replicates", 10000L);

  WitnessOptions wopts;
  wopts.calibration_samples = opt.value("calibration_samples", 40000L);
  wopts.finite_alphabet = pc.finite_alphabet;
  wopts.alphabet_size = pc.alphabet_size;

  const PathSampler sampler_star = observation_sampler(cfg.spec, cfg.spec.true_theta);
  const PathSampler sampler_theta = observation_sampler(cfg.spec, theta);

  RngStream wrng(cfg.seed, 1);
  const SeparationWitness witness = build_witness(sampler_star, sampler_theta, s, wrng, wopts);

  RngStream base(cfg.seed, 0);
  const SeparationReport report = separation_test(sampler_star, sampler_theta, witness,
                                                  cfg.schedule, replicates, base, parallelism);

  Csv csv;
  csv.header = {"replicates", "n", "p_star", "p_theta", "p_theta_is_upper_bound",
                "slope", "slope_lo", "slope_hi"};
  for (std::size_t j = 0; j < report.n_schedule.size(); ++j)
    csv.rows.push_back({format_long(replicates), format_long(report.n_schedule[j]),
                        format_double(report.p_star[j]), format_double(report.p_theta[j]),
                        format_long(report.p_theta_upper[j] ? 1 : 0),
                        format_double(report.slope), format_double(report.slope_lo),
                        format_double(report.slope_hi)});
  return csv;
}

Csv run_counterexample(const ParsedConfig& pc, int parallelism) {
  const auto& cfg = pc.config;
  const json& opt = cfg.options;
  const long n = opt.value("n", cfg.schedule.empty() ? 100000L : cfg.schedule.back());
  const int per_branch = opt.value("replicates_per_branch", 20);

  MleOptions mopts;
  mopts.coarse_grid_per_dim = opt.value("coarse_grid", 33);
  mopts.refine_tol = opt.value("refine_tol", 1e-4);

  const ModelSpec spec = cfg.spec.is_finite() && cfg.spec.name == "remark13"
                             ? cfg.spec
                             : make_remark13_spec();
  const Eigen::VectorXd delta_one = (Eigen::VectorXd(2) << 1.0, 0.0).finished();

  struct Row { int rep; int x0; double theta_hat; };
  std::vector<Row> rows(2 * per_branch);
  RngStream base(cfg.seed, 0);
  run_tasks(2 * per_branch, parallelism, [&](int task) {
    const int branch = task / per_branch;  // 0: X_0 = 1, 1: X_0 = 2
    const int rep = task % per_branch;
    RngStream rng = base.child(static_cast<std::uint64_t>(task));
    const FinitePath path = simulate(spec.finite(), spec.true_theta,
                                     InitialMeasure::PointMass(branch), static_cast<int>(n), rng);
    auto objective = [&](const Eigen::VectorXd& theta) {
      return forward_loglik(spec.finite(), theta, delta_one, path.obs) / static_cast<double>(n);
    };
    const MleResult fit = approx_mle(objective, spec.box, mopts);
    rows[task] = {rep, branch + 1, fit.theta_hat[0]};
  });

  Csv csv;
  csv.header = {"replicate", "x0", "n", "theta_hat"};
  for (const auto& r : rows)
    csv.rows.push_back({format_long(r.rep), format_long(r.x0), format_long(n),
                        format_double(r.theta_hat)});
  return csv;
}

Csv run_check_assumptions(const ParsedConfig& pc, bool strict, bool& strict_failure,
                          std::string& warnings) {
  const auto& cfg = pc.config;
  RngStream rng(cfg.seed, 0);

  AssumptionReport report;
  if (cfg.spec.is_finite())
    report = check_assumptions_F(cfg.spec.finite(), cfg.spec.true_theta, cfg.spec.box, rng);
  else if (cfg.spec.is_linear_gaussian())
    report = check_assumptions_L(cfg.spec.linear_gaussian(), cfg.spec.true_theta);
  else
    report = check_assumptions_NL(cfg.spec.arch(), cfg.spec.box, cfg.spec.true_theta, rng);

  if (strict) {
    // Under --strict, indeterminate items warn and hard failures fail the run.
    if (report.any_fail()) strict_failure = true;
    for (const auto& item : report.items)
      if (item.status == CheckStatus::indeterminate)
        warnings += "warning: indeterminate check " + item.name + "\n";
  }

  Csv csv;
  csv.header = {"replicate", "n"};
  std::vector<std::string> row{format_long(0), format_long(0)};
  for (const auto& item : report.items) {
    csv.header.push_back(item.name);
    const double status =
        item.status == CheckStatus::pass ? 1.0 : item.status == CheckStatus::fail ? 0.0 : 0.5;
    row.push_back(format_double(status));
  }
  csv.rows.push_back(std::move(row));
  return csv;
}

}  // namespace

std::vector<std::string> validate_config_text(const std::string& text) {
  json root = json::parse(text, nullptr, false);
  if (root.is_discarded()) return {"config: malformed JSON"};
  return validate_json(root);
}

std::vector<std::string> validate_config_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) return {"config: cannot read file " + path};
  std::ostringstream buffer;
  buffer << stream.rdbuf();
  return validate_config_text(buffer.str());
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw ConfigError("config: cannot read file " + path);
  json root = json::parse(stream, nullptr, false);
  if (root.is_discarded()) throw ConfigError("config: malformed JSON");
  return parse_json(root).config;
}

RunResult run_experiment(const std::string& config_path, const std::string& out_path,
                         int parallelism, bool strict) {
  RunResult result;
  try {
    std::ifstream stream(config_path, std::ios::binary);
    if (!stream) throw ConfigError("config: cannot read file " + config_path);
    json root = json::parse(stream, nullptr, false);
    if (root.is_discarded()) throw ConfigError("config: malformed JSON");
    const ParsedConfig pc = parse_json(root);

    Csv csv;
    bool strict_failure = false;
    std::string warnings;
    const std::string& cmd = pc.config.command;
    if (cmd == "simulate") csv = run_simulate(pc, parallelism);
    else if (cmd == "loglik") csv = run_loglik(pc, parallelism);
    else if (cmd == "mle") csv = run_mle_like(pc, parallelism, false);
    else if (cmd == "consistency") csv = run_mle_like(pc, parallelism, true);
    else if (cmd == "entropy-rate") csv = run_entropy_rate(pc, parallelism);
    else if (cmd == "concentration") csv = run_concentration(pc, parallelism);
    else if (cmd == "separation") csv = run_separation(pc, parallelism);
    else if (cmd == "counterexample") csv = run_counterexample(pc, parallelism);
    else if (cmd == "check-assumptions")
      csv = run_check_assumptions(pc, strict, strict_failure, warnings);
    else throw ConfigError("config: unknown command '" + cmd + "'");

    write_atomic(out_path, csv.render());
    if (strict_failure) {
      result.exit_code = 1;
      result.strict_failure = true;
      result.message = warnings + "assumption check failed under --strict";
    } else {
      result.message = warnings + "wrote " + out_path;
    }
  } catch (const ConfigError& e) {
    result.exit_code = 2;
    result.message = e.what();
  } catch (const std::exception& e) {
    result.exit_code = 1;
    result.message = e.what();
  }
  return result;
}

}  // namespace hmmlab
