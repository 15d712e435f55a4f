#include "hmmlab/separation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace hmmlab {

PathSampler observation_sampler(const ModelSpec& spec, const Eigen::VectorXd& theta) {
  return [spec, theta](long len, RngStream& rng) {
    const Simulation sim =
        simulate(spec, theta, InitialMeasure::Stationary(), static_cast<int>(len - 1), rng);
    std::vector<double> out(len);
    for (long k = 0; k < len; ++k) out[k] = sim.obs(k, 0);
    return out;
  };
}

namespace {

struct Statistic {
  std::string name;
  std::function<double(const double*, int)> phi;
};

std::vector<Statistic> make_dictionary(int s, const WitnessOptions& options) {
  std::vector<Statistic> dict;
  if (options.finite_alphabet) {
    const int k = options.alphabet_size;
    // Every window pattern over the alphabet, plus the all-equal indicator.
    long patterns = 1;
    for (int i = 0; i <= s; ++i) patterns *= k;
    for (long code = 0; code < patterns; ++code) {
      std::vector<int> pattern(s + 1);
      long rest = code;
      for (int i = 0; i <= s; ++i) {
        pattern[i] = static_cast<int>(rest % k);
        rest /= k;
      }
      std::string name = "indicator[";
      for (int i = 0; i <= s; ++i) name += std::to_string(pattern[i]) + (i < s ? "," : "]");
      if (s == 0) name = "indicator[" + std::to_string(pattern[0]) + "]";
      dict.push_back({name, [pattern](const double* w, int len) {
                        for (int i = 0; i < len; ++i)
                          if (static_cast<int>(w[i]) != pattern[i]) return 0.0;
                        return 1.0;
                      }});
    }
    if (s >= 1)
      dict.push_back({"all-equal", [](const double* w, int len) {
                        for (int i = 1; i < len; ++i)
                          if (w[i] != w[0]) return 0.0;
                        return 1.0;
                      }});
  } else {
    dict.push_back({"mean", [](const double* w, int len) {
                      double sum = 0.0;
                      for (int i = 0; i < len; ++i) sum += w[i];
                      return sum / len;
                    }});
    dict.push_back({"second-moment", [](const double* w, int len) {
                      double sum = 0.0;
                      for (int i = 0; i < len; ++i) sum += w[i] * w[i];
                      return sum / len;
                    }});
    for (int lag = 1; lag <= s; ++lag)
      dict.push_back({"lag-" + std::to_string(lag) + "-product",
                      [lag](const double* w, int len) {
                        double sum = 0.0;
                        int count = 0;
                        for (int i = 0; i + lag < len; ++i, ++count) sum += w[i] * w[i + lag];
                        return count > 0 ? sum / count : 0.0;
                      }});
  }
  return dict;
}

struct MeanSe {
  double mean;
  double se;
};

// Batch-means standard error; windows overlap, so batching absorbs the serial
// dependence.
MeanSe batch_mean_se(const std::vector<double>& values, int batches) {
  const std::size_t n = values.size();
  const std::size_t per = std::max<std::size_t>(1, n / batches);
  std::vector<double> batch_means;
  for (std::size_t start = 0; start + per <= n; start += per) {
    double sum = 0.0;
    for (std::size_t i = start; i < start + per; ++i) sum += values[i];
    batch_means.push_back(sum / per);
  }
  double mean = 0.0;
  for (double b : batch_means) mean += b;
  mean /= batch_means.size();
  double var = 0.0;
  for (double b : batch_means) var += (b - mean) * (b - mean);
  var /= std::max<std::size_t>(1, batch_means.size() - 1);
  return {mean, std::sqrt(var / batch_means.size())};
}

std::vector<double> statistic_series(const Statistic& stat, const std::vector<double>& path,
                                     int s) {
  const long windows = static_cast<long>(path.size()) - s;
  std::vector<double> out(windows);
  for (long i = 0; i < windows; ++i) out[i] = stat.phi(path.data() + i, s + 1);
  return out;
}

}  // namespace

SeparationWitness build_witness(const PathSampler& sampler_star, const PathSampler& sampler_theta,
                                int s, RngStream& rng, const WitnessOptions& options) {
  if (s < 0) throw Error("build_witness: s must be >= 0");
  const auto dict = make_dictionary(s, options);

  const long total = options.calibration_samples + s;
  const std::vector<double> path_star = sampler_star(total, rng);
  const std::vector<double> path_theta = sampler_theta(total, rng);

  // Construction half picks the statistic and the affine rescaling; the
  // held-out half reports unbiased calibration means. A statistic is only
  // eligible when its affine image stays inside the clip bound, otherwise
  // clipping would destroy the mean calibration.
  int best = -1;
  double best_gap = 0.0;
  double best_mean_star = 0.0, best_mean_theta = 0.0;
  double best_se_star = 0.0, best_se_theta = 0.0;
  for (std::size_t j = 0; j < dict.size(); ++j) {
    const auto series_star = statistic_series(dict[j], path_star, s);
    const auto series_theta = statistic_series(dict[j], path_theta, s);
    const std::size_t half_star = series_star.size() / 2;
    const std::size_t half_theta = series_theta.size() / 2;
    const MeanSe a = batch_mean_se({series_star.begin(), series_star.begin() + half_star},
                                   options.batches);
    const MeanSe b = batch_mean_se({series_theta.begin(), series_theta.begin() + half_theta},
                                   options.batches);
    const double denom = std::sqrt(a.se * a.se + b.se * b.se);
    if (denom <= 0.0) continue;
    const double gap = std::abs(a.mean - b.mean) / denom;
    if (gap <= best_gap) continue;

    // Eligibility: clipping the affine image must not bias the calibrated
    // means away from their 0/1 targets.
    const double scale = 1.0 / (a.mean - b.mean);
    auto clipped_mean = [&](const std::vector<double>& series, std::size_t half) {
      double sum = 0.0;
      for (std::size_t i = 0; i < half; ++i) {
        const double h = (series[i] - b.mean) * scale;
        sum += std::max(-options.clip, std::min(options.clip, h));
      }
      return sum / static_cast<double>(half);
    };
    if (std::abs(clipped_mean(series_star, half_star) - 1.0) > 0.1) continue;
    if (std::abs(clipped_mean(series_theta, half_theta)) > 0.1) continue;

    best_gap = gap;
    best = static_cast<int>(j);
    best_mean_star = a.mean;
    best_mean_theta = b.mean;
    best_se_star = a.se;
    best_se_theta = b.se;
  }
  if (best < 0 || best_gap < options.min_gap_se)
    throw NotSeparatedError(
        "build_witness: no dictionary statistic separates the laws at this window (try larger s)");

  SeparationWitness w;
  w.s = s;
  w.bound = options.clip;
  w.statistic = dict[best].name;
  w.phi = dict[best].phi;
  w.offset = best_mean_theta;
  w.scale = 1.0 / (best_mean_star - best_mean_theta);

  // Held-out calibration of the clipped, rescaled h. The reported standard
  // errors fold in the construction-half uncertainty of the affine fit.
  auto heldout_mean = [&](const std::vector<double>& path) {
    const long windows = static_cast<long>(path.size()) - s;
    std::vector<double> values;
    values.reserve(windows - windows / 2);
    for (long i = windows / 2; i < windows; ++i) values.push_back(w.evaluate(path.data() + i, s + 1));
    return batch_mean_se(values, options.batches);
  };
  const MeanSe star = heldout_mean(path_star);
  const MeanSe theta = heldout_mean(path_theta);
  w.mean_at_star = star.mean;
  w.se_at_star = std::sqrt(star.se * star.se + w.scale * w.scale * best_se_star * best_se_star);
  w.mean_at_theta = theta.mean;
  w.se_at_theta =
      std::sqrt(theta.se * theta.se + w.scale * w.scale * best_se_theta * best_se_theta);
  return w;
}

SeparationReport separation_test(const PathSampler& sampler_star,
                                 const PathSampler& sampler_theta,
                                 const SeparationWitness& witness,
                                 const std::vector<long>& n_schedule, long replicates,
                                 RngStream base, int parallelism) {
  if (n_schedule.empty()) throw Error("separation_test: empty schedule");
  for (long n : n_schedule)
    if (n <= witness.s) throw Error("separation_test: horizon shorter than the window");

  const int s = witness.s;
  const std::size_t points = n_schedule.size();
  std::vector<std::atomic<long>> hits_star(points), hits_theta(points);
  for (auto& h : hits_star) h.store(0);
  for (auto& h : hits_theta) h.store(0);

  const long n_max = *std::max_element(n_schedule.begin(), n_schedule.end());

  auto run_chunk = [&](long first, long last) {
    for (long rep = first; rep < last; ++rep) {
      RngStream rng = base.child(static_cast<std::uint64_t>(rep));
      for (int which = 0; which < 2; ++which) {
        const std::vector<double> path =
            (which == 0 ? sampler_star : sampler_theta)(n_max + s, rng);
        // Running window-average of h along the path serves every horizon.
        double running = 0.0;
        std::size_t next_point = 0;
        for (long i = 0; i + s < static_cast<long>(path.size()); ++i) {
          running += witness.evaluate(path.data() + i, s + 1);
          const long covered = i + 1;  // windows y_1^{1+s} .. y_covered^{covered+s}
          while (next_point < points && n_schedule[next_point] - s == covered) {
            const bool in_a = running / static_cast<double>(covered) > 0.5;
            if (in_a) (which == 0 ? hits_star : hits_theta)[next_point].fetch_add(1);
            ++next_point;
          }
        }
      }
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
      const long last = std::min(replicates, first + chunk);
      if (first < last) pool.emplace_back(run_chunk, first, last);
    }
    for (auto& t : pool) t.join();
  }

  SeparationReport report;
  report.n_schedule = n_schedule;
  report.p_star.resize(points);
  report.p_theta.resize(points);
  report.p_theta_upper.assign(points, 0);
  for (std::size_t j = 0; j < points; ++j) {
    report.p_star[j] = static_cast<double>(hits_star[j].load()) / replicates;
    const long count = hits_theta[j].load();
    if (count == 0) {
      report.p_theta[j] = 3.0 / static_cast<double>(replicates);
      report.p_theta_upper[j] = 1;
    } else {
      report.p_theta[j] = static_cast<double>(count) / replicates;
    }
  }

  // Weighted least squares of log p_theta on n; delta-method variances
  // (1-p)/(p R), inflated to the rule-of-three scale for zero counts.
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t j = 0; j < points; ++j) {
    const double p = report.p_theta[j];
    const double var =
        report.p_theta_upper[j] ? 1.0 / 3.0 : (1.0 - p) / (p * static_cast<double>(replicates));
    const double weight = 1.0 / std::max(var, 1e-12);
    const double x = static_cast<double>(n_schedule[j]);
    const double y = std::log(p);
    sw += weight;
    swx += weight * x;
    swy += weight * y;
    swxx += weight * x * x;
    swxy += weight * x * y;
  }
  const double denom = sw * swxx - swx * swx;
  if (denom > 0.0) {
    report.slope = (sw * swxy - swx * swy) / denom;
    report.slope_se = std::sqrt(sw / denom);
    report.slope_lo = report.slope - 1.96 * report.slope_se;
    report.slope_hi = report.slope + 1.96 * report.slope_se;
  }
  return report;
}

double kl_lower_bound(double p_a, double q_a) {
  if (p_a < 0.0 || p_a > 1.0 || q_a < 0.0 || q_a > 1.0)
    throw Error("kl_lower_bound: arguments must be probabilities");
  if (q_a == 0.0)
    return p_a > 0.0 ? std::numeric_limits<double>::infinity() : -1.0;
  const double plogp = p_a > 0.0 ? p_a * std::log(p_a) : 0.0;
  return plogp - p_a * std::log(q_a) - 1.0;
}

double improper_law_weight(const ModelSpec& spec, const Eigen::VectorXd& theta,
                           const Eigen::VectorXd& theta_star, int r_theta,
                           const Eigen::Ref<const Eigen::MatrixXd>& y) {
  if (r_theta < 0) throw Error("improper_law_weight: r_theta must be >= 0");
  if (y.rows() <= r_theta)
    throw HorizonTooShortError("improper_law_weight: need n >= r_theta");

  const auto prefix = y.topRows(r_theta + 1);
  double log_p_lambda_full, log_p_lambda_prefix;
  if (spec.is_finite()) {
    log_p_lambda_full = counting_p_lambda(spec.finite(), theta, y.col(0));
    log_p_lambda_prefix = counting_p_lambda(spec.finite(), theta, prefix.col(0));
  } else if (spec.is_linear_gaussian()) {
    log_p_lambda_full = improper_forward_loglik(spec.linear_gaussian(), theta, y);
    log_p_lambda_prefix = improper_forward_loglik(spec.linear_gaussian(), theta, prefix);
  } else {
    throw UnsupportedError("improper_law_weight: nonlinear families out of scope");
  }
  if (log_p_lambda_prefix == kNegInf)
    throw DegenerateLikelihoodError("improper_law_weight: zero improper likelihood at the prefix");

  const double log_p_bar_prefix = loglik(spec, theta_star, InitialMeasure::Stationary(), prefix);
  return log_p_lambda_full - log_p_lambda_prefix + log_p_bar_prefix;
}

}  // namespace hmmlab
