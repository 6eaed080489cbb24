#include "splitstream/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numeric>
#include <set>

#include <json.hpp>

#include "splitstream/parallel.hpp"

namespace splitstream {

namespace {

constexpr std::uint64_t kHoldoutSalt = 0x686f6c646f7574ULL;

}  // namespace

std::string to_string(EstimatorMethod method) {
  switch (method) {
    case EstimatorMethod::MC: return "MC";
    case EstimatorMethod::GamsRandom: return "GAMS_random";
    case EstimatorMethod::Ganisp: return "GANISP";
  }
  return "?";
}

EstimatorMethod parse_estimator_method(const std::string& name) {
  if (name == "MC") return EstimatorMethod::MC;
  if (name == "GAMS_random") return EstimatorMethod::GamsRandom;
  if (name == "GANISP") return EstimatorMethod::Ganisp;
  throw ConfigurationError("unknown estimator method '" + name + "'");
}

std::string to_string(GainResult::Status status) {
  switch (status) {
    case GainResult::Status::Gain: return "gain";
    case GainResult::Status::Biased: return "biased";
    case GainResult::Status::Infinite: return "infinite";
    case GainResult::Status::Undefined: return "undefined";
  }
  return "?";
}

std::vector<double> final_qoi_samples(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                                      std::uint64_t seed, unsigned threads) {
  if (n < 1) throw ConfigurationError("MC needs at least one realization");
  std::vector<double> q(static_cast<std::size_t>(n));
  const auto steps = system.total_steps();
  parallel_for(
      q.size(),
      [&](std::size_t j) {
        Engine engine = make_stream(seed, j, 0);
        StateVector x = sampler.sample(engine);
        system.advance(x, steps);
        q[j] = system.qoi(x);
      },
      threads);
  return q;
}

double exceedance_fraction(std::span<const double> final_qoi, double threshold) {
  if (final_qoi.empty()) return 0.0;
  double sum = 0.0;
  for (double q : final_qoi)
    if (q > threshold) sum += 1.0;
  return sum / static_cast<double>(final_qoi.size());
}

EstimateReport mc_estimate(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                           std::span<const double> thresholds, std::uint64_t seed) {
  if (thresholds.empty()) throw ConfigurationError("mc_estimate needs at least one threshold");
  const auto q = final_qoi_samples(system, sampler, n, seed);
  EstimateReport rep;
  rep.method = EstimatorMethod::MC;
  rep.threshold = thresholds.front();
  rep.n_repetitions = 1;
  rep.n_realizations_each = n;
  rep.seed = seed;
  for (double a : thresholds) rep.per_threshold.push_back({a, exceedance_fraction(q, a), std::nullopt});
  rep.p_mean = rep.per_threshold.front().p_mean;
  return rep;
}

double theoretical_mc_variance(double p, int n) {
  if (p < 0 || p > 1) throw ConfigurationError("probability must lie in [0, 1]");
  if (n < 1) throw ConfigurationError("N must be positive");
  return (p - p * p) / n;
}

EstimateReport repeated_experiment(const EstimatorRunner& runner, int r, std::uint64_t base_seed,
                                   std::span<const double> thresholds, EstimatorMethod method, int n_each) {
  if (r < 2) throw ConfigurationError("repeated experiments need at least two repetitions");
  if (thresholds.empty()) throw ConfigurationError("repeated experiments need at least one threshold");
  const std::size_t m = thresholds.size();
  std::vector<std::vector<double>> samples(m);
  for (int i = 0; i < r; ++i) {
    const std::uint64_t seed = derive_seed(base_seed, static_cast<std::uint64_t>(i));
    std::vector<double> p;
    try {
      p = runner(seed);
    } catch (const std::exception& e) {
      throw RepetitionError(seed, e.what());
    }
    if (p.size() != m) throw RepetitionError(seed, "runner returned the wrong number of estimates");
    for (std::size_t k = 0; k < m; ++k) samples[k].push_back(p[k]);
  }

  EstimateReport rep;
  rep.method = method;
  rep.threshold = thresholds.front();
  rep.n_repetitions = r;
  rep.n_realizations_each = n_each;
  rep.seed = base_seed;
  for (std::size_t k = 0; k < m; ++k) {
    const auto& s = samples[k];
    const double mean = std::accumulate(s.begin(), s.end(), 0.0) / r;
    double ss = 0.0;
    for (double v : s) ss += (v - mean) * (v - mean);
    rep.per_threshold.push_back({thresholds[k], mean, std::sqrt(ss / (r - 1))});
  }
  rep.p_mean = rep.per_threshold.front().p_mean;
  rep.p_std = rep.per_threshold.front().p_std;
  return rep;
}

GainResult computational_gain(double var_mc, double var_split, const BiasCheck& bias) {
  if (var_mc < 0 || var_split < 0) throw ConfigurationError("variances must be non-negative");
  const double combined = std::hypot(bias.stderr_mc, bias.stderr_split);
  if (std::abs(bias.p_split - bias.p_mc) > bias.tolerance * combined) return {GainResult::Status::Biased, 0.0};
  if (var_split == 0.0) {
    if (var_mc == 0.0) return {GainResult::Status::Undefined, 0.0};
    std::cerr << "warning: splitting variance is zero, reporting an infinite gain\n";
    return {GainResult::Status::Infinite, std::numeric_limits<double>::infinity()};
  }
  return {GainResult::Status::Gain, var_mc / var_split};
}

std::vector<GainResult> gain_curve(const EstimateReport& mc, const EstimateReport& split, double tolerance) {
  if (mc.per_threshold.size() != split.per_threshold.size())
    throw ConfigurationError("reports use different threshold grids");
  if (split.n_repetitions < 2) throw ConfigurationError("gain needs a repeated splitting experiment");
  // A single MC run serves as a reference: binomial variance at the splitting
  // run's size, standard error at its own size.
  const bool reference = mc.n_repetitions < 2;
  if (reference && (mc.n_realizations_each < 1 || split.n_realizations_each < 1))
    throw ConfigurationError("reference gain needs realization counts on both reports");
  std::vector<GainResult> out;
  for (std::size_t k = 0; k < mc.per_threshold.size(); ++k) {
    const auto& a = mc.per_threshold[k];
    const auto& b = split.per_threshold[k];
    if (std::abs(a.a - b.a) > 1e-12 * std::max(1.0, std::abs(a.a)))
      throw ConfigurationError("reports use different threshold grids");
    const double ss = b.p_std.value_or(0.0);
    double var_mc, se_mc;
    if (reference) {
      var_mc = theoretical_mc_variance(a.p_mean, split.n_realizations_each);
      se_mc = std::sqrt(theoretical_mc_variance(a.p_mean, mc.n_realizations_each));
    } else {
      const double sm = a.p_std.value_or(0.0);
      var_mc = sm * sm;
      se_mc = sm / std::sqrt(mc.n_repetitions);
    }
    BiasCheck bias{a.p_mean, b.p_mean, se_mc, ss / std::sqrt(split.n_repetitions), tolerance};
    out.push_back(computational_gain(var_mc, ss * ss, bias));
  }
  return out;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0) || !(hi >= lo) || n < 1) throw ConfigurationError("log_spaced needs 0 < lo <= hi and n >= 1");
  std::vector<double> out;
  out.reserve(n);
  if (n == 1) return {lo};
  const double step = std::log(hi / lo) / (n - 1);
  for (int i = 0; i < n; ++i) out.push_back(lo * std::exp(step * i));
  out.back() = hi;
  return out;
}

std::vector<double> thresholds_from_samples(std::span<const double> samples, int n) {
  if (samples.empty()) throw ConfigurationError("no samples to build a threshold grid from");
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  return log_spaced(std::max(*lo, 1e-300), std::max(*hi, 1e-300), n);
}

DatasetInfo collect_snapshots(const SystemSpec& spec, const SnapshotOptions& options,
                              const std::filesystem::path& csv_path, const std::filesystem::path& index_path) {
  spec.validate();
  if (options.n_runs < 1 || options.per_run < 1) throw ConfigurationError("need at least one run and one snapshot");
  if (options.onset < 0 || !(options.spacing > 0)) throw ConfigurationError("invalid snapshot onset or spacing");
  const double last = options.onset + (options.per_run - 1) * options.spacing;
  if (last > spec.final_time + 1e-9)
    throw ConfigurationError("last snapshot at t=" + std::to_string(last) + " exceeds the final time");

  const auto system = make_system(spec);
  const double dt = spec.dt;
  std::vector<std::int64_t> snap_steps;
  for (int k = 0; k < options.per_run; ++k) {
    const double t = options.onset + k * options.spacing;
    const auto s = std::llround(t / dt);
    if (std::abs(static_cast<double>(s) * dt - t) > 1e-9 * std::max(1.0, t))
      throw ConfigurationError("snapshot time " + std::to_string(t) + " is not a multiple of dt");
    snap_steps.push_back(s);
  }

  const auto sampler = InitialConditionSampler::for_system(spec, options.seed);
  std::vector<std::vector<StateVector>> snaps(static_cast<std::size_t>(options.n_runs));
  parallel_for(
      snaps.size(),
      [&](std::size_t r) {
        Engine engine = make_stream(options.seed, r, 0);
        StateVector x = sampler.sample(engine);
        std::int64_t at = 0;
        for (auto s : snap_steps) {
          system->advance(x, s - at, at);
          at = s;
          snaps[r].push_back(x);
        }
      },
      options.threads);

  DatasetInfo info;
  std::ofstream out(csv_path);
  if (!out) throw IoError("cannot open " + csv_path.string());
  out << 'q';
  for (int i = 0; i < spec.dimension; ++i) out << ",x" << i;
  out << '\n' << std::setprecision(17);
  for (const auto& run : snaps)
    for (const auto& x : run) {
      out << system->qoi(x);
      for (Eigen::Index i = 0; i < x.size(); ++i) out << ',' << x(i);
      out << '\n';
      ++info.n_rows;
    }
  if (!out) throw IoError("failed writing " + csv_path.string());

  std::size_t holdout = static_cast<std::size_t>(std::max(0, options.holdout));
  if (holdout > info.n_rows) {
    std::cerr << "warning: holdout of " << holdout << " rows exceeds the dataset, reserving all " << info.n_rows
              << '\n';
    holdout = info.n_rows;
  }
  std::vector<std::size_t> rows(info.n_rows);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  Engine engine(derive_seed(options.seed, kHoldoutSalt));
  // Partial Fisher-Yates keeps the draw independent of the standard library's shuffle.
  for (std::size_t i = 0; i < holdout; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, rows.size() - 1);
    std::swap(rows[i], rows[pick(engine)]);
  }
  info.holdout_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(holdout));
  std::sort(info.holdout_rows.begin(), info.holdout_rows.end());

  nlohmann::json index = {{"n_rows", info.n_rows},
                          {"holdout_row_indices", info.holdout_rows},
                          {"seed", options.seed},
                          {"spec",
                           {{"system", to_string(spec.kind)},
                            {"dimension", spec.dimension},
                            {"dt", spec.dt},
                            {"final_time", spec.final_time},
                            {"domain_length", spec.domain_length},
                            {"nonlinear_scale", spec.nonlinear_scale},
                            {"n_runs", options.n_runs},
                            {"per_run", options.per_run},
                            {"onset", options.onset},
                            {"spacing", options.spacing}}}};
  std::ofstream idx(index_path);
  if (!idx) throw IoError("cannot open " + index_path.string());
  idx << index.dump(2) << '\n';
  if (!idx) throw IoError("failed writing " + index_path.string());
  return info;
}

}  // namespace splitstream
