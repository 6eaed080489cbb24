#include "splitstream/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "splitstream/lyapunov.hpp"
#include "splitstream/parallel.hpp"

namespace splitstream {

namespace {

constexpr double kMinWeight = 1e-30;
constexpr double kMaxWeight = 1e30;
constexpr std::uint64_t kTargetPathSalt = 0x7461726765745f70ULL;

}  // namespace

SelectionSchedule make_schedule(const DynamicalSystem& system, int n_checkpoints, WeightParams weights) {
  SelectionSchedule schedule;
  schedule.steps.push_back(0);
  for (auto s : checkpoint_steps(system.total_steps(), n_checkpoints)) schedule.steps.push_back(s);
  schedule.weights = weights;
  return schedule;
}

// ---------------------------------------------------------------------------

std::vector<StateVector> random_clone(const StateVector& parent, int n_copies, double epsilon, Engine& engine) {
  if (epsilon < 0) throw ConfigurationError("epsilon must be non-negative");
  if (n_copies < 0) throw ConfigurationError("n_copies must be non-negative");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<StateVector> copies;
  copies.reserve(n_copies);
  for (int c = 0; c < n_copies; ++c) {
    StateVector x = parent;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += epsilon * normal(engine);
    copies.push_back(std::move(x));
  }
  return copies;
}

RandomCloner::RandomCloner(double epsilon) : epsilon_(epsilon) {
  if (epsilon < 0) throw ConfigurationError("epsilon must be non-negative");
}

std::vector<StateVector> RandomCloner::clone(const Realization& parent, int n_copies, double /*time*/,
                                             Engine& engine) const {
  return random_clone(parent.state, n_copies, epsilon_, engine);
}

// ---------------------------------------------------------------------------

TargetPath target_path_from_mean(std::vector<double> mean_path, std::vector<double> checkpoint_times,
                                 double threshold) {
  if (mean_path.empty() || mean_path.size() != checkpoint_times.size())
    throw ConfigurationError("mean path and checkpoint times must be non-empty and of equal length");
  const double final_mean = mean_path.back();
  if (final_mean == 0.0 || !std::isfinite(final_mean))
    throw DegenerateError("mean QoI at the final checkpoint is zero; cannot rescale the target path");
  TargetPath path;
  path.checkpoint_times = std::move(checkpoint_times);
  path.q_star.reserve(mean_path.size());
  const double scale = threshold / final_mean;
  for (double q : mean_path) path.q_star.push_back(q * scale);
  path.q_star.back() = threshold;
  return path;
}

TargetPath compute_target_path(std::span<const Trajectory> trajectories, double threshold,
                               std::span<const double> checkpoint_times) {
  if (trajectories.size() < 2) throw ConfigurationError("target path needs at least two trajectories");
  std::vector<double> mean(checkpoint_times.size(), 0.0);
  for (const Trajectory& traj : trajectories) {
    if (traj.size() < 2) throw ConfigurationError("trajectory too short for a target path");
    const double step = traj.times[1] - traj.times[0];
    for (std::size_t c = 0; c < checkpoint_times.size(); ++c) {
      const double t = checkpoint_times[c];
      const auto it = std::lower_bound(traj.times.begin(), traj.times.end(), t - 0.5 * step);
      if (it == traj.times.end() || std::abs(*it - t) > 0.5 * step)
        throw ConfigurationError("trajectory does not cover checkpoint t=" + std::to_string(t));
      mean[c] += traj.qoi_series[static_cast<std::size_t>(it - traj.times.begin())];
    }
  }
  for (double& m : mean) m /= static_cast<double>(trajectories.size());
  return target_path_from_mean(std::move(mean), {checkpoint_times.begin(), checkpoint_times.end()}, threshold);
}

TargetPath build_target_path(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n_runs,
                             double threshold, std::span<const std::int64_t> steps, std::uint64_t seed) {
  if (n_runs < 2) throw ConfigurationError("target path needs at least two runs");
  if (steps.empty() || steps.front() != 0) throw ConfigurationError("schedule steps must start at 0");
  const std::uint64_t path_seed = derive_seed(seed, kTargetPathSalt);
  std::vector<std::vector<double>> per_run(n_runs);
  parallel_for(static_cast<std::size_t>(n_runs), [&](std::size_t r) {
    Engine engine = make_stream(path_seed, r, 0);
    StateVector x = sampler.sample(engine);
    auto& q = per_run[r];
    q.push_back(system.qoi(x));
    for (std::size_t c = 1; c < steps.size(); ++c) {
      system.advance(x, steps[c] - steps[c - 1], steps[c - 1]);
      q.push_back(system.qoi(x));
    }
  });
  std::vector<double> mean(steps.size(), 0.0);
  for (const auto& q : per_run)
    for (std::size_t c = 0; c < q.size(); ++c) mean[c] += q[c];
  std::vector<double> times;
  for (std::size_t c = 0; c < steps.size(); ++c) {
    mean[c] /= n_runs;
    times.push_back(static_cast<double>(steps[c]) * system.dt());
  }
  double ss = 0.0;
  for (const auto& q : per_run) ss += (q.back() - mean.back()) * (q.back() - mean.back());
  auto path = target_path_from_mean(std::move(mean), std::move(times), threshold);
  path.final_spread = std::sqrt(ss / (n_runs - 1));
  return path;
}

std::vector<double> selection_weights(std::span<const Realization> ensemble, const TargetPath& target,
                                      int checkpoint_index, const WeightParams& params) {
  if (checkpoint_index < 1 || static_cast<std::size_t>(checkpoint_index) >= target.q_star.size())
    throw ConfigurationError("checkpoint index out of range for the target path");
  if (!(params.qoi_scale > 0)) throw ConfigurationError("qoi_scale must be positive");
  const double q_now = target.q_star[checkpoint_index];
  const double q_prev = target.q_star[checkpoint_index - 1];
  std::vector<double> weights;
  weights.reserve(ensemble.size());
  bool clamped = false;
  for (const Realization& r : ensemble) {
    if (!r.alive) {
      weights.push_back(0.0);
      continue;
    }
    if (r.qoi_history.size() <= static_cast<std::size_t>(checkpoint_index))
      throw ConfigurationError("realization " + std::to_string(r.id) + " has no QoI at the checkpoint");
    const double v_now = -std::abs(r.qoi_history[checkpoint_index] - q_now) / params.qoi_scale;
    const double v_prev = -std::abs(r.qoi_history[checkpoint_index - 1] - q_prev) / params.qoi_scale;
    double w = std::exp(params.lambda_w * (v_now - v_prev));
    if (!(w >= kMinWeight) || w > kMaxWeight) {
      w = std::isnan(w) ? 1.0 : std::clamp(w, kMinWeight, kMaxWeight);
      clamped = true;
    }
    weights.push_back(w);
  }
  if (clamped) std::cerr << "warning: selection weights clamped at checkpoint " << checkpoint_index << '\n';
  return weights;
}

std::vector<int> resample_counts(std::span<const double> weights, int n, Engine& engine) {
  if (n < 1) throw ConfigurationError("ensemble size must be positive");
  if (weights.empty()) throw ConfigurationError("no weights to resample");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0) || !std::isfinite(w)) throw ConfigurationError("resampling weights must be positive and finite");
    total += w;
  }

  const std::size_t m = weights.size();
  std::vector<int> counts(m);
  std::vector<double> residual(m);
  long assigned = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const double expected = n * weights[j] / total;
    const double fl = std::floor(expected);
    counts[j] = static_cast<int>(fl);
    residual[j] = expected - fl;
    assigned += counts[j];
  }
  // Round-off can push the floors one past N.
  while (assigned > n) {
    std::size_t pick = m;
    for (std::size_t k = 0; k < m; ++k)
      if (counts[k] > 0 && (pick == m || residual[k] < residual[pick])) pick = k;
    --counts[pick];
    residual[pick] += 1.0;
    --assigned;
  }

  const long remaining = n - assigned;
  if (remaining > 0) {
    if (std::none_of(residual.begin(), residual.end(), [](double r) { return r > 0; }))
      residual.assign(weights.begin(), weights.end());
    std::discrete_distribution<std::size_t> pick(residual.begin(), residual.end());
    for (long r = 0; r < remaining; ++r) ++counts[pick(engine)];
  }
  return counts;
}

std::vector<Realization> apply_selection(std::span<const Realization> ensemble, std::span<const int> counts,
                                         std::span<const double> weights, const CloningStrategy& strategy, double time,
                                         int checkpoint_index, std::uint64_t master_seed, std::uint64_t& next_id,
                                         CheckpointRecord* record) {
  if (counts.size() != ensemble.size() || weights.size() != ensemble.size())
    throw ConfigurationError("counts and weights must match the ensemble size");
  const long n = std::accumulate(counts.begin(), counts.end(), 0L);
  double weight_sum = 0.0;
  long n_weighted = 0;
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    if (weights[j] > 0) {
      weight_sum += weights[j];
      ++n_weighted;
    } else if (counts[j] > 0) {
      throw ConfigurationError("a realization with zero weight cannot be selected");
    }
  }
  if (n_weighted == 0) throw ConfigurationError("all selection weights are zero");
  const double mean_weight = weight_sum / static_cast<double>(n);

  // Offspring for each parent are produced independently (possibly in parallel).
  std::vector<std::vector<StateVector>> clones(ensemble.size());
  parallel_for(ensemble.size(), [&](std::size_t j) {
    const int extra = counts[j] - 1;
    if (extra <= 0) return;
    Engine engine = make_stream(master_seed, ensemble[j].id, static_cast<std::uint64_t>(checkpoint_index));
    auto states = strategy.clone(ensemble[j], extra, time, engine);
    if (static_cast<int>(states.size()) != extra)
      throw ConfigurationError("cloning strategy '" + strategy.name() + "' returned the wrong number of states");
    for (const auto& s : states)
      if (s.size() != ensemble[j].state.size())
        throw ConfigurationError("cloning strategy '" + strategy.name() + "' returned a state of the wrong size");
    clones[j] = std::move(states);
  });

  std::vector<Realization> next;
  next.reserve(static_cast<std::size_t>(n));
  int n_clones = 0;
  double dist_sum = 0.0;
  double dist_max = 0.0;
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    if (counts[j] <= 0) continue;
    const Realization& parent = ensemble[j];
    const double importance = parent.importance * (mean_weight / weights[j]);

    Realization cont = parent;
    cont.id = next_id++;
    cont.parent_id = parent.id;
    cont.importance = importance;
    next.push_back(std::move(cont));

    for (auto& s : clones[j]) {
      const double d = (s - parent.state).norm();
      dist_sum += d;
      dist_max = std::max(dist_max, d);
      ++n_clones;
      Realization child;
      child.id = next_id++;
      child.parent_id = parent.id;
      child.state = std::move(s);
      child.importance = importance;
      child.qoi_history = parent.qoi_history;
      next.push_back(std::move(child));
    }
  }

  if (record) {
    record->index = checkpoint_index;
    record->time = time;
    record->weights.assign(weights.begin(), weights.end());
    record->counts.assign(counts.begin(), counts.end());
    record->n_clones = n_clones;
    record->mean_distance = n_clones > 0 ? dist_sum / n_clones : 0.0;
    record->max_distance = dist_max;
  }
  return next;
}

double estimate_probability(std::span<const Realization> ensemble, double threshold) {
  if (ensemble.empty()) return 0.0;
  double sum = 0.0;
  for (const Realization& r : ensemble)
    if (r.alive && !r.qoi_history.empty() && r.qoi_history.back() > threshold) sum += r.importance;
  return sum / static_cast<double>(ensemble.size());
}

// ---------------------------------------------------------------------------

SplittingReport run_gams(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                         double threshold, const SelectionSchedule& schedule, const CloningStrategy& strategy,
                         std::uint64_t seed, const GamsOptions& options) {
  if (n < 2) throw ConfigurationError("GAMS needs at least two realizations");
  const int n_cp = schedule.n_checkpoints();
  if (n_cp < 1 || schedule.steps.front() != 0 || schedule.steps.back() != system.total_steps())
    throw ConfigurationError("schedule must start at 0 and end at the final time");
  for (int c = 1; c <= n_cp; ++c)
    if (schedule.steps[c] <= schedule.steps[c - 1]) throw ConfigurationError("schedule steps must increase");
  if (n_cp > 1 && schedule.target.q_star.size() != schedule.steps.size())
    throw ConfigurationError("target path length does not match the schedule");

  SplittingReport report;
  report.threshold = threshold;
  report.n_realizations = n;
  report.seed = seed;
  report.strategy = strategy.name();

  std::vector<Realization> ensemble(n);
  for (int j = 0; j < n; ++j) {
    Engine engine = make_stream(seed, static_cast<std::uint64_t>(j), 0);
    Realization& r = ensemble[j];
    r.id = static_cast<std::uint64_t>(j);
    r.state = sampler.sample(engine);
    r.qoi_history.push_back(system.qoi(r.state));
  }
  std::uint64_t next_id = static_cast<std::uint64_t>(n);

  for (int c = 1; c <= n_cp; ++c) {
    const std::int64_t from = schedule.steps[c - 1];
    const std::int64_t len = schedule.steps[c] - from;
    std::vector<char> failed(ensemble.size(), 0);
    parallel_for(
        ensemble.size(),
        [&](std::size_t j) {
          Realization& r = ensemble[j];
          if (!r.alive) return;
          try {
            system.advance(r.state, len, from);
            r.qoi_history.push_back(system.qoi(r.state));
          } catch (const IntegrationBlowup&) {
            if (!options.salvage_blowups) throw;
            failed[j] = 1;
          }
        },
        options.threads);
    for (std::size_t j = 0; j < ensemble.size(); ++j) {
      if (!failed[j]) continue;
      ensemble[j].alive = false;
      ensemble[j].qoi_history.push_back(0.0);
      ++report.n_dropped;
    }

    if (c == n_cp) break;

    if (report.n_dropped > 0) {
      // Salvage mode: survivors repopulate the ensemble (biased).
      std::erase_if(ensemble, [](const Realization& r) { return !r.alive; });
      if (ensemble.empty()) throw DegenerateError("every realization blew up");
    }
    const auto weights = selection_weights(ensemble, schedule.target, c, schedule.weights);
    Engine resample_engine = make_stream(seed, kResampleStreamId, static_cast<std::uint64_t>(c));
    const auto counts = resample_counts(weights, n, resample_engine);
    CheckpointRecord record;
    const double time = static_cast<double>(schedule.steps[c]) * system.dt();
    ensemble = apply_selection(ensemble, counts, weights, strategy, time, c, seed, next_id, &record);
    report.checkpoint_log.push_back(std::move(record));
  }

  // Dropped members count as non-exceeding so the normalization stays N.
  auto estimate = [&](double a) { return estimate_probability(ensemble, a); };
  report.p_hat = estimate(threshold);
  report.thresholds = options.thresholds;
  for (double a : options.thresholds) report.p_hat_per_threshold.push_back(estimate(a));
  return report;
}

}  // namespace splitstream
