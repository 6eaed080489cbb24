#include "splitstream/lyapunov.hpp"

#include <cmath>
#include <iostream>
#include <numeric>

namespace splitstream {

LyapunovEstimate estimate_lambda1(const DynamicalSystem& system, const StateVector& x0, const LyapunovOptions& options) {
  if (!(options.delta0 > 0)) throw ConfigurationError("delta0 must be positive");
  if (options.n_renorm < 1) throw ConfigurationError("n_renorm must be at least 1");
  if (x0.size() != system.dimension()) throw ConfigurationError("x0 dimension mismatch");

  const double dt = system.dt();
  const double interval = options.renorm_interval > 0 ? options.renorm_interval : 10.0 * dt;
  const auto window_steps = std::max<std::int64_t>(1, std::llround(interval / dt));
  const double transient = options.transient >= 0 ? options.transient : 0.1 * system.final_time();
  const auto transient_steps = std::llround(transient / dt);

  StateVector reference = x0;
  system.advance(reference, transient_steps);

  Engine engine(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  StateVector direction(reference.size());
  for (Eigen::Index i = 0; i < direction.size(); ++i) direction(i) = normal(engine);
  direction.normalize();
  StateVector perturbed = reference + options.delta0 * direction;

  LyapunovEstimate est;
  est.renorm_interval = static_cast<double>(window_steps) * dt;
  est.per_window_log_growth.reserve(options.n_renorm);

  std::int64_t step = transient_steps;
  for (std::int64_t w = 0; w < options.n_renorm; ++w) {
    // Measured rather than nominal starting separation: round-off in forming
    // the perturbed state must not register as growth.
    const double start = (perturbed - reference).norm();
    if (!(start > 0)) throw DegenerateError("perturbed trajectory coincides with the reference");
    system.advance(reference, window_steps, step);
    system.advance(perturbed, window_steps, step);
    step += window_steps;

    const StateVector diff = perturbed - reference;
    const double d = diff.norm();
    if (!(d > 0)) throw DegenerateError("separation collapsed to zero in window " + std::to_string(w));
    est.per_window_log_growth.push_back(std::log(d / start));
    perturbed = reference + (options.delta0 / d) * diff;
  }
  est.n_renormalizations = static_cast<std::int64_t>(est.per_window_log_growth.size());
  const double total = std::accumulate(est.per_window_log_growth.begin(), est.per_window_log_growth.end(), 0.0);
  est.lambda1 = total / static_cast<double>(est.n_renormalizations) / est.renorm_interval;
  return est;
}

std::vector<std::int64_t> checkpoint_steps(std::int64_t total_steps, int n_checkpoints) {
  if (n_checkpoints < 1) throw ConfigurationError("need at least one checkpoint");
  if (total_steps < n_checkpoints) throw ConfigurationError("more checkpoints than time steps");
  const std::int64_t base = total_steps / n_checkpoints;
  const std::int64_t extra = total_steps % n_checkpoints;
  std::vector<std::int64_t> steps;
  steps.reserve(n_checkpoints);
  std::int64_t acc = 0;
  for (int i = 0; i < n_checkpoints; ++i) {
    acc += base + (i < extra ? 1 : 0);
    steps.push_back(acc);
  }
  return steps;
}

namespace {

std::int64_t longest_interval(std::int64_t total_steps, int n) { return (total_steps + n - 1) / n; }

}  // namespace

int checkpoint_count(double lambda1, int n_checkpoints_hint, double final_time, double dt) {
  if (n_checkpoints_hint < 1) throw ConfigurationError("checkpoint hint must be positive");
  if (!(dt > 0) || !(final_time > 0)) throw ConfigurationError("invalid horizon");
  const auto total = static_cast<std::int64_t>(std::llround(final_time / dt));
  if (!std::isfinite(lambda1) || lambda1 <= 0) {
    std::cerr << "warning: non-positive Lyapunov exponent, using the uniform " << n_checkpoints_hint
              << "-checkpoint schedule\n";
    return n_checkpoints_hint;
  }
  const double limit = 1.0 / lambda1;
  int n = n_checkpoints_hint;
  while (n < total && static_cast<double>(longest_interval(total, n)) * dt > limit * (1 + 1e-12)) ++n;
  return n;
}

double selection_interval(double lambda1, int n_checkpoints_hint, double final_time, double dt) {
  const int n = checkpoint_count(lambda1, n_checkpoints_hint, final_time, dt);
  const auto total = static_cast<std::int64_t>(std::llround(final_time / dt));
  return static_cast<double>(longest_interval(total, n)) * dt;
}

}  // namespace splitstream
