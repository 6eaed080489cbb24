#pragma once

#include <cstdint>
#include <vector>

#include "splitstream/dynsys.hpp"

namespace splitstream {

struct LyapunovEstimate {
  double lambda1 = 0.0;
  double renorm_interval = 0.0;
  std::int64_t n_renormalizations = 0;
  std::vector<double> per_window_log_growth;  // ln(d_i / d_start_i), one per window
};

struct LyapunovOptions {
  double delta0 = 1e-6;
  double renorm_interval = 0.0;  // <= 0 selects 10 dt
  std::int64_t n_renorm = 1000;
  double transient = -1.0;       // < 0 selects 10% of the final time
  std::uint64_t seed = 0;
};

/// Largest Lyapunov exponent from a reference and a perturbed trajectory,
/// renormalizing the separation back to delta0 after every window.
LyapunovEstimate estimate_lambda1(const DynamicalSystem& system, const StateVector& x0, const LyapunovOptions& options);

/// Cumulative step indices of the selection checkpoints. The horizon is split
/// into n_checkpoints intervals; when the division is not exact the earlier
/// intervals take the extra step. The last entry is always total_steps.
std::vector<std::int64_t> checkpoint_steps(std::int64_t total_steps, int n_checkpoints);

/// Smallest checkpoint count >= hint whose longest interval does not exceed
/// 1/lambda1. lambda1 <= 0 (or non-finite) returns the hint unchanged.
int checkpoint_count(double lambda1, int n_checkpoints_hint, double final_time, double dt);

/// Longest selection interval (a multiple of dt) of the schedule chosen by
/// checkpoint_count.
double selection_interval(double lambda1, int n_checkpoints_hint, double final_time, double dt);

}  // namespace splitstream
