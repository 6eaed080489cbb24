#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitstream/dynsys.hpp"

namespace splitstream {

/// One ensemble member.
struct Realization {
  std::uint64_t id = 0;
  std::optional<std::uint64_t> parent_id;
  StateVector state;
  double importance = 1.0;          // likelihood-ratio weight, always > 0
  std::vector<double> qoi_history;  // one entry per checkpoint reached, starting at t = 0
  bool alive = true;                // false only in salvage mode after a blow-up
};

/// Target reaction-coordinate values at t = 0 and at every checkpoint.
struct TargetPath {
  std::vector<double> checkpoint_times;
  std::vector<double> q_star;
  double final_spread = 0.0;  // std of the pilot ensemble's final QoI, 0 when unknown
};

struct WeightParams {
  double lambda_w = 1.0;   // selection strength; 0 disables selection
  double epsilon = 0.0;    // random-clone noise magnitude
  double qoi_scale = 1.0;  // V = -|Q - q*| / qoi_scale
};

/// Checkpoint layout plus the weighting it is driven by. steps[0] = 0 and
/// steps.back() = total steps; target.checkpoint_times has the same length.
struct SelectionSchedule {
  std::vector<std::int64_t> steps;
  TargetPath target;
  WeightParams weights;

  int n_checkpoints() const { return static_cast<int>(steps.size()) - 1; }
};

/// Schedule with n_checkpoints intervals (earlier intervals take the remainder).
/// The target path is left empty.
SelectionSchedule make_schedule(const DynamicalSystem& system, int n_checkpoints, WeightParams weights);

// ---------------------------------------------------------------------------
// Cloning
// ---------------------------------------------------------------------------

/// Produces offspring states for a parent. Implementations must be safe to
/// call concurrently for different parents and must not touch the parent.
class CloningStrategy {
 public:
  virtual ~CloningStrategy() = default;
  /// Exactly n_copies states of the parent's dimension. engine is the
  /// parent's private stream for this checkpoint.
  virtual std::vector<StateVector> clone(const Realization& parent, int n_copies, double time,
                                         Engine& engine) const = 0;
  virtual std::string name() const = 0;
};

/// parent + epsilon * eta, eta ~ N(0, I), per copy.
std::vector<StateVector> random_clone(const StateVector& parent, int n_copies, double epsilon, Engine& engine);

class RandomCloner final : public CloningStrategy {
 public:
  explicit RandomCloner(double epsilon);
  std::vector<StateVector> clone(const Realization& parent, int n_copies, double time, Engine& engine) const override;
  std::string name() const override { return "random"; }
  double epsilon() const { return epsilon_; }

 private:
  double epsilon_;
};

// ---------------------------------------------------------------------------
// Selection
// ---------------------------------------------------------------------------

/// Ensemble-mean QoI at the checkpoint times, rescaled so the final value is a.
TargetPath compute_target_path(std::span<const Trajectory> trajectories, double threshold,
                               std::span<const double> checkpoint_times);

/// Same construction from an already averaged QoI path.
TargetPath target_path_from_mean(std::vector<double> mean_path, std::vector<double> checkpoint_times, double threshold);

/// Runs n_runs unbiased trajectories and builds the target path for the schedule.
/// Also records the spread of their final QoI, the natural qoi_scale.
TargetPath build_target_path(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n_runs,
                             double threshold, std::span<const std::int64_t> steps, std::uint64_t seed);

/// w_j = exp(lambda_w (V_j(t_i) - V_j(t_{i-1}))), V = -|Q - q*| / qoi_scale,
/// clamped to [1e-30, 1e30]. Dead realizations get weight 0.
std::vector<double> selection_weights(std::span<const Realization> ensemble, const TargetPath& target,
                                      int checkpoint_index, const WeightParams& params);

/// Residual resampling: floor(N w_j / sum w) copies plus a multinomial draw of
/// the remainder on the residual probabilities. Counts sum to N.
std::vector<int> resample_counts(std::span<const double> weights, int n, Engine& engine);

struct CheckpointRecord {
  int index = 0;
  double time = 0.0;
  std::vector<double> weights;
  std::vector<int> counts;
  int n_clones = 0;
  double mean_distance = 0.0;  // mean ||clone - parent||_2 over generated clones
  double max_distance = 0.0;
};

/// Prunes zero-count realizations; each survivor continues unperturbed and
/// gains count - 1 strategy clones. Every child carries
/// importance * (mean(w) / w_parent) and a fresh id.
std::vector<Realization> apply_selection(std::span<const Realization> ensemble, std::span<const int> counts,
                                         std::span<const double> weights, const CloningStrategy& strategy, double time,
                                         int checkpoint_index, std::uint64_t master_seed, std::uint64_t& next_id,
                                         CheckpointRecord* record = nullptr);

/// (1/N) sum importance_j 1{Q_j(T) > a}, using the last QoI entry.
double estimate_probability(std::span<const Realization> ensemble, double threshold);

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct GamsOptions {
  std::vector<double> thresholds;  // extra thresholds reported alongside a
  bool salvage_blowups = false;    // drop blown-up members instead of aborting (biased)
  unsigned threads = 0;
};

struct SplittingReport {
  double threshold = 0.0;
  double p_hat = 0.0;
  int n_realizations = 0;
  std::uint64_t seed = 0;
  std::string strategy;
  std::vector<double> thresholds;
  std::vector<double> p_hat_per_threshold;
  std::vector<CheckpointRecord> checkpoint_log;
  int n_dropped = 0;
};

/// Interacting-particle splitting run with N members. Selection happens at
/// every checkpoint before the final time.
SplittingReport run_gams(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                         double threshold, const SelectionSchedule& schedule, const CloningStrategy& strategy,
                         std::uint64_t seed, const GamsOptions& options = {});

}  // namespace splitstream
