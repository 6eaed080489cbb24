#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "splitstream/dynsys.hpp"

namespace splitstream {

enum class EstimatorMethod { MC, GamsRandom, Ganisp };

std::string to_string(EstimatorMethod method);
EstimatorMethod parse_estimator_method(const std::string& name);

struct ThresholdEstimate {
  double a = 0.0;
  double p_mean = 0.0;
  std::optional<double> p_std;  // only with two or more repetitions
};

struct EstimateReport {
  EstimatorMethod method = EstimatorMethod::MC;
  double threshold = 0.0;       // the headline threshold a
  double p_mean = 0.0;
  std::optional<double> p_std;
  int n_repetitions = 1;
  int n_realizations_each = 0;
  std::uint64_t seed = 0;
  std::vector<ThresholdEstimate> per_threshold;
  std::optional<double> gain_vs_mc;
};

/// Final-time QoI of n independent runs; run j draws its initial condition
/// from make_stream(seed, j, 0), the same stream splitting uses for member j.
std::vector<double> final_qoi_samples(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                                      std::uint64_t seed, unsigned threads = 0);

/// (1/N) sum 1{Q_j > a}.
double exceedance_fraction(std::span<const double> final_qoi, double threshold);

/// Plain Monte Carlo estimate at each threshold; thresholds[0] is the headline.
EstimateReport mc_estimate(const DynamicalSystem& system, const InitialConditionSampler& sampler, int n,
                           std::span<const double> thresholds, std::uint64_t seed);

/// (p - p^2) / N.
double theoretical_mc_variance(double p, int n);

/// One estimator run at the given seed, returning P-hat per threshold.
using EstimatorRunner = std::function<std::vector<double>(std::uint64_t seed)>;

/// Thrown when a repetition fails; carries the seed of the failing run.
class RepetitionError : public std::runtime_error {
 public:
  RepetitionError(std::uint64_t seed, const std::string& what)
      : std::runtime_error("repetition with seed " + std::to_string(seed) + " failed: " + what), seed_(seed) {}
  std::uint64_t seed() const noexcept { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Runs the estimator r times with seeds derive_seed(base_seed, i) and reports
/// the mean and (r-1)-normalized standard deviation per threshold.
EstimateReport repeated_experiment(const EstimatorRunner& runner, int r, std::uint64_t base_seed,
                                   std::span<const double> thresholds, EstimatorMethod method, int n_each);

struct BiasCheck {
  double p_mc = 0.0;
  double p_split = 0.0;
  double stderr_mc = 0.0;     // standard error of p_mc
  double stderr_split = 0.0;  // standard error of p_split
  double tolerance = 3.0;     // in combined standard errors
};

struct GainResult {
  enum class Status { Gain, Biased, Infinite, Undefined };
  Status status = Status::Undefined;
  double value = 0.0;  // var_mc / var_split when status == Gain

  bool has_gain() const { return status == Status::Gain || status == Status::Infinite; }
};

std::string to_string(GainResult::Status status);

/// var_mc / var_split, gated on |p_split - p_mc| <= tolerance * combined stderr.
GainResult computational_gain(double var_mc, double var_split, const BiasCheck& bias);

/// Gain per threshold between two reports on the same grid. The splitting
/// report must be a repeated experiment. A single-run MC report is treated as
/// a reference: var_mc = p(1-p)/N_split, stderr from its own N.
std::vector<GainResult> gain_curve(const EstimateReport& mc, const EstimateReport& split, double tolerance = 3.0);

/// n geometrically spaced values from lo to hi inclusive.
std::vector<double> log_spaced(double lo, double hi, int n);

/// Log-spaced grid over [min, max] of the observed values.
std::vector<double> thresholds_from_samples(std::span<const double> samples, int n);

struct SnapshotOptions {
  int n_runs = 1000;
  int per_run = 10;
  double onset = 50.0;
  double spacing = 10.0;
  int holdout = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

struct DatasetInfo {
  std::size_t n_rows = 0;
  std::vector<std::size_t> holdout_rows;
};

/// Writes rows (q, x0..x{d-1}) ordered by (run, snapshot) to csv_path, and the
/// companion index {n_rows, holdout_row_indices, seed, spec} to index_path.
DatasetInfo collect_snapshots(const SystemSpec& spec, const SnapshotOptions& options,
                              const std::filesystem::path& csv_path, const std::filesystem::path& index_path);

}  // namespace splitstream
