#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "splitstream/lyapunov.hpp"
#include "splitstream/splitting.hpp"
#include "splitstream/stats.hpp"

namespace splitstream {

using nlohmann::json;

json to_json(const SplittingReport& report);
json to_json(const LyapunovEstimate& estimate);
json to_json(const EstimateReport& report);
EstimateReport estimate_report_from_json(const json& j);

/// checkpoint,t,mean_dist,max_dist
void write_clone_distance_csv(const std::filesystem::path& path, const SplittingReport& report);
/// a,p_mean,p_std (p_std empty for single runs)
void write_probability_curve_csv(const std::filesystem::path& path, const EstimateReport& report);
/// a,p_mc,p_split,status,gain
void write_gain_curve_csv(const std::filesystem::path& path, const EstimateReport& mc, const EstimateReport& split,
                          const std::vector<GainResult>& gains);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

/// Every command-line setting. Unset optionals take per-system defaults.
struct RunConfig {
  std::string command;
  SystemKind system = SystemKind::L96;
  int n = 100;
  int repetitions = 100;
  std::uint64_t master_seed = 0;
  std::optional<int> checkpoints;
  std::optional<double> epsilon;
  double lambda_w = 1.0;
  std::optional<double> qoi_scale;
  std::optional<double> threshold;
  std::vector<double> thresholds;
  int n_thresholds = 12;
  int grid_runs = 1000;  // pilot runs whose QoI range sets the threshold grid
  int target_runs = 100;
  std::string clone_strategy = "random";
  std::string weights_path;
  bool match_parent = true;
  bool salvage_blowups = false;
  std::string baseline_path;
  std::string mc_path;
  std::string split_path;
  std::optional<unsigned> threads;
  std::optional<double> kse_nonlinear_scale;
  std::string rk2_variant = "heun";
  double final_time_override = 0.0;  // 0 keeps the system default
  // lyapunov
  int n_renorm = 1000;
  double renorm_interval = 0.0;
  double delta0 = 1e-6;
  // collect
  int runs = 1000;
  int per_run = 10;
  double onset = 50.0;
  double spacing = 10.0;
  int holdout = 100;
  // pso
  int pso_particles = 256;
  int pso_iterations = 60;
  std::string out_dir = ".";
};

json to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig run_config_from_json(const json& j, RunConfig base = {});

}  // namespace splitstream
