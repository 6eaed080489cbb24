// splitstream command-line driver.

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include <CLI11.hpp>

#include "splitstream/dynsys.hpp"
#include "splitstream/errors.hpp"
#include "splitstream/genmodel.hpp"
#include "splitstream/lyapunov.hpp"
#include "splitstream/parallel.hpp"
#include "splitstream/report_io.hpp"
#include "splitstream/rng.hpp"
#include "splitstream/splitting.hpp"
#include "splitstream/stats.hpp"

namespace fs = std::filesystem;
using namespace splitstream;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitIo = 4;

constexpr std::uint64_t kGridSeed = 0x67726964ULL;

struct SystemDefaults {
  int checkpoints;
  double epsilon;
  double threshold;
};

SystemDefaults defaults_for(SystemKind kind) {
  if (kind == SystemKind::L96) return {64, 0.871, 1300.0};
  return {45, 0.1, 2.0};
}

// Each flag writes into a scratch config; only flags actually given are
// copied over the config file's values.
class FlagSet {
 public:
  explicit FlagSet(CLI::App& app) : app_(app) {}

  template <class T>
  void add(const std::string& name, T RunConfig::*member, const std::string& help) {
    auto* opt = app_.add_option(name, scratch_.*member, help);
    if constexpr (std::is_same_v<T, std::vector<double>>) opt->delimiter(',');
    copiers_.push_back([opt, member](RunConfig& dst, const RunConfig& src) {
      if (opt->count() > 0) dst.*member = src.*member;
    });
  }

  template <class T>
  void add_optional(const std::string& name, std::optional<T> RunConfig::*member, const std::string& help) {
    auto value = std::make_shared<T>();
    auto* opt = app_.add_option(name, *value, help);
    copiers_.push_back([opt, member, value](RunConfig& dst, const RunConfig&) {
      if (opt->count() > 0) dst.*member = *value;
    });
  }

  void add_flag(const std::string& name, bool RunConfig::*member, bool value_when_set, const std::string& help) {
    auto* opt = app_.add_flag(name, help);
    copiers_.push_back([opt, member, value_when_set](RunConfig& dst, const RunConfig&) {
      if (opt->count() > 0) dst.*member = value_when_set;
    });
  }

  void add_system(const std::string& name) {
    auto value = std::make_shared<std::string>();
    auto* opt = app_.add_option(name, *value, "l96 or kse")->check(CLI::IsMember({"l96", "kse"}));
    copiers_.push_back([opt, value](RunConfig& dst, const RunConfig&) {
      if (opt->count() > 0) dst.system = parse_system_kind(*value);
    });
  }

  RunConfig resolve(RunConfig base) const {
    for (const auto& copy : copiers_) copy(base, scratch_);
    return base;
  }

 private:
  CLI::App& app_;
  RunConfig scratch_;
  std::vector<std::function<void(RunConfig&, const RunConfig&)>> copiers_;
};

SystemSpec spec_for(const RunConfig& c) {
  SystemSpec spec = SystemSpec::defaults_for(c.system);
  if (c.kse_nonlinear_scale) spec.nonlinear_scale = *c.kse_nonlinear_scale;
  if (c.rk2_variant == "midpoint")
    spec.rk2_variant = Rk2Variant::Midpoint;
  else if (c.rk2_variant != "heun")
    throw ConfigurationError("rk2_variant must be heun or midpoint");
  if (c.final_time_override > 0) spec.final_time = c.final_time_override;
  spec.validate();
  return spec;
}

double headline_threshold(const RunConfig& c) { return c.threshold.value_or(defaults_for(c.system).threshold); }

std::vector<double> threshold_grid(const RunConfig& c, const DynamicalSystem& system,
                                   const InitialConditionSampler& sampler) {
  std::vector<double> grid{headline_threshold(c)};
  if (!c.thresholds.empty()) {
    grid.insert(grid.end(), c.thresholds.begin(), c.thresholds.end());
    return grid;
  }
  if (c.n_thresholds < 1) return grid;
  const auto pilot = final_qoi_samples(system, sampler, std::max(2, c.grid_runs), kGridSeed);
  const auto range = thresholds_from_samples(pilot, c.n_thresholds);
  grid.insert(grid.end(), range.begin(), range.end());
  return grid;
}

void echo_config(const RunConfig& c) { write_json(fs::path(c.out_dir) / "config.json", to_json(c)); }

int cmd_simulate(const RunConfig& c) {
  const auto spec = spec_for(c);
  const auto system = make_system(spec);
  const auto sampler = InitialConditionSampler::for_system(spec, c.master_seed);
  Engine engine = make_stream(c.master_seed, 0, 0);
  const auto traj = integrate(*system, sampler.sample(engine), 0.0, spec.final_time);
  write_trajectory_csv(fs::path(c.out_dir) / "trajectory.csv", traj);
  return 0;
}

int cmd_mc(const RunConfig& c) {
  const auto spec = spec_for(c);
  const auto system = make_system(spec);
  const auto sampler = InitialConditionSampler::for_system(spec, c.master_seed);
  const auto grid = threshold_grid(c, *system, sampler);
  auto runner = [&](std::uint64_t seed) {
    const auto q = final_qoi_samples(*system, sampler, c.n, seed);
    std::vector<double> p;
    for (double a : grid) p.push_back(exceedance_fraction(q, a));
    return p;
  };
  EstimateReport report;
  if (c.repetitions >= 2)
    report = repeated_experiment(runner, c.repetitions, c.master_seed, grid, EstimatorMethod::MC, c.n);
  else
    report = mc_estimate(*system, sampler, c.n, grid, c.master_seed);
  write_json(fs::path(c.out_dir) / "estimate_report.json", to_json(report));
  write_probability_curve_csv(fs::path(c.out_dir) / "probability_curve.csv", report);
  std::cout << "p_mean " << report.p_mean << " at a=" << report.threshold << '\n';
  return 0;
}

struct GainOutcome {
  std::vector<GainResult> gains;
};

GainOutcome write_gain(const fs::path& dir, const EstimateReport& mc, EstimateReport& split) {
  GainOutcome out{gain_curve(mc, split)};
  write_gain_curve_csv(dir / "gain_curve.csv", mc, split, out.gains);
  const auto& head = out.gains.front();
  if (head.status == GainResult::Status::Gain || head.status == GainResult::Status::Infinite)
    split.gain_vs_mc = head.value;
  nlohmann::json summary = {{"threshold", split.threshold},
                            {"status", to_string(head.status)},
                            {"gain", head.status == GainResult::Status::Gain ? nlohmann::json(head.value)
                                     : head.status == GainResult::Status::Infinite ? nlohmann::json("inf")
                                                                                   : nlohmann::json(nullptr)}};
  write_json(dir / "gain_summary.json", summary);
  if (head.status == GainResult::Status::Gain)
    std::cout << "gain " << head.value << '\n';
  else
    std::cout << to_string(head.status) << '\n';
  return out;
}

int cmd_gams(const RunConfig& c) {
  const auto spec = spec_for(c);
  const auto system = make_system(spec);
  const auto sampler = InitialConditionSampler::for_system(spec, c.master_seed);
  const auto defaults = defaults_for(c.system);
  const double a = headline_threshold(c);
  const double epsilon = c.epsilon.value_or(defaults.epsilon);

  std::unique_ptr<CloningStrategy> strategy;
  if (c.clone_strategy == "random") {
    strategy = std::make_unique<RandomCloner>(epsilon);
  } else if (c.clone_strategy == "ganisp") {
    if (c.weights_path.empty()) throw CLI::ValidationError("--weights", "ganisp cloning requires --weights");
    auto weights = std::make_shared<const GeneratorWeights>(load_weights(c.weights_path));
    if (weights->output_dim != spec.dimension)
      throw ConfigurationError("generator output size does not match the system dimension");
    PsoConfig pso;
    pso.n_particles = c.pso_particles;
    pso.n_iterations = c.pso_iterations;
    GanispCloneConfig cfg{spec.stationary_onset, epsilon, c.match_parent};
    const DynamicalSystem* sys = system.get();
    strategy = std::make_unique<GanispCloner>(weights, pso, cfg, [sys](const StateVector& x) { return sys->qoi(x); });
  } else {
    throw CLI::ValidationError("--clone-strategy", "must be random or ganisp");
  }

  auto schedule = make_schedule(*system, c.checkpoints.value_or(defaults.checkpoints), {c.lambda_w, epsilon, 1.0});
  schedule.target = build_target_path(*system, sampler, c.target_runs, a, schedule.steps, c.master_seed);
  schedule.weights.qoi_scale = c.qoi_scale.value_or(schedule.target.final_spread);

  const auto grid = threshold_grid(c, *system, sampler);
  GamsOptions options;
  options.thresholds = grid;
  options.salvage_blowups = c.salvage_blowups;

  const fs::path dir(c.out_dir);
  const auto single = run_gams(*system, sampler, c.n, a, schedule, *strategy, c.master_seed, options);
  write_json(dir / "splitting_report.json", to_json(single));
  write_clone_distance_csv(dir / "clone_distances.csv", single);
  std::cout << "p_hat " << single.p_hat << " at a=" << a << '\n';

  if (c.repetitions < 2) return 0;
  const auto method = c.clone_strategy == "ganisp" ? EstimatorMethod::Ganisp : EstimatorMethod::GamsRandom;
  auto runner = [&](std::uint64_t seed) {
    return run_gams(*system, sampler, c.n, a, schedule, *strategy, seed, options).p_hat_per_threshold;
  };
  auto report = repeated_experiment(runner, c.repetitions, c.master_seed, grid, method, c.n);
  if (!c.baseline_path.empty()) {
    const auto mc = estimate_report_from_json(read_json(c.baseline_path));
    write_gain(dir, mc, report);
  }
  write_json(dir / "estimate_report.json", to_json(report));
  write_probability_curve_csv(dir / "probability_curve.csv", report);
  std::cout << "p_mean " << report.p_mean << " p_std " << report.p_std.value_or(0.0) << '\n';
  return 0;
}

int cmd_lyapunov(const RunConfig& c) {
  const auto spec = spec_for(c);
  const auto system = make_system(spec);
  const auto sampler = InitialConditionSampler::for_system(spec, c.master_seed);
  Engine engine = make_stream(c.master_seed, 0, 0);
  LyapunovOptions options;
  options.delta0 = c.delta0;
  options.renorm_interval = c.renorm_interval;
  options.n_renorm = c.n_renorm;
  options.seed = c.master_seed;
  const auto estimate = estimate_lambda1(*system, sampler.sample(engine), options);
  auto j = to_json(estimate);
  const int hint = c.checkpoints.value_or(defaults_for(c.system).checkpoints);
  j["checkpoints"] = checkpoint_count(estimate.lambda1, hint, spec.final_time, spec.dt);
  j["selection_interval"] = selection_interval(estimate.lambda1, hint, spec.final_time, spec.dt);
  write_json(fs::path(c.out_dir) / "lyapunov.json", j);
  std::cout << "lambda1 " << estimate.lambda1 << '\n';
  return 0;
}

int cmd_collect(const RunConfig& c) {
  const auto spec = spec_for(c);
  SnapshotOptions options;
  options.n_runs = c.runs;
  options.per_run = c.per_run;
  options.onset = c.onset;
  options.spacing = c.spacing;
  options.holdout = c.holdout;
  options.seed = c.master_seed;
  const fs::path dir(c.out_dir);
  const auto info = collect_snapshots(spec, options, dir / "dataset.csv", dir / "dataset_index.json");
  std::cout << info.n_rows << " rows, " << info.holdout_rows.size() << " held out\n";
  return 0;
}

int cmd_gain(const RunConfig& c) {
  if (c.mc_path.empty() || c.split_path.empty()) throw CLI::ValidationError("gain", "--mc and --split are required");
  const auto mc = estimate_report_from_json(read_json(c.mc_path));
  auto split = estimate_report_from_json(read_json(c.split_path));
  write_gain(fs::path(c.out_dir), mc, split);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rare-event probability estimation by genealogical splitting"};
  app.require_subcommand(1);

  struct Command {
    CLI::App* app;
    std::unique_ptr<FlagSet> flags;
    std::function<int(const RunConfig&)> run;
  };
  std::vector<Command> commands;
  std::string config_path;

  auto add_command = [&](const std::string& name, const std::string& help, std::function<int(const RunConfig&)> run) {
    auto* sub = app.add_subcommand(name, help);
    auto flags = std::make_unique<FlagSet>(*sub);
    sub->add_option("--config", config_path, "JSON config; flags given on the command line take precedence");
    flags->add_system("--system");
    flags->add("--seed", &RunConfig::master_seed, "master seed");
    flags->add("--out-dir", &RunConfig::out_dir, "output directory");
    flags->add_optional("--threads", &RunConfig::threads, "worker threads (fallback: SPLITSTREAM_THREADS)");
    flags->add_optional("--kse-nonlinear-scale", &RunConfig::kse_nonlinear_scale,
                        "coefficient of the KSE advection term");
    flags->add("--rk2-variant", &RunConfig::rk2_variant, "heun or midpoint");
    flags->add("--final-time", &RunConfig::final_time_override, "override the horizon T (multiple of dt)");
    commands.push_back({sub, std::move(flags), std::move(run)});
    return commands.back().flags.get();
  };

  auto add_estimation = [](FlagSet* f) {
    f->add("--n", &RunConfig::n, "realizations per run");
    f->add("--repetitions", &RunConfig::repetitions, "independent repetitions");
    f->add_optional("--threshold", &RunConfig::threshold, "headline threshold a");
    f->add("--thresholds", &RunConfig::thresholds, "extra thresholds (default: log grid over the QoI range)");
    f->add("--n-thresholds", &RunConfig::n_thresholds, "size of the default threshold grid");
    f->add("--grid-runs", &RunConfig::grid_runs, "pilot runs used to size the threshold grid");
  };

  add_command("simulate", "integrate one trajectory and export it as CSV", cmd_simulate);

  add_estimation(add_command("mc", "repeated Monte Carlo estimation", cmd_mc));

  auto* gams = add_command("gams", "splitting estimation", cmd_gams);
  add_estimation(gams);
  gams->add_optional("--checkpoints", &RunConfig::checkpoints, "selection checkpoints");
  gams->add_optional("--epsilon", &RunConfig::epsilon, "random-clone noise magnitude");
  gams->add("--lambda-w", &RunConfig::lambda_w, "selection strength");
  gams->add_optional("--qoi-scale", &RunConfig::qoi_scale, "reaction-coordinate scale (default: pilot spread)");
  gams->add("--target-runs", &RunConfig::target_runs, "pilot runs for the target path");
  gams->add("--clone-strategy", &RunConfig::clone_strategy, "random or ganisp");
  gams->add("--weights", &RunConfig::weights_path, "generator manifest");
  gams->add_flag("--no-match-parent", &RunConfig::match_parent, false, "draw latent vectors without matching");
  gams->add_flag("--salvage-blowups", &RunConfig::salvage_blowups, true, "drop blown-up members (biased)");
  gams->add("--baseline", &RunConfig::baseline_path, "MC estimate report for the gain summary");
  gams->add("--pso-particles", &RunConfig::pso_particles, "swarm size");
  gams->add("--pso-iterations", &RunConfig::pso_iterations, "swarm iterations");

  auto* lyap = add_command("lyapunov", "largest Lyapunov exponent", cmd_lyapunov);
  lyap->add("--n-renorm", &RunConfig::n_renorm, "renormalizations");
  lyap->add("--renorm-interval", &RunConfig::renorm_interval, "time between renormalizations (default 10 dt)");
  lyap->add("--delta0", &RunConfig::delta0, "initial separation");
  lyap->add_optional("--checkpoints", &RunConfig::checkpoints, "checkpoint count hint");

  auto* collect = add_command("collect", "snapshot dataset for generator training", cmd_collect);
  collect->add("--runs", &RunConfig::runs, "independent runs");
  collect->add("--per-run", &RunConfig::per_run, "snapshots per run");
  collect->add("--onset", &RunConfig::onset, "time of the first snapshot");
  collect->add("--spacing", &RunConfig::spacing, "time between snapshots");
  collect->add("--holdout", &RunConfig::holdout, "rows reserved for testing");

  auto* gain = add_command("gain", "computational gain from two estimate reports", cmd_gain);
  gain->add("--mc", &RunConfig::mc_path, "MC estimate report");
  gain->add("--split", &RunConfig::split_path, "splitting estimate report");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  for (auto& cmd : commands) {
    if (!cmd.app->parsed()) continue;
    try {
      RunConfig base;
      if (!config_path.empty()) base = run_config_from_json(read_json(config_path));
      RunConfig config = cmd.flags->resolve(base);
      config.command = cmd.app->get_name();
      if (config.threads) set_default_threads(*config.threads);
      std::error_code ec;
      fs::create_directories(config.out_dir, ec);
      if (ec) throw IoError("cannot create " + config.out_dir + ": " + ec.message());
      echo_config(config);
      return cmd.run(config);
    } catch (const CLI::Error& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const ConfigurationError& e) {
      std::cerr << "configuration error: " << e.what() << '\n';
      return kExitUsage;
    } catch (const IoError& e) {
      std::cerr << "I/O error: " << e.what() << '\n';
      return kExitIo;
    } catch (const LoadError& e) {
      std::cerr << "weights error: " << e.what() << '\n';
      return kExitIo;
    } catch (const std::exception& e) {
      std::cerr << "numerical failure: " << e.what() << '\n';
      return kExitNumerical;
    }
  }
  return kExitUsage;
}
