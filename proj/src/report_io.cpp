#include "splitstream/report_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <set>

#include "splitstream/errors.hpp"

namespace splitstream {

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no infinity; gains that are infinite are written as strings.
json number_or_marker(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return nullptr;
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

template <class T>
void read_field(const json& j, const char* key, T& into) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) into = it->get<T>();
}

template <class T>
void read_optional(const json& j, const char* key, std::optional<T>& into) {
  if (auto it = j.find(key); it != j.end()) {
    if (it->is_null())
      into.reset();
    else
      into = it->get<T>();
  }
}

}  // namespace

json to_json(const SplittingReport& report) {
  json log = json::array();
  for (const auto& c : report.checkpoint_log)
    log.push_back({{"index", c.index},
                   {"t", c.time},
                   {"n_clones", c.n_clones},
                   {"mean_dist", c.mean_distance},
                   {"max_dist", c.max_distance},
                   {"counts", c.counts}});
  json per = json::array();
  for (std::size_t k = 0; k < report.thresholds.size(); ++k)
    per.push_back({{"a", report.thresholds[k]}, {"p_hat", report.p_hat_per_threshold[k]}});
  return {{"threshold", report.threshold},
          {"p_hat", report.p_hat},
          {"n_realizations", report.n_realizations},
          {"seed", report.seed},
          {"strategy", report.strategy},
          {"n_dropped", report.n_dropped},
          {"per_threshold", per},
          {"checkpoints", log}};
}

json to_json(const LyapunovEstimate& estimate) {
  return {{"lambda1", estimate.lambda1},
          {"renorm_interval", estimate.renorm_interval},
          {"n_renormalizations", estimate.n_renormalizations}};
}

json to_json(const EstimateReport& report) {
  json per = json::array();
  for (const auto& t : report.per_threshold)
    per.push_back({{"a", t.a}, {"p_mean", t.p_mean}, {"p_std", optional_json(t.p_std)}});
  return {{"method", to_string(report.method)},
          {"threshold", report.threshold},
          {"p_mean", report.p_mean},
          {"p_std", optional_json(report.p_std)},
          {"n_repetitions", report.n_repetitions},
          {"n_realizations_each", report.n_realizations_each},
          {"seed", report.seed},
          {"per_threshold", per},
          {"gain_vs_mc", report.gain_vs_mc ? number_or_marker(*report.gain_vs_mc) : json(nullptr)}};
}

EstimateReport estimate_report_from_json(const json& j) {
  try {
    EstimateReport r;
    r.method = parse_estimator_method(j.at("method").get<std::string>());
    r.threshold = j.at("threshold").get<double>();
    r.p_mean = j.at("p_mean").get<double>();
    read_optional(j, "p_std", r.p_std);
    r.n_repetitions = j.at("n_repetitions").get<int>();
    r.n_realizations_each = j.at("n_realizations_each").get<int>();
    read_field(j, "seed", r.seed);
    for (const auto& t : j.at("per_threshold")) {
      ThresholdEstimate e;
      e.a = t.at("a").get<double>();
      e.p_mean = t.at("p_mean").get<double>();
      read_optional(t, "p_std", e.p_std);
      r.per_threshold.push_back(e);
    }
    if (auto it = j.find("gain_vs_mc"); it != j.end() && !it->is_null()) {
      if (it->is_string())
        r.gain_vs_mc = it->get<std::string>() == "-inf" ? -std::numeric_limits<double>::infinity()
                                                        : std::numeric_limits<double>::infinity();
      else
        r.gain_vs_mc = it->get<double>();
    }
    return r;
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed estimate report: ") + e.what());
  }
}

void write_clone_distance_csv(const std::filesystem::path& path, const SplittingReport& report) {
  auto out = open_out(path);
  out << "checkpoint,t,mean_dist,max_dist\n";
  for (const auto& c : report.checkpoint_log)
    out << c.index << ',' << c.time << ',' << c.mean_distance << ',' << c.max_distance << '\n';
  finish(out, path);
}

void write_probability_curve_csv(const std::filesystem::path& path, const EstimateReport& report) {
  auto out = open_out(path);
  out << "a,p_mean,p_std\n";
  for (const auto& t : report.per_threshold) {
    out << t.a << ',' << t.p_mean << ',';
    if (t.p_std) out << *t.p_std;
    out << '\n';
  }
  finish(out, path);
}

void write_gain_curve_csv(const std::filesystem::path& path, const EstimateReport& mc, const EstimateReport& split,
                          const std::vector<GainResult>& gains) {
  if (gains.size() != mc.per_threshold.size() || gains.size() != split.per_threshold.size())
    throw ConfigurationError("gain curve does not match the report grids");
  auto out = open_out(path);
  out << "a,p_mc,p_split,status,gain\n";
  for (std::size_t k = 0; k < gains.size(); ++k) {
    out << mc.per_threshold[k].a << ',' << mc.per_threshold[k].p_mean << ',' << split.per_threshold[k].p_mean << ','
        << to_string(gains[k].status) << ',';
    if (gains[k].status == GainResult::Status::Gain) out << gains[k].value;
    if (gains[k].status == GainResult::Status::Infinite) out << "inf";
    out << '\n';
  }
  finish(out, path);
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << j.dump(2) << '\n';
  finish(out, path);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigurationError(path.string() + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  auto opt_int = [](const std::optional<int>& v) { return v ? json(*v) : json(nullptr); };
  return {{"command", c.command},
          {"system", to_string(c.system)},
          {"n", c.n},
          {"repetitions", c.repetitions},
          {"master_seed", c.master_seed},
          {"checkpoints", opt_int(c.checkpoints)},
          {"epsilon", optional_json(c.epsilon)},
          {"lambda_w", c.lambda_w},
          {"qoi_scale", optional_json(c.qoi_scale)},
          {"threshold", optional_json(c.threshold)},
          {"thresholds", c.thresholds},
          {"n_thresholds", c.n_thresholds},
          {"grid_runs", c.grid_runs},
          {"target_runs", c.target_runs},
          {"clone_strategy", c.clone_strategy},
          {"weights_path", c.weights_path},
          {"match_parent", c.match_parent},
          {"salvage_blowups", c.salvage_blowups},
          {"baseline_path", c.baseline_path},
          {"mc_path", c.mc_path},
          {"split_path", c.split_path},
          {"threads", c.threads ? json(*c.threads) : json(nullptr)},
          {"kse_nonlinear_scale", optional_json(c.kse_nonlinear_scale)},
          {"rk2_variant", c.rk2_variant},
          {"final_time_override", c.final_time_override},
          {"n_renorm", c.n_renorm},
          {"renorm_interval", c.renorm_interval},
          {"delta0", c.delta0},
          {"runs", c.runs},
          {"per_run", c.per_run},
          {"onset", c.onset},
          {"spacing", c.spacing},
          {"holdout", c.holdout},
          {"pso_particles", c.pso_particles},
          {"pso_iterations", c.pso_iterations},
          {"out_dir", c.out_dir}};
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigurationError("config must be a JSON object");
  const json known = to_json(RunConfig{});
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ConfigurationError("unknown config key '" + key + "'");
  try {
    read_field(j, "command", c.command);
    if (auto it = j.find("system"); it != j.end() && !it->is_null())
      c.system = parse_system_kind(it->get<std::string>());
    read_field(j, "n", c.n);
    read_field(j, "repetitions", c.repetitions);
    read_field(j, "master_seed", c.master_seed);
    read_optional(j, "checkpoints", c.checkpoints);
    read_optional(j, "epsilon", c.epsilon);
    read_field(j, "lambda_w", c.lambda_w);
    read_optional(j, "qoi_scale", c.qoi_scale);
    read_optional(j, "threshold", c.threshold);
    read_field(j, "thresholds", c.thresholds);
    read_field(j, "n_thresholds", c.n_thresholds);
    read_field(j, "grid_runs", c.grid_runs);
    read_field(j, "target_runs", c.target_runs);
    read_field(j, "clone_strategy", c.clone_strategy);
    read_field(j, "weights_path", c.weights_path);
    read_field(j, "match_parent", c.match_parent);
    read_field(j, "salvage_blowups", c.salvage_blowups);
    read_field(j, "baseline_path", c.baseline_path);
    read_field(j, "mc_path", c.mc_path);
    read_field(j, "split_path", c.split_path);
    read_optional(j, "threads", c.threads);
    read_optional(j, "kse_nonlinear_scale", c.kse_nonlinear_scale);
    read_field(j, "rk2_variant", c.rk2_variant);
    read_field(j, "final_time_override", c.final_time_override);
    read_field(j, "n_renorm", c.n_renorm);
    read_field(j, "renorm_interval", c.renorm_interval);
    read_field(j, "delta0", c.delta0);
    read_field(j, "runs", c.runs);
    read_field(j, "per_run", c.per_run);
    read_field(j, "onset", c.onset);
    read_field(j, "spacing", c.spacing);
    read_field(j, "holdout", c.holdout);
    read_field(j, "pso_particles", c.pso_particles);
    read_field(j, "pso_iterations", c.pso_iterations);
    read_field(j, "out_dir", c.out_dir);
  } catch (const json::exception& e) {
    throw ConfigurationError(std::string("malformed config: ") + e.what());
  }
  return c;
}

}  // namespace splitstream
