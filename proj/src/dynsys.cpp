#include "splitstream/dynsys.hpp"

#include <unsupported/Eigen/FFT>

#include <fstream>
#include <iomanip>
#include <numbers>

namespace splitstream {

std::string to_string(SystemKind kind) { return kind == SystemKind::L96 ? "l96" : "kse"; }

SystemKind parse_system_kind(const std::string& name) {
  if (name == "l96" || name == "L96") return SystemKind::L96;
  if (name == "kse" || name == "KSE") return SystemKind::KSE;
  throw ConfigurationError("unknown system '" + name + "' (expected l96 or kse)");
}

SystemSpec SystemSpec::lorenz96() {
  SystemSpec s;
  s.kind = SystemKind::L96;
  s.dimension = 32;
  s.dt = 0.001;
  s.final_time = 1.27;
  s.forcing = 256.0;
  s.stationary_onset = 0.0;
  return s;
}

SystemSpec SystemSpec::kuramoto_sivashinsky() {
  SystemSpec s;
  s.kind = SystemKind::KSE;
  s.dimension = 128;
  s.dt = 0.25;
  s.final_time = 150.0;
  s.forcing = 0.0;
  s.domain_length = 32.0 * std::numbers::pi;
  s.stationary_onset = 50.0;
  return s;
}

SystemSpec SystemSpec::defaults_for(SystemKind kind) {
  return kind == SystemKind::L96 ? lorenz96() : kuramoto_sivashinsky();
}

void SystemSpec::validate() const {
  if (dimension <= 0) throw ConfigurationError("dimension must be positive");
  if (!(dt > 0)) throw ConfigurationError("dt must be positive");
  if (!(final_time > 0)) throw ConfigurationError("final time must be positive");
  const double ratio = final_time / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio) || std::round(ratio) < 1)
    throw ConfigurationError("final time must be a positive integer multiple of dt");
  if (kind == SystemKind::KSE) {
    if (!(domain_length > 0)) throw ConfigurationError("KSE domain length must be positive");
    if (dimension % 2 != 0) throw ConfigurationError("KSE grid size must be even");
    if (contour_points < 4) throw ConfigurationError("contour_points must be at least 4");
    if (!std::isfinite(nonlinear_scale)) throw ConfigurationError("nonlinear_scale must be finite");
  }
  if (stationary_onset < 0 || stationary_onset > final_time)
    throw ConfigurationError("stationary onset must lie in [0, T]");
}

std::int64_t SystemSpec::total_steps() const { return static_cast<std::int64_t>(std::llround(final_time / dt)); }

StateVector l96_rhs_checked(const StateVector& x, double forcing, int expected_dimension) {
  if (x.size() != expected_dimension)
    throw ConfigurationError("L96 state has dimension " + std::to_string(x.size()) + ", expected " +
                             std::to_string(expected_dimension));
  return l96_rhs(x, forcing);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::FFT<double>& thread_fft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

}  // namespace

SpectralVector to_spectral(const StateVector& field) {
  SpectralVector out;
  thread_fft().fwd(out, field);
  return out;
}

StateVector to_physical(const SpectralVector& half_spectrum, int n_points) {
  if (half_spectrum.size() != n_points / 2 + 1)
    throw ConfigurationError("half spectrum length does not match the grid size");
  StateVector out(n_points);
  thread_fft().inv(out, half_spectrum, n_points);
  return out;
}

Etdrk4Coefficients kse_etdrk4_precompute(const SystemSpec& spec) {
  if (spec.kind != SystemKind::KSE) throw ConfigurationError("ETDRK4 coefficients requested for a non-KSE system");
  spec.validate();

  Etdrk4Coefficients c;
  c.n_points = spec.dimension;
  c.dt = spec.dt;
  c.nonlinear_scale = spec.nonlinear_scale;
  const int n_modes = spec.dimension / 2 + 1;
  const int cutoff = spec.dimension / 3;  // 42 for 128 points
  const double h = spec.dt;
  const int m = spec.contour_points;

  c.wavenumber.resize(n_modes);
  c.linear.resize(n_modes);
  c.e_full.resize(n_modes);
  c.e_half.resize(n_modes);
  c.q.resize(n_modes);
  c.f1.resize(n_modes);
  c.f2.resize(n_modes);
  c.f3.resize(n_modes);
  c.dealias.resize(n_modes);

  using cd = std::complex<double>;
  std::vector<cd> roots(m);
  for (int j = 0; j < m; ++j)
    roots[j] = std::polar(1.0, 2.0 * std::numbers::pi * (j + 0.5) / m);

  for (int k = 0; k < n_modes; ++k) {
    const double kp = 2.0 * std::numbers::pi * k / spec.domain_length;
    const double lin = kp * kp - kp * kp * kp * kp;
    c.wavenumber(k) = kp;
    c.linear(k) = lin;
    c.e_full(k) = std::exp(lin * h);
    c.e_half(k) = std::exp(lin * h / 2);
    c.dealias(k) = k <= cutoff ? 1.0 : 0.0;

    // Contour averages avoid cancellation near L h = 0.
    cd q{}, f1{}, f2{}, f3{};
    for (const cd& r : roots) {
      const cd z = lin * h + r;
      const cd ez = std::exp(z);
      const cd z3 = z * z * z;
      q += (std::exp(z / 2.0) - 1.0) / z;
      f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
      f2 += (2.0 + z + ez * (-2.0 + z)) / z3;
      f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
    }
    c.q(k) = h * q.real() / m;
    c.f1(k) = h * f1.real() / m;
    c.f2(k) = h * f2.real() / m;
    c.f3(k) = h * f3.real() / m;
  }
  return c;
}

SpectralVector kse_nonlinear(const SpectralVector& v, const Etdrk4Coefficients& c) {
  const SpectralVector truncated = v.cwiseProduct(c.dealias.cast<std::complex<double>>());
  const StateVector u = to_physical(truncated, c.n_points);
  const StateVector u2 = u.array().square().matrix();
  const SpectralVector u2_hat = to_spectral(u2);
  const std::complex<double> minus_i(0.0, -c.nonlinear_scale);
  return (minus_i * u2_hat.array() * c.wavenumber.array() * c.dealias.array()).matrix();
}

SpectralVector kse_etdrk4_step(const SpectralVector& v, const Etdrk4Coefficients& c, std::int64_t step_index) {
  const Eigen::Index n_modes = c.linear.size();
  if (v.size() != n_modes) throw ConfigurationError("spectral state length does not match the coefficients");

  SpectralVector out;
  if (!c.nonlinear) {
    out = (v.array() * c.e_full.array()).matrix();
  } else {
    const auto e2 = c.e_half.array();
    const auto q = c.q.array();
    const SpectralVector nv = kse_nonlinear(v, c);
    const SpectralVector a = (e2 * v.array() + q * nv.array()).matrix();
    const SpectralVector na = kse_nonlinear(a, c);
    const SpectralVector b = (e2 * v.array() + q * na.array()).matrix();
    const SpectralVector nb = kse_nonlinear(b, c);
    const SpectralVector cc = (e2 * a.array() + q * (2.0 * nb.array() - nv.array())).matrix();
    const SpectralVector nc = kse_nonlinear(cc, c);
    out = (c.e_full.array() * v.array() + nv.array() * c.f1.array() + 2.0 * (na.array() + nb.array()) * c.f2.array() +
           nc.array() * c.f3.array())
              .matrix();
  }
  if (!out.allFinite()) throw IntegrationBlowup(step_index, "ETDRK4 step produced a non-finite coefficient");
  return out;
}

StateVector kse_mean_profile(int n_points, double domain_length) {
  StateVector profile(n_points);
  for (int j = 0; j < n_points; ++j) {
    const double x = domain_length * j / n_points;
    profile(j) = std::cos(x / 16.0) * (1.0 + std::sin(x / 16.0));
  }
  return profile;
}

// ---------------------------------------------------------------------------

double qoi(const StateVector& state, SystemKind kind) {
  if (kind == SystemKind::L96) {
    if (state.size() != 32) throw ConfigurationError("L96 QoI expects a 32-dimensional state");
    return state.squaredNorm() / 64.0;
  }
  if (state.size() != 128) throw ConfigurationError("KSE QoI expects a 128-point state");
  return state.squaredNorm() / 128.0;
}

// ---------------------------------------------------------------------------

Lorenz96System::Lorenz96System(SystemSpec spec) : spec_(std::move(spec)) {
  if (spec_.kind != SystemKind::L96) throw ConfigurationError("Lorenz96System needs an L96 spec");
  spec_.validate();
}

double Lorenz96System::qoi(const StateVector& state) const {
  if (state.size() != spec_.dimension) throw ConfigurationError("L96 state dimension mismatch");
  return state.squaredNorm() / (2.0 * spec_.dimension);
}

void Lorenz96System::step(StateVector& state, std::int64_t step_index) const {
  if (state.size() != spec_.dimension) throw ConfigurationError("L96 state dimension mismatch");
  const double forcing = spec_.forcing;
  state = rk2_step(state, [forcing](const StateVector& x) { return l96_rhs(x, forcing); }, spec_.dt,
                   spec_.rk2_variant, step_index);
}

KuramotoSivashinskySystem::KuramotoSivashinskySystem(SystemSpec spec)
    : spec_(std::move(spec)), coeffs_(kse_etdrk4_precompute(spec_)) {}

double KuramotoSivashinskySystem::qoi(const StateVector& state) const {
  if (state.size() != spec_.dimension) throw ConfigurationError("KSE state dimension mismatch");
  return state.squaredNorm() / spec_.dimension;
}

void KuramotoSivashinskySystem::step(StateVector& state, std::int64_t step_index) const {
  if (state.size() != spec_.dimension) throw ConfigurationError("KSE state dimension mismatch");
  const SpectralVector next = kse_etdrk4_step(to_spectral(state), coeffs_, step_index);
  state = to_physical(next, spec_.dimension);
  if (!state.allFinite()) throw IntegrationBlowup(step_index, "KSE field became non-finite");
}

OdeSystem::OdeSystem(int dimension, double dt, double final_time, Rhs rhs, Qoi qoi, Rk2Variant variant)
    : dimension_(dimension), dt_(dt), final_time_(final_time), rhs_(std::move(rhs)), qoi_(std::move(qoi)),
      variant_(variant) {
  if (dimension <= 0 || !(dt > 0) || !(final_time > 0)) throw ConfigurationError("invalid OdeSystem parameters");
}

void OdeSystem::step(StateVector& state, std::int64_t step_index) const {
  state = rk2_step(state, rhs_, dt_, variant_, step_index);
}

std::unique_ptr<DynamicalSystem> make_system(const SystemSpec& spec) {
  if (spec.kind == SystemKind::L96) return std::make_unique<Lorenz96System>(spec);
  return std::make_unique<KuramotoSivashinskySystem>(spec);
}

// ---------------------------------------------------------------------------

InitialConditionSampler::InitialConditionSampler(StateVector mean_profile, double noise_std, std::uint64_t seed)
    : mean_(std::move(mean_profile)), noise_std_(noise_std), seed_(seed), engine_(seed) {
  if (noise_std < 0) throw ConfigurationError("noise_std must be non-negative");
}

InitialConditionSampler InitialConditionSampler::for_system(const SystemSpec& spec, std::uint64_t seed) {
  if (spec.kind == SystemKind::L96) return {StateVector::Zero(spec.dimension), 1.0, seed};
  return {kse_mean_profile(spec.dimension, spec.domain_length), 0.1, seed};
}

StateVector InitialConditionSampler::sample() { return sample(engine_); }

StateVector InitialConditionSampler::sample(Engine& engine) const {
  StateVector out = mean_;
  if (noise_std_ == 0.0) return out;
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < out.size(); ++i) out(i) += noise_std_ * normal(engine);
  return out;
}

// ---------------------------------------------------------------------------

Trajectory integrate(const DynamicalSystem& system, const StateVector& state, double t_start, double t_end) {
  if (state.size() != system.dimension()) throw ConfigurationError("initial state dimension mismatch");
  if (t_end < t_start) throw ConfigurationError("integrate: t_end precedes t_start");
  const double dt = system.dt();
  const double ratio = (t_end - t_start) / dt;
  const auto n_steps = static_cast<std::int64_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(n_steps)) > 1e-9 * std::max(1.0, ratio))
    throw ConfigurationError("integrate: interval is not an integer number of steps");
  const auto first_step = static_cast<std::int64_t>(std::llround(t_start / dt));

  Trajectory traj;
  traj.times.reserve(n_steps + 1);
  traj.states.reserve(n_steps + 1);
  traj.qoi_series.reserve(n_steps + 1);

  StateVector x = state;
  traj.times.push_back(t_start);
  traj.states.push_back(x);
  traj.qoi_series.push_back(system.qoi(x));
  for (std::int64_t s = 0; s < n_steps; ++s) {
    system.step(x, first_step + s);
    traj.times.push_back(t_start + static_cast<double>(s + 1) * dt);
    traj.states.push_back(x);
    traj.qoi_series.push_back(system.qoi(x));
  }
  return traj;
}

Trajectory integrate(const StateVector& state, const SystemSpec& spec, double t_start, double t_end) {
  return integrate(*make_system(spec), state, t_start, t_end);
}

void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const Eigen::Index d = trajectory.states.empty() ? 0 : trajectory.states.front().size();
  out << "t,q";
  for (Eigen::Index i = 0; i < d; ++i) out << ",x" << i;
  out << '\n' << std::setprecision(17);
  for (std::size_t r = 0; r < trajectory.size(); ++r) {
    out << trajectory.times[r] << ',' << trajectory.qoi_series[r];
    for (Eigen::Index i = 0; i < d; ++i) out << ',' << trajectory.states[r](i);
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace splitstream
