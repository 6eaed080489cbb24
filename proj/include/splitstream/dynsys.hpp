#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "splitstream/errors.hpp"
#include "splitstream/rng.hpp"

namespace splitstream {

using StateVector = Eigen::VectorXd;
/// Half spectrum (n/2 + 1 coefficients) of a real periodic field.
using SpectralVector = Eigen::VectorXcd;

enum class SystemKind { L96, KSE };
enum class Rk2Variant { Heun, Midpoint };

std::string to_string(SystemKind kind);
SystemKind parse_system_kind(const std::string& name);

struct SystemSpec {
  SystemKind kind = SystemKind::L96;
  int dimension = 32;
  double dt = 0.001;
  double final_time = 1.27;
  double forcing = 256.0;            // L96 only
  double domain_length = 0.0;        // KSE only
  double stationary_onset = 0.0;
  Rk2Variant rk2_variant = Rk2Variant::Heun;
  int contour_points = 32;           // KSE phi-function contour resolution
  /// KSE advection is -c d(xi^2)/dx. 0.5 gives the xi xi_x form whose statistics
  /// put P(Q > 2) near 0.1 at T = 150; 1.0 is the literal d(xi^2)/dx form.
  double nonlinear_scale = 0.5;

  static SystemSpec lorenz96();
  static SystemSpec kuramoto_sivashinsky();
  static SystemSpec defaults_for(SystemKind kind);

  /// Throws ConfigurationError unless dt > 0, T > 0 and T/dt is a positive integer.
  void validate() const;
  std::int64_t total_steps() const;
};

// ---------------------------------------------------------------------------
// Lorenz 96
// ---------------------------------------------------------------------------

/// dxi_i/dt = xi_{i-1} (xi_{i+1} - xi_{i-2}) + F - xi_i with cyclic indices.
template <typename Derived>
typename Derived::PlainObject l96_rhs(const Eigen::MatrixBase<Derived>& x, typename Derived::Scalar forcing) {
  const Eigen::Index n = x.size();
  typename Derived::PlainObject out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto im1 = x((i + n - 1) % n);
    const auto im2 = x((i + n - 2) % n);
    const auto ip1 = x((i + 1) % n);
    out(i) = im1 * (ip1 - im2) + forcing - x(i);
  }
  return out;
}

/// Checked variant that enforces the 32-dimensional configuration.
StateVector l96_rhs_checked(const StateVector& x, double forcing, int expected_dimension = 32);

/// One explicit second-order Runge-Kutta step. Heun (explicit trapezoidal) by
/// default; the midpoint rule is available for comparison runs.
template <typename Derived, typename Rhs>
typename Derived::PlainObject rk2_step(const Eigen::MatrixBase<Derived>& x, Rhs&& rhs, typename Derived::Scalar dt,
                                       Rk2Variant variant = Rk2Variant::Heun, std::int64_t step_index = -1) {
  using Plain = typename Derived::PlainObject;
  if (!(dt > 0)) throw ConfigurationError("rk2_step: dt must be positive");
  const Plain k1 = rhs(x.derived());
  Plain out;
  if (variant == Rk2Variant::Heun) {
    const Plain predictor = x + dt * k1;
    const Plain k2 = rhs(predictor);
    out = x + (dt / 2) * (k1 + k2);
  } else {
    const Plain mid = x + (dt / 2) * k1;
    out = x + dt * rhs(mid);
  }
  if (!out.allFinite()) throw IntegrationBlowup(step_index, "rk2_step produced a non-finite state");
  return out;
}

// ---------------------------------------------------------------------------
// Kuramoto-Sivashinsky, ETDRK4 in Fourier space
// ---------------------------------------------------------------------------

struct Etdrk4Coefficients {
  int n_points = 128;
  double dt = 0.25;
  Eigen::VectorXd wavenumber;  // k' = 2 pi k / L, k = 0 .. n/2
  Eigen::VectorXd linear;      // L_k = k'^2 - k'^4
  Eigen::VectorXd e_full;      // exp(L dt)
  Eigen::VectorXd e_half;      // exp(L dt / 2)
  Eigen::VectorXd q;           // dt * phi-type coefficient for the half-step stages
  Eigen::VectorXd f1, f2, f3;  // final-stage weights
  Eigen::VectorXd dealias;     // 1 for retained modes, 0 for |k| > n/3
  double nonlinear_scale = 0.5;
  bool nonlinear = true;       // false integrates only the linear part
};

Etdrk4Coefficients kse_etdrk4_precompute(const SystemSpec& spec);

SpectralVector to_spectral(const StateVector& field);
StateVector to_physical(const SpectralVector& half_spectrum, int n_points);

/// -c d(xi^2)/dx evaluated pseudo-spectrally with 2/3-rule truncation.
SpectralVector kse_nonlinear(const SpectralVector& v, const Etdrk4Coefficients& c);

SpectralVector kse_etdrk4_step(const SpectralVector& v, const Etdrk4Coefficients& c, std::int64_t step_index = -1);

/// cos(x/16)(1 + sin(x/16)) on the n-point grid over [0, L).
StateVector kse_mean_profile(int n_points, double domain_length);

// ---------------------------------------------------------------------------
// Quantity of interest
// ---------------------------------------------------------------------------

/// L96: (1/64) sum xi_i^2 over 32 components. KSE: (1/128) sum xi_i^2.
double qoi(const StateVector& state, SystemKind kind);

// ---------------------------------------------------------------------------
// Systems
// ---------------------------------------------------------------------------

/// A deterministic system advanced with a fixed time step.
class DynamicalSystem {
 public:
  virtual ~DynamicalSystem() = default;

  virtual int dimension() const = 0;
  virtual double dt() const = 0;
  virtual double final_time() const = 0;
  virtual double stationary_onset() const { return 0.0; }
  virtual double qoi(const StateVector& state) const = 0;

  /// Advances state by one step; step_index is used only in error reports.
  virtual void step(StateVector& state, std::int64_t step_index) const = 0;

  std::int64_t total_steps() const { return static_cast<std::int64_t>(std::llround(final_time() / dt())); }

  void advance(StateVector& state, std::int64_t n_steps, std::int64_t first_step = 0) const {
    for (std::int64_t s = 0; s < n_steps; ++s) step(state, first_step + s);
  }
};

class Lorenz96System final : public DynamicalSystem {
 public:
  explicit Lorenz96System(SystemSpec spec);

  int dimension() const override { return spec_.dimension; }
  double dt() const override { return spec_.dt; }
  double final_time() const override { return spec_.final_time; }
  double stationary_onset() const override { return spec_.stationary_onset; }
  double qoi(const StateVector& state) const override;
  void step(StateVector& state, std::int64_t step_index) const override;

  const SystemSpec& spec() const { return spec_; }

 private:
  SystemSpec spec_;
};

/// KSE on a physical grid; each step transforms to Fourier space, takes one
/// ETDRK4 step and transforms back, so segmenting an integration never
/// changes the result.
class KuramotoSivashinskySystem final : public DynamicalSystem {
 public:
  explicit KuramotoSivashinskySystem(SystemSpec spec);

  int dimension() const override { return spec_.dimension; }
  double dt() const override { return spec_.dt; }
  double final_time() const override { return spec_.final_time; }
  double stationary_onset() const override { return spec_.stationary_onset; }
  double qoi(const StateVector& state) const override;
  void step(StateVector& state, std::int64_t step_index) const override;

  const SystemSpec& spec() const { return spec_; }
  const Etdrk4Coefficients& coefficients() const { return coeffs_; }

 private:
  SystemSpec spec_;
  Etdrk4Coefficients coeffs_;
};

/// Generic ODE dx/dt = f(x) stepped with RK2, with a caller-supplied QoI.
/// Used for small analytic test systems.
class OdeSystem final : public DynamicalSystem {
 public:
  using Rhs = std::function<StateVector(const StateVector&)>;
  using Qoi = std::function<double(const StateVector&)>;

  OdeSystem(int dimension, double dt, double final_time, Rhs rhs, Qoi qoi,
            Rk2Variant variant = Rk2Variant::Heun);

  int dimension() const override { return dimension_; }
  double dt() const override { return dt_; }
  double final_time() const override { return final_time_; }
  double qoi(const StateVector& state) const override { return qoi_(state); }
  void step(StateVector& state, std::int64_t step_index) const override;

 private:
  int dimension_;
  double dt_;
  double final_time_;
  Rhs rhs_;
  Qoi qoi_;
  Rk2Variant variant_;
};

std::unique_ptr<DynamicalSystem> make_system(const SystemSpec& spec);

// ---------------------------------------------------------------------------
// Initial conditions and trajectories
// ---------------------------------------------------------------------------

/// mean_profile + N(0, noise_std^2) per component.
class InitialConditionSampler {
 public:
  InitialConditionSampler(StateVector mean_profile, double noise_std, std::uint64_t seed);

  /// Zero mean with unit noise for L96; the cos/sin profile with noise 0.1 for KSE.
  static InitialConditionSampler for_system(const SystemSpec& spec, std::uint64_t seed);

  /// Draws from the sampler's own stream.
  StateVector sample();
  /// Draws from an external stream (per-realization streams in ensembles).
  StateVector sample(Engine& engine) const;

  const StateVector& mean_profile() const { return mean_; }
  double noise_std() const { return noise_std_; }
  std::uint64_t seed() const { return seed_; }

 private:
  StateVector mean_;
  double noise_std_;
  std::uint64_t seed_;
  Engine engine_;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  std::vector<double> qoi_series;

  std::size_t size() const { return times.size(); }
};

/// Steps from t_start to t_end recording the state and QoI at every step.
Trajectory integrate(const DynamicalSystem& system, const StateVector& state, double t_start, double t_end);
Trajectory integrate(const StateVector& state, const SystemSpec& spec, double t_start, double t_end);

/// CSV with header t,q,x0,...,x{d-1}; 17 significant digits.
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& trajectory);

}  // namespace splitstream
