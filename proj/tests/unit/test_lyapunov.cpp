#include <doctest.h>

#include <cmath>

#include "splitstream/lyapunov.hpp"

using namespace splitstream;

TEST_CASE("linear flow recovers its top eigenvalue") {
  OdeSystem sys(
      2, 0.01, 10.0,
      [](const StateVector& x) {
        StateVector d(2);
        d << x(0), -x(1);
        return d;
      },
      [](const StateVector& x) { return x.squaredNorm(); });
  LyapunovOptions opt;
  opt.n_renorm = 200;
  opt.transient = 0.0;
  StateVector x0(2);
  x0 << 1.0, 1.0;
  const auto est = estimate_lambda1(sys, x0, opt);
  CHECK(est.lambda1 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(est.n_renormalizations == 200);
  CHECK(est.renorm_interval == doctest::Approx(0.1));
  CHECK(est.per_window_log_growth.size() == 200);
}

TEST_CASE("frozen dynamics give exactly zero") {
  OdeSystem sys(
      3, 0.1, 1.0, [](const StateVector& x) { return StateVector::Zero(x.size()); },
      [](const StateVector& x) { return x(0); });
  LyapunovOptions opt;
  opt.n_renorm = 50;
  const auto est = estimate_lambda1(sys, StateVector::Ones(3), opt);
  CHECK(est.lambda1 == 0.0);
}

TEST_CASE("lorenz 96 is chaotic") {
  const auto spec = SystemSpec::lorenz96();
  Lorenz96System sys(spec);
  auto sampler = InitialConditionSampler::for_system(spec, 1);
  LyapunovOptions opt;
  opt.n_renorm = 300;
  opt.seed = 4;
  const auto est = estimate_lambda1(sys, sampler.sample(), opt);
  CHECK(est.lambda1 > 0.0);
  CHECK(est.renorm_interval == doctest::Approx(0.01));
}

TEST_CASE("estimates are reproducible under a fixed seed") {
  const auto spec = SystemSpec::lorenz96();
  Lorenz96System sys(spec);
  StateVector x0 = StateVector::Constant(32, 1.0);
  x0(3) = 1.5;
  LyapunovOptions opt;
  opt.n_renorm = 50;
  opt.seed = 9;
  CHECK(estimate_lambda1(sys, x0, opt).lambda1 == estimate_lambda1(sys, x0, opt).lambda1);
}

TEST_CASE("invalid options") {
  OdeSystem sys(
      1, 0.1, 1.0, [](const StateVector& x) { return x; }, [](const StateVector& x) { return x(0); });
  LyapunovOptions opt;
  opt.delta0 = 0.0;
  CHECK_THROWS_AS(estimate_lambda1(sys, StateVector::Ones(1), opt), ConfigurationError);
  opt.delta0 = 1e-6;
  opt.n_renorm = 0;
  CHECK_THROWS_AS(estimate_lambda1(sys, StateVector::Ones(1), opt), ConfigurationError);
  opt.n_renorm = 10;
  CHECK_THROWS_AS(estimate_lambda1(sys, StateVector::Ones(2), opt), ConfigurationError);
}

TEST_CASE("checkpoint layout puts the remainder first") {
  const auto l96 = checkpoint_steps(1270, 64);
  REQUIRE(l96.size() == 64);
  CHECK(l96.back() == 1270);
  CHECK(l96[0] == 20);
  CHECK(l96[53] - l96[52] == 20);
  CHECK(l96[54] - l96[53] == 19);
  CHECK(l96[63] - l96[62] == 19);

  const auto kse = checkpoint_steps(600, 45);
  REQUIRE(kse.size() == 45);
  CHECK(kse.back() == 600);
  CHECK(kse[14] - kse[13] == 14);
  CHECK(kse[15] - kse[14] == 13);

  CHECK_THROWS_AS(checkpoint_steps(10, 11), ConfigurationError);
  CHECK_THROWS_AS(checkpoint_steps(10, 0), ConfigurationError);
}

TEST_CASE("selection interval respects the Lyapunov time") {
  CHECK(checkpoint_count(30.9, 64, 1.27, 0.001) == 64);
  CHECK(selection_interval(30.9, 64, 1.27, 0.001) == doctest::Approx(0.020));
  CHECK(checkpoint_count(0.0857, 45, 150.0, 0.25) == 45);
  CHECK(selection_interval(0.0857, 45, 150.0, 0.25) == doctest::Approx(3.5));

  const double tau = selection_interval(0.1, 1, 150.0, 0.25);
  CHECK(tau <= 10.0);
  CHECK(std::fmod(tau / 0.25, 1.0) == doctest::Approx(0.0));

  // Faster growth forces more checkpoints.
  const int n = checkpoint_count(100.0, 64, 1.27, 0.001);
  CHECK(n > 64);
  CHECK(selection_interval(100.0, 64, 1.27, 0.001) <= 0.01 + 1e-12);

  CHECK(checkpoint_count(-1.0, 45, 150.0, 0.25) == 45);
}
