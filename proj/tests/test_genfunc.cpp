#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "geomint/genfunc.hpp"
#include "geomint/resnet_ocp.hpp"

using namespace geomint;
using Eigen::MatrixXd;

namespace {

PhaseBatchd scalarPoint(double q, double p)
{
  return PhaseBatchd(MatrixXd::Constant(1, 1, q), MatrixXd::Constant(1, 1, p));
}

PhaseBatchd randomBatch(Eigen::Index d, Eigen::Index n, std::uint64_t seed, double scale)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  PhaseBatchd s = PhaseBatchd::zeros(d, n);
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    s.q(k) = U(rng);
    s.p(k) = U(rng);
  }
  return s;
}

PhaseBatchd rotate(const PhaseBatchd& s, double t)
{
  return PhaseBatchd(std::cos(t) * s.q + std::sin(t) * s.p, -std::sin(t) * s.q + std::cos(t) * s.p);
}

double slope(const std::vector<double>& h, const std::vector<double>& e)
{
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    mx += std::log(h[i]);
    my += std::log(e[i]);
  }
  mx /= h.size();
  my /= h.size();
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sxy += (std::log(h[i]) - mx) * (std::log(e[i]) - my);
    sxx += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
  }
  return sxy / sxx;
}

// symplectic Euler for the pendulum: p' = p - dt sin(q) is explicit
PhaseBatchd pendulumSymplecticEuler(const PhaseBatchd& s, double dt)
{
  PhaseBatchd out = s;
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    out.p(k) = s.p(k) - dt * std::sin(s.q(k));
    out.q(k) = s.q(k) + dt * out.p(k);
  }
  return out;
}

} // namespace

TEST_CASE("series terms")
{
  const auto H = pendulum();
  const PhaseBatchd s = randomBatch(2, 3, 5, 2.0);
  for (int m = 1; m <= 3; ++m) {
    const auto S = build_series(H, m);
    CHECK(S.order == m);
    CHECK(S.terms.size() == static_cast<std::size_t>(m));
    CHECK(S.terms[0].value(s) == H(s));
    if (m >= 2) {
      const PhaseBatchd g = H.gradient(s);
      CHECK(S.terms[1].value(s) == doctest::Approx(0.5 * g.q.cwiseProduct(g.p).sum()).epsilon(1e-15));
    }
  }
  CHECK_THROWS_AS(build_series(H, 0), UsageError);
  CHECK_THROWS_AS(build_series(H, 4), UsageError);

  // harmonic oscillator: t (q^2 + p^2)/2 + t^2 q p / 2
  const auto S2 = build_series(harmonic_oscillator(), 2);
  const PhaseBatchd x = scalarPoint(0.7, -1.3);
  const double t = 0.2;
  CHECK(S2.value(x, t) == doctest::Approx(t * 0.5 * (0.49 + 1.69) + t * t * 0.5 * 0.7 * -1.3).epsilon(1e-14));
  const auto S1 = build_series(harmonic_oscillator(), 1);
  CHECK(S1.value(x, t) == doctest::Approx(t * 0.5 * (0.49 + 1.69)).epsilon(1e-15));

  // series gradients vs central differences of the series value
  for (int m = 1; m <= 3; ++m) {
    const auto S = build_series(H, m);
    Hamiltoniand asH;
    asH.value = [&](const PhaseBatchd& b) { return S.value(b, 0.3); };
    asH.gradient = [&](const PhaseBatchd& b) { return S.gradient(b, 0.3); };
    CHECK(check_gradients(asH, s, 1e-4) <= 1e-7);
  }
}

TEST_CASE("symplectic step examples")
{
  const auto S1 = build_series(harmonic_oscillator(), 1);
  // dH/dq = q does not involve p', so p' = p - dt q and q' = q + dt p'
  const PhaseBatchd out = symplectic_step(S1, scalarPoint(1.0, 0.0), 0.1);
  CHECK(std::abs(out.p(0) + 0.1) <= 1e-12);
  CHECK(std::abs(out.q(0) - 0.99) <= 1e-12);
  // order 2 couples p' through S_2,2: p' = (p - dt q) / (1 + dt^2 / 2)
  const PhaseBatchd two = symplectic_step(build_series(harmonic_oscillator(), 2), scalarPoint(1.0, 0.0), 0.1,
                                          {1e-15, 100});
  CHECK(std::abs(two.p(0) + 0.1 / 1.005) <= 1e-12);
  CHECK(std::abs(two.q(0) - (1.0 + 0.1 * two.p(0) + 0.005)) <= 1e-12);

  const PhaseBatchd s = randomBatch(2, 4, 6, 2.0);
  for (int m = 1; m <= 3; ++m) {
    const PhaseBatchd same = symplectic_step(build_series(pendulum(), m), s, 0.0);
    CHECK(maxAbsDiff(same, s) == 0.0);
  }

  // order 1 is symplectic Euler
  const auto P1 = build_series(pendulum(), 1);
  CHECK(maxAbsDiff(symplectic_step(P1, s, 0.05, {1e-14, 100}), pendulumSymplecticEuler(s, 0.05)) <= 1e-13);

  CHECK_THROWS_AS(symplectic_step(P1, s, -0.1), UsageError);
  CHECK_THROWS_AS(symplectic_step(P1, s, 0.1, {0.0, 10}), UsageError);
  CHECK_THROWS_AS(symplectic_step(build_series(harmonic_oscillator(), 2), scalarPoint(1.0, 0.0), 0.1, {1e-14, 2}),
                  ConvergenceError);
}

TEST_CASE("one-step error slope is m + 1")
{
  const auto H = harmonic_oscillator();
  const PhaseBatchd s0 = scalarPoint(1.0, 0.5);
  const std::vector<double> dts{0.1, 0.05, 0.025, 0.0125};
  for (int m = 1; m <= 3; ++m) {
    const auto S = build_series(H, m);
    std::vector<double> err;
    for (double dt : dts)
      err.push_back(maxAbsDiff(symplectic_step(S, s0, dt, {1e-15, 200}), rotate(s0, dt)));
    INFO("m = " << m);
    CHECK(slope(dts, err) == doctest::Approx(m + 1.0).epsilon(0.15 / (m + 1.0)));
  }
}

TEST_CASE("symplecticity defect")
{
  const PhaseBatchd s = randomBatch(2, 2, 7, 1.0);
  auto identity = [](const PhaseBatchd& x, double) { return x; };
  CHECK(symplecticity_defect<double>(identity, s, 0.01, 1e-5) <= 1e-10);
  // dyadic point and step: the difference quotients are exact
  const PhaseBatchd dyadic((MatrixXd(2, 1) << 0.5, -0.25).finished(), (MatrixXd(2, 1) << 1.0, 0.125).finished());
  CHECK(symplecticity_defect<double>(identity, dyadic, 0.01, 1.0 / 65536.0) == 0.0);

  // J = [[1, dt], [-dt, 1]] per coordinate: defect dt^2 exactly
  auto euler = [](const PhaseBatchd& x, double dt) { return euler_step(harmonic_oscillator(), x, dt); };
  CHECK(symplecticity_defect<double>(euler, s, 0.01, 1e-5) == doctest::Approx(1e-4).epsilon(1e-6));

  struct Case
  {
    Hamiltoniand H;
    PhaseBatchd s;
  };
  const std::vector<Case> cases{{harmonic_oscillator(), randomBatch(1, 1, 8, 1.0)},
                                {pendulum(), randomBatch(2, 2, 9, 2.0)},
                                {reduced_hamiltonian_fn(1.0), randomBatch(2, 4, 10, 1.0)}};
  for (const auto& c : cases) {
    for (int m = 1; m <= 3; ++m) {
      const auto S = build_series(c.H, m);
      auto step = [&](const PhaseBatchd& x, double dt) { return symplectic_step(S, x, dt, {1e-12, 100}); };
      INFO(c.H.name << " m = " << m);
      CHECK(symplecticity_defect<double>(step, c.s, 0.01, 1e-5) <= 1e-6);
    }
    auto eul = [&](const PhaseBatchd& x, double dt) { return euler_step(c.H, x, dt); };
    if (c.H.name != "pendulum")
      CHECK(symplecticity_defect<double>(eul, c.s, 0.01, 1e-5) >= 1e-5);
  }
}

TEST_CASE("long-run energy: bounded for m = 2, growing for Euler")
{
  const auto H = harmonic_oscillator();
  const auto S = build_series(H, 2);
  PhaseBatchd s = scalarPoint(1.0, 0.0), e = s;
  const double H0 = H(s);
  const int steps = 100000;
  double firstHalf = 0.0, secondHalf = 0.0;
  for (int k = 0; k < steps; ++k) {
    s = symplectic_step(S, s, 0.01);
    e = euler_step(H, e, 0.01);
    const double dev = std::abs(H(s) - H0);
    (k < steps / 2 ? firstHalf : secondHalf) = std::max(k < steps / 2 ? firstHalf : secondHalf, dev);
  }
  CHECK(std::max(firstHalf, secondHalf) <= 1e-4);
  // no growth between halves
  CHECK(secondHalf <= 1.01 * firstHalf);
  CHECK(std::abs(H(e) - H0) > 1e-1);
}
