#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "geomint/lphj.hpp"

using namespace geomint;
using Eigen::Vector3d;
using Eigen::VectorXd;

namespace {

pso::Mesh circle(Eigen::Index n) { return pso::Mesh{n, 2.0 * std::numbers::pi / static_cast<double>(n)}; }

Vector3d randomUnit(std::mt19937_64& rng)
{
  std::normal_distribution<double> n01;
  return Vector3d(n01(rng), n01(rng), n01(rng)).normalized();
}

// Smooth positive density of unit mass plus a smooth momentum.
SemidirectState smoothState(const pso::Mesh& mesh, std::mt19937_64& rng, double amp = 0.3)
{
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  const VectorXd x = mesh.points();
  const double a = phase(rng), b = phase(rng), c = phase(rng);
  SemidirectState s;
  s.mesh = mesh;
  s.rho = (1.0 + amp * (x.array() + a).sin() + 0.5 * amp * (2.0 * x.array() + b).cos()).matrix();
  s.rho /= s.mass();
  s.m = (coef(rng) * (x.array() + c).cos() + 0.5 * coef(rng) * (3.0 * x.array()).sin()).matrix() * 0.1;
  return s;
}

double l2(const VectorXd& a, const VectorXd& b, const pso::Mesh& mesh) { return a.dot(b) * mesh.dx; }

} // namespace

TEST_CASE("rigid body: relative equilibrium and norm")
{
  RigidBodyState s;
  s.Pi = Vector3d(1.0, 0.0, 0.0);
  CHECK((rigidbody_lphj_step(s, 0.1).Pi - s.Pi).lpNorm<Eigen::Infinity>() <= 1e-15);

  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    s.Pi = 3.0 * randomUnit(rng);
    for (auto scheme : {RigidBodyScheme::midpoint, RigidBodyScheme::explicit_omega}) {
      const RigidBodyState n = rigidbody_lphj_step(s, 0.1, {1e-15, 100}, scheme);
      CHECK(std::abs(n.Pi.norm() - s.Pi.norm()) <= 1e-14);
    }
  }
  s.inertia = Vector3d(1.0, 0.0, 3.0);
  CHECK_THROWS_AS(rigidbody_lphj_step(s, 0.1), UsageError);
  s.inertia = Vector3d(1.0, 2.0, 3.0);
  CHECK_THROWS_AS(rigidbody_lphj_step(s, NAN), UsageError);
  s.Pi = Vector3d(3.0, 1.0, 2.0);
  CHECK_THROWS_AS(rigidbody_lphj_step(s, 0.5, {1e-15, 2}), ConvergenceError);
}

TEST_CASE("rigid body: agreement with a fine RK4 reference")
{
  std::mt19937_64 rng(2);
  RigidBodyState s;
  s.Pi = randomUnit(rng);
  RigidBodyState ref = s, lp = s, lp1 = s;
  for (int k = 0; k < 1000000; ++k)
    ref = rigidbody_rk4_step(ref, 1e-6);
  for (int k = 0; k < 1000; ++k) {
    lp = rigidbody_lphj_step(lp, 1e-3);
    lp1 = rigidbody_lphj_step(lp1, 1e-3, {}, RigidBodyScheme::explicit_omega);
  }
  CHECK((lp.Pi - ref.Pi).lpNorm<Eigen::Infinity>() <= 1e-5);
  // the explicit-Omega variant is first order
  CHECK((lp1.Pi - ref.Pi).lpNorm<Eigen::Infinity>() > 1e-5);
  CHECK((lp1.Pi - ref.Pi).lpNorm<Eigen::Infinity>() <= 1e-2);
}

TEST_CASE("rigid body: long runs")
{
  RigidBodyState s;
  s.Pi = Vector3d(0.6, 0.0, 0.8) + Vector3d(0.0, 0.05, 0.0);
  RigidBodyState lp = s, eu = s;
  const double n0 = s.Pi.norm(), e0 = rigidbody_energy(s);
  double normDev = 0.0, eulerDev = 0.0, energyDev = 0.0;
  for (int k = 0; k < 100000; ++k) {
    lp = rigidbody_lphj_step(lp, 0.01);
    eu = rigidbody_euler_step(eu, 0.01);
    normDev = std::max(normDev, std::abs(lp.Pi.norm() - n0));
    eulerDev = std::max(eulerDev, std::abs(eu.Pi.norm() - n0));
    if (k < 10000)
      energyDev = std::max(energyDev, std::abs(rigidbody_energy(lp) - e0));
  }
  CHECK(normDev <= 1e-12);
  CHECK(eulerDev > 1e-3);
  CHECK(energyDev <= 1e-6);
}

TEST_CASE("deep LP Hamiltonian: closed forms")
{
  const pso::Mesh mesh = circle(64);
  SemidirectState s;
  s.mesh = mesh;
  s.m = VectorXd::Zero(64);
  s.rho = VectorXd::Constant(64, 1.0 / (2 * std::numbers::pi));
  CHECK(deep_lp_hamiltonian(0.5).value(s) == doctest::Approx(0.0).scale(1.0));

  std::mt19937_64 rng(3);
  s = smoothState(mesh, rng);
  const LPHamiltonian H0 = deep_lp_hamiltonian(0.0);
  CHECK(H0.value(s) == doctest::Approx(0.5 * (s.m.array().square() / s.rho.array()).sum() * mesh.dx));
  CHECK((H0.dm(s) - s.m.cwiseQuotient(s.rho)).lpNorm<Eigen::Infinity>() <= 1e-14);
  CHECK((H0.drho(s) + VectorXd(s.m.array().square() / (2 * s.rho.array().square()))).lpNorm<Eigen::Infinity>() <=
        1e-13);

  s.rho(7) = 0.0;
  CHECK_THROWS_AS(H0.value(s), NumericalDomainError);
  CHECK_THROWS_AS(deep_lp_hamiltonian(-1.0), UsageError);
}

TEST_CASE("deep LP Hamiltonian: derivatives match the finite-difference oracle")
{
  const pso::Mesh mesh = circle(64);
  std::mt19937_64 rng(4);
  for (double nu : {0.0, 0.5, 1.0}) {
    const LPHamiltonian H = deep_lp_hamiltonian(nu);
    for (int t = 0; t < 3; ++t) {
      const SemidirectState s = smoothState(mesh, rng);
      const pso::SymbolFunctional inM = [&](const pso::Symbol& M) {
        SemidirectState v = s;
        v.m = M.coeff(1);
        return H.value(v);
      };
      const pso::SymbolFunctional inRho = [&](const pso::Symbol& R) {
        SemidirectState v = s;
        v.rho = R.coeff(0);
        return H.value(v);
      };
      const VectorXd fdM = pso::functional_derivative(inM, pso::Symbol::monomial(mesh, 1, s.m)).coeff(-2);
      const VectorXd fdR = pso::functional_derivative(inRho, pso::Symbol::monomial(mesh, 0, s.rho)).coeff(-1);
      CHECK((fdM - H.dm(s)).lpNorm<Eigen::Infinity>() <= 1e-6);
      CHECK((fdR - H.drho(s)).lpNorm<Eigen::Infinity>() <= 1e-6);
    }
  }
}

TEST_CASE("semidirect step: identity, mass, momentum")
{
  const pso::Mesh mesh = circle(128);
  std::mt19937_64 rng(5);
  const SemidirectState s = smoothState(mesh, rng);

  LPHamiltonian zero;
  zero.value = [](const SemidirectState&) { return 0.0; };
  zero.dm = [](const SemidirectState& v) -> VectorXd { return VectorXd::Zero(v.m.size()); };
  zero.drho = zero.dm;
  const SemidirectState same = lp_semidirect_step(s, zero, 0.01);
  CHECK((same.m - s.m).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((same.rho - s.rho).lpNorm<Eigen::Infinity>() == 0.0);

  const LPHamiltonian H = deep_lp_hamiltonian(0.5);
  SemidirectState v = s;
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const SemidirectState n = lp_semidirect_step(v, H, 1e-3);
    worst = std::max(worst, std::abs(n.mass() - v.mass()));
    v = n;
  }
  CHECK(worst <= 1e-14);

  // sum m dx moves only through m D u and rho D(dH/drho); D(m u) telescopes
  const double dt = 1e-3;
  const SemidirectState n = lp_semidirect_step(s, H, dt);
  SemidirectState mid = s;
  mid.m = 0.5 * (s.m + n.m);
  mid.rho = 0.5 * (s.rho + n.rho);
  const VectorXd u = H.dm(mid), w = H.drho(mid);
  const double predicted =
      dt * (mid.m.cwiseProduct(pso::dx(u, mesh)) + mid.rho.cwiseProduct(pso::dx(w, mesh))).sum() * mesh.dx;
  CHECK(std::abs((n.m.sum() - s.m.sum()) * mesh.dx - predicted) <= 1e-13);

  // the literal density line does not conserve mass
  const SemidirectState lit = lp_semidirect_step(s, H, dt, LPVariant::literal);
  CHECK(std::abs(lit.mass() - s.mass()) > 1e-6);

  CHECK_THROWS_AS(lp_semidirect_step(s, H, 0.0), UsageError);
  CHECK_THROWS_AS(lp_semidirect_step(s, H, 10.0, LPVariant::conservative, {1e-13, 20}), Error);
}

TEST_CASE("semidirect step: one-step gap to explicit Euler is second order")
{
  const pso::Mesh mesh = circle(128);
  std::mt19937_64 rng(6);
  const SemidirectState s = smoothState(mesh, rng);
  const LPHamiltonian H = deep_lp_hamiltonian(0.5);
  std::vector<double> gaps;
  for (double dt : {1e-3, 5e-4, 2.5e-4, 1.25e-4}) {
    const SemidirectState a = lp_semidirect_step(s, H, dt);
    const SemidirectState b = lp_euler_step(s, H, dt);
    gaps.push_back(std::max((a.m - b.m).lpNorm<Eigen::Infinity>(), (a.rho - b.rho).lpNorm<Eigen::Infinity>()));
  }
  for (std::size_t i = 1; i < gaps.size(); ++i)
    CHECK(std::log2(gaps[i - 1] / gaps[i]) == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("diamond")
{
  const pso::Mesh mesh = circle(64);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  auto field = [&] {
    VectorXd v(64);
    for (auto& x : v)
      x = n01(rng);
    return v;
  };
  CHECK(diamond(VectorXd::Constant(64, 2.0), field(), mesh).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(diamond(field(), VectorXd::Zero(64), mesh).lpNorm<Eigen::Infinity>() == 0.0);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const VectorXd eta = field(), rho = field(), U = field();
    worst = std::max(worst, std::abs(l2(diamond(eta, rho, mesh), U, mesh) +
                                     l2(eta, pso::dx(VectorXd(U.cwiseProduct(rho)), mesh), mesh)));
  }
  CHECK(worst <= 1e-12);
  CHECK_THROWS_AS(diamond(VectorXd::Zero(3), VectorXd::Zero(64), mesh), UsageError);
}

TEST_CASE("density pullback")
{
  const pso::Mesh mesh = circle(128);
  std::mt19937_64 rng(8);
  const SemidirectState s = smoothState(mesh, rng);
  const VectorXd zero = VectorXd::Zero(128);
  CHECK((density_pullback(s.rho, zero, mesh, 0.1, PullbackMode::fokker_planck) - s.rho).lpNorm<Eigen::Infinity>() ==
        0.0);

  const VectorXd u = s.m * 5.0;
  for (auto sign : {LPVariant::conservative, LPVariant::literal}) {
    const VectorXd r = density_pullback(s.rho, u, mesh, 0.05, PullbackMode::fokker_planck, 200.0, sign);
    CHECK(std::abs(r.sum() * mesh.dx - s.mass()) <= 1e-14);
  }
  const VectorXd plus = density_pullback(s.rho, u, mesh, 0.05, PullbackMode::fokker_planck, 200.0, LPVariant::literal);
  const VectorXd minus = density_pullback(s.rho, u, mesh, 0.05, PullbackMode::fokker_planck);
  CHECK(((plus + minus) / 2 - s.rho).lpNorm<Eigen::Infinity>() <= 1e-15);

  // SPH reconstruction of a Gaussian bump
  const VectorXd x = mesh.points();
  const VectorXd bump = (0.1 + (-(x.array() - std::numbers::pi).square() / (2 * 0.5 * 0.5)).exp()).matrix();
  const VectorXd rec = density_pullback(bump, zero, mesh, 0.0, PullbackMode::sph, 200.0);
  CHECK((rec - bump).lpNorm<Eigen::Infinity>() <= 0.05 * bump.maxCoeff());

  // a uniform shift translates the reconstruction
  const VectorXd shifted = density_pullback(bump, VectorXd::Constant(128, 1.0), mesh, mesh.dx, PullbackMode::sph);
  CHECK(shifted(63) == doctest::Approx(rec(64)).epsilon(1e-12));

  CHECK_THROWS_AS(density_pullback(-bump, zero, mesh, 0.0, PullbackMode::sph), UsageError);
}
