#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "geomint/madelung.hpp"

using namespace geomint;
using Eigen::VectorXcd;
using Eigen::VectorXd;

namespace {

pso::Mesh spectralCircle(Eigen::Index n)
{
  return pso::Mesh{n, 2.0 * std::numbers::pi / static_cast<double>(n), pso::Difference::spectral};
}

} // namespace

TEST_CASE("madelung forward and inverse")
{
  MadelungPair unit;
  unit.mesh = spectralCircle(32);
  unit.rho = VectorXd::Ones(32);
  unit.lambda = VectorXd::Zero(32);
  const WaveField one = madelung_forward(unit);
  CHECK((one.psi - VectorXcd::Ones(32)).cwiseAbs().maxCoeff() == 0.0);

  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    VectorXd omega;
    MadelungPair pair = random_madelung_pair(256, 0.5, seed, 8, &omega);
    const WaveField w = madelung_forward(pair);
    CHECK((w.psi.cwiseAbs2() - pair.rho).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(w.hbar == doctest::Approx(0.0625));

    // phase inside one period
    pair.lambda = (pair.lambda.array() * 0.0 + 0.9 * std::numbers::pi * std::sqrt(w.hbar) *
                                                 (pair.mesh.points().array()).sin())
                      .matrix();
    const MadelungPair back = madelung_inverse(madelung_forward(pair), 0.5);
    CHECK((back.rho - pair.rho).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((back.lambda - pair.lambda).cwiseAbs().maxCoeff() <= 1e-14);

    pair.lambda /= std::sqrt(w.hbar);
    const MadelungPair plain = madelung_inverse(madelung_forward(pair, PhaseConvention::plain), 0.5,
                                                PhaseConvention::plain);
    CHECK((plain.lambda - pair.lambda).cwiseAbs().maxCoeff() <= 1e-14);
  }

  unit.rho(3) = -1.0;
  CHECK_THROWS_AS(madelung_forward(unit), NumericalDomainError);
}

TEST_CASE("nls Hamiltonian examples")
{
  const pso::Mesh mesh = spectralCircle(64);
  WaveField w;
  w.mesh = mesh;
  w.hbar = 0.3;
  w.mass = 1.5;
  w.psi = VectorXcd::Constant(64, std::complex<double>(0.2, -0.7));
  CHECK(std::abs(nls_hamiltonian(w)) <= 1e-20);

  const VectorXd x = mesh.points();
  for (int k : {1, 3, -5}) {
    for (Eigen::Index j = 0; j < 64; ++j)
      w.psi(j) = std::polar(1.0, k * x(j));
    CHECK(nls_hamiltonian(w) == doctest::Approx(w.hbar / (2 * w.mass) * k * k * 2 * std::numbers::pi).epsilon(1e-12));
    const double h = nls_hamiltonian(w);
    WaveField scaled = w;
    const std::complex<double> c(1.5, -0.5);
    scaled.psi *= c;
    CHECK(nls_hamiltonian(scaled) == doctest::Approx(std::norm(c) * h).epsilon(1e-13));
  }
}

TEST_CASE("mfg Hamiltonian examples")
{
  MadelungPair pair;
  pair.mesh = spectralCircle(64);
  pair.nu = 0.5;
  pair.rho = VectorXd::Constant(64, 1.0 / (2 * std::numbers::pi));
  pair.lambda = VectorXd::Zero(64);
  CHECK(std::abs(mfg_hamiltonian(pair, VectorXd::Zero(64))) <= 1e-15);
  CHECK(mfg_hamiltonian(pair, VectorXd::Constant(64, 1.7)) == doctest::Approx(0.5 * 1.7 * 1.7).epsilon(1e-14));

  VectorXd wavy = VectorXd::Constant(64, 1.0);
  wavy(5) = 1.1;
  CHECK_THROWS_AS(mfg_hamiltonian(pair, wavy), UsageError);
}

TEST_CASE("equivalence of the two Hamiltonians")
{
  double worst = 0.0, plainBest = INFINITY;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    VectorXd omega;
    const MadelungPair pair = random_madelung_pair(256, 0.5, seed, 8, &omega);
    worst = std::max(worst, equivalence_defect(pair, omega, 0.5));
    plainBest = std::min(plainBest, equivalence_defect(pair, omega, 0.5, PhaseConvention::plain));
  }
  CHECK(worst <= 1e-8);
  // exp(i lambda) leaves the kinetic term scaled by hbar = nu^4
  CHECK(plainBest > 0.1);

  MadelungPair uniform;
  uniform.mesh = spectralCircle(64);
  uniform.rho = VectorXd::Constant(64, 1.0);
  uniform.lambda = VectorXd::Zero(64);
  CHECK(equivalence_defect(uniform, VectorXd::Zero(64), 0.5) <= 1e-15);
}

TEST_CASE("gauge invariance")
{
  VectorXd omega;
  MadelungPair pair = random_madelung_pair(128, 0.5, 42, 6, &omega);
  const double h0 = nls_hamiltonian(madelung_forward(pair));
  const double m0 = mfg_hamiltonian(pair, omega);
  pair.lambda.array() += 0.731;
  CHECK(std::abs(nls_hamiltonian(madelung_forward(pair)) - h0) <= 1e-12);
  CHECK(std::abs(mfg_hamiltonian(pair, omega) - m0) <= 1e-12);
}

TEST_CASE("finite differences leave a second-order defect")
{
  std::vector<double> defects;
  for (Eigen::Index n : {64, 128, 256}) {
    VectorXd omega;
    MadelungPair pair = random_madelung_pair(n, 0.5, 9, 3, &omega);
    pair.mesh.scheme = pso::Difference::centered;
    defects.push_back(equivalence_defect(pair, omega, 0.5));
  }
  CHECK(std::log2(defects[0] / defects[1]) == doctest::Approx(2.0).epsilon(0.15));
  CHECK(std::log2(defects[1] / defects[2]) == doctest::Approx(2.0).epsilon(0.15));
}
