#include "geomint/madelung.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

namespace geomint {

using Eigen::VectorXcd;
using Eigen::VectorXd;

void MadelungPair::validate() const
{
  mesh.validate();
  if (rho.size() != mesh.n || lambda.size() != mesh.n)
    throw UsageError("MadelungPair: field sizes do not match mesh");
  if (!rho.allFinite() || !lambda.allFinite())
    throw NumericalDomainError("MadelungPair: non-finite field");
  for (Eigen::Index j = 0; j < rho.size(); ++j)
    if (!(rho(j) > 0.0))
      throw PositivityError("MadelungPair: density not positive", static_cast<long>(j));
  if (!(nu > 0.0))
    throw UsageError("MadelungPair: nu must be positive");
}

namespace {

double phaseFactor(double hbar, PhaseConvention phase)
{
  return phase == PhaseConvention::scaled ? 1.0 / std::sqrt(hbar) : 1.0;
}

VectorXcd dxComplex(const VectorXcd& f, const pso::Mesh& mesh)
{
  const VectorXd re = pso::dx(VectorXd(f.real()), mesh);
  const VectorXd im = pso::dx(VectorXd(f.imag()), mesh);
  VectorXcd out(f.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

} // namespace

WaveField madelung_forward(const MadelungPair& pair, PhaseConvention phase)
{
  pair.validate();
  WaveField w;
  w.hbar = std::pow(pair.nu, 4);
  w.mass = 1.0;
  w.mesh = pair.mesh;
  const double k = phaseFactor(w.hbar, phase);
  w.psi.resize(pair.rho.size());
  for (Eigen::Index j = 0; j < pair.rho.size(); ++j)
    w.psi(j) = std::polar(std::sqrt(pair.rho(j)), k * pair.lambda(j));
  return w;
}

MadelungPair madelung_inverse(const WaveField& w, double nu, PhaseConvention phase)
{
  MadelungPair pair;
  pair.nu = nu;
  pair.mesh = w.mesh;
  pair.rho = w.psi.cwiseAbs2();
  pair.lambda.resize(w.psi.size());
  const double k = phaseFactor(w.hbar, phase);
  for (Eigen::Index j = 0; j < w.psi.size(); ++j)
    pair.lambda(j) = std::arg(w.psi(j)) / k;
  pair.validate();
  return pair;
}

double nls_hamiltonian(const WaveField& w)
{
  if (w.psi.size() != w.mesh.n)
    throw UsageError("nls_hamiltonian: field size does not match mesh");
  if (!(w.mass > 0.0))
    throw UsageError("nls_hamiltonian: mass must be positive");
  return w.hbar / (2.0 * w.mass) * dxComplex(w.psi, w.mesh).squaredNorm() * w.mesh.dx;
}

double mfg_hamiltonian(const MadelungPair& pair, const VectorXd& omega)
{
  pair.validate();
  if (omega.size() != pair.mesh.n)
    throw UsageError("mfg_hamiltonian: omega size does not match mesh");
  const double mean = omega.mean();
  if ((omega.array() - mean).abs().maxCoeff() > 1e-12 * std::max(1.0, std::abs(mean)))
    throw UsageError("mfg_hamiltonian: omega must be divergence-free, i.e. constant on a 1D periodic mesh");
  const VectorXd dl = pso::dx(VectorXd(pair.rho.array().log()), pair.mesh);
  const double nu4 = std::pow(pair.nu, 4);
  return (0.5 * (pair.rho.array() * omega.array().square()).sum() +
          nu4 / 8.0 * (pair.rho.array() * dl.array().square()).sum()) *
         pair.mesh.dx;
}

double equivalence_defect(MadelungPair pair, const VectorXd& omega, double nu, PhaseConvention phase)
{
  pair.nu = nu;
  return std::abs(nls_hamiltonian(madelung_forward(pair, phase)) - mfg_hamiltonian(pair, omega));
}

MadelungPair random_madelung_pair(Eigen::Index n, double nu, std::uint64_t seed, int kmax, VectorXd* omega)
{
  if (kmax < 1 || 2 * kmax >= n)
    throw UsageError("random_madelung_pair: need 1 <= kmax < n/2");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  std::uniform_int_distribution<int> pick(0, 3);

  MadelungPair pair;
  pair.nu = nu;
  pair.mesh = pso::Mesh{n, 2.0 * std::numbers::pi / static_cast<double>(n), pso::Difference::spectral};
  const VectorXd x = pair.mesh.points();
  VectorXd bump = VectorXd::Zero(n);
  double total = 0.0;
  for (int k = 1; k <= kmax; ++k) {
    const double a = coef(rng), b = coef(rng);
    total += std::abs(a) + std::abs(b);
    bump += a * (k * x.array()).cos().matrix() + b * (k * x.array()).sin().matrix();
  }
  pair.rho = VectorXd::Ones(n) + (0.4 / total) * bump;
  pair.rho /= pair.rho.sum() * pair.mesh.dx;
  const int table[] = {-2, -1, 1, 2};
  const double w = table[pick(rng)];
  pair.lambda = w * x;
  if (omega)
    *omega = VectorXd::Constant(n, w);
  pair.validate();
  return pair;
}

} // namespace geomint
