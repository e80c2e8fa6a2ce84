#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "geomint/pso.hpp"

namespace geomint {

/// Complex wave function on a periodic mesh.
struct WaveField
{
  Eigen::VectorXcd psi;
  double hbar = 1.0;
  double mass = 1.0;
  pso::Mesh mesh;

  /// sum |psi|^2 dx
  double norm2() const { return psi.squaredNorm() * mesh.dx; }
};

struct MadelungPair
{
  Eigen::VectorXd rho;
  Eigen::VectorXd lambda;
  double nu = 0.5;
  pso::Mesh mesh;

  void validate() const;
};

enum class PhaseConvention {
  scaled, ///< psi = sqrt(rho) exp(i lambda / sqrt(hbar))
  plain   ///< psi = sqrt(rho) exp(i lambda)
};

/// hbar = nu^4, mass 1. Derivatives in this module default to the spectral
/// scheme; pass a centered mesh to study the finite-difference error.
WaveField madelung_forward(const MadelungPair& pair, PhaseConvention phase = PhaseConvention::scaled);

/// Inverse: rho = |psi|^2, lambda = arg(psi) (times sqrt(hbar) when scaled),
/// so lambda is recovered modulo the phase period.
MadelungPair madelung_inverse(const WaveField& w, double nu, PhaseConvention phase = PhaseConvention::scaled);

/// (hbar / 2m) sum |D psi|^2 dx.
double nls_hamiltonian(const WaveField& w);

/// 1/2 sum rho omega^2 dx + nu^4/8 sum rho (D log rho)^2 dx. omega must be
/// constant: in 1D divergence-free means constant.
double mfg_hamiltonian(const MadelungPair& pair, const Eigen::VectorXd& omega);

/// |nls_hamiltonian(madelung_forward(pair)) - mfg_hamiltonian(pair, omega)|.
/// The pair's nu is overridden by `nu`.
double equivalence_defect(MadelungPair pair, const Eigen::VectorXd& omega, double nu,
                          PhaseConvention phase = PhaseConvention::scaled);

/// Spectral mesh on [0, 2 pi) with n points; rho = normalised 1 + random
/// Fourier modes 1..kmax (amplitude <= 0.4 in total), lambda = omega x with
/// omega a nonzero integer in [-2, 2]. psi stays periodic when omega/sqrt(hbar)
/// is an integer, which holds for both phase conventions at nu = 0.5.
MadelungPair random_madelung_pair(Eigen::Index n, double nu, std::uint64_t seed, int kmax,
                                  Eigen::VectorXd* omega);

} // namespace geomint
