#pragma once

#include <functional>

#include <Eigen/Core>

#include "geomint/genfunc.hpp"
#include "geomint/pso.hpp"

namespace geomint {

// ---------------------------------------------------------------------------
// Rigid body on so(3)*

struct RigidBodyState
{
  Eigen::Vector3d Pi = Eigen::Vector3d::Zero();
  /// Diagonal of the inertia tensor.
  Eigen::Vector3d inertia = Eigen::Vector3d(1.0, 2.0, 3.0);

  void validate() const;
  Eigen::Vector3d omega() const { return Pi.cwiseQuotient(inertia); }
};

/// Pi x I^-1 Pi
Eigen::Vector3d rigidbody_field(const RigidBodyState& s);

/// 1/2 <Pi, I^-1 Pi>
double rigidbody_energy(const RigidBodyState& s);

enum class RigidBodyScheme {
  midpoint, ///< Omega from the midpoint fixed point, second order
  explicit_omega ///< Omega from the current Pi, first order
};

/// Pi' = R^T Pi with R = exp(dt hat(Omega*)): coadjoint transport, so |Pi'| = |Pi|
/// up to rounding whatever Omega* is.
RigidBodyState rigidbody_lphj_step(const RigidBodyState& s, double dt, SolverOptions opts = {1e-15, 100},
                                   RigidBodyScheme scheme = RigidBodyScheme::midpoint);

RigidBodyState rigidbody_euler_step(const RigidBodyState& s, double dt);
RigidBodyState rigidbody_rk4_step(const RigidBodyState& s, double dt);

// ---------------------------------------------------------------------------
// Semidirect-product hydrodynamics on a periodic 1D mesh

struct SemidirectState
{
  Eigen::VectorXd m;   ///< momentum density
  Eigen::VectorXd rho; ///< probability density
  pso::Mesh mesh;

  void validate() const;
  /// sum rho dx
  double mass() const { return rho.sum() * mesh.dx; }
};

/// Unit-mass density 1 + a sin(x + phi1) + a/2 cos(2x + phi2) and a small
/// smooth momentum on [0, 2 pi), phases and weights drawn from `seed`.
SemidirectState smooth_semidirect_state(Eigen::Index n, std::uint64_t seed, double amp = 0.3,
                                        pso::Difference scheme = pso::Difference::centered);

/// Value and L2 functional derivatives (partials scaled by 1/dx).
struct LPHamiltonian
{
  std::function<double(const SemidirectState&)> value;
  std::function<Eigen::VectorXd(const SemidirectState&)> dm;
  std::function<Eigen::VectorXd(const SemidirectState&)> drho;
};

/// Floor applied to rho before taking logarithms.
constexpr double kLogFloor = 1e-12;

/// H = 1/2 sum m^2/rho dx + nu^2/2 sum m D(log rho) dx + nu^4/8 sum rho (D log rho)^2 dx
///   dH/dm   = m/rho + nu^2/2 D log rho
///   dH/drho = -m^2/(2 rho^2) - nu^2/2 (D m)/rho + nu^4/8 ((D log rho)^2 - 2 D(rho D log rho)/rho)
/// using D^T = -D for the periodic difference.
LPHamiltonian deep_lp_hamiltonian(double nu);

/// Max |analytic - central difference| over every grid value of m and rho,
/// the difference quotient scaled by 1/dx.
double lp_gradient_deviation(const LPHamiltonian& H, const SemidirectState& s, double h_fd);

enum class LPVariant {
  conservative, ///< rho' = rho - dt D(rho u)
  literal       ///< additionally adds dt dH/drho to the density
};

/// Right-hand side of m_t = m D u + D(m u) + rho D(dH/drho), rho_t = -D(rho u),
/// u = dH/dm. The literal variant adds dH/drho to the density rate.
SemidirectState lp_rate(const SemidirectState& s, const LPHamiltonian& H, LPVariant variant = LPVariant::conservative);

/// One step with the fields evaluated at the midpoint of (s, s'), solved by
/// fixed-point iteration. Mass is conserved to rounding by the conservative
/// variant.
SemidirectState lp_semidirect_step(const SemidirectState& s, const LPHamiltonian& H, double dt,
                                   LPVariant variant = LPVariant::conservative, SolverOptions opts = {1e-13, 200});

/// s + dt * lp_rate(s)
SemidirectState lp_euler_step(const SemidirectState& s, const LPHamiltonian& H, double dt,
                              LPVariant variant = LPVariant::conservative);

/// eta <> rho = rho D eta
Eigen::VectorXd diamond(const Eigen::VectorXd& eta, const Eigen::VectorXd& rho, const pso::Mesh& mesh);

enum class PullbackMode { sph, fokker_planck };

/// sph: sum_j rho_j W(x_i + dt u_j - x_j) / sum_j W(x_i - x_j) with
/// W(r) = exp(-alpha r^2) on the periodic distance.
/// fokker_planck: rho - dt D(rho u) (conservative) or rho + dt D(rho u) (literal).
Eigen::VectorXd density_pullback(const Eigen::VectorXd& rho, const Eigen::VectorXd& u, const pso::Mesh& mesh, double dt,
                                 PullbackMode mode, double alpha = 200.0, LPVariant sign = LPVariant::conservative);

} // namespace geomint
