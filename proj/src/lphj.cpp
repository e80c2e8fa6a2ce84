#include "geomint/lphj.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Geometry>

namespace geomint {

using Eigen::Vector3d;
using Eigen::VectorXd;

void RigidBodyState::validate() const
{
  if (!(inertia.array() > 0.0).all() || !inertia.allFinite())
    throw UsageError("RigidBodyState: inertia entries must be positive");
  if (!Pi.allFinite())
    throw NumericalDomainError("RigidBodyState: non-finite Pi");
}

Vector3d rigidbody_field(const RigidBodyState& s) { return s.Pi.cross(s.omega()); }

double rigidbody_energy(const RigidBodyState& s) { return 0.5 * s.Pi.dot(s.omega()); }

namespace {

Vector3d transport(const Vector3d& Pi, const Vector3d& omega, double dt)
{
  const double angle = omega.norm() * dt;
  if (angle == 0.0)
    return Pi;
  const Eigen::Matrix3d R = Eigen::AngleAxisd(angle, omega.normalized()).toRotationMatrix();
  return R.transpose() * Pi;
}

void requireStep(double dt, const char* who)
{
  if (!std::isfinite(dt))
    throw UsageError(std::string(who) + ": dt must be finite");
}

} // namespace

RigidBodyState rigidbody_lphj_step(const RigidBodyState& s, double dt, SolverOptions opts, RigidBodyScheme scheme)
{
  requireStep(dt, "rigidbody_lphj_step");
  s.validate();
  RigidBodyState out = s;
  if (scheme == RigidBodyScheme::explicit_omega) {
    out.Pi = transport(s.Pi, s.omega(), dt);
    return out;
  }
  // Pi' = R(dt I^-1 (Pi + Pi')/2)^T Pi
  Vector3d next = transport(s.Pi, s.omega(), dt);
  double residual = 0.0;
  const double scale = std::max(1.0, s.Pi.norm());
  for (int it = 0; it < opts.max_iter; ++it) {
    const Vector3d omega = (0.5 * (s.Pi + next)).cwiseQuotient(s.inertia);
    const Vector3d candidate = transport(s.Pi, omega, dt);
    residual = (candidate - next).lpNorm<Eigen::Infinity>();
    next = candidate;
    if (residual <= opts.tol * scale) {
      out.Pi = next;
      return out;
    }
  }
  throw ConvergenceError("rigidbody_lphj_step", residual, opts.max_iter);
}

RigidBodyState rigidbody_euler_step(const RigidBodyState& s, double dt)
{
  requireStep(dt, "rigidbody_euler_step");
  RigidBodyState out = s;
  out.Pi += dt * rigidbody_field(s);
  return out;
}

RigidBodyState rigidbody_rk4_step(const RigidBodyState& s, double dt)
{
  requireStep(dt, "rigidbody_rk4_step");
  auto f = [&](const Vector3d& Pi) { return Pi.cross(Pi.cwiseQuotient(s.inertia)).eval(); };
  const Vector3d k1 = f(s.Pi);
  const Vector3d k2 = f(s.Pi + 0.5 * dt * k1);
  const Vector3d k3 = f(s.Pi + 0.5 * dt * k2);
  const Vector3d k4 = f(s.Pi + dt * k3);
  RigidBodyState out = s;
  out.Pi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  return out;
}

// ---------------------------------------------------------------------------

void SemidirectState::validate() const
{
  mesh.validate();
  if (m.size() != mesh.n || rho.size() != mesh.n)
    throw UsageError("SemidirectState: field sizes do not match mesh");
  if (!m.allFinite() || !rho.allFinite())
    throw NumericalDomainError("SemidirectState: non-finite field");
}

SemidirectState smooth_semidirect_state(Eigen::Index n, std::uint64_t seed, double amp, pso::Difference scheme)
{
  if (n < 4)
    throw UsageError("smooth_semidirect_state: need at least 4 grid points");
  if (!(amp >= 0.0 && amp < 2.0 / 3.0))
    throw UsageError("smooth_semidirect_state: amplitude must lie in [0, 2/3) to keep rho positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> coef(-1.0, 1.0);
  SemidirectState s;
  s.mesh = pso::Mesh{n, 2.0 * std::numbers::pi / static_cast<double>(n), scheme};
  const VectorXd x = s.mesh.points();
  const double a = phase(rng), b = phase(rng), c = phase(rng);
  s.rho = (1.0 + amp * (x.array() + a).sin() + 0.5 * amp * (2.0 * x.array() + b).cos()).matrix();
  s.rho /= s.mass();
  const double w1 = coef(rng), w2 = coef(rng);
  s.m = 0.1 * (w1 * (x.array() + c).cos() + 0.5 * w2 * (3.0 * x.array()).sin()).matrix();
  return s;
}

namespace {

VectorXd D(const VectorXd& f, const pso::Mesh& mesh) { return pso::dx(f, mesh, 1); }

void requirePositive(const VectorXd& rho, const char* who)
{
  for (Eigen::Index j = 0; j < rho.size(); ++j)
    if (!(rho(j) > 0.0))
      throw PositivityError(std::string(who) + ": density not positive", static_cast<long>(j));
}

VectorXd logFloor(const VectorXd& rho) { return rho.cwiseMax(kLogFloor).array().log().matrix(); }

} // namespace

LPHamiltonian deep_lp_hamiltonian(double nu)
{
  if (!(nu >= 0.0) || !std::isfinite(nu))
    throw UsageError("deep_lp_hamiltonian: nu must be non-negative");
  const double nu2 = nu * nu, nu4 = nu2 * nu2;
  LPHamiltonian H;
  H.value = [=](const SemidirectState& s) {
    requirePositive(s.rho, "deep_lp_hamiltonian");
    const VectorXd dl = D(logFloor(s.rho), s.mesh);
    const double kinetic = 0.5 * (s.m.array().square() / s.rho.array()).sum();
    const double cross = 0.5 * nu2 * s.m.dot(dl);
    const double fisher = nu4 / 8.0 * (s.rho.array() * dl.array().square()).sum();
    return (kinetic + cross + fisher) * s.mesh.dx;
  };
  H.dm = [=](const SemidirectState& s) -> VectorXd {
    requirePositive(s.rho, "deep_lp_hamiltonian");
    return s.m.cwiseQuotient(s.rho) + 0.5 * nu2 * D(logFloor(s.rho), s.mesh);
  };
  H.drho = [=](const SemidirectState& s) -> VectorXd {
    requirePositive(s.rho, "deep_lp_hamiltonian");
    const VectorXd dl = D(logFloor(s.rho), s.mesh);
    const VectorXd flux = s.rho.cwiseProduct(dl);
    const auto r = s.rho.array();
    return (-0.5 * s.m.array().square() / r.square() - 0.5 * nu2 * D(s.m, s.mesh).array() / r +
            nu4 / 8.0 * (dl.array().square() - 2.0 * D(flux, s.mesh).array() / r))
        .matrix();
  };
  return H;
}

double lp_gradient_deviation(const LPHamiltonian& H, const SemidirectState& s, double h_fd)
{
  if (!(h_fd > 0.0))
    throw UsageError("lp_gradient_deviation: h_fd must be positive");
  const VectorXd um = H.dm(s), ur = H.drho(s);
  SemidirectState probe = s;
  double worst = 0.0;
  for (int field = 0; field < 2; ++field) {
    VectorXd& v = field == 0 ? probe.m : probe.rho;
    const VectorXd& analytic = field == 0 ? um : ur;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double saved = v(j);
      v(j) = saved + h_fd;
      const double up = H.value(probe);
      v(j) = saved - h_fd;
      const double down = H.value(probe);
      v(j) = saved;
      worst = std::max(worst, std::abs((up - down) / (2.0 * h_fd * s.mesh.dx) - analytic(j)));
    }
  }
  return worst;
}

SemidirectState lp_rate(const SemidirectState& s, const LPHamiltonian& H, LPVariant variant)
{
  const VectorXd u = H.dm(s);
  const VectorXd w = H.drho(s);
  if (!u.allFinite() || !w.allFinite())
    throw NumericalDomainError("lp_rate: non-finite functional derivative");
  SemidirectState r = s;
  r.m = s.m.cwiseProduct(D(u, s.mesh)) + D(s.m.cwiseProduct(u), s.mesh) + s.rho.cwiseProduct(D(w, s.mesh));
  r.rho = -D(s.rho.cwiseProduct(u), s.mesh);
  if (variant == LPVariant::literal)
    r.rho += w;
  return r;
}

SemidirectState lp_euler_step(const SemidirectState& s, const LPHamiltonian& H, double dt, LPVariant variant)
{
  s.validate();
  const SemidirectState r = lp_rate(s, H, variant);
  SemidirectState out = s;
  out.m += dt * r.m;
  out.rho += dt * r.rho;
  requirePositive(out.rho, "lp_euler_step");
  return out;
}

SemidirectState lp_semidirect_step(const SemidirectState& s, const LPHamiltonian& H, double dt, LPVariant variant,
                                   SolverOptions opts)
{
  if (!(dt > 0.0) || !std::isfinite(dt))
    throw UsageError("lp_semidirect_step: dt must be positive");
  s.validate();
  requirePositive(s.rho, "lp_semidirect_step");

  SemidirectState next = s;
  SemidirectState mid = s;
  const double scale = std::max({1.0, s.m.lpNorm<Eigen::Infinity>(), s.rho.lpNorm<Eigen::Infinity>()});
  double residual = 0.0;
  for (int it = 0; it < opts.max_iter; ++it) {
    mid.m = 0.5 * (s.m + next.m);
    mid.rho = 0.5 * (s.rho + next.rho);
    requirePositive(mid.rho, "lp_semidirect_step");
    const SemidirectState r = lp_rate(mid, H, variant);
    const VectorXd m1 = s.m + dt * r.m;
    const VectorXd rho1 = s.rho + dt * r.rho;
    residual = std::max((m1 - next.m).lpNorm<Eigen::Infinity>(), (rho1 - next.rho).lpNorm<Eigen::Infinity>());
    next.m = m1;
    next.rho = rho1;
    if (residual <= opts.tol * scale) {
      requirePositive(next.rho, "lp_semidirect_step");
      return next;
    }
  }
  throw ConvergenceError("lp_semidirect_step", residual, opts.max_iter);
}

VectorXd diamond(const VectorXd& eta, const VectorXd& rho, const pso::Mesh& mesh)
{
  if (eta.size() != mesh.n || rho.size() != mesh.n)
    throw UsageError("diamond: field sizes do not match mesh");
  return rho.cwiseProduct(D(eta, mesh));
}

VectorXd density_pullback(const VectorXd& rho, const VectorXd& u, const pso::Mesh& mesh, double dt, PullbackMode mode,
                          double alpha, LPVariant sign)
{
  mesh.validate();
  if (rho.size() != mesh.n || u.size() != mesh.n)
    throw UsageError("density_pullback: field sizes do not match mesh");
  if ((rho.array() < 0.0).any())
    throw UsageError("density_pullback: density must be non-negative");
  if (mode == PullbackMode::fokker_planck) {
    const VectorXd flux = D(rho.cwiseProduct(u), mesh);
    return sign == LPVariant::literal ? VectorXd(rho + dt * flux) : VectorXd(rho - dt * flux);
  }
  if (!(alpha > 0.0))
    throw UsageError("density_pullback: alpha must be positive");
  const double L = mesh.length();
  auto kernel = [&](double r) {
    r = std::remainder(r, L); // periodic image closest to zero
    return std::exp(-alpha * r * r);
  };
  const VectorXd x = mesh.points();
  double norm = 0.0; // kernel mass on the uniform periodic grid
  for (Eigen::Index j = 0; j < mesh.n; ++j)
    norm += kernel(x(0) - x(j));
  VectorXd out(mesh.n);
  for (Eigen::Index i = 0; i < mesh.n; ++i) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < mesh.n; ++j)
      acc += rho(j) * kernel(x(i) + dt * u(j) - x(j));
    out(i) = acc / norm;
  }
  return out;
}

} // namespace geomint
