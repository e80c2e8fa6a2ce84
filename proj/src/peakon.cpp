#include "geomint/peakon.hpp"

#include <cmath>

namespace geomint {

using Eigen::MatrixXd;
using Eigen::VectorXd;

PeakonKernel parse_peakon_kernel(const std::string& name)
{
  if (name == "gaussian")
    return PeakonKernel::gaussian;
  if (name == "exponential")
    return PeakonKernel::exponential;
  throw UsageError("unknown kernel '" + name + "' (expected gaussian or exponential)");
}

std::string to_string(PeakonKernel kernel) { return kernel == PeakonKernel::gaussian ? "gaussian" : "exponential"; }

void PeakonState::validate() const
{
  if (q.size() < 1 || q.size() != p.size())
    throw UsageError("PeakonState: need matching q and p with at least one particle");
  if (!(scale > 0.0))
    throw UsageError("PeakonState: kernel scale must be positive");
  if (!q.allFinite() || !p.allFinite())
    throw NumericalDomainError("PeakonState: non-finite state");
}

double peakon_kernel(PeakonKernel kernel, double scale, double x)
{
  if (kernel == PeakonKernel::gaussian)
    return std::exp(-x * x / (2.0 * scale * scale));
  return std::exp(-std::abs(x) / scale);
}

double peakon_kernel_derivative(PeakonKernel kernel, double scale, double x)
{
  if (kernel == PeakonKernel::gaussian)
    return -x / (scale * scale) * peakon_kernel(kernel, scale, x);
  if (x == 0.0)
    return 0.0;
  return -std::copysign(1.0, x) / scale * peakon_kernel(kernel, scale, x);
}

namespace {

double energy(PeakonKernel kernel, double scale, const VectorXd& q, const VectorXd& p)
{
  double h = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i)
    for (Eigen::Index k = 0; k < q.size(); ++k)
      h += p(i) * p(k) * peakon_kernel(kernel, scale, q(i) - q(k));
  return h;
}

} // namespace

double peakon_hamiltonian(const PeakonState& s)
{
  s.validate();
  return energy(s.kernel, s.scale, s.q, s.p);
}

Hamiltoniand peakon_hamiltonian_fn(PeakonKernel kernel, double scale)
{
  if (!(scale > 0.0))
    throw UsageError("peakon_hamiltonian_fn: kernel scale must be positive");
  Hamiltoniand H;
  H.name = "peakon-" + to_string(kernel);
  H.parameters = {{"scale", scale}};
  H.value = [=](const PhaseBatchd& b) {
    return energy(kernel, scale, b.q.row(0).transpose(), b.p.row(0).transpose());
  };
  H.gradient = [=](const PhaseBatchd& b) {
    const Eigen::Index n = b.samples();
    PhaseBatchd g(MatrixXd::Zero(1, n), MatrixXd::Zero(1, n));
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index k = 0; k < n; ++k) {
        const double x = b.q(0, i) - b.q(0, k);
        g.q(0, i) += 2.0 * b.p(0, i) * b.p(0, k) * peakon_kernel_derivative(kernel, scale, x);
        g.p(0, i) += 2.0 * b.p(0, k) * peakon_kernel(kernel, scale, x);
      }
    return g;
  };
  return H;
}

PhaseBatchd to_batch(const PeakonState& s)
{
  return PhaseBatchd(MatrixXd(s.q.transpose()), MatrixXd(s.p.transpose()));
}

PeakonState from_batch(const PhaseBatchd& b, const PeakonState& like)
{
  PeakonState out = like;
  out.q = b.q.row(0).transpose();
  out.p = b.p.row(0).transpose();
  return out;
}

PeakonState peakon_step(const PeakonState& s, double dt, int m, SolverOptions opts)
{
  s.validate();
  const auto S = build_series(peakon_hamiltonian_fn(s.kernel, s.scale), m);
  return from_batch(symplectic_step(S, to_batch(s), dt, opts), s);
}

PeakonState peakon_euler_step(const PeakonState& s, double dt)
{
  s.validate();
  return from_batch(euler_step(peakon_hamiltonian_fn(s.kernel, s.scale), to_batch(s), dt), s);
}

LaxPair lax_matrices(const PeakonState& s, double exponent_scale)
{
  s.validate();
  if (!(exponent_scale > 0.0))
    throw UsageError("lax_matrices: exponent scale must be positive");
  const Eigen::Index n = s.size();
  for (Eigen::Index i = 0; i < n; ++i)
    if (!(s.p(i) > 0.0))
      throw NumericalDomainError("lax_matrices: momentum " + std::to_string(i) + " is not positive");
  LaxPair lp{MatrixXd(n, n), MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double x = s.q(i) - s.q(j);
      const double w = std::sqrt(s.p(i) * s.p(j)) * std::exp(-exponent_scale * std::abs(x));
      const double sign = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
      lp.L(i, j) = w;
      lp.P(i, j) = -2.0 * sign * w;
    }
  return lp;
}

VectorXd conserved_traces(const MatrixXd& L, int k_max)
{
  if (L.rows() != L.cols())
    throw UsageError("conserved_traces: L must be square");
  if (k_max > L.rows())
    throw UsageError("conserved_traces: k_max exceeds the number of particles");
  if (k_max < 2)
    return VectorXd();
  VectorXd out(k_max - 1);
  MatrixXd power = L;
  for (int k = 2; k <= k_max; ++k) {
    power = power * L;
    out(k - 2) = power.trace();
  }
  return out;
}

} // namespace geomint
