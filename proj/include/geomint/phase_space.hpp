#pragma once

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "geomint/errors.hpp"

namespace geomint {

/// A batch of samples on the cotangent bundle. Column i of q and p holds
/// sample i, so both matrices are d x N.
template <typename Scalar>
struct PhaseBatch
{
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix q;
  Matrix p;

  PhaseBatch() = default;
  PhaseBatch(Matrix q_, Matrix p_) : q(std::move(q_)), p(std::move(p_))
  {
    if (q.rows() != p.rows() || q.cols() != p.cols())
      throw UsageError("PhaseBatch: q and p must have the same shape");
  }

  static PhaseBatch zeros(Eigen::Index dim, Eigen::Index samples)
  {
    return PhaseBatch(Matrix::Zero(dim, samples), Matrix::Zero(dim, samples));
  }

  /// Single-sample batch from two vectors.
  template <typename DerivedQ, typename DerivedP>
  static PhaseBatch point(const Eigen::MatrixBase<DerivedQ>& q_, const Eigen::MatrixBase<DerivedP>& p_)
  {
    return PhaseBatch(Matrix(q_), Matrix(p_));
  }

  Eigen::Index dim() const { return q.rows(); }
  Eigen::Index samples() const { return q.cols(); }
  /// Number of canonical coordinate pairs (d * N).
  Eigen::Index size() const { return q.size(); }

  bool allFinite() const { return q.allFinite() && p.allFinite(); }

  PhaseBatch& operator+=(const PhaseBatch& o)
  {
    q += o.q;
    p += o.p;
    return *this;
  }
};

template <typename Scalar>
PhaseBatch<Scalar> operator+(PhaseBatch<Scalar> a, const PhaseBatch<Scalar>& b)
{
  a += b;
  return a;
}

template <typename Scalar>
PhaseBatch<Scalar> operator-(PhaseBatch<Scalar> a, const PhaseBatch<Scalar>& b)
{
  a.q -= b.q;
  a.p -= b.p;
  return a;
}

template <typename Scalar>
PhaseBatch<Scalar> operator*(Scalar s, PhaseBatch<Scalar> a)
{
  a.q *= s;
  a.p *= s;
  return a;
}

/// Max-abs distance between two batches of equal shape.
template <typename Scalar>
Scalar maxAbsDiff(const PhaseBatch<Scalar>& a, const PhaseBatch<Scalar>& b)
{
  return std::max((a.q - b.q).cwiseAbs().maxCoeff(), (a.p - b.p).cwiseAbs().maxCoeff());
}

/// Flattens (q, p) into one vector [vec(q); vec(p)] (column-major).
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> flatten(const PhaseBatch<Scalar>& s)
{
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z(2 * s.size());
  z.head(s.size()) = s.q.reshaped();
  z.tail(s.size()) = s.p.reshaped();
  return z;
}

template <typename Scalar, typename Derived>
PhaseBatch<Scalar> unflatten(const Eigen::MatrixBase<Derived>& z, Eigen::Index dim, Eigen::Index samples)
{
  const Eigen::Index n = dim * samples;
  using Matrix = typename PhaseBatch<Scalar>::Matrix;
  return PhaseBatch<Scalar>(Matrix(z.head(n).reshaped(dim, samples)), Matrix(z.tail(n).reshaped(dim, samples)));
}

/// A Hamiltonian on a batch state together with its analytic first
/// derivatives. `gradient` returns dH/dq in the q slot and dH/dp in the p
/// slot.
template <typename Scalar>
struct Hamiltonian
{
  std::string name;
  std::map<std::string, double> parameters;
  std::function<Scalar(const PhaseBatch<Scalar>&)> value;
  std::function<PhaseBatch<Scalar>(const PhaseBatch<Scalar>&)> gradient;

  Scalar operator()(const PhaseBatch<Scalar>& s) const { return value(s); }
  typename PhaseBatch<Scalar>::Matrix grad_q(const PhaseBatch<Scalar>& s) const { return gradient(s).q; }
  typename PhaseBatch<Scalar>::Matrix grad_p(const PhaseBatch<Scalar>& s) const { return gradient(s).p; }
};

using PhaseBatchd = PhaseBatch<double>;
using Hamiltoniand = Hamiltonian<double>;

namespace detail {

template <typename Scalar>
void requireFinite(const PhaseBatch<Scalar>& g, const std::string& who)
{
  for (Eigen::Index j = 0; j < g.q.cols(); ++j)
    for (Eigen::Index i = 0; i < g.q.rows(); ++i) {
      if (!std::isfinite(static_cast<double>(g.q(i, j))))
        throw NumericalDomainError(who + ": non-finite dH/dq[" + std::to_string(i) + "," + std::to_string(j) + "]");
      if (!std::isfinite(static_cast<double>(g.p(i, j))))
        throw NumericalDomainError(who + ": non-finite dH/dp[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
}

} // namespace detail

/// Canonical vector field (dH/dp, -dH/dq) at s.
template <typename Scalar>
PhaseBatch<Scalar> canonicalField(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s, const std::string& who)
{
  PhaseBatch<Scalar> g = H.gradient(s);
  detail::requireFinite(g, who);
  return PhaseBatch<Scalar>(std::move(g.p), -g.q);
}

/// Explicit Euler on Hamilton's equations.
template <typename Scalar>
PhaseBatch<Scalar> euler_step(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s, Scalar dt)
{
  if (!std::isfinite(static_cast<double>(dt)))
    throw UsageError("euler_step: dt must be finite");
  if (dt == Scalar(0))
    return s;
  return s + dt * canonicalField(H, s, "euler_step");
}

/// Classical four-stage Runge-Kutta on Hamilton's equations.
template <typename Scalar>
PhaseBatch<Scalar> rk4_step(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s, Scalar dt)
{
  if (!std::isfinite(static_cast<double>(dt)))
    throw UsageError("rk4_step: dt must be finite");
  if (dt == Scalar(0))
    return s;
  const Scalar half = dt / Scalar(2);
  const auto k1 = canonicalField(H, s, "rk4_step");
  const auto k2 = canonicalField(H, s + half * k1, "rk4_step");
  const auto k3 = canonicalField(H, s + half * k2, "rk4_step");
  const auto k4 = canonicalField(H, s + dt * k3, "rk4_step");
  return s + (dt / Scalar(6)) * (k1 + Scalar(2) * k2 + Scalar(2) * k3 + k4);
}

/// Max over all components of |analytic gradient - central difference|.
template <typename Scalar>
Scalar check_gradients(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s, Scalar h_fd)
{
  if (!(h_fd > Scalar(0)))
    throw UsageError("check_gradients: h_fd must be positive");
  const PhaseBatch<Scalar> g = H.gradient(s);
  Scalar worst(0);
  PhaseBatch<Scalar> probe = s;
  auto scan = [&](auto& coords, const auto& analytic) {
    for (Eigen::Index k = 0; k < coords.size(); ++k) {
      const Scalar saved = coords(k);
      coords(k) = saved + h_fd;
      const Scalar up = H.value(probe);
      coords(k) = saved - h_fd;
      const Scalar down = H.value(probe);
      coords(k) = saved;
      const Scalar fd = (up - down) / (Scalar(2) * h_fd);
      using std::abs;
      worst = std::max(worst, Scalar(abs(fd - analytic(k))));
    }
  };
  scan(probe.q, g.q);
  scan(probe.p, g.p);
  return worst;
}

/// H = 1/2 (|q|^2 + |p|^2) summed over the batch.
template <typename Scalar = double>
Hamiltonian<Scalar> harmonic_oscillator()
{
  Hamiltonian<Scalar> H;
  H.name = "harmonic_oscillator";
  H.value = [](const PhaseBatch<Scalar>& s) { return Scalar(0.5) * (s.q.squaredNorm() + s.p.squaredNorm()); };
  H.gradient = [](const PhaseBatch<Scalar>& s) { return s; };
  return H;
}

/// H = 1/2 |p|^2 - cos(q), summed over the batch.
template <typename Scalar = double>
Hamiltonian<Scalar> pendulum()
{
  Hamiltonian<Scalar> H;
  H.name = "pendulum";
  H.value = [](const PhaseBatch<Scalar>& s) {
    return Scalar(0.5) * s.p.squaredNorm() - s.q.array().cos().sum();
  };
  H.gradient = [](const PhaseBatch<Scalar>& s) {
    return PhaseBatch<Scalar>(s.q.array().sin().matrix(), s.p);
  };
  return H;
}

template <typename Scalar = double>
Hamiltonian<Scalar> constant_hamiltonian(Scalar c)
{
  Hamiltonian<Scalar> H;
  H.name = "constant";
  H.parameters["value"] = static_cast<double>(c);
  H.value = [c](const PhaseBatch<Scalar>&) { return c; };
  H.gradient = [](const PhaseBatch<Scalar>& s) { return PhaseBatch<Scalar>::zeros(s.dim(), s.samples()); };
  return H;
}

} // namespace geomint
