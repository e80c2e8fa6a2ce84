#pragma once

#include <cmath>
#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Core>

#include "geomint/errors.hpp"
#include "geomint/phase_space.hpp"

namespace geomint {

/// One coefficient S_{2,i}(q, p) of the truncated type-II series together
/// with its gradient (dS/dq in the q slot, dS/dp in the p slot).
template <typename Scalar>
struct SeriesTerm
{
  std::function<Scalar(const PhaseBatch<Scalar>&)> value;
  std::function<PhaseBatch<Scalar>(const PhaseBatch<Scalar>&)> gradient;
};

/// Truncated power series S(q, P, t) = sum_{i=1..m} t^i S_{2,i}(q, P) of the
/// type-II generating function, written relative to the identity <q, P>.
/// The step it generates is
///   q' = q + dS/dP(q, p', dt),   p' = p - dS/dq(q, p', dt).
template <typename Scalar>
struct GeneratingSeries
{
  int order = 1;
  std::vector<SeriesTerm<Scalar>> terms;
  Hamiltonian<Scalar> source;
  Scalar fd_step = Scalar(1e-5);

  Scalar value(const PhaseBatch<Scalar>& s, Scalar t) const
  {
    Scalar acc(0), tp(1);
    for (const auto& term : terms) {
      tp *= t;
      acc += tp * term.value(s);
    }
    return acc;
  }

  PhaseBatch<Scalar> gradient(const PhaseBatch<Scalar>& s, Scalar t) const
  {
    auto acc = PhaseBatch<Scalar>::zeros(s.dim(), s.samples());
    Scalar tp(1);
    for (const auto& term : terms) {
      tp *= t;
      acc += tp * term.gradient(s);
    }
    return acc;
  }
};

namespace detail {

/// Hessian-vector product of H along (wq, wp), by central differences of the
/// analytic gradient. The probe displacement is capped at `h` in max-norm.
template <typename Scalar>
PhaseBatch<Scalar> hessianVector(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s,
                                 const PhaseBatch<Scalar>& w, Scalar h)
{
  using std::max;
  const Scalar scale = max(Scalar(1), max(w.q.cwiseAbs().maxCoeff(), w.p.cwiseAbs().maxCoeff()));
  const Scalar eps = h / scale;
  const auto up = H.gradient(s + eps * w);
  const auto down = H.gradient(s - eps * w);
  return (Scalar(1) / (Scalar(2) * eps)) * (up - down);
}

template <typename Scalar>
Scalar thirdTermValue(const Hamiltonian<Scalar>& H, const PhaseBatch<Scalar>& s, Scalar h)
{
  // S3 = 1/6 [ Hp.Hqq.Hp + Hp.Hqp.Hq + Hq.Hpp.Hq ]
  const auto g = H.gradient(s);
  const PhaseBatch<Scalar> swapped(g.p, g.q);
  const PhaseBatch<Scalar> pOnly(PhaseBatch<Scalar>::Matrix::Zero(g.dim(), g.samples()), g.q);
  const auto hw = hessianVector(H, s, swapped, h);
  const auto hp = hessianVector(H, s, pOnly, h);
  return (g.p.cwiseProduct(hw.q).sum() + g.q.cwiseProduct(hp.p).sum()) / Scalar(6);
}

} // namespace detail

/// Step of the central difference that turns S3 values into its gradient.
inline constexpr double kThirdTermOuterStep = 1e-3;

/// Builds the m-term series (1 <= m <= 3) for H.
///
/// Terms 1 and 2 are H and 1/2 <dH/dq, dH/dp>. Term 3 comes from matching
/// the t^2 coefficient of dS/dt = H(q + dS/dP, P):
///   S3 = 1/6 [ Hp^T Hqq Hp + Hp^T Hqp Hq + Hq^T Hpp Hq ].
/// Second derivatives are central differences of the analytic gradient with
/// step `fd_step`; the gradient of S3 is a central difference of its value
/// with step max(fd_step, kThirdTermOuterStep).
template <typename Scalar>
GeneratingSeries<Scalar> build_series(const Hamiltonian<Scalar>& H, int m, Scalar fd_step = Scalar(1e-5))
{
  if (m < 1 || m > 3)
    throw UsageError("build_series: unsupported order " + std::to_string(m) + " (supported: 1..3)");

  GeneratingSeries<Scalar> S;
  S.order = m;
  S.source = H;
  S.fd_step = fd_step;

  S.terms.push_back({H.value, H.gradient});

  if (m >= 2) {
    SeriesTerm<Scalar> t2;
    t2.value = [H](const PhaseBatch<Scalar>& s) {
      const auto g = H.gradient(s);
      return Scalar(0.5) * g.q.cwiseProduct(g.p).sum();
    };
    t2.gradient = [H, fd_step](const PhaseBatch<Scalar>& s) {
      const auto g = H.gradient(s);
      return Scalar(0.5) * detail::hessianVector(H, s, PhaseBatch<Scalar>(g.p, g.q), fd_step);
    };
    S.terms.push_back(std::move(t2));
  }

  if (m >= 3) {
    SeriesTerm<Scalar> t3;
    t3.value = [H, fd_step](const PhaseBatch<Scalar>& s) { return detail::thirdTermValue(H, s, fd_step); };
    // S3 already holds difference quotients with step fd_step; differencing it
    // again at that step leaves round-off of order eps / fd_step^2, which stalls
    // the implicit solve near tol 1e-12. The outer step is coarser: its O(h^2)
    // error is smooth.
    const Scalar outer = std::max(fd_step, Scalar(kThirdTermOuterStep));
    t3.gradient = [H, fd_step, outer](const PhaseBatch<Scalar>& s) {
      PhaseBatch<Scalar> probe = s;
      auto out = PhaseBatch<Scalar>::zeros(s.dim(), s.samples());
      auto scan = [&](auto& coords, auto& dst) {
        for (Eigen::Index k = 0; k < coords.size(); ++k) {
          const Scalar saved = coords(k);
          coords(k) = saved + outer;
          const Scalar up = detail::thirdTermValue(H, probe, fd_step);
          coords(k) = saved - outer;
          const Scalar down = detail::thirdTermValue(H, probe, fd_step);
          coords(k) = saved;
          dst(k) = (up - down) / (Scalar(2) * outer);
        }
      };
      scan(probe.q, out.q);
      scan(probe.p, out.p);
      return out;
    };
    S.terms.push_back(std::move(t3));
  }
  return S;
}

struct SolverOptions
{
  double tol = 1e-12;
  int max_iter = 100;
};

/// One implicit step generated by the series. p' is found by damped
/// fixed-point iteration (damping starts at 1 and halves whenever the
/// residual grows); dt == 0 returns the input unchanged.
template <typename Scalar>
PhaseBatch<Scalar> symplectic_step(const GeneratingSeries<Scalar>& S, const PhaseBatch<Scalar>& s, Scalar dt,
                                   SolverOptions opts = {})
{
  if (!(dt >= Scalar(0)) || !std::isfinite(static_cast<double>(dt)))
    throw UsageError("symplectic_step: dt must be finite and non-negative");
  if (!(opts.tol > 0))
    throw UsageError("symplectic_step: tol must be positive");
  if (dt == Scalar(0))
    return s;

  using Matrix = typename PhaseBatch<Scalar>::Matrix;
  PhaseBatch<Scalar> probe = s; // (q, p') with q fixed
  Scalar damping(1);
  Scalar prev = std::numeric_limits<Scalar>::infinity();
  Scalar residual = prev;
  for (int it = 0; it < opts.max_iter; ++it) {
    const auto g = S.gradient(probe, dt);
    detail::requireFinite(g, "symplectic_step");
    const Matrix update = s.p - g.q - probe.p;
    residual = update.cwiseAbs().maxCoeff();
    if (residual <= Scalar(opts.tol)) {
      probe.p += update;
      const auto gFinal = S.gradient(probe, dt);
      return PhaseBatch<Scalar>(s.q + gFinal.p, probe.p);
    }
    if (residual > prev)
      damping /= Scalar(2);
    prev = residual;
    probe.p += damping * update;
  }
  throw ConvergenceError("symplectic_step", static_cast<double>(residual), opts.max_iter);
}

/// ||J^T Omega J - Omega||_inf for the Jacobian J of `step` at s, formed by
/// central differences with step h_fd. Coordinates are ordered (vec q, vec p).
template <typename Scalar, typename Step>
Scalar symplecticity_defect(Step&& step, const PhaseBatch<Scalar>& s, Scalar dt, Scalar h_fd)
{
  using Matrix = typename PhaseBatch<Scalar>::Matrix;
  const Eigen::Index n = s.size();
  const Eigen::Index dim = s.dim(), samples = s.samples();
  const auto z0 = flatten(s);
  Matrix J(2 * n, 2 * n);
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    auto zp = z0, zm = z0;
    zp(k) += h_fd;
    zm(k) -= h_fd;
    const auto fp = flatten(step(unflatten<Scalar>(zp, dim, samples), dt));
    const auto fm = flatten(step(unflatten<Scalar>(zm, dim, samples), dt));
    J.col(k) = (fp - fm) / (Scalar(2) * h_fd);
  }
  Matrix omega = Matrix::Zero(2 * n, 2 * n);
  omega.topRightCorner(n, n).setIdentity();
  omega.bottomLeftCorner(n, n) = -Matrix::Identity(n, n);
  return (J.transpose() * omega * J - omega).cwiseAbs().maxCoeff();
}

} // namespace geomint
