#include "geomint/resnet_ocp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/LU>

namespace geomint {

DatasetKind parse_dataset_kind(const std::string& name)
{
  if (name == "spirals")
    return DatasetKind::spirals;
  if (name == "circles")
    return DatasetKind::circles;
  throw UsageError("unknown dataset kind '" + name + "' (expected spirals|circles)");
}

Integrator parse_integrator(const std::string& name)
{
  if (name == "euler")
    return Integrator::euler;
  if (name == "rk4")
    return Integrator::rk4;
  if (name == "symplectic")
    return Integrator::symplectic;
  throw UsageError("unknown integrator '" + name + "' (expected euler|rk4|symplectic)");
}

std::string to_string(DatasetKind kind) { return kind == DatasetKind::spirals ? "spirals" : "circles"; }

std::string to_string(Integrator integrator)
{
  switch (integrator) {
  case Integrator::euler: return "euler";
  case Integrator::rk4: return "rk4";
  default: return "symplectic";
  }
}

std::string to_string(Split split) { return split == Split::train ? "train" : "test"; }

Dataset generate_dataset(DatasetKind kind, int n, std::uint64_t seed, Split split)
{
  if (n <= 0)
    throw UsageError("generate_dataset: n must be positive");
  constexpr double pi = std::numbers::pi;
  // independent stream for the test split
  std::mt19937_64 rng(split == Split::train ? seed : seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> noise(0.0, 1.0);

  Dataset data;
  data.kind = kind;
  data.split = split;
  data.seed = seed;
  data.inputs.resize(2, n);
  data.labels.resize(n);
  for (int i = 0; i < n; ++i) {
    const int c = i % 2;
    data.labels(i) = c;
    double x, y;
    if (kind == DatasetKind::spirals) {
      const double t = std::uniform_real_distribution<double>(0.0, 3.0 * pi)(rng);
      const double r = 0.1 + 0.9 * t / (3.0 * pi);
      x = r * std::cos(t + c * pi) + kSpiralNoise * noise(rng);
      y = r * std::sin(t + c * pi) + kSpiralNoise * noise(rng);
    } else {
      const double a = std::uniform_real_distribution<double>(0.0, 2.0 * pi)(rng);
      const double r = c == 0 ? 0.5 : 1.0;
      x = r * std::cos(a) + kCircleNoise * noise(rng);
      y = r * std::sin(a) + kCircleNoise * noise(rng);
    }
    data.inputs(0, i) = x;
    data.inputs(1, i) = y;
  }
  return data;
}

Eigen::VectorXd ControlParams::flat() const
{
  const Eigen::Index d = dim();
  Eigen::VectorXd v(d * d + d);
  v.head(d * d) = u.reshaped();
  v.tail(d) = b;
  return v;
}

ControlParams ControlParams::fromFlat(const Eigen::VectorXd& v, Eigen::Index d)
{
  if (v.size() != d * d + d)
    throw UsageError("ControlParams::fromFlat: size mismatch");
  return {v.head(d * d).reshaped(d, d), v.tail(d)};
}

namespace {

void checkDims(const PhaseBatchd& batch, const ControlParams& theta, const char* who)
{
  if (theta.u.rows() != batch.dim() || theta.u.cols() != batch.dim() || theta.b.size() != batch.dim())
    throw UsageError(std::string(who) + ": control dimension does not match batch");
}

Eigen::MatrixXd preActivation(const Eigen::MatrixXd& q, const ControlParams& theta)
{
  return (theta.u * q).colwise() + theta.b;
}

// Size of the terms summed into dH/dtheta; round-off in the residuals is
// proportional to it.
double sumScale(const Eigen::MatrixXd& q, const Eigen::MatrixXd& p)
{
  const Eigen::ArrayXd qn = q.cwiseAbs().colwise().maxCoeff().transpose().array() + 1.0;
  const Eigen::ArrayXd pn = p.cwiseAbs().colwise().maxCoeff().transpose().array();
  return (qn * pn).sum();
}

/// (1/gamma) sum_i (p_i . tanh'(z_i)) [q_i^T, 1]
ControlParams controlMap(const PhaseBatchd& batch, const ControlParams& theta, double gamma)
{
  const Eigen::ArrayXXd s = preActivation(batch.q, theta).array().tanh();
  const Eigen::MatrixXd w = (batch.p.array() * (1.0 - s.square())).matrix();
  return {w * batch.q.transpose() / gamma, w.rowwise().sum() / gamma};
}

} // namespace

double control_hamiltonian(const PhaseBatchd& batch, const ControlParams& theta, double gamma)
{
  checkDims(batch, theta, "control_hamiltonian");
  const Eigen::ArrayXXd s = preActivation(batch.q, theta).array().tanh();
  return (batch.p.array() * s).sum() - 0.5 * gamma * theta.squaredNorm();
}

ControlParams control_gradient(const PhaseBatchd& batch, const ControlParams& theta, double gamma)
{
  checkDims(batch, theta, "control_gradient");
  ControlParams g = controlMap(batch, theta, 1.0);
  g.u -= gamma * theta.u;
  g.b -= gamma * theta.b;
  return g;
}

ControlParams eliminate_control(const PhaseBatchd& batch, double gamma, SolverOptions opts, const ControlParams* warm)
{
  if (!(gamma > 0))
    throw UsageError("eliminate_control: gamma must be positive");
  ControlParams theta = warm ? *warm : ControlParams::zeros(batch.dim());
  checkDims(batch, theta, "eliminate_control");
  const Eigen::Index d = batch.dim(), nt = d * d + d;
  // theta* maximizes H over theta, so F(theta) - theta = dH/dtheta / gamma is
  // an ascent direction. Steps are damped until H increases; when the
  // Hessian is definite the Newton direction replaces the plain update.
  double residual = std::numeric_limits<double>::infinity();
  double h = control_hamiltonian(batch, theta, gamma);
  const double scale = std::max(1.0, sumScale(batch.q, batch.p) / gamma);
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd x = theta.flat();
    const Eigen::VectorXd grad = control_gradient(batch, theta, gamma).flat();
    residual = grad.cwiseAbs().maxCoeff() / gamma;
    if (!std::isfinite(residual))
      throw NumericalDomainError("eliminate_control: non-finite iterate");
    if (residual <= opts.tol * scale)
      return ControlParams::fromFlat(x + grad / gamma, d);

    const Eigen::ArrayXXd s = preActivation(batch.q, theta).array().tanh();
    const Eigen::ArrayXXd ps2 = -2.0 * batch.p.array() * s * (1.0 - s.square());
    Eigen::MatrixXd A = gamma * Eigen::MatrixXd::Identity(nt, nt);
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(d, nt);
    for (Eigen::Index j = 0; j < batch.samples(); ++j) {
      for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index a = 0; a < d; ++a)
          J(a, a + c * d) = batch.q(c, j);
      J.rightCols(d).setIdentity();
      A.noalias() -= J.transpose() * ps2.col(j).matrix().asDiagonal() * J;
    }
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    const bool newton = llt.info() == Eigen::Success;
    const Eigen::VectorXd dir = newton ? Eigen::VectorXd(llt.solve(grad)) : Eigen::VectorXd(grad / gamma);

    double step = 1.0;
    for (int ls = 0;; ++ls) {
      const ControlParams trial = ControlParams::fromFlat(x + step * dir, d);
      const double ht = control_hamiltonian(batch, trial, gamma);
      const bool ascent = ht >= h + 1e-4 * step * grad.dot(dir);
      // near convergence H stalls at round-off; accept a Newton step that
      // still shrinks the gradient
      const bool closer = newton && ht >= h - 1e-12 * (1.0 + std::abs(h)) &&
                          control_gradient(batch, trial, gamma).flat().cwiseAbs().maxCoeff() / gamma < 0.5 * residual;
      if (ascent || closer || ls == 40) {
        theta = trial;
        h = ht;
        break;
      }
      step /= 2.0;
    }
  }
  throw ConvergenceError("eliminate_control", residual, opts.max_iter);
}

double reduced_hamiltonian(const PhaseBatchd& batch, double gamma, SolverOptions opts)
{
  return control_hamiltonian(batch, eliminate_control(batch, gamma, opts), gamma);
}

Hamiltoniand reduced_hamiltonian_fn(double gamma, SolverOptions opts)
{
  Hamiltoniand H;
  H.name = "reduced_resnet";
  H.parameters["gamma"] = gamma;
  H.value = [gamma, opts](const PhaseBatchd& s) { return reduced_hamiltonian(s, gamma, opts); };
  H.gradient = [gamma, opts](const PhaseBatchd& s) {
    const ControlParams theta = eliminate_control(s, gamma, opts);
    const Eigen::ArrayXXd t = preActivation(s.q, theta).array().tanh();
    const Eigen::MatrixXd w = (s.p.array() * (1.0 - t.square())).matrix();
    return PhaseBatchd(theta.u.transpose() * w, t.matrix());
  };
  return H;
}

// ---------------------------------------------------------------------------
// Implicit layer. Unknowns y = (p', theta) with theta = [vec(u); b]. Per
// sample, J_i maps dtheta to the pre-activation change du q_i + db.
//   R1_i = p'_i - p_i + dt u^T w_i,            w_i = p'_i . s1_i
//   R2   = gamma theta - sum_i J_i^T w_i
// with s1 = tanh', s2 = tanh''. The Newton matrix has d x d diagonal blocks
// M_i = I + dt u^T diag(s1_i), so it is reduced to a Schur system in theta.

namespace {

template <int D>
struct LayerKernel
{
  static constexpr int NT = D == Eigen::Dynamic ? Eigen::Dynamic : D * D + D;
  using Vec = Eigen::Matrix<double, D, 1>;
  using Mat = Eigen::Matrix<double, D, D>;
  using DxT = Eigen::Matrix<double, D, NT>;
  using TVec = Eigen::Matrix<double, NT, 1>;
  using TMat = Eigen::Matrix<double, NT, NT>;

  const Eigen::MatrixXd& Q;
  double dt, gamma;
  Eigen::Index d, nt, n;
  Mat u;
  Vec b;

  struct Local
  {
    Vec s, s1, w, ps2;
    DxT J;
  };

  LayerKernel(const Eigen::MatrixXd& q, double dt_, double gamma_)
    : Q(q), dt(dt_), gamma(gamma_), d(q.rows()), nt(q.rows() * q.rows() + q.rows()), n(q.cols())
  {}

  void setTheta(const TVec& theta)
  {
    u = theta.head(d * d).reshaped(d, d);
    b = theta.tail(d);
  }

  void local(Eigen::Index i, const Vec& pn, Local& L) const
  {
    const Vec qi = Q.col(i);
    L.s = (u * qi + b).array().tanh().matrix();
    L.s1 = (1.0 - L.s.array().square()).matrix();
    L.w = pn.cwiseProduct(L.s1);
    L.ps2 = (-2.0 * pn.array() * L.s.array() * L.s1.array()).matrix();
    L.J = DxT::Zero(d, nt);
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index a = 0; a < d; ++a)
        L.J(a, a + c * d) = qi(c);
    for (Eigen::Index a = 0; a < d; ++a)
      L.J(a, d * d + a) = 1.0;
  }

  // dt (K_i + u^T diag(ps2) J_i), K_i dtheta = du^T w_i
  DxT coupling(const Local& L) const
  {
    DxT C = u.transpose() * L.ps2.asDiagonal() * L.J;
    for (Eigen::Index c = 0; c < d; ++c)
      for (Eigen::Index a = 0; a < d; ++a)
        C(c, a + c * d) += L.w(a);
    return dt * C;
  }

  Mat block(const Local& L) const { return Mat::Identity(d, d) + dt * u.transpose() * L.s1.asDiagonal(); }

  double residual(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Pn, const TVec& theta, Eigen::MatrixXd& R1,
                  TVec& R2) const
  {
    Local L;
    R2 = gamma * theta;
    for (Eigen::Index i = 0; i < n; ++i) {
      local(i, Pn.col(i), L);
      R1.col(i) = Pn.col(i) - P.col(i) + dt * u.transpose() * L.w;
      R2.noalias() -= L.J.transpose() * L.w;
    }
    return std::max(R1.cwiseAbs().maxCoeff(), R2.cwiseAbs().maxCoeff());
  }

  int solve(const Eigen::MatrixXd& P, Eigen::MatrixXd& Pn, TVec& theta, SolverOptions opts)
  {
    Eigen::MatrixXd R1(d, n), MinvR(d, n), MinvC(d, nt * n);
    TVec R2 = TVec::Zero(nt);
    setTheta(theta);
    double res = residual(P, Pn, theta, R1, R2);
    const double scale = std::max({1.0, P.cwiseAbs().maxCoeff(), sumScale(Q, P)});
    Local L;
    for (int it = 0; it < opts.max_iter; ++it) {
      if (!std::isfinite(res))
        throw NumericalDomainError("symplectic_layer_step: non-finite residual");
      if (res <= opts.tol * scale)
        return it;

      TMat S = gamma * TMat::Identity(nt, nt);
      TVec rhs = -R2;
      for (Eigen::Index i = 0; i < n; ++i) {
        local(i, Pn.col(i), L);
        const Mat Minv = block(L).inverse();
        const DxT C = coupling(L);
        MinvC.middleCols(i * nt, nt) = Minv * C;
        MinvR.col(i) = Minv * R1.col(i);
        const Eigen::Matrix<double, NT, D> G = L.J.transpose() * L.s1.asDiagonal();
        S.noalias() -= L.J.transpose() * L.ps2.asDiagonal() * L.J;
        S.noalias() += G * MinvC.middleCols(i * nt, nt);
        rhs.noalias() -= G * MinvR.col(i);
      }
      const TVec dtheta = S.partialPivLu().solve(rhs);
      Eigen::MatrixXd dP(d, n);
      for (Eigen::Index i = 0; i < n; ++i)
        dP.col(i) = -MinvR.col(i) - MinvC.middleCols(i * nt, nt) * dtheta;

      // backtracking on the max-norm residual
      double step = 1.0;
      for (int ls = 0;; ++ls) {
        const Eigen::MatrixXd PnTrial = Pn + step * dP;
        const TVec thetaTrial = theta + step * dtheta;
        setTheta(thetaTrial);
        const double trial = residual(P, PnTrial, thetaTrial, R1, R2);
        if (std::isfinite(trial) && trial < res) {
          Pn = PnTrial;
          theta = thetaTrial;
          res = trial;
          break;
        }
        if (ls == 30) {
          setTheta(theta);
          throw ConvergenceError("symplectic_layer_step", res, it + 1);
        }
        step /= 2.0;
      }
    }
    if (res <= opts.tol * scale)
      return opts.max_iter;
    throw ConvergenceError("symplectic_layer_step", res, opts.max_iter);
  }

  // Adjoint of (q, p) -> (q', p') through the implicit solve.
  void adjoint(const Eigen::MatrixXd& Pn, const TVec& theta, const Eigen::MatrixXd& Qbar1,
               const Eigen::MatrixXd& Pbar1, Eigen::MatrixXd& Qbar, Eigen::MatrixXd& Pbar)
  {
    setTheta(theta);
    Local L;
    TMat S = gamma * TMat::Identity(nt, nt);
    TVec rhs = TVec::Zero(nt);
    Eigen::MatrixXd MinvT(d, d * n);
    for (Eigen::Index i = 0; i < n; ++i) {
      local(i, Pn.col(i), L);
      const Mat MiT = block(L).transpose().inverse();
      MinvT.middleCols(i * d, d) = MiT;
      const DxT C = coupling(L);
      const Eigen::Matrix<double, NT, D> CtMiT = C.transpose() * MiT;
      S.noalias() -= L.J.transpose() * L.ps2.asDiagonal() * L.J;
      S.noalias() += CtMiT * L.s1.asDiagonal() * L.J;
      rhs.noalias() += dt * L.J.transpose() * L.s1.cwiseProduct(Qbar1.col(i));
      rhs.noalias() -= CtMiT * Pbar1.col(i);
    }
    const TVec lam = S.partialPivLu().solve(rhs);
    const Mat lamU = lam.head(d * d).reshaped(d, d);
    Qbar.resize(d, n);
    Pbar.resize(d, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      local(i, Pn.col(i), L);
      const Vec Jl = L.J * lam;
      const Vec l1 = MinvT.middleCols(i * d, d) * (Pbar1.col(i) + L.s1.cwiseProduct(Jl));
      const Vec qb1 = Qbar1.col(i);
      Vec qb = qb1 + dt * u.transpose() * L.s1.cwiseProduct(qb1);
      qb.noalias() -= dt * u.transpose() * L.ps2.cwiseProduct(u * l1);
      qb.noalias() += u.transpose() * L.ps2.cwiseProduct(Jl);
      qb.noalias() += lamU.transpose() * L.w;
      Qbar.col(i) = qb;
      Pbar.col(i) = l1;
    }
  }
};

template <typename F>
decltype(auto) dispatchDim(Eigen::Index d, F&& f)
{
  switch (d) {
  case 1: return f(std::integral_constant<int, 1>{});
  case 2: return f(std::integral_constant<int, 2>{});
  case 3: return f(std::integral_constant<int, 3>{});
  default: return f(std::integral_constant<int, Eigen::Dynamic>{});
  }
}

} // namespace

LayerSolution solve_symplectic_layer(const PhaseBatchd& batch, double dt, double gamma, SolverOptions opts,
                                     const ControlParams* warm)
{
  if (!(gamma > 0))
    throw UsageError("symplectic_layer_step: gamma must be positive");
  if (!(dt >= 0) || !std::isfinite(dt))
    throw UsageError("symplectic_layer_step: dt must be finite and non-negative");
  if (!(opts.tol > 0) || opts.max_iter < 1)
    throw UsageError("symplectic_layer_step: invalid solver options");
  const Eigen::Index d = batch.dim();
  LayerSolution sol;
  sol.theta = warm ? *warm : ControlParams::zeros(d);
  checkDims(batch, sol.theta, "symplectic_layer_step");
  if (dt == 0.0) {
    sol.next = batch;
    sol.theta = eliminate_control(batch, gamma, {opts.tol, std::max(opts.max_iter, 1000)}, warm);
    return sol;
  }

  // Predictor: explicit costate update with the starting control. A warm
  // control is tried first; the eliminated control is the fallback.
  auto attempt = [&](const ControlParams& start) {
    const Eigen::ArrayXXd s0 = preActivation(batch.q, start).array().tanh();
    Eigen::MatrixXd Pn = batch.p - dt * start.u.transpose() * (batch.p.array() * (1.0 - s0.square())).matrix();
    Eigen::VectorXd theta = start.flat();
    dispatchDim(d, [&](auto dimTag) {
      constexpr int D = decltype(dimTag)::value;
      LayerKernel<D> k(batch.q, dt, gamma);
      typename LayerKernel<D>::TVec th = theta;
      sol.iterations = k.solve(batch.p, Pn, th, opts);
      theta = th;
    });
    sol.theta = ControlParams::fromFlat(theta, d);
    const Eigen::MatrixXd qn = batch.q + dt * preActivation(batch.q, sol.theta).array().tanh().matrix();
    sol.next = PhaseBatchd(qn, Pn);
  };
  if (warm) {
    try {
      attempt(*warm);
      return sol;
    } catch (const Error&) {
    }
  }
  attempt(eliminate_control(batch, gamma, {opts.tol, std::max(opts.max_iter, 1000)}, warm));
  return sol;
}

PhaseBatchd symplectic_layer_step(const PhaseBatchd& batch, double dt, double gamma, SolverOptions opts)
{
  return solve_symplectic_layer(batch, dt, gamma, opts).next;
}

PhaseBatchd symplectic_layer_adjoint(const PhaseBatchd& batch, const LayerSolution& sol, double dt, double gamma,
                                     const PhaseBatchd& adjointNext)
{
  if (dt == 0.0)
    return adjointNext;
  PhaseBatchd out;
  dispatchDim(batch.dim(), [&](auto dimTag) {
    constexpr int D = decltype(dimTag)::value;
    LayerKernel<D> k(batch.q, dt, gamma);
    typename LayerKernel<D>::TVec th = sol.theta.flat();
    k.adjoint(sol.next.p, th, adjointNext.q, adjointNext.p, out.q, out.p);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Networks and training

void TrainConfig::validate() const
{
  if (layers < 1)
    throw UsageError("TrainConfig: layers must be >= 1");
  if (!(dt > 0) || !std::isfinite(dt))
    throw UsageError("TrainConfig: dt must be positive");
  if (!(gamma > 0) || !std::isfinite(gamma))
    throw UsageError("TrainConfig: gamma must be positive");
  if (iterations < 0)
    throw UsageError("TrainConfig: iterations must be >= 0");
  if (!(learning_rate > 0))
    throw UsageError("TrainConfig: learning rate must be positive");
  if (!(tol > 0) || max_iter < 1)
    throw UsageError("TrainConfig: invalid solver options");
  if (!(init_scale >= 0))
    throw UsageError("TrainConfig: init_scale must be non-negative");
}

NetState initial_state(const TrainConfig& config, const Dataset& data)
{
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index d = data.dim();
  NetState state;
  if (config.integrator == Integrator::symplectic) {
    state.costates.resize(d, data.size());
    for (Eigen::Index j = 0; j < state.costates.cols(); ++j)
      for (Eigen::Index i = 0; i < d; ++i)
        state.costates(i, j) = config.init_scale * normal(rng);
  } else {
    for (int k = 0; k < config.layers; ++k) {
      ControlParams th = ControlParams::zeros(d);
      for (Eigen::Index c = 0; c < d; ++c)
        for (Eigen::Index r = 0; r < d; ++r)
          th.u(r, c) = config.init_scale * normal(rng);
      for (Eigen::Index r = 0; r < d; ++r)
        th.b(r) = config.init_scale * normal(rng);
      state.layers.push_back(std::move(th));
    }
  }
  return state;
}

namespace {

Eigen::MatrixXd field(const Eigen::MatrixXd& q, const ControlParams& th)
{
  return preActivation(q, th).array().tanh().matrix();
}

Eigen::MatrixXd explicitStep(Integrator integ, const Eigen::MatrixXd& q, const ControlParams& th, double h)
{
  if (integ != Integrator::rk4)
    return q + h * field(q, th);
  const Eigen::MatrixXd k1 = field(q, th);
  const Eigen::MatrixXd k2 = field(q + 0.5 * h * k1, th);
  const Eigen::MatrixXd k3 = field(q + 0.5 * h * k2, th);
  const Eigen::MatrixXd k4 = field(q + h * k3, th);
  return q + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// v -> (dF/dx)^T v with accumulation of dF/dtheta^T v, F = tanh(u x + b)
Eigen::MatrixXd fieldVjp(const Eigen::MatrixXd& x, const ControlParams& th, const Eigen::MatrixXd& v,
                         ControlParams& grad)
{
  const Eigen::ArrayXXd s = preActivation(x, th).array().tanh();
  const Eigen::MatrixXd g = ((1.0 - s.square()) * v.array()).matrix();
  grad.u.noalias() += g * x.transpose();
  grad.b += g.rowwise().sum();
  return th.u.transpose() * g;
}

Eigen::MatrixXd explicitStepVjp(Integrator integ, const Eigen::MatrixXd& q, const ControlParams& th, double h,
                                const Eigen::MatrixXd& ybar, ControlParams& grad)
{
  if (integ != Integrator::rk4)
    return ybar + fieldVjp(q, th, h * ybar, grad);
  const Eigen::MatrixXd k1 = field(q, th);
  const Eigen::MatrixXd x2 = q + 0.5 * h * k1;
  const Eigen::MatrixXd k2 = field(x2, th);
  const Eigen::MatrixXd x3 = q + 0.5 * h * k2;
  const Eigen::MatrixXd k3 = field(x3, th);
  const Eigen::MatrixXd x4 = q + h * k3;

  Eigen::MatrixXd xbar = ybar;
  const Eigen::MatrixXd b4 = fieldVjp(x4, th, (h / 6.0) * ybar, grad);
  xbar += b4;
  const Eigen::MatrixXd b3 = fieldVjp(x3, th, (h / 3.0) * ybar + h * b4, grad);
  xbar += b3;
  const Eigen::MatrixXd b2 = fieldVjp(x2, th, (h / 3.0) * ybar + 0.5 * h * b3, grad);
  xbar += b2;
  xbar += fieldVjp(q, th, (h / 6.0) * ybar + 0.5 * h * b2, grad);
  return xbar;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void checkLabels(const Eigen::MatrixXd& q, const Eigen::VectorXi& labels)
{
  if (q.cols() != labels.size())
    throw UsageError("loss_and_accuracy: label count does not match batch");
  if (q.rows() < 1)
    throw UsageError("loss_and_accuracy: empty state");
}

} // namespace

Trajectory forward_pass(const TrainConfig& config, const NetState& state, const Eigen::MatrixXd& inputs,
                        std::vector<ControlParams>* warm)
{
  config.validate();
  Trajectory traj;
  traj.q.reserve(config.layers + 1);
  traj.q.push_back(inputs);
  if (config.integrator != Integrator::symplectic) {
    if (static_cast<int>(state.layers.size()) != config.layers)
      throw UsageError("forward_pass: expected one control per layer");
    for (int k = 0; k < config.layers; ++k) {
      traj.q.push_back(explicitStep(config.integrator, traj.q.back(), state.layers[k], config.dt));
      traj.theta.push_back(state.layers[k]);
    }
    return traj;
  }

  if (state.costates.rows() != inputs.rows() || state.costates.cols() != inputs.cols())
    throw UsageError("forward_pass: costates must match the inputs");
  PhaseBatchd s(inputs, state.costates);
  traj.p.push_back(state.costates);
  const SolverOptions opts{config.tol, config.max_iter};
  for (int k = 0; k < config.layers; ++k) {
    const ControlParams* hint = warm && static_cast<int>(warm->size()) == config.layers ? &(*warm)[k]
                                : k > 0                                                  ? &traj.theta.back()
                                                                                         : nullptr;
    LayerSolution sol = solve_symplectic_layer(s, config.dt, config.gamma, opts, hint);
    s = sol.next;
    traj.q.push_back(s.q);
    traj.p.push_back(s.p);
    traj.theta.push_back(sol.theta);
    traj.solutions.push_back(std::move(sol));
  }
  if (warm)
    *warm = traj.theta;
  return traj;
}

Trajectory propagate(const TrainConfig& config, const std::vector<ControlParams>& controls,
                     const Eigen::MatrixXd& inputs)
{
  config.validate();
  if (static_cast<int>(controls.size()) != config.layers)
    throw UsageError("propagate: expected one control per layer");
  const Integrator integ = config.integrator == Integrator::rk4 ? Integrator::rk4 : Integrator::euler;
  Trajectory traj;
  traj.q.push_back(inputs);
  for (int k = 0; k < config.layers; ++k) {
    traj.q.push_back(explicitStep(integ, traj.q.back(), controls[k], config.dt));
    traj.theta.push_back(controls[k]);
  }
  return traj;
}

LossAccuracy loss_and_accuracy(const Eigen::MatrixXd& finalStates, const Eigen::VectorXi& labels)
{
  checkLabels(finalStates, labels);
  LossAccuracy out;
  if (labels.size() == 0)
    return out;
  long correct = 0;
  for (Eigen::Index i = 0; i < labels.size(); ++i) {
    const double pi = sigmoid(finalStates(0, i));
    const double r = pi - labels(i);
    out.residual += r * r;
    correct += (pi >= 0.5 ? 1 : 0) == labels(i);
  }
  out.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  return out;
}

Gradient compute_gradient(const TrainConfig& config, const NetState& state, const Dataset& data,
                          std::vector<ControlParams>* warm)
{
  Gradient g;
  g.trajectory = forward_pass(config, state, data.inputs, warm);
  const Eigen::MatrixXd& qT = g.trajectory.q.back();
  g.metrics = loss_and_accuracy(qT, data.labels);

  Eigen::MatrixXd qbar = Eigen::MatrixXd::Zero(qT.rows(), qT.cols());
  for (Eigen::Index i = 0; i < qT.cols(); ++i) {
    const double pi = sigmoid(qT(0, i));
    qbar(0, i) = 2.0 * (pi - data.labels(i)) * pi * (1.0 - pi);
  }

  if (config.integrator != Integrator::symplectic) {
    g.grad.layers.assign(config.layers, ControlParams::zeros(data.dim()));
    for (int k = config.layers - 1; k >= 0; --k)
      qbar = explicitStepVjp(config.integrator, g.trajectory.q[k], state.layers[k], config.dt, qbar,
                             g.grad.layers[k]);
    return g;
  }

  PhaseBatchd adj(qbar, Eigen::MatrixXd::Zero(qT.rows(), qT.cols()));
  for (int k = config.layers - 1; k >= 0; --k) {
    const PhaseBatchd in(g.trajectory.q[k], g.trajectory.p[k]);
    adj = symplectic_layer_adjoint(in, g.trajectory.solutions[k], config.dt, config.gamma, adj);
  }
  g.grad.costates = adj.p;
  return g;
}

namespace {

NetState descend(const NetState& state, const NetState& grad, double step)
{
  NetState out = state;
  if (out.costates.size() > 0)
    out.costates -= step * grad.costates;
  for (std::size_t k = 0; k < out.layers.size(); ++k) {
    out.layers[k].u -= step * grad.layers[k].u;
    out.layers[k].b -= step * grad.layers[k].b;
  }
  return out;
}

} // namespace

RunLog train(const TrainConfig& config, const Dataset& data, const IterationCallback& onIteration)
{
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunLog log;
  log.final_state = initial_state(config, data);
  log.residual.reserve(config.iterations);
  log.accuracy.reserve(config.iterations);
  std::vector<ControlParams> warm;
  NetState& state = log.final_state;

  auto rethrow = [](int it, const ConvergenceError& e) {
    return ConvergenceError("train iteration " + std::to_string(it) + " (" + e.what() + ")", e.residual(),
                            e.iterations());
  };
  Gradient g;
  try {
    g = compute_gradient(config, state, data, &warm);
  } catch (const ConvergenceError& e) {
    throw rethrow(0, e);
  }
  for (int it = 0; it < config.iterations; ++it) {
    log.residual.push_back(g.metrics.residual);
    log.accuracy.push_back(g.metrics.accuracy);
    if (onIteration)
      onIteration(it, g.metrics);
    // Plain gradient step. The implicit network can lose its solution branch
    // after a large update; such a step is halved and retried.
    double step = config.learning_rate;
    for (int attempt = 0;; ++attempt) {
      NetState candidate = descend(state, g.grad, step);
      std::vector<ControlParams> warmTrial = warm;
      try {
        Gradient next = compute_gradient(config, candidate, data, &warmTrial);
        state = std::move(candidate);
        warm = std::move(warmTrial);
        g = std::move(next);
        break;
      } catch (const ConvergenceError& e) {
        if (config.integrator != Integrator::symplectic || attempt == 20)
          throw rethrow(it, e);
        step /= 2.0;
      }
    }
  }
  log.final_controls = g.trajectory.theta;
  log.final_train = g.metrics;
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

} // namespace geomint
