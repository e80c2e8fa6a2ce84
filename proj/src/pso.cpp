#include "geomint/pso.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <initializer_list>
#include <numbers>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace geomint::pso {

void Mesh::validate() const
{
  if (n < 4)
    throw UsageError("Mesh: at least 4 grid points required");
  if (!(dx > 0) || !std::isfinite(dx))
    throw UsageError("Mesh: dx must be positive");
}

Eigen::VectorXd Mesh::points() const { return Eigen::VectorXd::LinSpaced(n, 0.0, dx * static_cast<double>(n - 1)); }

GridFunction::GridFunction(Eigen::VectorXd v, Mesh m) : values(std::move(v)), mesh(m)
{
  mesh.validate();
  if (values.size() != mesh.n)
    throw UsageError("GridFunction: size does not match mesh");
  if (!values.allFinite())
    throw NumericalDomainError("GridFunction: non-finite values");
}

namespace {

Eigen::VectorXd centered(const Eigen::VectorXd& f, double h)
{
  const Eigen::Index n = f.size();
  Eigen::VectorXd out(n);
  for (Eigen::Index j = 0; j < n; ++j)
    out(j) = (f((j + 1) % n) - f((j + n - 1) % n)) / (2.0 * h);
  return out;
}

Eigen::VectorXd spectral(const Eigen::VectorXd& f, double length, int order)
{
  const Eigen::Index n = f.size();
  Eigen::FFT<double> fft;
  std::vector<double> in(f.data(), f.data() + n);
  std::vector<std::complex<double>> F;
  fft.fwd(F, in);
  const double k0 = 2.0 * std::numbers::pi / length;
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::Index m = k <= n / 2 ? k : k - n;
    if (n % 2 == 0 && k == n / 2) {
      F[k] = 0.0; // Nyquist mode has no odd derivative
      continue;
    }
    F[k] *= std::pow(std::complex<double>(0.0, k0 * static_cast<double>(m)), order);
  }
  std::vector<double> out;
  fft.inv(out, F);
  return Eigen::Map<Eigen::VectorXd>(out.data(), n);
}

} // namespace

Eigen::VectorXd dx(const Eigen::VectorXd& f, const Mesh& mesh, int order)
{
  if (order < 0)
    throw UsageError("dx: order must be non-negative");
  if (f.size() != mesh.n)
    throw UsageError("dx: size does not match mesh");
  if (order == 0)
    return f;
  if (mesh.scheme == Difference::spectral)
    return spectral(f, mesh.length(), order);
  Eigen::VectorXd g = f;
  for (int i = 0; i < order; ++i)
    g = centered(g, mesh.dx);
  return g;
}

GridFunction dx(const GridFunction& f, int order)
{
  if (order < 1)
    throw UsageError("dx: order must be >= 1");
  return GridFunction(dx(f.values, f.mesh, order), f.mesh);
}

void TruncationReport::merge(const TruncationReport& o)
{
  if (o.dropped_above > 0)
    highest_dropped = dropped_above > 0 ? std::max(highest_dropped, o.highest_dropped) : o.highest_dropped;
  dropped_above += o.dropped_above;
  dropped_below += o.dropped_below;
}

Symbol::Symbol(Mesh mesh, ExponentRange range) : mesh_(mesh), range_(range)
{
  mesh_.validate();
  if (range_.lo > range_.hi)
    throw UsageError("Symbol: empty exponent range");
}

Symbol Symbol::identity(const Mesh& mesh, ExponentRange range)
{
  return monomial(mesh, 0, Eigen::VectorXd::Ones(mesh.n), range);
}

Symbol Symbol::monomial(const Mesh& mesh, int k, const Eigen::VectorXd& values, ExponentRange range)
{
  Symbol s(mesh, range);
  s.set(k, values);
  return s;
}

Eigen::VectorXd Symbol::coeff(int k) const
{
  const auto it = coeffs_.find(k);
  return it == coeffs_.end() ? Eigen::VectorXd::Zero(mesh_.n) : it->second;
}

Symbol& Symbol::set(int k, const Eigen::VectorXd& values)
{
  if (!range_.contains(k))
    throw UsageError("Symbol: exponent " + std::to_string(k) + " outside [" + std::to_string(range_.lo) + ", " +
                     std::to_string(range_.hi) + "]");
  if (values.size() != mesh_.n)
    throw UsageError("Symbol: coefficient size does not match mesh");
  if (!values.allFinite())
    throw NumericalDomainError("Symbol: non-finite coefficient at exponent " + std::to_string(k));
  coeffs_[k] = values;
  return *this;
}

Symbol& Symbol::add(int k, const Eigen::VectorXd& values)
{
  if (has(k))
    return set(k, coeffs_[k] + values);
  return set(k, values);
}

double Symbol::maxAbs() const
{
  double m = 0.0;
  for (const auto& [k, v] : coeffs_)
    m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

int Symbol::minExponent() const { return coeffs_.empty() ? 0 : coeffs_.begin()->first; }
int Symbol::maxExponent() const { return coeffs_.empty() ? 0 : coeffs_.rbegin()->first; }

namespace {

void requireSameMesh(const Symbol& a, const Symbol& b, const char* who)
{
  if (!(a.mesh() == b.mesh()))
    throw UsageError(std::string(who) + ": symbols live on different meshes");
}

} // namespace

Symbol& Symbol::operator+=(const Symbol& o)
{
  requireSameMesh(*this, o, "Symbol +");
  for (const auto& [k, v] : o.coeffs_)
    add(k, v);
  return *this;
}

Symbol& Symbol::operator-=(const Symbol& o)
{
  requireSameMesh(*this, o, "Symbol -");
  for (const auto& [k, v] : o.coeffs_)
    add(k, -v);
  return *this;
}

Symbol& Symbol::operator*=(double s)
{
  for (auto& [k, v] : coeffs_)
    v *= s;
  return *this;
}

Symbol operator+(Symbol a, const Symbol& b) { return a += b; }
Symbol operator-(Symbol a, const Symbol& b) { return a -= b; }
Symbol operator*(double s, Symbol a) { return a *= s; }

double maxAbsDiff(const Symbol& a, const Symbol& b)
{
  double m = 0.0;
  for (const auto& [k, v] : a.coeffs())
    m = std::max(m, (v - b.coeff(k)).cwiseAbs().maxCoeff());
  for (const auto& [k, v] : b.coeffs())
    if (!a.has(k))
      m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

Symbol compose(const Symbol& A, const Symbol& B, ExponentRange trunc, TruncationReport* report)
{
  requireSameMesh(A, B, "compose");
  Symbol C(A.mesh(), trunc);
  TruncationReport local;
  std::map<int, std::vector<Eigen::VectorXd>> derivs; // D^n b_k, built lazily
  auto deriv = [&](int kb, const Eigen::VectorXd& b, int n) -> const Eigen::VectorXd& {
    auto& cache = derivs[kb];
    if (cache.empty())
      cache.push_back(b);
    while (static_cast<int>(cache.size()) <= n)
      cache.push_back(dx(cache.back(), A.mesh(), 1));
    return cache[n];
  };

  for (const auto& [ka, a] : A.coeffs())
    for (const auto& [kb, b] : B.coeffs()) {
      // d_xi^n xi^ka / n! = binom(ka, n) xi^(ka - n)
      double binom = 1.0;
      for (int n = 0;; ++n) {
        if (n > 0)
          binom *= static_cast<double>(ka - n + 1) / static_cast<double>(n);
        if (binom == 0.0)
          break;
        const int e = ka + kb - n;
        if (e < trunc.lo) {
          ++local.dropped_below;
          break;
        }
        if (e > trunc.hi) {
          if (n > 0 && deriv(kb, b, n).cwiseAbs().maxCoeff() == 0.0)
            continue;
          if (local.dropped_above == 0 || e > local.highest_dropped)
            local.highest_dropped = e;
          ++local.dropped_above;
          continue;
        }
        C.add(e, binom * a.cwiseProduct(deriv(kb, b, n)));
      }
    }
  if (report)
    report->merge(local);
  return C;
}

Symbol compose(const Symbol& A, const Symbol& B, TruncationReport* report)
{
  return compose(A, B, A.range(), report);
}

Symbol commutator(const Symbol& A, const Symbol& B, ExponentRange trunc, TruncationReport* report)
{
  return compose(A, B, trunc, report) - compose(B, A, trunc, report);
}

Symbol commutator(const Symbol& A, const Symbol& B, TruncationReport* report)
{
  return commutator(A, B, A.range(), report);
}

double trace(const Symbol& A) { return A.has(-1) ? A.mesh().dx * A.coeff(-1).sum() : 0.0; }

double pairing(const Symbol& A, const Symbol& B)
{
  // only the xi^-1 coefficient is needed; the window covers every term that
  // can reach it
  const int hi = std::max(A.maxExponent() + B.maxExponent(), -1);
  return trace(compose(A, B, ExponentRange{-1, hi}));
}

double coefficient_pairing(const Symbol& A, const Symbol& B)
{
  requireSameMesh(A, B, "coefficient_pairing");
  double sum = 0.0;
  for (const auto& [k, b] : B.coeffs())
    if (A.has(-1 - k))
      sum += A.coeffs().at(-1 - k).dot(b);
  return sum * A.mesh().dx;
}

Symbol functional_derivative(const SymbolFunctional& F, const Symbol& M, double h_fd)
{
  if (!(h_fd > 0))
    throw UsageError("functional_derivative: h_fd must be positive");
  const ExponentRange mirrored{-1 - M.range().hi, -1 - M.range().lo};
  Symbol out(M.mesh(), mirrored);
  Symbol probe = M;
  for (const auto& [k, values] : M.coeffs()) {
    Eigen::VectorXd grad(values.size());
    Eigen::VectorXd v = values;
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      const double saved = v(j);
      v(j) = saved + h_fd;
      probe.set(k, v);
      const double up = F(probe);
      v(j) = saved - h_fd;
      probe.set(k, v);
      const double down = F(probe);
      v(j) = saved;
      grad(j) = (up - down) / (2.0 * h_fd * M.mesh().dx);
    }
    probe.set(k, values);
    out.set(-1 - k, grad);
  }
  return out;
}

bool is_group_element(const Symbol& g, double tol)
{
  if (!g.has(0) || (g.coeff(0).array() - 1.0).abs().maxCoeff() > tol)
    return false;
  for (const auto& [k, v] : g.coeffs())
    if (k > 0 && v.cwiseAbs().maxCoeff() > tol)
      return false;
  return true;
}

namespace {

void requireGroup(const Symbol& g, const char* who)
{
  if (!is_group_element(g))
    throw UsageError(std::string(who) + ": g must be 1 plus negative powers of xi");
}

} // namespace

Symbol lift_left_star(const Symbol& g, const Symbol& alpha, ExponentRange trunc)
{
  requireGroup(g, "lift_left_star");
  return compose(alpha, g, trunc);
}

Symbol lift_right_star(const Symbol& g, const Symbol& alpha, ExponentRange trunc)
{
  requireGroup(g, "lift_right_star");
  return compose(g, alpha, trunc);
}

Symbol lift_left_star(const Symbol& g, const Symbol& alpha) { return lift_left_star(g, alpha, alpha.range()); }
Symbol lift_right_star(const Symbol& g, const Symbol& alpha) { return lift_right_star(g, alpha, alpha.range()); }

nlohmann::json to_json(const Symbol& s)
{
  nlohmann::json j;
  j["mesh"] = {{"n", s.mesh().n}, {"dx", s.mesh().dx}};
  if (s.mesh().scheme == Difference::spectral)
    j["mesh"]["scheme"] = "spectral";
  nlohmann::json coeffs = nlohmann::json::object();
  for (const auto& [k, v] : s.coeffs())
    coeffs[std::to_string(k)] = std::vector<double>(v.data(), v.data() + v.size());
  j["coeffs"] = coeffs;
  return j;
}

Symbol symbol_from_json(const nlohmann::json& j, ExponentRange range)
{
  try {
    Mesh mesh;
    mesh.n = j.at("mesh").at("n").get<Eigen::Index>();
    mesh.dx = j.at("mesh").at("dx").get<double>();
    if (j.at("mesh").contains("scheme")) {
      const auto scheme = j.at("mesh").at("scheme").get<std::string>();
      if (scheme == "spectral")
        mesh.scheme = Difference::spectral;
      else if (scheme != "centered")
        throw UsageError("symbol_from_json: unknown scheme '" + scheme + "'");
    }
    Symbol s(mesh, range);
    for (const auto& [key, arr] : j.at("coeffs").items()) {
      std::size_t used = 0;
      const int k = std::stoi(key, &used);
      if (used != key.size())
        throw UsageError("symbol_from_json: bad exponent key '" + key + "'");
      const auto values = arr.get<std::vector<double>>();
      s.set(k, Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("symbol_from_json: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw UsageError("symbol_from_json: bad exponent key");
  }
}

Symbol random_symbol(const Mesh& mesh, int lo, int hi, std::mt19937_64& rng, int modes, ExponentRange range)
{
  std::normal_distribution<double> normal;
  const Eigen::VectorXd x = mesh.points() * (2.0 * std::numbers::pi / mesh.length());
  Symbol s(mesh, range);
  for (int k = lo; k <= hi; ++k) {
    Eigen::VectorXd c = Eigen::VectorXd::Constant(mesh.n, normal(rng));
    for (int m = 1; m <= modes; ++m) {
      const double a = normal(rng);
      const double b = normal(rng);
      c += a * (m * x.array()).cos().matrix() + b * (m * x.array()).sin().matrix();
    }
    s.set(k, c);
  }
  return s;
}

namespace {

// Window for intermediate products so that nothing feeding `r` is dropped.
ExponentRange wideWindow(const ExponentRange& r, std::initializer_list<const Symbol*> parts)
{
  int top = 0;
  for (const Symbol* s : parts)
    top = std::max(top, s->maxExponent());
  return {r.lo - top, std::max(r.hi, 2 * top)};
}

} // namespace

double associativity_defect(const Symbol& A, const Symbol& B, const Symbol& C)
{
  const ExponentRange r = A.range();
  const ExponentRange wide = wideWindow(r, {&A, &B, &C});
  const Symbol left = compose(compose(A, B, wide), C, r);
  const Symbol right = compose(A, compose(B, C, wide), r);
  return maxAbsDiff(left, right);
}

double jacobi_defect(const Symbol& A, const Symbol& B, const Symbol& C)
{
  const ExponentRange r = A.range();
  const ExponentRange wide = wideWindow(r, {&A, &B, &C});
  Symbol sum = commutator(A, commutator(B, C, wide), r);
  sum += commutator(B, commutator(C, A, wide), r);
  sum += commutator(C, commutator(A, B, wide), r);
  return sum.maxAbs();
}

AlgebraCheck check_algebra(int trials, Eigen::Index n, std::uint64_t seed, Difference scheme)
{
  if (trials < 1)
    throw UsageError("check_algebra: trials must be >= 1");
  Mesh mesh{n, 2.0 * std::numbers::pi / static_cast<double>(n), scheme};
  mesh.validate();
  std::mt19937_64 rng(seed);
  AlgebraCheck out;
  out.trials = trials;
  for (int t = 0; t < trials; ++t) {
    const Symbol A = random_symbol(mesh, -4, -1, rng);
    const Symbol B = random_symbol(mesh, 0, 2, rng);
    out.trace_commutator = std::max(out.trace_commutator, std::abs(trace(commutator(A, B))));

    Symbol g = random_symbol(mesh, -2, -1, rng);
    g.set(0, Eigen::VectorXd::Ones(n));
    const Symbol alpha = random_symbol(mesh, -4, 2, rng);
    const Symbol X = random_symbol(mesh, -4, 2, rng);
    out.left_adjointness = std::max(
        out.left_adjointness, std::abs(pairing(lift_left_star(g, alpha), X) - pairing(alpha, compose(g, X))));
    out.right_adjointness = std::max(
        out.right_adjointness, std::abs(pairing(lift_right_star(g, alpha), X) - pairing(alpha, compose(X, g))));

    const Symbol P = random_symbol(mesh, -4, 2, rng);
    const Symbol Q = random_symbol(mesh, -4, 2, rng);
    const Symbol R = random_symbol(mesh, -4, 2, rng);
    out.associativity = std::max(out.associativity, associativity_defect(P, Q, R));
    out.jacobi = std::max(out.jacobi, jacobi_defect(P, Q, R));

    const Eigen::VectorXd u1 = g.coeff(-1), u2 = g.coeff(-2);
    const Eigen::VectorXd a1 = alpha.coeff(1), a2 = alpha.coeff(2);
    Symbol al(mesh);
    al.set(1, a1).set(2, a2);
    auto D = [&](const Eigen::VectorXd& f, int k) { return dx(f, mesh, k); };
    auto mul = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) -> Eigen::VectorXd { return a.cwiseProduct(b); };

    Symbol left(mesh);
    left.set(2, a2);
    left.set(1, mul(u1, a2) + a1);
    left.set(0, mul(u1, a1) + mul(u2, a2) + 2.0 * mul(a2, D(u1, 1)));
    left.set(-1, mul(u2, a1) + mul(a1, D(u1, 1)) + mul(a2, D(u1, 2)) + 2.0 * mul(a2, D(u2, 1)));
    left.set(-2, mul(a1, D(u2, 1)) + mul(a2, D(u2, 2)));

    Symbol right(mesh);
    right.set(2, a2);
    right.set(1, mul(u1, a2) + a1);
    right.set(0, mul(u1, a1) - mul(u1, D(a2, 1)) + mul(u2, a2));
    right.set(-1, -mul(u1, D(a1, 1)) + mul(u1, D(a2, 2)) + mul(u2, a1) - 2.0 * mul(u2, D(a2, 1)));
    const Eigen::VectorXd printed = mul(u1, D(a1, 2)) - 2.0 * mul(u2, D(a1, 1)) + 3.0 * mul(u2, D(a2, 2));
    right.set(-2, printed - mul(u1, D(a2, 3)));

    const ExponentRange shown{-2, 2};
    const Symbol gotLeft = lift_left_star(g, al, shown);
    const Symbol gotRight = lift_right_star(g, al, shown);
    out.left_expansion = std::max(out.left_expansion, maxAbsDiff(gotLeft, left));
    out.right_expansion = std::max(out.right_expansion, maxAbsDiff(gotRight, right));
    out.right_expansion_without_d3 =
        std::max(out.right_expansion_without_d3, (gotRight.coeff(-2) - printed).cwiseAbs().maxCoeff());
  }
  return out;
}

} // namespace geomint::pso
