#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>

#include <Eigen/Core>
#include <json.hpp>

#include "geomint/errors.hpp"

namespace geomint::pso {

/// How D_x is discretised. `centered` is the second-order periodic central
/// difference; `spectral` differentiates the trigonometric interpolant.
enum class Difference { centered, spectral };

struct Mesh
{
  Eigen::Index n = 64;
  double dx = 1.0;
  Difference scheme = Difference::centered;

  double length() const { return static_cast<double>(n) * dx; }
  bool operator==(const Mesh& o) const { return n == o.n && dx == o.dx && scheme == o.scheme; }
  void validate() const;
  /// x_j = j dx, j = 0..n-1
  Eigen::VectorXd points() const;
};

/// Periodic samples on a mesh.
struct GridFunction
{
  Eigen::VectorXd values;
  Mesh mesh;

  GridFunction() = default;
  GridFunction(Eigen::VectorXd v, Mesh m);
};

/// D_x applied `order` times.
Eigen::VectorXd dx(const Eigen::VectorXd& f, const Mesh& mesh, int order = 1);
GridFunction dx(const GridFunction& f, int order = 1);

struct ExponentRange
{
  int lo = -4;
  int hi = 2;

  bool contains(int k) const { return k >= lo && k <= hi; }
  bool operator==(const ExponentRange& o) const { return lo == o.lo && hi == o.hi; }
};

/// Nonzero product terms that fell outside the truncation window.
struct TruncationReport
{
  long dropped_above = 0;
  long dropped_below = 0;
  int highest_dropped = 0;

  void merge(const TruncationReport& o);
};

/// Discrete symbol sum_k a_k(x_j) xi^k. Absent exponents are zero.
class Symbol
{
public:
  Symbol() = default;
  explicit Symbol(Mesh mesh, ExponentRange range = {});

  static Symbol identity(const Mesh& mesh, ExponentRange range = {});
  static Symbol monomial(const Mesh& mesh, int k, const Eigen::VectorXd& values, ExponentRange range = {});

  const Mesh& mesh() const { return mesh_; }
  const ExponentRange& range() const { return range_; }
  const std::map<int, Eigen::VectorXd>& coeffs() const { return coeffs_; }

  bool has(int k) const { return coeffs_.count(k) != 0; }
  /// Coefficient at exponent k (zeros when absent).
  Eigen::VectorXd coeff(int k) const;
  Symbol& set(int k, const Eigen::VectorXd& values);
  Symbol& add(int k, const Eigen::VectorXd& values);

  /// Largest |coefficient| over all exponents and grid points.
  double maxAbs() const;
  int minExponent() const;
  int maxExponent() const;

  Symbol& operator+=(const Symbol& o);
  Symbol& operator-=(const Symbol& o);
  Symbol& operator*=(double s);

private:
  Mesh mesh_;
  ExponentRange range_;
  std::map<int, Eigen::VectorXd> coeffs_;
};

Symbol operator+(Symbol a, const Symbol& b);
Symbol operator-(Symbol a, const Symbol& b);
Symbol operator*(double s, Symbol a);

/// Max-abs difference over the union of exponents.
double maxAbsDiff(const Symbol& a, const Symbol& b);

/// c(xi) = sum_alpha 1/alpha! d_xi^alpha a(xi) D_x^alpha b(xi), keeping only
/// exponents inside `trunc`.
Symbol compose(const Symbol& A, const Symbol& B, ExponentRange trunc, TruncationReport* report = nullptr);
Symbol compose(const Symbol& A, const Symbol& B, TruncationReport* report = nullptr);

Symbol commutator(const Symbol& A, const Symbol& B, ExponentRange trunc, TruncationReport* report = nullptr);
Symbol commutator(const Symbol& A, const Symbol& B, TruncationReport* report = nullptr);

/// dx * sum_j a_{-1}(x_j)
double trace(const Symbol& A);

/// trace(A o B), composed without truncation.
double pairing(const Symbol& A, const Symbol& B);

/// sum_k dx sum_j a_{-1-k}(x_j) b_k(x_j): the coefficient-wise pairing that
/// the functional derivative represents. Agrees with pairing() when the
/// exponents meet only at order zero of the composition.
double coefficient_pairing(const Symbol& A, const Symbol& B);

using SymbolFunctional = std::function<double(const Symbol&)>;

/// Central-difference derivative of F with respect to every coefficient
/// sample of M, divided by dx. The derivative for exponent k of M sits at
/// exponent -1-k, so that pairing(dF/dM, dM) is the directional derivative.
Symbol functional_derivative(const SymbolFunctional& F, const Symbol& M, double h_fd = 1e-6);

/// True when g = 1 + (negative powers of xi) up to `tol`.
bool is_group_element(const Symbol& g, double tol = 1e-12);

/// Cotangent lifts of left and right translation by g: alpha o g and g o alpha.
Symbol lift_left_star(const Symbol& g, const Symbol& alpha, ExponentRange trunc);
Symbol lift_right_star(const Symbol& g, const Symbol& alpha, ExponentRange trunc);
Symbol lift_left_star(const Symbol& g, const Symbol& alpha);
Symbol lift_right_star(const Symbol& g, const Symbol& alpha);

/// {"mesh": {"n", "dx"}, "coeffs": {"<exponent>": [values]}}
nlohmann::json to_json(const Symbol& s);
Symbol symbol_from_json(const nlohmann::json& j, ExponentRange range = {});

/// Smooth random coefficients sum_{m<=modes} (a_m cos(m x) + b_m sin(m x)) with
/// standard normal a_m, b_m, x = j dx, at every exponent in [lo, hi].
Symbol random_symbol(const Mesh& mesh, int lo, int hi, std::mt19937_64& rng, int modes = 2, ExponentRange range = {});

/// Worst defects over seeded random trials. Associativity and Jacobi are
/// measured on the default window with intermediate products kept wide
/// enough that truncation cannot reach the compared exponents.
struct AlgebraCheck
{
  int trials = 0;
  double trace_commutator = 0.0;
  double left_adjointness = 0.0;
  double right_adjointness = 0.0;
  double associativity = 0.0;
  double jacobi = 0.0;
  /// Closed-form expansions for g = 1 + u1/xi + u2/xi^2, alpha = a1 xi + a2 xi^2.
  double left_expansion = 0.0;
  double right_expansion = 0.0;
  /// Right xi^-2 coefficient compared without its -u1 D^3 a2 term.
  double right_expansion_without_d3 = 0.0;
};

AlgebraCheck check_algebra(int trials, Eigen::Index n, std::uint64_t seed, Difference scheme = Difference::centered);

double associativity_defect(const Symbol& A, const Symbol& B, const Symbol& C);
double jacobi_defect(const Symbol& A, const Symbol& B, const Symbol& C);

} // namespace geomint::pso
