#pragma once

#include <string>

#include <Eigen/Core>

#include "geomint/genfunc.hpp"
#include "geomint/phase_space.hpp"

namespace geomint {

enum class PeakonKernel { gaussian, exponential };

PeakonKernel parse_peakon_kernel(const std::string& name);
std::string to_string(PeakonKernel kernel);

struct PeakonState
{
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  PeakonKernel kernel = PeakonKernel::exponential;
  /// gaussian: exp(-x^2 / (2 s^2)); exponential: exp(-|x| / s)
  double scale = 1.0;

  Eigen::Index size() const { return q.size(); }
  void validate() const;
};

/// K(x) and K'(x); K'(0) = 0 for the exponential kernel.
double peakon_kernel(PeakonKernel kernel, double scale, double x);
double peakon_kernel_derivative(PeakonKernel kernel, double scale, double x);

/// sum_{i,k} p_i p_k K(q_i - q_k), no 1/2 in front.
double peakon_hamiltonian(const PeakonState& s);

/// The same Hamiltonian on a batch with one coordinate per particle
/// (dim 1, samples N_b).
Hamiltoniand peakon_hamiltonian_fn(PeakonKernel kernel, double scale);

PhaseBatchd to_batch(const PeakonState& s);
PeakonState from_batch(const PhaseBatchd& b, const PeakonState& like);

/// One generating-function step of order m.
PeakonState peakon_step(const PeakonState& s, double dt, int m = 2, SolverOptions opts = {1e-14, 200});

PeakonState peakon_euler_step(const PeakonState& s, double dt);

struct LaxPair
{
  Eigen::MatrixXd L;
  Eigen::MatrixXd P;
};

/// L_ij = sqrt(p_i p_j) exp(-c |q_i - q_j|), P_ij = -2 sqrt(p_i p_j) sign(q_i - q_j) exp(-c |q_i - q_j|)
/// with c = exponent_scale (1 as printed, 1/2 for the integrable normalisation).
LaxPair lax_matrices(const PeakonState& s, double exponent_scale = 0.5);

/// [Tr L^2, ..., Tr L^k_max]
Eigen::VectorXd conserved_traces(const Eigen::MatrixXd& L, int k_max);

} // namespace geomint
