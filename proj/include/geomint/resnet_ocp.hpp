#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "geomint/genfunc.hpp"
#include "geomint/phase_space.hpp"

namespace geomint {

enum class DatasetKind { spirals, circles };
enum class Split { train, test };
enum class Integrator { euler, rk4, symplectic };

DatasetKind parse_dataset_kind(const std::string& name);
Integrator parse_integrator(const std::string& name);
std::string to_string(DatasetKind kind);
std::string to_string(Integrator integrator);
std::string to_string(Split split);

/// Labelled 2D classification data. Column i of `inputs` is q0^(i).
struct Dataset
{
  DatasetKind kind = DatasetKind::circles;
  Split split = Split::train;
  std::uint64_t seed = 0;
  Eigen::MatrixXd inputs;
  Eigen::VectorXi labels;

  Eigen::Index size() const { return inputs.cols(); }
  Eigen::Index dim() const { return inputs.rows(); }
};

/// Deterministic two-class data; labels alternate 0, 1, 0, ... so classes are
/// balanced. The test split draws from an independent stream of the same seed.
///
///   spirals: t ~ U[0, 3 pi], r = 0.1 + 0.9 t / (3 pi),
///            x = r (cos(t + c pi), sin(t + c pi)) + N(0, 0.02^2)
///   circles: radius 0.5 (c = 0) or 1.0 (c = 1), uniform angle, N(0, 0.05^2)
Dataset generate_dataset(DatasetKind kind, int n, std::uint64_t seed, Split split = Split::train);

constexpr double kSpiralNoise = 0.02;
constexpr double kCircleNoise = 0.05;

/// theta = (u, b) for the vector field tanh(u q + b).
struct ControlParams
{
  Eigen::MatrixXd u;
  Eigen::VectorXd b;

  static ControlParams zeros(Eigen::Index d) { return {Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d)}; }
  Eigen::Index dim() const { return b.size(); }
  double squaredNorm() const { return u.squaredNorm() + b.squaredNorm(); }
  /// [vec(u); b], column-major.
  Eigen::VectorXd flat() const;
  static ControlParams fromFlat(const Eigen::VectorXd& v, Eigen::Index d);
};

/// sum_i <p_i, tanh(u q_i + b)> - gamma/2 (|u|_F^2 + |b|^2)
double control_hamiltonian(const PhaseBatchd& batch, const ControlParams& theta, double gamma);

/// Gradient of control_hamiltonian with respect to theta.
ControlParams control_gradient(const PhaseBatchd& batch, const ControlParams& theta, double gamma);

/// Fixed point of theta = (1/gamma) sum_i (p_i . tanh'(z_i)) [q_i^T, 1] with
/// z_i = u q_i + b, by damped fixed-point iteration from `warm` (or zero).
ControlParams eliminate_control(const PhaseBatchd& batch, double gamma, SolverOptions opts = {1e-14, 1000},
                                const ControlParams* warm = nullptr);

/// H(q, p, theta*(q, p)).
double reduced_hamiltonian(const PhaseBatchd& batch, double gamma, SolverOptions opts = {1e-14, 1000});

/// The reduced Hamiltonian as a Hamiltonian object. Because dH/dtheta = 0 at
/// theta*, its gradient is the partial gradient at fixed theta*.
Hamiltoniand reduced_hamiltonian_fn(double gamma, SolverOptions opts = {1e-14, 1000});

struct LayerSolution
{
  PhaseBatchd next;
  ControlParams theta;
  int iterations = 0;
};

/// One layer of the implicit symplectic network:
///   q'_i = q_i + dt tanh(u q_i + b)
///   p'_i = p_i - dt u^T (p'_i . tanh'(u q_i + b))
///   (u, b) = (1/gamma) sum_j (p'_j . tanh'(u q_j + b)) [q_j^T, 1]
/// solved jointly for (p', u, b) by damped Newton iteration.
LayerSolution solve_symplectic_layer(const PhaseBatchd& batch, double dt, double gamma, SolverOptions opts = {},
                                     const ControlParams* warm = nullptr);

PhaseBatchd symplectic_layer_step(const PhaseBatchd& batch, double dt, double gamma, SolverOptions opts = {});

/// Reverse-mode sensitivity of one symplectic layer: given adjoints of
/// (q', p') returns adjoints of (q, p), differentiating through the implicit
/// solve.
PhaseBatchd symplectic_layer_adjoint(const PhaseBatchd& batch, const LayerSolution& sol, double dt, double gamma,
                                     const PhaseBatchd& adjointNext);

struct TrainConfig
{
  int layers = 50;
  double dt = 0.075;
  double gamma = 1.0;
  int iterations = 5000;
  double learning_rate = 0.05;
  Integrator integrator = Integrator::symplectic;
  double tol = 1e-12;
  int max_iter = 50;
  std::uint64_t seed = 7;
  /// Std-dev of the random initial weights (euler/rk4) or costates (symplectic).
  double init_scale = 0.1;

  void validate() const;
};

/// Trainable state: per-layer controls for euler/rk4, initial costates for
/// the symplectic network (controls are then derived layer by layer).
struct NetState
{
  std::vector<ControlParams> layers;
  Eigen::MatrixXd costates;
};

NetState initial_state(const TrainConfig& config, const Dataset& data);

struct Trajectory
{
  std::vector<Eigen::MatrixXd> q;         // N_t + 1 layer states
  std::vector<Eigen::MatrixXd> p;         // symplectic only
  std::vector<ControlParams> theta;       // control used by each layer
  std::vector<LayerSolution> solutions;   // symplectic only
};

Trajectory forward_pass(const TrainConfig& config, const NetState& state, const Eigen::MatrixXd& inputs,
                        std::vector<ControlParams>* warm = nullptr);

/// Applies a fixed per-layer control sequence with the integrator of `config`
/// (the symplectic network uses the explicit position update of its layer).
Trajectory propagate(const TrainConfig& config, const std::vector<ControlParams>& controls,
                     const Eigen::MatrixXd& inputs);

struct LossAccuracy
{
  double residual = 0.0;
  double accuracy = 0.0;
};

/// Readout pi(x) = 1 / (1 + e^-x) on the first coordinate of each column.
LossAccuracy loss_and_accuracy(const Eigen::MatrixXd& finalStates, const Eigen::VectorXi& labels);

struct RunLog
{
  std::vector<double> residual;
  std::vector<double> accuracy;
  double wall_seconds = 0.0;
  NetState final_state;
  std::vector<ControlParams> final_controls;
  LossAccuracy final_train;
};

/// Gradient of the residual with respect to the trainable state, together
/// with the residual/accuracy of the forward pass it was computed on.
struct Gradient
{
  NetState grad;
  LossAccuracy metrics;
  Trajectory trajectory;
};

Gradient compute_gradient(const TrainConfig& config, const NetState& state, const Dataset& data,
                          std::vector<ControlParams>* warm = nullptr);

using IterationCallback = std::function<void(int iteration, const LossAccuracy&)>;

RunLog train(const TrainConfig& config, const Dataset& data, const IterationCallback& onIteration = {});

} // namespace geomint
