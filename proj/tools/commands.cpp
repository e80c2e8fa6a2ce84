#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <random>

#include <CLI11.hpp>

#include "geomint/io.hpp"
#include "geomint/lphj.hpp"
#include "geomint/madelung.hpp"
#include "geomint/peakon.hpp"
#include "geomint/pso.hpp"
#include "geomint/resnet_ocp.hpp"

namespace geomint::cli {

namespace {

using io::Row;
using nlohmann::json;
using I64 = std::int64_t;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Common
{
  std::string runs; // overrides $GEOMINT_RUNS
  bool quiet = false;
};

std::filesystem::path rootFor(const Common& c) { return c.runs.empty() ? io::artifact_root() : std::filesystem::path(c.runs); }

void announce(const io::RunArtifact& art) { std::cout << art.dir().string() << "\n"; }

// ---------------------------------------------------------------------------

struct RigidBodyOpts
{
  std::string integrator = "lphj";
  double dt = 0.01;
  long steps = 100000;
  std::uint64_t seed = 0;
  long stride = 1;
};

void rigidBody(const RigidBodyOpts& o, const Common& c)
{
  if (!(o.dt > 0) || o.steps < 0 || o.stride < 1)
    throw UsageError("rigid-body: need dt > 0, steps >= 0, stride >= 1");
  std::mt19937_64 rng(o.seed);
  std::normal_distribution<double> n01;
  RigidBodyState s;
  s.Pi = Eigen::Vector3d(n01(rng), n01(rng), n01(rng)).normalized();

  const json config{{"integrator", o.integrator}, {"dt", o.dt}, {"steps", o.steps}, {"seed", o.seed},
                    {"stride", o.stride},         {"inertia", {1.0, 2.0, 3.0}}};
  io::RunArtifact art("rigid-body", config, o.seed, rootFor(c));

  const double n0 = s.Pi.norm();
  double drift = 0.0;
  std::vector<Row> rows;
  auto record = [&](long k) {
    rows.push_back({I64{k}, k * o.dt, s.Pi(0), s.Pi(1), s.Pi(2), s.Pi.norm(), rigidbody_energy(s)});
  };
  record(0);
  for (long k = 1; k <= o.steps; ++k) {
    try {
      if (o.integrator == "lphj")
        s = rigidbody_lphj_step(s, o.dt);
      else if (o.integrator == "rk4")
        s = rigidbody_rk4_step(s, o.dt);
      else
        s = rigidbody_euler_step(s, o.dt);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("rigid-body step " + std::to_string(k) + " (" + e.what() + ")", e.residual(),
                             e.iterations());
    }
    drift = std::max(drift, std::abs(s.Pi.norm() - n0));
    if (k % o.stride == 0 || k == o.steps)
      record(k);
  }
  art.add_table("trajectory", rows, {"step", "t", "pi1", "pi2", "pi3", "norm", "energy"});
  art.finish({{"max_norm_drift", drift}});
  announce(art);
}

// ---------------------------------------------------------------------------

struct TrainOpts
{
  std::string dataset = "circles";
  std::string integrator = "symplectic";
  std::string config; // optional JSON file, flags given explicitly win
  int n = 0;          // 0: 1000 for circles, 2000 for spirals
  int layers = 50;
  double dt = 0.075;
  int iters = 5000;
  std::uint64_t seed = 7;
  double gamma = 1.0;
  double lr = 0.05;
  double init_scale = 0.1;
  double tol = 1e-12;
  int max_iter = 50;
  std::vector<int> snapshots;
};

std::vector<Row> snapshotRows(int layer, const Eigen::MatrixXd& q, const Eigen::VectorXi& labels)
{
  std::vector<Row> rows;
  rows.reserve(q.cols());
  for (Eigen::Index i = 0; i < q.cols(); ++i)
    rows.push_back({I64{layer}, I64{i}, q(0, i), q.rows() > 1 ? q(1, i) : 0.0, I64{labels(i)}});
  return rows;
}

void train(const TrainOpts& o, const CLI::App& sub, const Common& c)
{
  TrainConfig cfg;
  if (!o.config.empty())
    cfg = io::load_config(o.config);
  auto given = [&](const char* flag) { return o.config.empty() || sub.count(flag) > 0; };
  if (given("--layers"))
    cfg.layers = o.layers;
  if (given("--dt"))
    cfg.dt = o.dt;
  if (given("--iters"))
    cfg.iterations = o.iters;
  if (given("--seed"))
    cfg.seed = o.seed;
  if (given("--gamma"))
    cfg.gamma = o.gamma;
  if (given("--lr"))
    cfg.learning_rate = o.lr;
  if (given("--init-scale"))
    cfg.init_scale = o.init_scale;
  if (given("--tol"))
    cfg.tol = o.tol;
  if (given("--max-iter"))
    cfg.max_iter = o.max_iter;
  if (given("--integrator"))
    cfg.integrator = parse_integrator(o.integrator);
  cfg.validate();

  const DatasetKind kind = parse_dataset_kind(o.dataset);
  const int n = o.n > 0 ? o.n : (kind == DatasetKind::spirals ? 2000 : 1000);
  std::vector<int> snaps = o.snapshots.empty() ? std::vector<int>{20, 30, cfg.layers} : o.snapshots;
  for (int k : snaps)
    if (k < 0 || k > cfg.layers)
      throw UsageError("train: snapshot layer " + std::to_string(k) + " outside 0.." + std::to_string(cfg.layers));
  std::sort(snaps.begin(), snaps.end());
  snaps.erase(std::unique(snaps.begin(), snaps.end()), snaps.end());

  const Dataset data = generate_dataset(kind, n, cfg.seed, Split::train);
  const Dataset test = generate_dataset(kind, n, cfg.seed, Split::test);

  json config = io::to_json(cfg);
  config["dataset"] = o.dataset;
  config["n"] = n;
  config["snapshots"] = snaps;
  io::RunArtifact art("train", config, cfg.seed, rootFor(c));

  std::vector<Row> log;
  const auto t0 = std::chrono::steady_clock::now();
  auto onIteration = [&](int it, const LossAccuracy& m) {
    log.push_back({I64{it}, m.residual, m.accuracy});
    if (!c.quiet && (it % 250 == 0 || it + 1 == cfg.iterations))
      std::cerr << "train " << to_string(cfg.integrator) << " " << o.dataset << " it " << it << " residual "
                << m.residual << " accuracy " << m.accuracy << " ("
                << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() << " s)\n";
  };
  const std::vector<std::string> logSchema{"iteration", "residual", "accuracy"};

  RunLog result;
  try {
    result = geomint::train(cfg, data, onIteration);
  } catch (const Error& e) {
    art.add_table("log", log, logSchema);
    art.finish({{"status", "failed"}, {"error", e.what()}, {"iterations_completed", log.size()}});
    announce(art);
    throw;
  }
  art.add_table("log", log, logSchema);

  const Trajectory traj = forward_pass(cfg, result.final_state, data.inputs);
  for (int k : snaps)
    art.add_table("snapshot_layer" + std::to_string(k), snapshotRows(k, traj.q[k], data.labels),
                  {"layer", "sample", "x", "y", "label"});
  const Trajectory testTraj = propagate(cfg, result.final_controls, test.inputs);
  const LossAccuracy testMetrics = loss_and_accuracy(testTraj.q.back(), test.labels);
  const double first = log.empty() ? kNaN : std::get<double>(log.front()[1]);

  art.finish({{"status", "ok"},
              {"initial_residual", first},
              {"final_train_residual", result.final_train.residual},
              {"final_train_accuracy", result.final_train.accuracy},
              {"test_residual", testMetrics.residual},
              {"test_accuracy", testMetrics.accuracy}});
  announce(art);
}

// ---------------------------------------------------------------------------

struct PeakonOpts
{
  std::string kernel = "exponential";
  int n = 3;
  double dt = 1e-3;
  double t_final = 20.0;
  std::uint64_t seed = 0;
  int order = 2;
  double lax_exponent = 0.5;
  long stride = 100;
};

PeakonState initialPeakons(int n, std::uint64_t seed)
{
  PeakonState s;
  if (n == 3) {
    s.q = Eigen::Vector3d(-4.0, -1.0, 2.0);
    s.p = Eigen::Vector3d(0.5, 0.3, 0.15);
    return s;
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> gap(1.5, 3.0), mom(0.1, 0.5);
  s.q.resize(n);
  s.p.resize(n);
  double x = 0.0;
  for (int i = 0; i < n; ++i) {
    s.q(i) = x;
    x += gap(rng);
  }
  s.q.array() -= 0.5 * s.q(n - 1);
  for (int i = 0; i < n; ++i)
    s.p(n - 1 - i) = mom(rng);
  std::sort(s.p.data(), s.p.data() + n, std::greater<>());
  return s;
}

void peakon(const PeakonOpts& o, const Common& c)
{
  if (o.n < 1 || !(o.dt > 0) || !(o.t_final >= 0) || o.stride < 1)
    throw UsageError("peakon: need n >= 1, dt > 0, t-final >= 0, stride >= 1");
  PeakonState s = initialPeakons(o.n, o.seed);
  s.kernel = parse_peakon_kernel(o.kernel);
  const long steps = std::lround(o.t_final / o.dt);

  const json config{{"kernel", o.kernel}, {"n", o.n},         {"dt", o.dt},         {"t_final", o.t_final},
                    {"seed", o.seed},     {"order", o.order}, {"lax_exponent", o.lax_exponent},
                    {"stride", o.stride}};
  io::RunArtifact art("peakon", config, o.seed, rootFor(c));

  std::vector<std::string> schema{"t"};
  for (int i = 0; i < o.n; ++i)
    schema.push_back("q" + std::to_string(i));
  for (int i = 0; i < o.n; ++i)
    schema.push_back("p" + std::to_string(i));
  schema.insert(schema.end(), {"H", "momentum", "TrL2", "TrL3"});

  auto traces = [&]() -> std::pair<double, double> {
    if (s.kernel != PeakonKernel::exponential || (s.p.array() <= 0.0).any() || o.n < 2)
      return {kNaN, kNaN};
    const Eigen::VectorXd tr = conserved_traces(lax_matrices(s, o.lax_exponent).L, std::min(3, o.n));
    return {tr(0), tr.size() > 1 ? tr(1) : kNaN};
  };
  std::vector<Row> rows;
  double H0 = peakon_hamiltonian(s), P0 = s.p.sum(), dH = 0.0, dP = 0.0;
  auto record = [&](long k) {
    Row r{k * o.dt};
    for (int i = 0; i < o.n; ++i)
      r.emplace_back(s.q(i));
    for (int i = 0; i < o.n; ++i)
      r.emplace_back(s.p(i));
    const auto [t2, t3] = traces();
    r.insert(r.end(), {peakon_hamiltonian(s), s.p.sum(), t2, t3});
    rows.push_back(std::move(r));
  };
  record(0);
  for (long k = 1; k <= steps; ++k) {
    try {
      s = peakon_step(s, o.dt, o.order);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("peakon step " + std::to_string(k) + " (" + e.what() + ")", e.residual(),
                             e.iterations());
    }
    dH = std::max(dH, std::abs(peakon_hamiltonian(s) - H0));
    dP = std::max(dP, std::abs(s.p.sum() - P0));
    if (k % o.stride == 0 || k == steps)
      record(k);
  }
  art.add_table("trajectory", rows, schema);
  art.finish({{"steps", steps}, {"max_energy_deviation", dH}, {"max_momentum_deviation", dP}});
  announce(art);
}

// ---------------------------------------------------------------------------

struct LpOpts
{
  std::string variant = "conservative";
  int nx = 128;
  double dt = 1e-5;
  long steps = 10000;
  double nu = 0.5;
  std::uint64_t seed = 1;
  long every = 1000;
};

void lpField(const LpOpts& o, const Common& c)
{
  if (o.nx < 4 || !(o.dt > 0) || o.steps < 0 || o.every < 1)
    throw UsageError("lp-field: need nx >= 4, dt > 0, steps >= 0, every >= 1");
  const LPVariant variant = o.variant == "literal" ? LPVariant::literal : LPVariant::conservative;
  SemidirectState s = smooth_semidirect_state(o.nx, o.seed);
  const LPHamiltonian H = deep_lp_hamiltonian(o.nu);

  const json config{{"variant", o.variant}, {"nx", o.nx},     {"dt", o.dt},      {"steps", o.steps},
                    {"nu", o.nu},           {"seed", o.seed}, {"every", o.every}};
  io::RunArtifact art("lp-field", config, o.seed, rootFor(c));

  std::vector<Row> fields, diag;
  const Eigen::VectorXd x = s.mesh.points();
  const double mass0 = s.mass();
  double worstStep = 0.0;
  auto snapshot = [&](long k) {
    for (Eigen::Index j = 0; j < s.mesh.n; ++j)
      fields.push_back({I64{k}, k * o.dt, I64{j}, x(j), s.m(j), s.rho(j)});
  };
  snapshot(0);
  diag.push_back({I64{0}, 0.0, s.mass(), H.value(s)});
  for (long k = 1; k <= o.steps; ++k) {
    SemidirectState next;
    try {
      next = lp_semidirect_step(s, H, o.dt, variant);
    } catch (const ConvergenceError& e) {
      throw ConvergenceError("lp-field step " + std::to_string(k) + " (" + e.what() + ")", e.residual(),
                             e.iterations());
    } catch (const NumericalDomainError& e) {
      throw NumericalDomainError("lp-field step " + std::to_string(k) + ": " + e.what());
    }
    worstStep = std::max(worstStep, std::abs(next.mass() - s.mass()));
    s = std::move(next);
    diag.push_back({I64{k}, k * o.dt, s.mass(), H.value(s)});
    if (k % o.every == 0 || k == o.steps)
      snapshot(k);
  }
  art.add_table("fields", fields, {"step", "t", "j", "x", "m", "rho"});
  art.add_table("diagnostics", diag, {"step", "t", "mass", "H"});
  art.finish({{"max_mass_change_per_step", worstStep}, {"total_mass_change", s.mass() - mass0}});
  announce(art);
}

// ---------------------------------------------------------------------------

struct MadelungOpts
{
  int nx = 256;
  double nu = 0.5;
  int seeds = 20;
  int kmax = 8;
  std::string phase = "scaled";
};

void madelungCheck(const MadelungOpts& o, const Common& c)
{
  if (o.seeds < 1)
    throw UsageError("madelung-check: need seeds >= 1");
  const PhaseConvention phase = o.phase == "plain" ? PhaseConvention::plain : PhaseConvention::scaled;
  const json config{{"nx", o.nx}, {"nu", o.nu}, {"seeds", o.seeds}, {"kmax", o.kmax}, {"phase", o.phase}};
  io::RunArtifact art("madelung-check", config, 0, rootFor(c));
  json results = json::array();
  double worst = 0.0;
  for (int seed = 0; seed < o.seeds; ++seed) {
    Eigen::VectorXd omega;
    const MadelungPair pair = random_madelung_pair(o.nx, o.nu, static_cast<std::uint64_t>(seed), o.kmax, &omega);
    const double d = equivalence_defect(pair, omega, o.nu, phase);
    worst = std::max(worst, d);
    results.push_back({{"seed", seed}, {"n", o.nx}, {"nu", o.nu}, {"defect", d}});
  }
  const json report{{"phase", o.phase}, {"max_defect", worst}, {"results", results}};
  art.add_json("defects", report);
  art.finish({{"max_defect", worst}});
  announce(art);
  if (!c.quiet)
    std::cerr << report.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

struct PsoOpts
{
  int trials = 100;
  int nx = 64;
  std::uint64_t seed = 0;
  std::string scheme = "centered";
};

json toJson(const pso::AlgebraCheck& r)
{
  return {{"trials", r.trials},
          {"trace_commutator", r.trace_commutator},
          {"left_adjointness", r.left_adjointness},
          {"right_adjointness", r.right_adjointness},
          {"associativity", r.associativity},
          {"jacobi", r.jacobi},
          {"left_expansion", r.left_expansion},
          {"right_expansion", r.right_expansion},
          {"right_expansion_without_d3", r.right_expansion_without_d3}};
}

void psoCheck(const PsoOpts& o, const Common& c)
{
  const pso::Difference scheme = o.scheme == "spectral" ? pso::Difference::spectral : pso::Difference::centered;
  const json config{{"trials", o.trials}, {"nx", o.nx}, {"seed", o.seed}, {"scheme", o.scheme}};
  io::RunArtifact art("pso-check", config, o.seed, rootFor(c));
  const json report = toJson(pso::check_algebra(o.trials, o.nx, o.seed, scheme));
  art.add_json("defects", report);
  art.finish(report);
  announce(art);
  if (!c.quiet)
    std::cerr << report.dump(2) << "\n";
}

// ---------------------------------------------------------------------------

struct GradOpts
{
  int states = 100;
  double h = 1e-5;
  std::uint64_t seed = 0;
};

void gradcheck(const GradOpts& o, const Common& c)
{
  if (o.states < 1 || !(o.h > 0))
    throw UsageError("gradcheck: need states >= 1 and h > 0");
  const json config{{"states", o.states}, {"h", o.h}, {"seed", o.seed}};
  io::RunArtifact art("gradcheck", config, o.seed, rootFor(c));

  struct Entry
  {
    Hamiltoniand H;
    Eigen::Index d, n;
    double scale;
  };
  const std::vector<Entry> entries{
      {harmonic_oscillator(), 2, 3, 2.0},
      {pendulum(), 2, 3, 3.0},
      {constant_hamiltonian(-1.25), 2, 3, 1.0},
      {reduced_hamiltonian_fn(1.0), 2, 4, 1.0},
      {peakon_hamiltonian_fn(PeakonKernel::gaussian, 1.0), 1, 3, 2.0},
      {peakon_hamiltonian_fn(PeakonKernel::exponential, 1.0), 1, 3, 2.0},
  };
  std::mt19937_64 rng(o.seed);
  std::vector<Row> rows;
  double worstAll = 0.0;
  for (const auto& e : entries) {
    std::uniform_real_distribution<double> U(-e.scale, e.scale);
    double worst = 0.0;
    for (int t = 0; t < o.states; ++t) {
      PhaseBatchd s = PhaseBatchd::zeros(e.d, e.n);
      for (Eigen::Index k = 0; k < s.size(); ++k) {
        s.q(k) = U(rng);
        s.p(k) = U(rng);
      }
      worst = std::max(worst, check_gradients(e.H, s, o.h));
    }
    worstAll = std::max(worstAll, worst);
    rows.push_back({e.H.name, I64{o.states}, o.h, worst});
  }
  for (double nu : {0.0, 0.5, 1.0}) {
    const LPHamiltonian H = deep_lp_hamiltonian(nu);
    double worst = 0.0;
    for (int t = 0; t < o.states; ++t)
      worst = std::max(worst, lp_gradient_deviation(H, smooth_semidirect_state(32, rng()), o.h));
    worstAll = std::max(worstAll, worst);
    rows.push_back({"deep-lp-nu" + io::format_double(nu), I64{o.states}, o.h, worst});
  }
  art.add_table("gradients", rows, {"hamiltonian", "states", "h", "max_deviation"});
  art.finish({{"max_deviation", worstAll}});
  announce(art);
  if (!c.quiet)
    for (const auto& r : rows)
      std::cerr << std::get<std::string>(r[0]) << " " << io::format_cell(r[3]) << "\n";
}

template <typename T>
CLI::Option* choice(CLI::App* app, const std::string& name, T& target, std::vector<std::string> allowed,
                    const std::string& help)
{
  return app->add_option(name, target, help)->check(CLI::IsMember(allowed))->capture_default_str();
}

} // namespace

int run(int argc, const char* const* argv)
{
  CLI::App app{"geomint: structure-preserving integrators and their experiments"};
  app.require_subcommand(0, 1);
  app.fallthrough();
  Common common;
  app.add_option("--runs", common.runs, "Artifact root (default $GEOMINT_RUNS or ./runs)");
  app.add_flag("-q,--quiet", common.quiet, "No progress output on stderr");

  RigidBodyOpts rb;
  auto* rbCmd = app.add_subcommand("rigid-body", "Rigid body on so(3)*: Pi trajectory CSV");
  choice(rbCmd, "--integrator", rb.integrator, {"euler", "rk4", "lphj"}, "Stepper");
  rbCmd->add_option("--dt", rb.dt, "Time step")->capture_default_str();
  rbCmd->add_option("--steps", rb.steps, "Number of steps")->capture_default_str();
  rbCmd->add_option("--seed", rb.seed, "Seed for the initial unit Pi")->capture_default_str();
  rbCmd->add_option("--stride", rb.stride, "Write every k-th step")->capture_default_str();

  TrainOpts tr;
  auto* trCmd = app.add_subcommand("train", "Train a continuous ResNet; log and layer snapshots");
  choice(trCmd, "--dataset", tr.dataset, {"spirals", "circles"}, "Dataset");
  choice(trCmd, "--integrator", tr.integrator, {"euler", "rk4", "symplectic"}, "Network integrator");
  trCmd->add_option("--config", tr.config, "TrainConfig JSON; explicit flags override it");
  trCmd->add_option("--n", tr.n, "Points per split (default 1000 circles, 2000 spirals)");
  trCmd->add_option("--layers", tr.layers, "N_t")->capture_default_str();
  trCmd->add_option("--dt", tr.dt, "Layer step")->capture_default_str();
  trCmd->add_option("--iters", tr.iters, "Gradient iterations")->capture_default_str();
  trCmd->add_option("--seed", tr.seed, "Data and initialisation seed")->capture_default_str();
  trCmd->add_option("--gamma", tr.gamma, "Regularisation weight")->capture_default_str();
  trCmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
  trCmd->add_option("--init-scale", tr.init_scale, "Std-dev of initial weights or costates")->capture_default_str();
  trCmd->add_option("--tol", tr.tol, "Layer solve tolerance")->capture_default_str();
  trCmd->add_option("--max-iter", tr.max_iter, "Layer solve iteration cap")->capture_default_str();
  trCmd->add_option("--snapshots", tr.snapshots, "Snapshot layers (default 20,30,N_t)")->delimiter(',');

  PeakonOpts pk;
  auto* pkCmd = app.add_subcommand("peakon", "N-peakon trajectory with energy, momentum and Lax traces");
  choice(pkCmd, "--kernel", pk.kernel, {"gaussian", "exponential"}, "Kernel");
  pkCmd->add_option("--n", pk.n, "Number of peakons")->capture_default_str();
  pkCmd->add_option("--dt", pk.dt, "Time step")->capture_default_str();
  pkCmd->add_option("--t-final", pk.t_final, "Final time")->capture_default_str();
  pkCmd->add_option("--seed", pk.seed, "Seed for n != 3 initial states")->capture_default_str();
  pkCmd->add_option("--order", pk.order, "Generating-series order m")->check(CLI::Range(1, 3))->capture_default_str();
  pkCmd->add_option("--lax-exponent", pk.lax_exponent, "c in exp(-c|q_i - q_j|)")->capture_default_str();
  pkCmd->add_option("--stride", pk.stride, "Write every k-th step")->capture_default_str();

  LpOpts lp;
  auto* lpCmd = app.add_subcommand("lp-field", "Semidirect Lie-Poisson step: (m, rho) snapshots");
  choice(lpCmd, "--variant", lp.variant, {"literal", "conservative"}, "Density update");
  lpCmd->add_option("--nx", lp.nx, "Grid points")->capture_default_str();
  lpCmd->add_option("--dt", lp.dt, "Time step")->capture_default_str();
  lpCmd->add_option("--steps", lp.steps, "Number of steps")->capture_default_str();
  lpCmd->add_option("--nu", lp.nu, "Noise level nu")->capture_default_str();
  lpCmd->add_option("--seed", lp.seed, "Seed for the initial state")->capture_default_str();
  lpCmd->add_option("--every", lp.every, "Snapshot interval")->capture_default_str();

  MadelungOpts md;
  auto* mdCmd = app.add_subcommand("madelung-check", "NLS vs mean-field Hamiltonian on random fields");
  mdCmd->add_option("--nx", md.nx, "Grid points")->capture_default_str();
  mdCmd->add_option("--nu", md.nu, "nu, with hbar = nu^4")->capture_default_str();
  mdCmd->add_option("--seeds", md.seeds, "Number of seeded fields")->capture_default_str();
  mdCmd->add_option("--kmax", md.kmax, "Highest density mode")->capture_default_str();
  choice(mdCmd, "--phase", md.phase, {"scaled", "plain"}, "exp(i lambda / sqrt(hbar)) or exp(i lambda)");

  PsoOpts ps;
  auto* psCmd = app.add_subcommand("pso-check", "Symbol algebra property suite");
  psCmd->add_option("--trials", ps.trials, "Random trials")->capture_default_str();
  psCmd->add_option("--nx", ps.nx, "Grid points")->capture_default_str();
  psCmd->add_option("--seed", ps.seed, "Seed")->capture_default_str();
  choice(psCmd, "--scheme", ps.scheme, {"centered", "spectral"}, "Difference operator");

  GradOpts gc;
  auto* gcCmd = app.add_subcommand("gradcheck", "Analytic vs central-difference gradients of every Hamiltonian");
  gcCmd->add_option("--states", gc.states, "Random states per Hamiltonian")->capture_default_str();
  gcCmd->add_option("--step", gc.h, "Difference step")->capture_default_str();
  gcCmd->add_option("--seed", gc.seed, "Seed")->capture_default_str();

  if (argc <= 1) {
    std::cerr << app.help();
    return 1;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*rbCmd)
      rigidBody(rb, common);
    else if (*trCmd)
      train(tr, *trCmd, common);
    else if (*pkCmd)
      peakon(pk, common);
    else if (*lpCmd)
      lpField(lp, common);
    else if (*mdCmd)
      madelungCheck(md, common);
    else if (*psCmd)
      psoCheck(ps, common);
    else if (*gcCmd)
      gradcheck(gc, common);
    else {
      std::cerr << app.help();
      return 1;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

int run(const std::vector<std::string>& args)
{
  std::vector<const char*> argv{"geomint"};
  for (const auto& a : args)
    argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

} // namespace geomint::cli
