// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status 0 only if every selected criterion passes.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "geomint/genfunc.hpp"
#include "geomint/lphj.hpp"
#include "geomint/madelung.hpp"
#include "geomint/peakon.hpp"
#include "geomint/pso.hpp"
#include "geomint/resnet_ocp.hpp"

using namespace geomint;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
  bool pass = true;
  std::vector<std::string> lines;

  void check(bool ok, const std::string& what)
  {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "ok    " : "FAIL  ") + what);
  }
  void info(const std::string& what) { lines.push_back("info  " + what); }
};

std::string fmt(double v)
{
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

double seconds(std::chrono::steady_clock::time_point t0)
{
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double fitSlope(const std::vector<double>& h, const std::vector<double>& e)
{
  const auto n = static_cast<double>(h.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    mx += std::log(h[i]) / n;
    my += std::log(e[i]) / n;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    sxy += (std::log(h[i]) - mx) * (std::log(e[i]) - my);
    sxx += (std::log(h[i]) - mx) * (std::log(h[i]) - mx);
  }
  return sxy / sxx;
}

PhaseBatchd uniformBatch(Eigen::Index d, Eigen::Index n, std::uint64_t seed, double scale)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(-scale, scale);
  PhaseBatchd s = PhaseBatchd::zeros(d, n);
  for (Eigen::Index k = 0; k < s.size(); ++k) {
    s.q(k) = U(rng);
    s.p(k) = U(rng);
  }
  return s;
}

// ---------------------------------------------------------------------------

Outcome rigidBody()
{
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  RigidBodyState s0;
  s0.Pi = Eigen::Vector3d(0.6, -0.48, 0.64); // unit, inertia diag(1, 2, 3)
  std::map<std::string, double> drift;
  for (const std::string name : {"lphj", "rk4", "euler"}) {
    RigidBodyState s = s0;
    const double n0 = s.Pi.norm();
    double worst = 0.0;
    for (int k = 0; k < 100000; ++k) {
      s = name == "lphj" ? rigidbody_lphj_step(s, 0.01) : name == "rk4" ? rigidbody_rk4_step(s, 0.01)
                                                                        : rigidbody_euler_step(s, 0.01);
      worst = std::max(worst, std::abs(s.Pi.norm() - n0));
    }
    drift[name] = worst;
  }
  const double t = seconds(t0);
  o.check(drift["lphj"] <= 1e-12, "LPHJ max | |Pi_k| - |Pi_0| | = " + fmt(drift["lphj"]) + " <= 1e-12");
  o.check(drift["euler"] >= 1e-3, "explicit Euler drift = " + fmt(drift["euler"]) + " >= 1e-3");
  o.check(drift["rk4"] > drift["lphj"] && drift["rk4"] < drift["euler"] && drift["rk4"] > 0,
          "RK4 drift = " + fmt(drift["rk4"]) + " strictly between");
  o.check(t <= 10.0, "runtime " + fmt(t) + " s <= 10 s");
  return o;
}

Outcome symplecticity()
{
  Outcome o;
  struct Case
  {
    Hamiltoniand H;
    PhaseBatchd s;
  };
  // fixed states: HO at (1, 0.5); ResNet N = 4, d = 2 with q, p ~ U(-1, 1), seed 10
  const std::vector<Case> cases{
      {harmonic_oscillator(), PhaseBatchd(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.5))},
      {reduced_hamiltonian_fn(1.0), uniformBatch(2, 4, 10, 1.0)}};
  for (const auto& c : cases) {
    double worst = 0.0;
    for (int m = 1; m <= 3; ++m) {
      const auto S = build_series(c.H, m);
      auto step = [&](const PhaseBatchd& x, double dt) { return symplectic_step(S, x, dt, {1e-12, 100}); };
      const double d = symplecticity_defect<double>(step, c.s, 0.01, 1e-5);
      o.info(c.H.name + " m = " + std::to_string(m) + ": defect " + fmt(d));
      worst = std::max(worst, d);
    }
    o.check(worst <= 1e-6, c.H.name + " generating-function defect " + fmt(worst) + " <= 1e-6");
    auto euler = [&](const PhaseBatchd& x, double dt) { return euler_step(c.H, x, dt); };
    const double e = symplecticity_defect<double>(euler, c.s, 0.01, 1e-5);
    std::ostringstream os;
    os.precision(12);
    os << e;
    o.check(e >= 1e-4, c.H.name + " Euler defect " + os.str() + " >= 1e-4");
  }
  return o;
}

Outcome order()
{
  Outcome o;
  const auto H = harmonic_oscillator();
  const PhaseBatchd s0(Eigen::MatrixXd::Constant(1, 1, 1.0), Eigen::MatrixXd::Constant(1, 1, 0.5));
  const std::vector<double> dts{0.1, 0.05, 0.025, 0.0125};
  for (int m = 1; m <= 3; ++m) {
    const auto S = build_series(H, m);
    std::vector<double> err;
    for (double dt : dts) {
      const PhaseBatchd exact(std::cos(dt) * s0.q + std::sin(dt) * s0.p, -std::sin(dt) * s0.q + std::cos(dt) * s0.p);
      err.push_back(maxAbsDiff(symplectic_step(S, s0, dt, {1e-15, 200}), exact));
    }
    const double k = fitSlope(dts, err);
    o.check(std::abs(k - (m + 1)) <= 0.15, "m = " + std::to_string(m) + ": slope " + fmt(k) + ", want " +
                                               std::to_string(m + 1) + " +- 0.15");
  }
  return o;
}

// ---------------------------------------------------------------------------

struct TrainResult
{
  bool completed = false;
  std::string error;
  std::vector<double> residual;
  double accuracy = 0.0;
  double seconds = 0.0;
};

TrainResult runTraining(const TrainConfig& cfg, DatasetKind kind, int n)
{
  TrainResult r;
  const Dataset data = generate_dataset(kind, n, cfg.seed, Split::train);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    const RunLog log = train(cfg, data, [&](int, const LossAccuracy& m) {
      r.residual.push_back(m.residual);
      r.accuracy = m.accuracy;
    });
    r.completed = true;
    r.accuracy = log.final_train.accuracy;
    r.residual.push_back(log.final_train.residual);
  } catch (const Error& e) {
    r.error = e.what();
  }
  r.seconds = seconds(t0);
  return r;
}

// 100-iteration block means never increase
bool monotoneTrend(const std::vector<double>& res)
{
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b + 100 <= res.size(); b += 100) {
    double mean = 0.0;
    for (std::size_t i = b; i < b + 100; ++i)
      mean += res[i] / 100.0;
    if (mean > prev)
      return false;
    prev = mean;
  }
  return true;
}

Outcome training(bool verbose)
{
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto kind : {DatasetKind::circles, DatasetKind::spirals}) {
    const bool circles = kind == DatasetKind::circles;
    const int n = circles ? 1000 : 2000;
    for (const auto integ : {Integrator::symplectic, Integrator::euler, Integrator::rk4}) {
      TrainConfig cfg; // N_t = 50, dt = 0.075, 5000 iterations, seed 7
      cfg.integrator = integ;
      if (integ == Integrator::symplectic) {
        cfg.gamma = 540.0;
        cfg.init_scale = 4.0;
      }
      const std::string tag = std::string(circles ? "circles" : "spirals") + "/" + to_string(integ);
      if (verbose)
        std::cerr << "training " << tag << " ...\n";
      const TrainResult r = runTraining(cfg, kind, n);
      const double r0 = r.residual.empty() ? NAN : r.residual.front();
      const double r1 = r.residual.empty() ? NAN : r.residual.back();
      o.info(tag + ": " + (r.completed ? "completed" : "stopped after " + std::to_string(r.residual.size()) +
                                                           " iterations: " + r.error) +
             ", accuracy " + fmt(r.accuracy) + ", residual " + fmt(r0) + " -> " + fmt(r1) + ", " + fmt(r.seconds) +
             " s");
      o.check(r.completed, tag + " completes 5000 iterations");
      o.check(r.completed && monotoneTrend(r.residual), tag + " 100-iteration mean residual non-increasing");
      if (integ == Integrator::symplectic) {
        if (circles) {
          o.check(r.completed && r.accuracy >= 0.95, tag + " accuracy " + fmt(r.accuracy) + " >= 0.95");
          o.check(r.completed && r0 >= 10.0 * r1, tag + " residual reduced " + fmt(r0 / r1) + "x >= 10x");
        } else {
          o.check(r.completed && r.accuracy >= 0.90, tag + " accuracy " + fmt(r.accuracy) + " >= 0.90");
        }
      }
    }
  }
  const double t = seconds(t0);
  o.check(t <= 1800.0, "runtime " + fmt(t) + " s <= 30 min");
  return o;
}

// ---------------------------------------------------------------------------

Outcome symbols()
{
  Outcome o;
  const pso::AlgebraCheck c = pso::check_algebra(100, 64, 2024, pso::Difference::centered);
  o.check(c.trace_commutator <= 1e-12, "Tr([A,B]) " + fmt(c.trace_commutator) + " <= 1e-12");
  o.check(c.left_adjointness <= 1e-12, "left lift adjointness " + fmt(c.left_adjointness) + " <= 1e-12");
  o.check(c.right_adjointness <= 1e-12, "right lift adjointness " + fmt(c.right_adjointness) + " <= 1e-12");
  o.check(c.associativity <= 1e-10, "associativity " + fmt(c.associativity) + " <= 1e-10");
  o.check(c.jacobi <= 1e-10, "Jacobi " + fmt(c.jacobi) + " <= 1e-10");
  o.check(c.left_expansion <= 1e-12, "left lift expansion " + fmt(c.left_expansion) + " <= 1e-12");
  o.check(c.right_expansion <= 1e-12, "right lift expansion " + fmt(c.right_expansion) + " <= 1e-12");
  o.info("right expansion without the -u1 D^3 a2 term: " + fmt(c.right_expansion_without_d3));
  const pso::AlgebraCheck s = pso::check_algebra(100, 64, 2024, pso::Difference::spectral);
  o.info("spectral D: trace " + fmt(s.trace_commutator) + ", adjointness " + fmt(s.left_adjointness) + " / " +
         fmt(s.right_adjointness) + ", associativity " + fmt(s.associativity) + ", Jacobi " + fmt(s.jacobi) +
         ", expansions " + fmt(s.left_expansion) + " / " + fmt(s.right_expansion));
  return o;
}

Outcome semidirect()
{
  Outcome o;
  const LPHamiltonian H = deep_lp_hamiltonian(0.5);
  SemidirectState s = smooth_semidirect_state(128, 1);
  const SemidirectState s0 = s;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    SemidirectState n = lp_semidirect_step(s, H, 1e-5);
    worst = std::max(worst, std::abs(n.mass() - s.mass()));
    s = std::move(n);
  }
  o.check(worst <= 1e-14, "mass change per step " + fmt(worst) + " <= 1e-14 over 1e4 steps (dt = 1e-5)");

  std::vector<double> dts{1e-3, 5e-4, 2.5e-4, 1.25e-4}, gaps;
  for (double dt : dts) {
    const SemidirectState a = lp_semidirect_step(s0, H, dt);
    const SemidirectState b = lp_euler_step(s0, H, dt);
    gaps.push_back(std::max((a.m - b.m).lpNorm<Eigen::Infinity>(), (a.rho - b.rho).lpNorm<Eigen::Infinity>()));
  }
  const double k = fitSlope(dts, gaps);
  o.check(std::abs(k - 2.0) <= 0.2, "one-step gap to explicit Euler: slope " + fmt(k) + ", want 2 +- 0.2");

  double dev = 0.0;
  for (double nu : {0.0, 0.5, 1.0})
    for (std::uint64_t seed = 1; seed <= 10; ++seed)
      dev = std::max(dev, lp_gradient_deviation(deep_lp_hamiltonian(nu), smooth_semidirect_state(64, seed), 1e-5));
  o.check(dev <= 1e-6, "functional derivatives vs finite differences " + fmt(dev) + " <= 1e-6");
  return o;
}

Outcome madelung()
{
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  double scaled = 0.0, plain = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Eigen::VectorXd omega;
    const MadelungPair pair = random_madelung_pair(256, 0.5, seed, 8, &omega);
    scaled = std::max(scaled, equivalence_defect(pair, omega, 0.5, PhaseConvention::scaled));
    plain = std::max(plain, equivalence_defect(pair, omega, 0.5, PhaseConvention::plain));
  }
  const double t = seconds(t0);
  o.check(scaled <= 1e-8, "defect with psi = sqrt(rho) exp(i lambda / sqrt(hbar)): " + fmt(scaled) + " <= 1e-8");
  o.info("defect with psi = sqrt(rho) exp(i lambda): " + fmt(plain));
  o.check(t <= 5.0, "runtime " + fmt(t) + " s <= 5 s");
  return o;
}

Outcome peakons()
{
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  for (auto kernel : {PeakonKernel::exponential, PeakonKernel::gaussian}) {
    PeakonState s;
    s.q = Eigen::Vector3d(-4.0, -1.0, 2.0);
    s.p = Eigen::Vector3d(0.5, 0.3, 0.15);
    s.kernel = kernel;
    const double H0 = peakon_hamiltonian(s), P0 = s.p.sum();
    const Eigen::VectorXd T0 = conserved_traces(lax_matrices(s, 0.5).L, 3);
    double dT = 0.0, dP = 0.0, dH1 = 0.0, dH2 = 0.0;
    for (int k = 1; k <= 20000; ++k) {
      s = peakon_step(s, 1e-3, 2);
      dP = std::max(dP, std::abs(s.p.sum() - P0));
      const double e = std::abs(peakon_hamiltonian(s) - H0);
      (k <= 10000 ? dH1 : dH2) = std::max(k <= 10000 ? dH1 : dH2, e);
      if (kernel == PeakonKernel::exponential)
        dT = std::max(dT, (conserved_traces(lax_matrices(s, 0.5).L, 3) - T0).cwiseQuotient(T0).cwiseAbs().maxCoeff());
    }
    const std::string k = to_string(kernel);
    if (kernel == PeakonKernel::exponential)
      o.check(dT <= 1e-6, k + ": relative drift of Tr L^2, Tr L^3 " + fmt(dT) + " <= 1e-6 (exp(-|q_i - q_j|/2))");
    o.check(dP <= 1e-10, k + ": sum p drift " + fmt(dP) + " <= 1e-10");
    if (kernel == PeakonKernel::gaussian) {
      o.check(std::max(dH1, dH2) <= 1e-8, k + ": max |H - H0| " + fmt(std::max(dH1, dH2)) + " <= 1e-8");
      o.check(dH2 <= 2.0 * dH1, k + ": max |H - H0| on [10, 20] " + fmt(dH2) + " <= 2x that on [0, 10] " + fmt(dH1));
    } else {
      o.info(k + ": max |H - H0| " + fmt(std::max(dH1, dH2)));
    }
  }
  const double t = seconds(t0);
  o.check(t <= 60.0, "runtime " + fmt(t) + " s <= 60 s");
  return o;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshotTree(const fs::path& root)
{
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file())
      continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = ss.str();
  }
  return files;
}

Outcome determinism(const fs::path& scratch)
{
  Outcome o;
  const std::vector<std::vector<std::string>> commands{
      {"rigid-body", "--integrator", "lphj", "--steps", "2000", "--stride", "10", "--seed", "3"},
      {"rigid-body", "--integrator", "euler", "--steps", "2000", "--seed", "3"},
      {"train", "--dataset", "spirals", "--integrator", "euler", "--n", "200", "--iters", "20"},
      {"train", "--dataset", "circles", "--integrator", "symplectic", "--n", "100", "--iters", "5", "--gamma", "540",
       "--init-scale", "4"},
      {"peakon", "--kernel", "exponential", "--t-final", "2", "--stride", "10"},
      {"peakon", "--kernel", "gaussian", "--n", "5", "--seed", "4", "--t-final", "1"},
      {"lp-field", "--variant", "conservative", "--steps", "200", "--every", "50"},
      {"madelung-check", "--seeds", "3"},
      {"pso-check", "--trials", "5"},
      {"gradcheck", "--states", "5"},
  };
  for (const auto& cmd : commands) {
    std::string label;
    for (const auto& a : cmd)
      label += (label.empty() ? "" : " ") + a;
    std::vector<std::map<std::string, std::string>> trees;
    int status = 0;
    for (const char* side : {"a", "b"}) {
      const fs::path dir = scratch / side;
      fs::remove_all(dir);
      std::vector<std::string> args{"--quiet", "--runs", dir.string()};
      args.insert(args.end(), cmd.begin(), cmd.end());
      std::ostringstream sink;
      auto* old = std::cout.rdbuf(sink.rdbuf());
      status = std::max(status, cli::run(args));
      std::cout.rdbuf(old);
      trees.push_back(snapshotTree(dir));
    }
    o.check(status == 0 && !trees[0].empty() && trees[0] == trees[1],
            label + ": " + std::to_string(trees[0].size()) + " files byte-identical");
  }
  fs::remove_all(scratch);
  return o;
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Acceptance run, one line per criterion"};
  std::vector<int> only;
  std::string scratch = (fs::temp_directory_path() / "geomint-acceptance").string();
  bool verbose = false;
  app.add_option("--only", only, "Criteria to run (default all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--scratch", scratch, "Scratch directory for the determinism check")->capture_default_str();
  app.add_flag("-v,--verbose", verbose, "Progress on stderr during training");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"rigid-body orbit preservation", rigidBody},
      {"symplecticity of the generating-function step", symplecticity},
      {"order of the generating-function step", order},
      {"training reproduction", [&] { return training(verbose); }},
      {"symbol algebra suite", symbols},
      {"semidirect Lie-Poisson step", semidirect},
      {"Madelung / NLS equivalence", madelung},
      {"peakon integrability", peakons},
      {"determinism", [&] { return determinism(scratch); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id))
      continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r.check(false, std::string("threw: ") + e.what());
    }
    all = all && r.pass;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  criterion " << id << ": " << criteria[i].first << "\n";
    for (const auto& line : r.lines)
      std::cout << "        " << line << "\n";
    std::cout.flush();
  }
  return all ? 0 : 1;
}
