#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <random>

#include "hybridcert/bench.hpp"
#include "hybridcert/consensus.hpp"
#include "hybridcert/model_io.hpp"
#include "hybridcert/simulate.hpp"

using namespace hybridcert;

namespace {

constexpr int kExitCertified = 0;
constexpr int kExitError = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitMaxIter = 3;

struct CommonOpts {
  std::string config;
  std::string instance;
  std::string out = ".";
  std::uint64_t seed = 0;
  std::string method = "fast-admm";
  int restart = 50;
  double rho = 1.0;
  double smoothing = 1.0;
  int max_iter = 200;
  double tol = 1e-4;
  std::string objective = "l2";
};

void add_solver_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--method", o.method, "admm or fast-admm")
      ->envname("HYBRIDCERT_METHOD")
      ->check(CLI::IsMember({"admm", "fast-admm"}));
  cmd->add_option("--restart", o.restart, "restart period for fast-admm (0 = none)")
      ->envname("HYBRIDCERT_RESTART");
  cmd->add_option("--rho", o.rho, "penalty parameter")->envname("HYBRIDCERT_RHO");
  cmd->add_option("--smoothing", o.smoothing, "smoothing weight")->envname("HYBRIDCERT_SMOOTHING");
  cmd->add_option("--max-iter", o.max_iter, "iteration cap")->envname("HYBRIDCERT_MAX_ITER");
  cmd->add_option("--tol", o.tol, "residual tolerance")->envname("HYBRIDCERT_TOL");
  cmd->add_option("--objective", o.objective, "l2, discrete-l2 or passivity")
      ->envname("HYBRIDCERT_OBJECTIVE")
      ->check(CLI::IsMember({"l2", "discrete-l2", "passivity"}));
}

AdmmConfig make_admm_config(const CommonOpts& o) {
  AdmmConfig cfg;
  cfg.method = o.method == "admm" ? AdmmMethod::Admm : AdmmMethod::FastAdmm;
  cfg.restart_every = cfg.method == AdmmMethod::FastAdmm ? o.restart : 0;
  cfg.rho = o.rho;
  cfg.smoothing = o.smoothing;
  cfg.max_iter = o.max_iter;
  cfg.tol = o.tol;
  if (o.objective == "discrete-l2")
    cfg.objective.target = GainObjective::Target::DiscreteL2;
  else if (o.objective == "passivity")
    cfg.objective.target = GainObjective::Target::Passivity;
  return cfg;
}

BenchConfig resolve_bench_config(const CommonOpts& o, bool seed_given) {
  BenchConfig cfg;
  if (!o.config.empty()) cfg = load_bench_config(o.config);
  if (seed_given || o.config.empty()) cfg.seed = o.seed;
  return cfg;
}

std::pair<std::vector<SubsystemModel>, Interconnection> load_or_generate(const CommonOpts& o,
                                                                         bool seed_given) {
  if (!o.instance.empty()) return load_system(o.instance);
  return generate(resolve_bench_config(o, seed_given));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"certification of interconnected hybrid systems"};
  app.require_subcommand(1);

  CommonOpts o;
  bool random_io = false;
  int trials = 100;
  double horizon = 0.0, dt = 0.0, tau = 0.0;
  std::string cert_path;

  auto* gen = app.add_subcommand("generate", "generate a random instance and write it out");
  gen->add_option("--config", o.config, "bench config file")->envname("HYBRIDCERT_CONFIG");
  auto* gen_seed = gen->add_option("--seed", o.seed, "generator seed")->envname("HYBRIDCERT_SEED");
  gen->add_option("--out", o.out, "output directory")->envname("HYBRIDCERT_OUT");
  gen->add_flag("--random-io", random_io, "randomize exogenous channel placement");

  auto* ana = app.add_subcommand("analyze", "certify an instance by consensus iterations");
  ana->add_option("--config", o.config, "bench config file")->envname("HYBRIDCERT_CONFIG");
  ana->add_option("--instance", o.instance, "system definition file");
  auto* ana_seed = ana->add_option("--seed", o.seed, "generator seed")->envname("HYBRIDCERT_SEED");
  ana->add_option("--out", o.out, "output directory")->envname("HYBRIDCERT_OUT");
  add_solver_flags(ana, o);

  auto* swp = app.add_subcommand("sweep", "compare methods on one instance");
  swp->add_option("--config", o.config, "bench config file")->envname("HYBRIDCERT_CONFIG");
  swp->add_option("--instance", o.instance, "system definition file");
  auto* swp_seed = swp->add_option("--seed", o.seed, "generator seed")->envname("HYBRIDCERT_SEED");
  swp->add_option("--out", o.out, "output directory")->envname("HYBRIDCERT_OUT");
  add_solver_flags(swp, o);

  auto* sim = app.add_subcommand("simulate", "integrate one trajectory and write a CSV");
  sim->add_option("--config", o.config, "bench config file")->envname("HYBRIDCERT_CONFIG");
  sim->add_option("--instance", o.instance, "system definition file");
  auto* sim_seed = sim->add_option("--seed", o.seed, "seed")->envname("HYBRIDCERT_SEED");
  sim->add_option("--out", o.out, "output directory")->envname("HYBRIDCERT_OUT");
  sim->add_option("--horizon", horizon, "simulation horizon (0 = auto)");
  sim->add_option("--dt", dt, "step size (0 = auto)");
  sim->add_option("--tau", tau, "jump period (0 = dt)");

  auto* aud = app.add_subcommand("audit", "replay certificates against trajectories");
  aud->add_option("--config", o.config, "bench config file")->envname("HYBRIDCERT_CONFIG");
  aud->add_option("--instance", o.instance, "system definition file");
  aud->add_option("--cert", cert_path, "certificate file")->required();
  auto* aud_seed = aud->add_option("--seed", o.seed, "seed")->envname("HYBRIDCERT_SEED");
  aud->add_option("--out", o.out, "output directory")->envname("HYBRIDCERT_OUT");
  aud->add_option("--trials", trials, "number of gain trials");

  CLI11_PARSE(app, argc, argv);
  std::filesystem::create_directories(o.out);

  try {
    if (gen->parsed()) {
      BenchConfig cfg = resolve_bench_config(o, gen_seed->count() > 0);
      cfg.random_io = random_io || cfg.random_io;
      auto [models, ic] = generate(cfg);
      const std::string path = o.out + "/instance.hybridsys";
      save_system(path, models, ic);
      save_bench_config(o.out + "/instance.config", cfg);
      std::printf("wrote %s (%d subsystems, %d continuous states, %zu discrete states)\n",
                  path.c_str(), ic.N, signal_dims(models).n_total,
                  models.size() * models[0].dfsm.states.size());
      return kExitCertified;
    }

    if (ana->parsed()) {
      auto [models, ic] = load_or_generate(o, ana_seed->count() > 0);
      AdmmConfig cfg = make_admm_config(o);
      AdmmSolver solver(models, ic, cfg);
      ConsensusResult res = solver.run();
      res.trace.write_csv(o.out + "/residuals.csv");
      save_certificates(o.out + "/certificates.txt", res.certificates, res.audit);
      double worst = 0.0;
      for (const auto& r : res.audit) worst = std::max(worst, r.max_eig);
      std::printf("iterations: %d\n", res.iterations);
      if (!res.trace.primal.empty()) {
        std::printf("final residuals: primal %.3e, dual %.3e\n", res.trace.primal.back(),
                    res.trace.dual.back());
      }
      std::printf("gamma: %.8g   eta: %.8g\n", res.gamma, res.eta);
      std::printf("certificate audit worst residual: %.3e  (polished: %s)\n", worst,
                  res.polished ? "yes" : "no");
      if (res.status == ConsensusStatus::Infeasible) {
        std::printf("infeasible: %s\n", res.diagnostic.c_str());
        return kExitInfeasible;
      }
      return res.status == ConsensusStatus::Certified ? kExitCertified : kExitMaxIter;
    }

    if (swp->parsed()) {
      auto [models, ic] = load_or_generate(o, swp_seed->count() > 0);
      AdmmConfig cfg = make_admm_config(o);
      SweepResult sweep = compare_methods(models, ic, cfg, o.max_iter, o.out);
      std::printf("%s", sweep.table().c_str());
      for (const auto& row : sweep.rows) {
        if (!row.error.empty()) std::printf("%s failed: %s\n", row.name.c_str(), row.error.c_str());
      }
      return kExitCertified;
    }

    if (sim->parsed()) {
      auto [models, ic] = load_or_generate(o, sim_seed->count() > 0);
      const double step = dt > 0 ? dt : default_timestep(models);
      const double t_end = horizon > 0 ? horizon : 10.0 / std::max(slowest_decay(models), 1e-3);
      const double jump = tau > 0 ? tau : step;
      std::mt19937_64 rng(o.seed);
      std::normal_distribution<double> g(0.0, 1.0);
      SimInputs in = SimInputs::zero(ic);
      const SignalDims dims = signal_dims(models);
      Eigen::VectorXd x0(dims.n_total);
      for (int i = 0; i < dims.n_total; ++i) x0(i) = g(rng);
      std::vector<int> q0;
      for (const auto& m : models) q0.push_back(m.dfsm.initial_state);
      HybridTrajectory traj = simulate(models, ic, in, x0, q0, step, t_end, jump);
      const std::string path = o.out + "/trajectory.csv";
      save_trajectory_csv(path, traj);
      std::printf("wrote %s (%d samples, %zu jumps%s)\n", path.c_str(), traj.samples(),
                  traj.jumps.size(), traj.diverged ? ", DIVERGED" : "");
      return traj.diverged ? kExitError : kExitCertified;
    }

    if (aud->parsed()) {
      auto [models, ic] = load_or_generate(o, aud_seed->count() > 0);
      CertificateSet certs = load_certificates(cert_path);
      const double step = default_timestep(models);
      const double t_end = 10.0 / std::max(slowest_decay(models), 1e-3);
      const SignalDims dims = signal_dims(models);
      std::mt19937_64 rng(o.seed);
      std::normal_distribution<double> g(0.0, 1.0);
      bool all_pass = true;
      std::string report_text;
      for (int trial = 0; trial < std::max(1, trials / 10); ++trial) {
        SimInputs in = SimInputs::zero(ic);
        Eigen::VectorXd x0(dims.n_total);
        for (int i = 0; i < dims.n_total; ++i) x0(i) = g(rng);
        std::vector<int> q0;
        for (const auto& m : models) q0.push_back(m.dfsm.initial_state);
        HybridTrajectory traj = simulate(models, ic, in, x0, q0, step, t_end, step);
        AuditReport rep = audit_dissipation(traj, models, ic, certs);
        all_pass = all_pass && rep.pass;
        if (trial == 0) report_text = rep.to_text();
      }
      GainTrialConfig gcfg;
      gcfg.trials = trials;
      gcfg.seed = o.seed + 1;
      GainReport gain = empirical_gain(models, ic, certs, certs.eta, gcfg);
      std::ofstream rf(o.out + "/audit.txt");
      rf << report_text;
      rf << "empirical gain: max ratio " << format_double(gain.max_ratio) << " over "
         << gain.ratios.size() << " trials, eta " << format_double(certs.eta) << ", "
         << (gain.pass ? "PASS" : "FAIL") << "\n";
      std::printf("%s", report_text.c_str());
      std::printf("empirical gain: max ratio %.6g vs eta %.6g -> %s\n", gain.max_ratio, certs.eta,
                  gain.pass ? "PASS" : "FAIL");
      return (all_pass && gain.pass) ? kExitCertified : kExitError;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
  return kExitError;
}
