#include "hybridcert/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hybridcert/model_io.hpp"

namespace hybridcert {

BenchConfig load_bench_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  BenchConfig cfg;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq;
    if (!(ls >> key)) continue;
    if (!(ls >> eq) || eq != "=") throw std::runtime_error("bench config: expected 'key = value'");
    if (key == "N") ls >> cfg.N;
    else if (key == "n") ls >> cfg.n;
    else if (key == "io") ls >> cfg.io;
    else if (key == "modes") ls >> cfg.modes;
    else if (key == "neighbors") ls >> cfg.neighbors;
    else if (key == "eig_norm") ls >> cfg.eig_norm;
    else if (key == "seed") ls >> cfg.seed;
    else if (key == "coupling") ls >> cfg.coupling;
    else if (key == "n_mu") ls >> cfg.n_mu;
    else if (key == "n_zeta") ls >> cfg.n_zeta;
    else if (key == "random_io") { int v; ls >> v; cfg.random_io = v != 0; }
    else throw std::runtime_error("bench config: unknown key '" + key + "'");
  }
  return cfg;
}

void save_bench_config(const std::string& path, const BenchConfig& cfg) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "N = " << cfg.N << "\n"
     << "n = " << cfg.n << "\n"
     << "io = " << cfg.io << "\n"
     << "modes = " << cfg.modes << "\n"
     << "neighbors = " << cfg.neighbors << "\n"
     << "eig_norm = " << format_double(cfg.eig_norm) << "\n"
     << "seed = " << cfg.seed << "\n"
     << "coupling = " << format_double(cfg.coupling) << "\n"
     << "n_mu = " << cfg.n_mu << "\n"
     << "n_zeta = " << cfg.n_zeta << "\n"
     << "random_io = " << (cfg.random_io ? 1 : 0) << "\n";
}

Dfsm three_state_cycle_machine() {
  Dfsm d;
  d.states = {1, 2, 3};
  d.inputs = {0, 1};
  d.outputs = {0, 1, 2};
  d.initial_state = 1;
  // rows q1,q2,q3; columns u=0,u=1
  d.next_state = {{1, 2}, {2, 3}, {1, 1}};
  d.output = {{0, 1}, {1, 0}, {0, 0}};
  return d;
}

namespace {

Eigen::MatrixXd random_dense(int rows, int cols, std::mt19937_64& rng, double scale) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = scale * g(rng);
  return m;
}

void normalize_columns(Eigen::MatrixXd& m) {
  for (int j = 0; j < m.cols(); ++j) {
    const double nrm = m.col(j).norm();
    if (nrm > 0) m.col(j) /= nrm;
  }
}

Dfsm random_strongly_connected_machine(int n_states, std::mt19937_64& rng) {
  Dfsm d;
  for (int i = 1; i <= n_states; ++i) d.states.push_back(i);
  d.inputs = {0, 1};
  for (int p = 0; p < n_states; ++p) d.outputs.push_back(p);
  d.initial_state = 1;
  d.next_state.assign(n_states, std::vector<int>(2, 1));
  d.output.assign(n_states, std::vector<int>(2, 0));
  std::uniform_int_distribution<int> anystate(1, n_states);
  for (int i = 0; i < n_states; ++i) {
    d.next_state[i][1] = (i + 1) % n_states + 1;  // u=1 walks a covering cycle
    d.next_state[i][0] = anystate(rng);
    d.output[i][1] = i;  // every output value emitted
    d.output[i][0] = std::uniform_int_distribution<int>(0, n_states - 1)(rng);
  }
  return d;
}

}  // namespace

std::pair<std::vector<SubsystemModel>, Interconnection> generate(const BenchConfig& cfg) {
  if (cfg.N < 1 || cfg.n < 1 || cfg.io < 1 || cfg.modes < 1 || cfg.neighbors < 0 ||
      cfg.neighbors >= cfg.N) {
    throw std::invalid_argument("generate: invalid configuration");
  }
  std::mt19937_64 rng(cfg.seed);
  const Dfsm machine = cfg.modes == 3 ? three_state_cycle_machine()
                                      : random_strongly_connected_machine(cfg.modes, rng);

  std::vector<SubsystemModel> models;
  for (int i = 0; i < cfg.N; ++i) {
    SubsystemModel m;
    m.id = i;
    m.n = cfg.n;
    m.n_w = cfg.io;
    m.n_y = cfg.io;
    m.dfsm = machine;
    for (int p : machine.outputs) {
      ModeDynamics md;
      md.A = random_dense(cfg.n, cfg.n, rng, 1.0 / std::sqrt(static_cast<double>(cfg.n)));
      Eigen::EigenSolver<Eigen::MatrixXd> es(md.A, false);
      const double shift = es.eigenvalues().real().maxCoeff() - cfg.eig_norm;
      md.A -= shift * Eigen::MatrixXd::Identity(cfg.n, cfg.n);
      md.B = random_dense(cfg.n, cfg.io, rng, 1.0);
      normalize_columns(md.B);
      md.C = random_dense(cfg.io, cfg.n, rng, 1.0);
      normalize_columns(md.C);
      m.modes[p] = std::move(md);
    }
    m.validate();
    models.push_back(std::move(m));
  }

  const SignalDims dims = signal_dims(models);
  int d_target = 0, z_source = cfg.N - 1;
  if (cfg.random_io) {
    d_target = static_cast<int>(rng() % cfg.N);
    z_source = static_cast<int>(rng() % cfg.N);
  }
  const int n_d = cfg.io, n_z = cfg.io;

  Eigen::MatrixXd mc = Eigen::MatrixXd::Zero(dims.nw_total + n_z, dims.ny_total + n_d);
  const double gain = cfg.neighbors > 0 ? cfg.coupling / cfg.neighbors : 0.0;
  for (int i = 0; i < cfg.N; ++i) {
    for (int k = 1; k <= cfg.neighbors; ++k) {
      const int j = (i + k) % cfg.N;
      mc.block(dims.w_off[i], dims.y_off[j], cfg.io, cfg.io) +=
          gain * Eigen::MatrixXd::Identity(cfg.io, cfg.io);
    }
  }
  mc.block(dims.w_off[d_target], dims.ny_total, cfg.io, n_d) =
      Eigen::MatrixXd::Identity(cfg.io, n_d);
  mc.block(dims.nw_total, dims.y_off[z_source], n_z, cfg.io) =
      Eigen::MatrixXd::Identity(n_z, cfg.io);

  // discrete routing: a chain u_i = p_{i-1} driven by the exogenous symbol at
  // the head, provided the emitted outputs stay inside the input alphabets;
  // otherwise every subsystem listens to the exogenous channel directly
  Eigen::MatrixXi md = Eigen::MatrixXi::Zero(cfg.N + cfg.n_zeta, cfg.N + cfg.n_mu);
  bool chain_ok = cfg.n_mu > 0;
  for (int i = 0; i < cfg.N && chain_ok; ++i) {
    for (int p : models[i].dfsm.emitted_outputs()) {
      if (std::find(models[(i + 1) % cfg.N].dfsm.inputs.begin(),
                    models[(i + 1) % cfg.N].dfsm.inputs.end(),
                    p) == models[(i + 1) % cfg.N].dfsm.inputs.end()) {
        chain_ok = false;
        break;
      }
    }
  }
  if (chain_ok) {
    md(d_target, cfg.N) = 1;  // u at the exogenous head = mu_0
    for (int i = 1; i < cfg.N; ++i) {
      const int self = (d_target + i) % cfg.N;
      const int prev = (d_target + i - 1) % cfg.N;
      md(self, prev) = 1;  // u_self = p_prev
    }
  } else {
    for (int i = 0; i < cfg.N; ++i) md(i, cfg.N) = cfg.n_mu > 0 ? 1 : 0;
  }
  for (int j = 0; j < cfg.n_zeta; ++j) {
    md(cfg.N + j, (z_source + cfg.N - j) % cfg.N) = 1;  // zeta_j reads an output
  }

  Interconnection ic =
      make_interconnection(models, std::move(mc), std::move(md), n_d, n_z, cfg.n_mu, cfg.n_zeta);
  auto diag = validate_interconnection(ic, models);
  if (!diag.empty()) {
    throw std::logic_error("generate: produced invalid interconnection: " + diag.front().where +
                           ": " + diag.front().message);
  }
  return {std::move(models), std::move(ic)};
}

std::vector<std::pair<std::string, AdmmConfig>> standard_method_set(const AdmmConfig& base) {
  std::vector<std::pair<std::string, AdmmConfig>> methods;
  AdmmConfig plain = base;
  plain.method = AdmmMethod::Admm;
  plain.restart_every = 0;
  methods.emplace_back("admm", plain);
  for (int k : {0, 10, 20, 50}) {
    AdmmConfig fast = base;
    fast.method = AdmmMethod::FastAdmm;
    fast.restart_every = k;
    methods.emplace_back(k == 0 ? "fast_admm" : "fast_admm_restart" + std::to_string(k), fast);
  }
  return methods;
}

std::string SweepResult::table() const {
  std::ostringstream os;
  os << "method                 status    primal      dual        gamma       eta        "
        "iters-to-tol  wall-ms\n";
  for (const auto& r : rows) {
    char line[256];
    const char* status = r.status == ConsensusStatus::Certified
                             ? "ok"
                             : (r.status == ConsensusStatus::Infeasible ? "infeas" : "maxiter");
    std::snprintf(line, sizeof(line), "%-22s %-8s %-11.3e %-11.3e %-11.5g %-10.5g %-13d %.0f\n",
                  r.name.c_str(), r.error.empty() ? status : "error", r.final_primal,
                  r.final_dual, r.gamma, r.eta, r.iters_to_tol, r.wall_ms);
    os << line;
  }
  return os.str();
}

SweepResult compare_methods(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                            const AdmmConfig& base, int max_iter, const std::string& out_dir) {
  SweepResult sweep;
  for (auto& [name, cfg0] : standard_method_set(base)) {
    AdmmConfig cfg = cfg0;
    cfg.max_iter = max_iter;
    MethodResult row;
    row.name = name;
    try {
      AdmmSolver solver(models, ic, cfg);
      const auto t0 = std::chrono::steady_clock::now();
      ConsensusResult res = solver.run();
      row.wall_ms =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      row.status = res.status;
      row.gamma = res.gamma;
      row.eta = res.eta;
      if (!res.trace.primal.empty()) {
        row.final_primal = res.trace.primal.back();
        row.final_dual = res.trace.dual.back();
      }
      for (size_t k = 0; k < res.trace.primal.size(); ++k) {
        if (std::max(res.trace.primal[k], res.trace.dual[k]) <= cfg.tol) {
          row.iters_to_tol = static_cast<int>(k + 1);
          break;
        }
      }
      row.trace = std::move(res.trace);
      if (!out_dir.empty()) {
        row.csv_path = out_dir + "/residuals_" + name + ".csv";
        row.trace.write_csv(row.csv_path);
      }
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    sweep.rows.push_back(std::move(row));
  }
  return sweep;
}

}  // namespace hybridcert
