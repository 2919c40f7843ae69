#include "hybridcert/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "hybridcert/model_io.hpp"

namespace hybridcert {

SimInputs SimInputs::zero(const Interconnection& ic) {
  SimInputs in;
  const int nd = ic.n_d;
  const int nmu = ic.n_mu;
  const int mu0 = ic.mu_alphabet.empty()
                      ? 0
                      : *std::min_element(ic.mu_alphabet.begin(), ic.mu_alphabet.end());
  in.d = [nd](double) { return Eigen::VectorXd::Zero(nd); };
  in.mu = [nmu, mu0](double) { return Eigen::VectorXi::Constant(nmu, mu0); };
  return in;
}

double default_timestep(const std::vector<SubsystemModel>& models) {
  double fastest = 1.0;
  for (const auto& m : models) {
    for (const auto& [p, md] : m.modes) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(md.A, false);
      fastest = std::max(fastest, es.eigenvalues().cwiseAbs().maxCoeff());
    }
  }
  return 1e-3 / fastest;
}

double slowest_decay(const std::vector<SubsystemModel>& models) {
  double rate = std::numeric_limits<double>::infinity();
  for (const auto& m : models) {
    for (const auto& [p, md] : m.modes) {
      Eigen::EigenSolver<Eigen::MatrixXd> es(md.A, false);
      rate = std::min(rate, -es.eigenvalues().real().maxCoeff());
    }
  }
  return rate;
}

namespace {

struct Stacker {
  SignalDims dims;
  const std::vector<SubsystemModel>* models;
  const Interconnection* ic;
  Eigen::MatrixXd mc_wy, mc_wd, mc_zy, mc_zd;

  Stacker(const std::vector<SubsystemModel>& m, const Interconnection& inter)
      : dims(signal_dims(m)), models(&m), ic(&inter) {
    mc_wy = inter.Mc.topLeftCorner(dims.nw_total, dims.ny_total);
    mc_wd = inter.Mc.topRightCorner(dims.nw_total, inter.n_d);
    mc_zy = inter.Mc.bottomLeftCorner(inter.n_z, dims.ny_total);
    mc_zd = inter.Mc.bottomRightCorner(inter.n_z, inter.n_d);
  }

  // stacked closed-loop matrices for a fixed mode vector
  void segment_matrices(const std::vector<int>& modes, Eigen::MatrixXd& a_hat,
                        Eigen::MatrixXd& b_hat, Eigen::MatrixXd& c_blk) const {
    const int n = dims.n_total;
    Eigen::MatrixXd a_blk = Eigen::MatrixXd::Zero(n, n);
    Eigen::MatrixXd b_blk = Eigen::MatrixXd::Zero(n, dims.nw_total);
    c_blk = Eigen::MatrixXd::Zero(dims.ny_total, n);
    for (int i = 0; i < dims.N; ++i) {
      const ModeDynamics& md = (*models)[i].mode(modes[i]);
      a_blk.block(dims.x_off[i], dims.x_off[i], dims.n[i], dims.n[i]) = md.A;
      b_blk.block(dims.x_off[i], dims.w_off[i], dims.n[i], dims.nw[i]) = md.B;
      c_blk.block(dims.y_off[i], dims.x_off[i], dims.ny[i], dims.n[i]) = md.C;
    }
    a_hat = a_blk + b_blk * mc_wy * c_blk;
    b_hat = b_blk * mc_wd;
  }
};

}  // namespace

HybridTrajectory simulate(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                          const SimInputs& inputs, const Eigen::VectorXd& x0,
                          const std::vector<int>& q0, double dt, double horizon, double tau) {
  if (dt <= 0.0 || horizon <= 0.0 || tau <= 0.0) {
    throw std::invalid_argument("simulate: dt, horizon and tau must be positive");
  }
  const int stride = static_cast<int>(std::lround(tau / dt));
  if (stride < 1 || std::abs(stride * dt - tau) > 1e-9 * tau) {
    throw std::invalid_argument("simulate: tau must be an integer multiple of dt");
  }
  const int steps = static_cast<int>(std::lround(horizon / dt));
  const int samples = steps + 1;
  const SignalDims dims = signal_dims(models);
  if (x0.size() != dims.n_total) throw std::invalid_argument("simulate: x0 dimension mismatch");
  if (static_cast<int>(q0.size()) != dims.N) throw std::invalid_argument("simulate: q0 size");

  HybridTrajectory traj;
  traj.dt = dt;
  traj.tau = tau;
  traj.jump_stride = stride;
  traj.dims = dims;
  traj.n_d = ic.n_d;
  traj.n_z = ic.n_z;
  traj.n_mu = ic.n_mu;
  traj.n_zeta = ic.n_zeta;
  traj.t.resize(samples);
  traj.x.resize(samples, dims.n_total);
  traj.d.resize(samples, ic.n_d);
  traj.w.resize(samples, dims.nw_total);
  traj.y.resize(samples, dims.ny_total);
  traj.z.resize(samples, ic.n_z);
  traj.q.resize(samples, dims.N);
  traj.p.resize(samples, dims.N);
  traj.u.resize(samples, dims.N);
  traj.mu.resize(samples, ic.n_mu);
  traj.zeta.resize(samples, ic.n_zeta);

  Stacker st(models, ic);

  // discrete state
  std::vector<int> q = q0;
  std::vector<int> u(dims.N), pmode(dims.N);
  for (int i = 0; i < dims.N; ++i) {
    u[i] = *std::min_element(models[i].dfsm.inputs.begin(), models[i].dfsm.inputs.end());
  }
  Eigen::VectorXi mu_held = inputs.mu(0.0);
  if (mu_held.size() != ic.n_mu) throw std::invalid_argument("simulate: mu() dimension");

  auto resolve_discrete = [&](const std::vector<int>& pvec, const Eigen::VectorXi& muv,
                              std::vector<int>& u_out, Eigen::VectorXi& zeta_out) {
    Eigen::VectorXi pm(dims.N + ic.n_mu);
    for (int i = 0; i < dims.N; ++i) pm(i) = pvec[i];
    pm.tail(ic.n_mu) = muv;
    Eigen::VectorXi uz = ic.Md * pm;
    u_out.resize(dims.N);
    for (int i = 0; i < dims.N; ++i) u_out[i] = uz(i);
    zeta_out = uz.tail(ic.n_zeta);
  };

  // initial resolve: iterate output/input to a fixed point so the first
  // recorded interval already satisfies the interconnection equation
  Eigen::VectorXi zeta_held = Eigen::VectorXi::Zero(ic.n_zeta);
  {
    bool fixed = false;
    for (int pass = 0; pass < dims.N + 2; ++pass) {
      for (int i = 0; i < dims.N; ++i) {
        pmode[i] = models[i].dfsm.output[models[i].dfsm.state_index(q[i])]
                                        [models[i].dfsm.input_index(u[i])];
      }
      std::vector<int> u_next;
      resolve_discrete(pmode, mu_held, u_next, zeta_held);
      for (int i = 0; i < dims.N; ++i) (void)models[i].dfsm.input_index(u_next[i]);
      if (u_next == u) {
        fixed = true;
        break;
      }
      u = u_next;
    }
    if (!fixed) {
      traj.consistent_init = false;
      for (int i = 0; i < dims.N; ++i) {
        pmode[i] = models[i].dfsm.output[models[i].dfsm.state_index(q[i])]
                                        [models[i].dfsm.input_index(u[i])];
      }
      std::vector<int> u_next;
      resolve_discrete(pmode, mu_held, u_next, zeta_held);
      u = u_next;
    }
  }

  Eigen::MatrixXd a_hat, b_hat, c_blk;
  st.segment_matrices(pmode, a_hat, b_hat, c_blk);

  Eigen::VectorXd x = x0;
  auto record = [&](int s, double time) {
    traj.t[s] = time;
    traj.x.row(s) = x.transpose();
    Eigen::VectorXd dval = inputs.d(time);
    Eigen::VectorXd yv = c_blk * x;
    traj.d.row(s) = dval.transpose();
    traj.y.row(s) = yv.transpose();
    traj.w.row(s) = (st.mc_wy * yv + st.mc_wd * dval).transpose();
    traj.z.row(s) = (st.mc_zy * yv + st.mc_zd * dval).transpose();
    for (int i = 0; i < dims.N; ++i) {
      traj.q(s, i) = q[i];
      traj.p(s, i) = pmode[i];
      traj.u(s, i) = u[i];
    }
    traj.mu.row(s) = mu_held.transpose();
    traj.zeta.row(s) = zeta_held.transpose();
  };
  record(0, 0.0);

  for (int s = 1; s < samples; ++s) {
    const double t0 = (s - 1) * dt;
    // RK4 on xdot = A x + B d(t)
    auto f = [&](double time, const Eigen::VectorXd& xv) -> Eigen::VectorXd {
      return a_hat * xv + b_hat * inputs.d(time);
    };
    Eigen::VectorXd k1 = f(t0, x);
    Eigen::VectorXd k2 = f(t0 + 0.5 * dt, x + 0.5 * dt * k1);
    Eigen::VectorXd k3 = f(t0 + 0.5 * dt, x + 0.5 * dt * k2);
    Eigen::VectorXd k4 = f(t0 + dt, x + dt * k3);
    x += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);

    if (!x.allFinite() || x.cwiseAbs().maxCoeff() > 1e12) {
      traj.diverged = true;
      traj.diverged_at = s * dt;
      traj.t.resize(s);
      traj.x.conservativeResize(s, Eigen::NoChange);
      traj.d.conservativeResize(s, Eigen::NoChange);
      traj.w.conservativeResize(s, Eigen::NoChange);
      traj.y.conservativeResize(s, Eigen::NoChange);
      traj.z.conservativeResize(s, Eigen::NoChange);
      traj.q.conservativeResize(s, Eigen::NoChange);
      traj.p.conservativeResize(s, Eigen::NoChange);
      traj.u.conservativeResize(s, Eigen::NoChange);
      traj.mu.conservativeResize(s, Eigen::NoChange);
      traj.zeta.conservativeResize(s, Eigen::NoChange);
      return traj;
    }

    if (s % stride == 0) {
      const double tk = s * dt;
      JumpRecord jr;
      jr.t = tk;
      jr.grid_index = s;
      jr.q_before = q;
      jr.u = u;
      jr.mu_held = mu_held;
      jr.zeta_held = zeta_held;
      for (int i = 0; i < dims.N; ++i) {
        auto [qn, pm] = dfsm_step(models[i].dfsm, q[i], u[i]);
        jr.p_mealy.push_back(pm);
        q[i] = qn;
      }
      jr.q_after = q;
      traj.jumps.push_back(jr);
      // outputs update on the new states with the held inputs, then the
      // interconnection resolves the next inputs (one causal pass)
      for (int i = 0; i < dims.N; ++i) {
        pmode[i] = models[i].dfsm.output[models[i].dfsm.state_index(q[i])]
                                        [models[i].dfsm.input_index(u[i])];
      }
      mu_held = inputs.mu(tk);
      std::vector<int> u_next;
      resolve_discrete(pmode, mu_held, u_next, zeta_held);
      for (int i = 0; i < dims.N; ++i) {
        (void)models[i].dfsm.input_index(u_next[i]);  // alphabet check
      }
      u = u_next;
      st.segment_matrices(pmode, a_hat, b_hat, c_blk);
    }
    record(s, s * dt);
  }
  return traj;
}

// --------------------------------------------------------------------- audit

namespace {

// trapezoid of a sampled integrand
double trapezoid(const std::vector<double>& g, double dt) {
  if (g.size() < 2) return 0.0;
  double acc = 0.5 * (g.front() + g.back());
  for (size_t i = 1; i + 1 < g.size(); ++i) acc += g[i];
  return acc * dt;
}

struct SegmentView {
  int first, last;          // sample range [first, last]
  std::vector<int> modes;   // active mode per subsystem on (t_first, t_last]
};

// Active-mode segments of the trajectory; the mode recorded at the first
// sample of a segment holds through the segment's right endpoint.
std::vector<SegmentView> segments_of(const HybridTrajectory& traj) {
  std::vector<SegmentView> segs;
  const int n = traj.samples();
  int start = 0;
  for (const auto& jr : traj.jumps) {
    if (jr.grid_index > start && jr.grid_index < n) {
      SegmentView sv;
      sv.first = start;
      sv.last = jr.grid_index;
      sv.modes.assign(traj.p.row(start).begin(), traj.p.row(start).end());
      segs.push_back(std::move(sv));
      start = jr.grid_index;
    }
  }
  if (start < n - 1) {
    SegmentView sv;
    sv.first = start;
    sv.last = n - 1;
    sv.modes.assign(traj.p.row(start).begin(), traj.p.row(start).end());
    segs.push_back(std::move(sv));
  }
  return segs;
}

}  // namespace

std::string AuditReport::to_text() const {
  std::ostringstream os;
  os << "audit report\n";
  for (const auto& c : checks) {
    os << "  [" << (c.pass ? "PASS" : "FAIL") << "] " << c.name
       << "  slack=" << format_double(c.slack) << "  tol=" << format_double(c.tol) << "\n";
  }
  os << "  max storage increase: " << format_double(max_storage_increase) << "\n";
  os << "  global dissipation slack: " << format_double(dissipation_slack) << "\n";
  os << "  empirical gain: " << format_double(empirical_gain) << "\n";
  os << (pass ? "  PASS" : "  FAIL") << "\n";
  return os.str();
}

AuditReport audit_dissipation(const HybridTrajectory& traj,
                              const std::vector<SubsystemModel>& models,
                              const Interconnection& ic, const CertificateSet& certs,
                              double tol_rel) {
  AuditReport rep;
  const SignalDims& dims = traj.dims;
  const int n = traj.samples();
  if (n < 2) {
    rep.pass = false;
    rep.checks.push_back({"trajectory too short", 1.0, 0.0, false});
    return rep;
  }
  Stacker st(models, ic);
  const std::vector<SegmentView> segs = segments_of(traj);

  // storage along the trajectory (recorded q is right-continuous)
  Eigen::MatrixXd v_traj(n, dims.N);
  for (int s = 0; s < n; ++s) {
    for (int i = 0; i < dims.N; ++i) {
      Eigen::VectorXd xi = traj.x.row(s).segment(dims.x_off[i], dims.n[i]).transpose();
      v_traj(s, i) = certs.storage[i].evaluate(xi, traj.q(s, i));
    }
  }
  rep.max_storage_increase = 0.0;
  for (int s = 1; s < n; ++s) {
    rep.max_storage_increase =
        std::max(rep.max_storage_increase, v_traj.row(s).sum() - v_traj.row(s - 1).sum());
  }

  // segment-wise continuous supplies, with arrival values recomputed from the
  // stored states under the segment's modes
  std::vector<double> int_wc(dims.N, 0.0);
  double int_wc_global = 0.0;
  double int_d2 = 0.0, int_z2 = 0.0;
  for (const auto& seg : segs) {
    Eigen::MatrixXd a_hat, b_hat, c_blk;
    st.segment_matrices(seg.modes, a_hat, b_hat, c_blk);
    const int len = seg.last - seg.first + 1;
    std::vector<std::vector<double>> g(dims.N, std::vector<double>(len));
    std::vector<double> gg(len), gd(len), gz(len);
    for (int k = 0; k < len; ++k) {
      const int s = seg.first + k;
      Eigen::VectorXd xv = traj.x.row(s).transpose();
      Eigen::VectorXd dv = traj.d.row(s).transpose();
      Eigen::VectorXd yv = c_blk * xv;
      Eigen::VectorXd wv = st.mc_wy * yv + st.mc_wd * dv;
      Eigen::VectorXd zv = st.mc_zy * yv + st.mc_zd * dv;
      for (int i = 0; i < dims.N; ++i) {
        Eigen::VectorXd wy(dims.nw[i] + dims.ny[i]);
        wy.head(dims.nw[i]) = wv.segment(dims.w_off[i], dims.nw[i]);
        wy.tail(dims.ny[i]) = yv.segment(dims.y_off[i], dims.ny[i]);
        g[i][k] = wy.dot(certs.S[i].matrix.mat() * wy);
      }
      if (ic.n_d + ic.n_z > 0) {
        Eigen::VectorXd dz(ic.n_d + ic.n_z);
        dz.head(ic.n_d) = dv;
        dz.tail(ic.n_z) = zv;
        gg[k] = certs.S_global.dim() > 0 ? dz.dot(certs.S_global.mat() * dz) : 0.0;
      } else {
        gg[k] = 0.0;
      }
      gd[k] = dv.squaredNorm();
      gz[k] = zv.squaredNorm();
    }
    for (int i = 0; i < dims.N; ++i) int_wc[i] += trapezoid(g[i], traj.dt);
    int_wc_global += trapezoid(gg, traj.dt);
    int_d2 += trapezoid(gd, traj.dt);
    int_z2 += trapezoid(gz, traj.dt);
  }

  // jump supplies
  std::vector<double> sum_wd(dims.N, 0.0);
  double sum_wd_global = 0.0;
  for (const auto& jr : traj.jumps) {
    if (jr.grid_index >= n) continue;
    for (int i = 0; i < dims.N; ++i) {
      Eigen::Vector2d up(static_cast<double>(jr.u[i]), static_cast<double>(jr.p_mealy[i]));
      sum_wd[i] += up.dot(certs.R[i].matrix.mat() * up);
    }
    if (ic.n_mu + ic.n_zeta > 0 && certs.R_global.dim() > 0) {
      Eigen::VectorXd mz(ic.n_mu + ic.n_zeta);
      mz.head(ic.n_mu) = jr.mu_held.cast<double>();
      mz.tail(ic.n_zeta) = jr.zeta_held.cast<double>();
      sum_wd_global += mz.dot(certs.R_global.mat() * mz);
    }
  }

  rep.empirical_gain = int_d2 > 0.0 ? std::sqrt(int_z2 / int_d2) : 0.0;

  auto add_check = [&](const std::string& name, double dv, double supply) {
    const double slack = dv - supply;
    const double scale = 1.0 + std::abs(v_traj.row(0).sum()) + std::abs(supply);
    AuditCheck c{name, slack / scale, tol_rel, slack / scale <= tol_rel};
    rep.pass = rep.pass && c.pass;
    rep.checks.push_back(c);
  };
  for (int i = 0; i < dims.N; ++i) {
    add_check("subsystem " + std::to_string(models[i].id) + " dissipation",
              v_traj(n - 1, i) - v_traj(0, i), int_wc[i] + sum_wd[i]);
  }
  {
    const double dv = v_traj.row(n - 1).sum() - v_traj.row(0).sum();
    const double supply = int_wc_global + sum_wd_global;
    add_check("global dissipation (summed storage)", dv, supply);
    const double scale = 1.0 + std::abs(v_traj.row(0).sum()) + std::abs(supply);
    rep.dissipation_slack = (dv - supply) / scale;
  }
  if (traj.diverged) {
    rep.pass = false;
    rep.checks.push_back({"divergence", 1.0, 0.0, false});
  }
  return rep;
}

// ------------------------------------------------------------ empirical gain

GainReport empirical_gain(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                          const CertificateSet& certs, double eta, const GainTrialConfig& cfg) {
  if (cfg.trials < 1) throw std::invalid_argument("empirical_gain: trials must be >= 1");
  GainReport rep;
  rep.eta = eta;
  const SignalDims dims = signal_dims(models);
  const double dt = cfg.dt > 0 ? cfg.dt : default_timestep(models);
  const double sigma = slowest_decay(models);
  const double horizon = cfg.horizon > 0 ? cfg.horizon : 12.0 / std::max(sigma, 1e-3);
  const double tau = cfg.tau > 0 ? cfg.tau : dt;
  const double active = 0.6 * horizon;  // input support; the tail lets z settle
  double omega_max = cfg.omega_max;
  if (omega_max <= 0) {
    omega_max = 0.0;
    for (const auto& m : models)
      for (const auto& [p, md] : m.modes) {
        Eigen::EigenSolver<Eigen::MatrixXd> es(md.A, false);
        omega_max = std::max(omega_max, es.eigenvalues().cwiseAbs().maxCoeff());
      }
    omega_max *= 1.5;
  }

  for (int trial = 0; trial < cfg.trials; ++trial) {
    std::mt19937_64 rng(cfg.seed + 0x9e3779b97f4a7c15ull * (trial + 1));
    std::uniform_real_distribution<double> uw(0.0, omega_max), uph(0.0, 2.0 * M_PI);
    std::normal_distribution<double> amp(0.0, 1.0);
    const int tones = 4;
    std::vector<std::vector<double>> ws(ic.n_d), phs(ic.n_d), as(ic.n_d);
    for (int c = 0; c < ic.n_d; ++c) {
      for (int j = 0; j < tones; ++j) {
        ws[c].push_back(uw(rng));
        phs[c].push_back(uph(rng));
        as[c].push_back(amp(rng));
      }
    }
    SimInputs in = SimInputs::zero(ic);
    in.d = [&, ws, phs, as, active](double t) {
      Eigen::VectorXd v = Eigen::VectorXd::Zero(ic.n_d);
      if (t >= active) return v;
      const double env = 0.5 * (1.0 - std::cos(2.0 * M_PI * t / active));
      for (int c = 0; c < ic.n_d; ++c) {
        double acc = 0.0;
        for (int j = 0; j < tones; ++j) acc += as[c][j] * std::sin(ws[c][j] * t + phs[c][j]);
        v(c) = env * acc;
      }
      return v;
    };
    std::vector<int> q0;
    for (const auto& m : models) q0.push_back(m.dfsm.initial_state);
    HybridTrajectory traj = simulate(models, ic, in, Eigen::VectorXd::Zero(dims.n_total), q0, dt,
                                     horizon, tau);
    if (traj.diverged) {
      rep.diverged++;
      continue;
    }
    AuditReport a = audit_dissipation(traj, models, ic, certs, 1e-3);
    rep.ratios.push_back(a.empirical_gain);
    rep.max_ratio = std::max(rep.max_ratio, a.empirical_gain);
  }
  rep.pass = rep.diverged == 0 && rep.max_ratio <= eta * 1.05;
  return rep;
}

std::pair<std::vector<SubsystemModel>, Interconnection> make_standalone(
    const SubsystemModel& model) {
  std::vector<SubsystemModel> models{model};
  models[0].id = 0;
  const int nw = model.n_w, ny = model.n_y;
  // w = 0, z = y, u = mu, zeta = p
  Eigen::MatrixXd mc = Eigen::MatrixXd::Zero(nw + ny, ny);
  mc.bottomRows(ny).setIdentity();
  Eigen::MatrixXi md(2, 2);
  md << 0, 1, 1, 0;
  Interconnection ic = make_interconnection(models, mc, md, /*n_d=*/0, /*n_z=*/ny,
                                            /*n_mu=*/1, /*n_zeta=*/1, model.dfsm.inputs);
  return {std::move(models), std::move(ic)};
}

void save_trajectory_csv(const std::string& path, const HybridTrajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "t";
  for (int i = 0; i < traj.dims.N; ++i) {
    for (int k = 0; k < traj.dims.n[i]; ++k) os << ",x" << i << "_" << k;
  }
  for (int i = 0; i < traj.dims.N; ++i) os << ",q" << i << ",p" << i << ",u" << i;
  for (int c = 0; c < traj.n_d; ++c) os << ",d" << c;
  for (int c = 0; c < traj.n_z; ++c) os << ",z" << c;
  for (int c = 0; c < traj.n_mu; ++c) os << ",mu" << c;
  for (int c = 0; c < traj.n_zeta; ++c) os << ",zeta" << c;
  os << "\n";
  for (int s = 0; s < traj.samples(); ++s) {
    os << format_double(traj.t[s]);
    for (int j = 0; j < traj.x.cols(); ++j) os << "," << format_double(traj.x(s, j));
    for (int i = 0; i < traj.dims.N; ++i)
      os << "," << traj.q(s, i) << "," << traj.p(s, i) << "," << traj.u(s, i);
    for (int c = 0; c < traj.n_d; ++c) os << "," << format_double(traj.d(s, c));
    for (int c = 0; c < traj.n_z; ++c) os << "," << format_double(traj.z(s, c));
    for (int c = 0; c < traj.n_mu; ++c) os << "," << traj.mu(s, c);
    for (int c = 0; c < traj.n_zeta; ++c) os << "," << traj.zeta(s, c);
    os << "\n";
  }
}

}  // namespace hybridcert
