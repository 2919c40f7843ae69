#include "hybridcert/consensus.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <stdexcept>

#include "hybridcert/model_io.hpp"

namespace hybridcert {

void ResidualTrace::write_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "iter,primal_residual,dual_residual,gamma,wall_ms\n";
  for (size_t k = 0; k < primal.size(); ++k) {
    os << (k + 1) << "," << format_double(primal[k]) << "," << format_double(dual[k]) << ","
       << format_double(gamma[k]) << "," << format_double(wall_ms[k]) << "\n";
  }
}

namespace {

struct Coord {
  int var = -1;       // unknown index in the owning problem; -1 = closed form
  double weight = 1;  // svec weight
  double init = 0;    // identity-init value of this coordinate
};

void append_sym_coords(const SdpProblem& prob, const MatrixVar& mv, std::vector<Coord>& coords) {
  const double rt2 = std::sqrt(2.0);
  for (int i = 0; i < mv.dim; ++i) {
    for (int j = i; j < mv.dim; ++j) {
      coords.push_back(Coord{prob.entry_index(mv, i, j), i == j ? 1.0 : rt2,
                             i == j ? 1.0 : 0.0});
    }
  }
}

void append_placeholder_sym_coords(int dim, std::vector<Coord>& coords) {
  const double rt2 = std::sqrt(2.0);
  for (int i = 0; i < dim; ++i)
    for (int j = i; j < dim; ++j)
      coords.push_back(Coord{-1, i == j ? 1.0 : rt2, i == j ? 1.0 : 0.0});
}

}  // namespace

struct AdmmSolver::Impl {
  std::vector<SubsystemModel> models;
  Interconnection ic;
  AdmmConfig cfg;
  SignalDims dims;

  struct LocalTemplate {
    SdpProblem prob;
    StorageVars storage;
    MatrixVar S, R;
    std::vector<Coord> coords;
  };
  std::vector<LocalTemplate> locals;

  struct GlobalTemplate {
    SdpProblem prob;
    std::vector<MatrixVar> S_copies, R_copies;
    std::optional<int> gamma;
    AffineMatrix S_expr, R_expr;
    std::vector<Coord> coords;  // full consensus layout
  } global;

  std::vector<int> offsets;
  int total = 0;

  Eigen::MatrixXd last_S_global, last_R_global;
  double last_gamma = 0.0;

  Impl(std::vector<SubsystemModel> m, Interconnection i, AdmmConfig c)
      : models(std::move(m)), ic(std::move(i)), cfg(std::move(c)) {
    {
      auto diag = validate_interconnection(ic, models);
      if (!diag.empty()) {
        throw std::invalid_argument("AdmmSolver: invalid interconnection: " + diag.front().where +
                                    ": " + diag.front().message);
      }
    }
    if (cfg.method == AdmmMethod::FastAdmm &&
        (cfg.smoothing <= 0.0 || cfg.rho > cfg.smoothing)) {
      throw std::invalid_argument(
          "AdmmSolver: accelerated iterations require smoothing with rho <= ell");
    }
    dims = signal_dims(models);
    build_locals();
    build_global();
  }

  void add_group_smoothing(SdpProblem& prob, const std::vector<Coord>& group,
                           const std::string& tag) {
    if (cfg.smoothing <= 0.0) return;
    if (!cfg.unsquared_smoothing) {
      for (const Coord& c : group) {
        if (c.var >= 0) prob.add_quadratic_cost(c.var, 2.0 * cfg.smoothing * c.weight * c.weight);
      }
      return;
    }
    // epigraph of the plain Frobenius norm: [[t I, m]; [m^T, t]] >= 0
    const int k = static_cast<int>(group.size());
    const int t = prob.add_scalar(tag + ".norm_epi");
    AffineMatrix e(k + 1, k + 1);
    e.add_term(t, -Eigen::MatrixXd::Identity(k + 1, k + 1));
    for (int a = 0; a < k; ++a) {
      if (group[a].var < 0) continue;
      Eigen::MatrixXd coeff = Eigen::MatrixXd::Zero(k + 1, k + 1);
      coeff(a, k) = -group[a].weight;
      coeff(k, a) = -group[a].weight;
      e.add_term(group[a].var, coeff);
    }
    prob.add_lmi(e, tag + " norm cone");
    prob.add_linear_cost(t, cfg.smoothing);
  }

  void build_locals() {
    offsets.clear();
    total = 0;
    for (size_t i = 0; i < models.size(); ++i) {
      const SubsystemModel& model = models[i];
      LocalTemplate lt;
      SdpProblem& prob = lt.prob;
      prob.strictness_margin = cfg.cert.epsilon;
      const std::string prefix = "s" + std::to_string(model.id);
      lt.storage = add_storage_vars(prob, model, cfg.cert, prefix);
      lt.S = prob.add_sym(prefix + ".S", model.n_w + model.n_y);
      lt.R = prob.add_sym(prefix + ".R", 2);

      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(model.n, model.n);
      for (const MatrixVar& pv : lt.storage.matrix_vars) {
        prob.add_lmi(AffineMatrix::constant(cfg.cert.epsilon * eye) - prob.var(pv),
                     prefix + " storage pd");
      }
      for (int lv : lt.storage.scalar_vars) {
        prob.add_scalar_ineq(-prob.var(lv), prefix + " lambda >= 0");
      }
      AffineMatrix s_expr = prob.var(lt.S);
      AffineMatrix r_expr = prob.var(lt.R);
      for (auto& c : lmi_local_continuous(model, lt.storage.P, s_expr, cfg.cert.enumeration)) {
        prob.add_lmi(c.expr, c.label);
      }
      DiscreteLocalLmis d = lmi_local_discrete(model, lt.storage.P, lt.storage.lambda, r_expr);
      for (auto& c : d.matrix_constraints) prob.add_lmi(c.expr, c.label);
      for (auto& c : d.scalar_constraints) prob.add_scalar_ineq(c.expr, c.label);

      // consensus coordinates: svec(S), svec(R) [, storage copies]
      std::vector<Coord> s_coords, r_coords, v_coords;
      append_sym_coords(prob, lt.S, s_coords);
      append_sym_coords(prob, lt.R, r_coords);
      for (const MatrixVar& pv : lt.storage.matrix_vars) append_sym_coords(prob, pv, v_coords);
      for (int lv : lt.storage.scalar_vars) v_coords.push_back(Coord{lv, 1.0, 0.0});

      lt.coords = s_coords;
      lt.coords.insert(lt.coords.end(), r_coords.begin(), r_coords.end());
      if (cfg.storage_in_consensus) {
        lt.coords.insert(lt.coords.end(), v_coords.begin(), v_coords.end());
      }
      // proximal curvature (centers set per call)
      for (const Coord& c : lt.coords) {
        prob.add_quadratic_cost(c.var, cfg.rho * c.weight * c.weight);
      }
      add_group_smoothing(prob, s_coords, prefix + ".S");
      add_group_smoothing(prob, r_coords, prefix + ".R");
      add_group_smoothing(prob, v_coords, prefix + ".V");
      if (cfg.cert.var_reg > 0.0) {
        for (int k = 0; k < prob.num_unknowns(); ++k)
          prob.add_quadratic_cost(k, cfg.cert.var_reg);
      }
      offsets.push_back(total);
      total += static_cast<int>(lt.coords.size());
      locals.push_back(std::move(lt));
    }
  }

  void build_global() {
    SdpProblem& prob = global.prob;
    prob.strictness_margin = cfg.cert.epsilon;
    std::vector<AffineMatrix> s_exprs, r_exprs;
    for (size_t i = 0; i < models.size(); ++i) {
      const SubsystemModel& model = models[i];
      const std::string prefix = "g" + std::to_string(model.id);
      MatrixVar sc = prob.add_sym(prefix + ".S", model.n_w + model.n_y);
      MatrixVar rc = prob.add_sym(prefix + ".R", 2);
      global.S_copies.push_back(sc);
      global.R_copies.push_back(rc);
      append_sym_coords(prob, sc, global.coords);
      append_sym_coords(prob, rc, global.coords);
      if (cfg.storage_in_consensus) {
        // storage copies are unconstrained by the coupling LMIs; their global
        // update is the closed-form proximal center
        SdpProblem scratch;
        StorageVars sv = add_storage_vars(scratch, model, cfg.cert, prefix);
        for (const MatrixVar& pv : sv.matrix_vars)
          append_placeholder_sym_coords(pv.dim, global.coords);
        for (size_t k = 0; k < sv.scalar_vars.size(); ++k)
          global.coords.push_back(Coord{-1, 1.0, 0.0});
      }
      s_exprs.push_back(prob.var(sc));
      r_exprs.push_back(prob.var(rc));
    }

    // global supply rates per objective
    const int nd = ic.n_d, nz = ic.n_z, nm = ic.n_mu, nzt = ic.n_zeta;
    AffineMatrix s_expr(nd + nz, nd + nz), r_expr(nm + nzt, nm + nzt);
    switch (cfg.objective.target) {
      case GainObjective::Target::ContinuousL2: {
        if (nd + nz > 0) {
          Eigen::MatrixXd dblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
          dblk.topLeftCorner(nd, nd).setIdentity();
          Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
          zblk.bottomRightCorner(nz, nz) = -Eigen::MatrixXd::Identity(nz, nz);
          s_expr.add_constant(zblk);
          if (cfg.objective.fixed_gamma) {
            s_expr.add_constant(*cfg.objective.fixed_gamma * dblk);
          } else {
            global.gamma = prob.add_scalar("gamma");
            prob.add_scalar_ineq(-prob.var(*global.gamma), "gamma >= 0");
            prob.add_linear_cost(*global.gamma, 1.0);
            s_expr.add_term(*global.gamma, dblk);
          }
        }
        if (nm + nzt > 0) {
          MatrixVar rv = prob.add_sym("R_global", nm + nzt);
          r_expr = prob.var(rv);
          if (nzt > 0) prob.add_lmi(r_expr.block(nm, nm, nzt, nzt), "R_global zeta-block <= 0");
          if (cfg.cert.var_reg > 0.0) {
            for (int i = 0; i < svec_dim(nm + nzt); ++i)
              prob.add_quadratic_cost(prob.entry_index(rv, 0, 0) + i, cfg.cert.var_reg);
          }
        }
        break;
      }
      case GainObjective::Target::DiscreteL2: {
        if (nm + nzt > 0) {
          Eigen::MatrixXd mblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
          mblk.topLeftCorner(nm, nm).setIdentity();
          Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
          zblk.bottomRightCorner(nzt, nzt) = -Eigen::MatrixXd::Identity(nzt, nzt);
          r_expr.add_constant(zblk);
          if (cfg.objective.fixed_gamma) {
            r_expr.add_constant(*cfg.objective.fixed_gamma * mblk);
          } else {
            global.gamma = prob.add_scalar("gamma");
            prob.add_scalar_ineq(-prob.var(*global.gamma), "gamma >= 0");
            prob.add_linear_cost(*global.gamma, 1.0);
            r_expr.add_term(*global.gamma, mblk);
          }
        }
        if (nd + nz > 0) {
          MatrixVar sv = prob.add_sym("S_global", nd + nz);
          s_expr = prob.var(sv);
          if (nz > 0) prob.add_lmi(s_expr.block(nd, nd, nz, nz), "S_global z-block <= 0");
          if (cfg.cert.var_reg > 0.0) {
            for (int i = 0; i < svec_dim(nd + nz); ++i)
              prob.add_quadratic_cost(prob.entry_index(sv, 0, 0) + i, cfg.cert.var_reg);
          }
        }
        break;
      }
      case GainObjective::Target::Passivity: {
        if (nd != nz) throw std::invalid_argument("passivity objective requires n_d == n_z");
        if (nd + nz > 0) {
          Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
          s0.topRightCorner(nd, nz) = 0.5 * Eigen::MatrixXd::Identity(nd, nz);
          s0.bottomLeftCorner(nz, nd) = 0.5 * Eigen::MatrixXd::Identity(nz, nd);
          s_expr.add_constant(s0);
        }
        if (nm + nzt > 0) {
          MatrixVar rv = prob.add_sym("R_global", nm + nzt);
          r_expr = prob.var(rv);
          if (nzt > 0) prob.add_lmi(r_expr.block(nm, nm, nzt, nzt), "R_global zeta-block <= 0");
          if (cfg.cert.var_reg > 0.0) {
            for (int i = 0; i < svec_dim(nm + nzt); ++i)
              prob.add_quadratic_cost(prob.entry_index(rv, 0, 0) + i, cfg.cert.var_reg);
          }
        }
        break;
      }
    }
    global.S_expr = s_expr;
    global.R_expr = r_expr;

    prob.add_lmi(lmi_global_continuous(ic, models, s_exprs, s_expr, cfg.cert.epsilon),
                 "global continuous coupling");
    prob.add_lmi(lmi_global_discrete(ic, models, r_exprs, r_expr, cfg.cert.epsilon),
                 "global discrete coupling");
    for (const Coord& c : global.coords) {
      if (c.var >= 0) prob.add_quadratic_cost(c.var, cfg.rho * c.weight * c.weight);
    }
  }
};

AdmmSolver::AdmmSolver(std::vector<SubsystemModel> models, Interconnection ic, AdmmConfig cfg)
    : impl_(std::make_unique<Impl>(std::move(models), std::move(ic), std::move(cfg))) {}

AdmmSolver::~AdmmSolver() = default;

int AdmmSolver::block_len(int i) const {
  return static_cast<int>(impl_->locals[i].coords.size());
}
int AdmmSolver::block_offset(int i) const { return impl_->offsets[i]; }
int AdmmSolver::total_len() const { return impl_->total; }
const AdmmConfig& AdmmSolver::config() const { return impl_->cfg; }

ConsensusState AdmmSolver::make_initial_state() const {
  ConsensusState st;
  st.rho = impl_->cfg.rho;
  st.ell = impl_->cfg.smoothing;
  st.alpha = 1.0;
  st.v.resize(impl_->total);
  int j = 0;
  for (const auto& lt : impl_->locals) {
    for (const Coord& c : lt.coords) st.v(j++) = c.init;
  }
  st.s = impl_->cfg.paper_literal_init ? st.v : Eigen::VectorXd::Zero(impl_->total);
  st.v_prev = st.v;
  st.s_prev = st.s;
  st.v_bar = st.v;
  st.s_bar = st.s;
  st.b.resize(impl_->models.size());
  for (size_t i = 0; i < impl_->models.size(); ++i) {
    st.b[i] = Eigen::VectorXd::Zero(block_len(static_cast<int>(i)));
  }
  st.local_storage.resize(impl_->models.size());
  return st;
}

Eigen::VectorXd AdmmSolver::local_update(int i, const Eigen::VectorXd& center,
                                         StorageCertificate* storage_out, std::string* event) {
  auto& lt = impl_->locals[i];
  if (center.size() != static_cast<int>(lt.coords.size())) {
    throw std::invalid_argument("local_update: center size mismatch");
  }
  const double rho = impl_->cfg.rho;
  for (size_t k = 0; k < lt.coords.size(); ++k) {
    const Coord& c = lt.coords[k];
    lt.prob.set_linear_cost(c.var, -rho * c.weight * center(static_cast<int>(k)));
  }
  SdpSolution sol = solve_sdp(lt.prob, impl_->cfg.sdp_tol);
  if (sol.status == SdpStatus::Infeasible) {
    throw LocalInfeasible(impl_->models[i].id,
                          "subsystem " + std::to_string(impl_->models[i].id) +
                              " admits no storage/supply pair in the family: " + sol.message);
  }
  if (sol.status == SdpStatus::MaxIter && event) {
    *event = "local " + std::to_string(impl_->models[i].id) + " sdp maxiter";
  }
  Eigen::VectorXd b(lt.coords.size());
  for (size_t k = 0; k < lt.coords.size(); ++k) {
    b(static_cast<int>(k)) = lt.coords[k].weight * sol.x(lt.coords[k].var);
  }
  if (storage_out) {
    storage_out->subsystem = impl_->models[i].id;
    storage_out->P.clear();
    storage_out->lambda.clear();
    for (int q : impl_->models[i].dfsm.states) {
      Eigen::MatrixXd pq = lt.storage.P.at(q).evaluate(sol.x);
      storage_out->P.emplace(q, SymMatrix::from_symmetric(0.5 * (pq + pq.transpose())));
      storage_out->lambda.emplace(q, lt.storage.lambda.at(q).evaluate(sol.x));
    }
  }
  return b;
}

void AdmmSolver::global_update(ConsensusState& state, const Eigen::VectorXd& prox_center) {
  auto& gt = impl_->global;
  if (prox_center.size() != impl_->total) {
    throw std::invalid_argument("global_update: center size mismatch");
  }
  const double rho = impl_->cfg.rho;
  for (size_t k = 0; k < gt.coords.size(); ++k) {
    const Coord& c = gt.coords[k];
    if (c.var >= 0) {
      gt.prob.set_linear_cost(c.var, -rho * c.weight * prox_center(static_cast<int>(k)));
    }
  }
  if (gt.gamma) gt.prob.set_linear_cost(*gt.gamma, 1.0);
  SdpSolution sol = solve_sdp(gt.prob, impl_->cfg.sdp_tol);
  if (sol.status == SdpStatus::Infeasible) {
    throw GlobalInfeasible("no global supply-rate certificate exists in the family: " +
                           sol.message);
  }
  if (sol.status == SdpStatus::MaxIter) {
    state.last_event = state.last_event.empty() ? "global sdp maxiter"
                                                : state.last_event + "; global sdp maxiter";
  }
  Eigen::VectorXd v(impl_->total);
  for (size_t k = 0; k < gt.coords.size(); ++k) {
    const Coord& c = gt.coords[k];
    v(static_cast<int>(k)) =
        c.var >= 0 ? c.weight * sol.x(c.var) : prox_center(static_cast<int>(k));
  }
  state.v = v;
  state.gamma = gt.gamma ? sol.x(*gt.gamma) : 0.0;
  impl_->last_gamma = state.gamma;
  impl_->last_S_global = gt.S_expr.evaluate(sol.x);
  impl_->last_R_global = gt.R_expr.evaluate(sol.x);
}

void AdmmSolver::step_admm(ConsensusState& state) {
  const int n = static_cast<int>(impl_->models.size());
  state.last_event.clear();
  std::vector<int> lens(n);
  for (int i = 0; i < n; ++i) lens[i] = block_len(i);

  const Eigen::VectorXd center_v = state.v_bar - state.s_bar;  // == v - s for plain steps
  std::vector<std::string> events(n);
  auto run_local = [&](int i) {
    return local_update(i, center_v.segment(impl_->offsets[i], lens[i]),
                        &state.local_storage[i], &events[i]);
  };
  if (impl_->cfg.parallel_local && n > 1) {
    std::vector<std::future<Eigen::VectorXd>> futs;
    for (int i = 0; i < n; ++i)
      futs.push_back(std::async(std::launch::async, run_local, i));
    for (int i = 0; i < n; ++i) state.b[i] = futs[i].get();
  } else {
    for (int i = 0; i < n; ++i) state.b[i] = run_local(i);
  }
  for (const auto& e : events) {
    if (!e.empty())
      state.last_event = state.last_event.empty() ? e : state.last_event + "; " + e;
  }

  Eigen::VectorXd b_concat(impl_->total);
  for (int i = 0; i < n; ++i) b_concat.segment(impl_->offsets[i], lens[i]) = state.b[i];

  const Eigen::VectorXd v_old = state.v;
  const Eigen::VectorXd s_old = state.s;
  global_update(state, b_concat + state.s_bar);
  state.s = state.s_bar + b_concat - state.v;
  state.v_prev = v_old;
  state.s_prev = s_old;

  state.last_primal = (b_concat - state.v).norm();
  state.last_dual = state.rho * (state.v - state.v_prev).norm();
  state.k += 1;
  // keep the acceleration auxiliaries in sync for plain iterations
  state.v_bar = state.v;
  state.s_bar = state.s;
}

void AdmmSolver::step_fast_admm(ConsensusState& state) {
  // the shared update body reads (v_bar, s_bar); the extrapolation below
  // overwrites the plain-iteration sync it leaves behind
  step_admm(state);
  const double alpha = state.alpha;
  const double alpha_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * alpha * alpha));
  const double momentum = (alpha - 1.0) / alpha_next;
  state.v_bar = state.v + momentum * (state.v - state.v_prev);
  state.s_bar = state.s + momentum * (state.s - state.s_prev);
  state.alpha = alpha_next;
}

ConsensusResult AdmmSolver::run() {
  ConsensusResult res;
  ConsensusState state = make_initial_state();
  const AdmmConfig& cfg = impl_->cfg;

  bool infeasible = false;
  try {
    for (int k = 1; k <= cfg.max_iter; ++k) {
      const auto t0 = std::chrono::steady_clock::now();
      if (cfg.method == AdmmMethod::FastAdmm) {
        step_fast_admm(state);
      } else {
        step_admm(state);
      }
      if (cfg.method == AdmmMethod::FastAdmm && cfg.restart_every > 0 &&
          state.k % cfg.restart_every == 0) {
        state.alpha = 1.0;
        state.v_bar = state.v;
        state.s_bar = state.s;
        state.last_event = state.last_event.empty() ? "restart" : state.last_event + "; restart";
      }
      const double wall =
          std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
      res.trace.primal.push_back(state.last_primal);
      res.trace.dual.push_back(state.last_dual);
      res.trace.gamma.push_back(state.gamma);
      res.trace.wall_ms.push_back(wall);
      res.trace.events.push_back(state.last_event);
      if (std::max(state.last_primal, state.last_dual) <= cfg.tol) {
        res.converged = true;
        break;
      }
    }
  } catch (const LocalInfeasible& e) {
    infeasible = true;
    res.diagnostic = e.what();
  } catch (const GlobalInfeasible& e) {
    infeasible = true;
    res.diagnostic = e.what();
  }
  res.iterations = state.k;

  if (infeasible) {
    res.status = ConsensusStatus::Infeasible;
    return res;
  }

  // assemble certificates from the locally feasible iterate
  CertificateSet certs;
  certs.storage = state.local_storage;
  for (size_t i = 0; i < impl_->models.size(); ++i) {
    const int off_s = 0;
    const int len_s = svec_dim(impl_->models[i].n_w + impl_->models[i].n_y);
    const int len_r = svec_dim(2);
    Eigen::VectorXd bi = state.b[i];
    certs.S.push_back(SupplyRate{SupplyRate::Kind::Continuous,
                                 SymMatrix::from_symmetric(smat(bi.segment(off_s, len_s))),
                                 impl_->models[i].n_w});
    certs.R.push_back(SupplyRate{SupplyRate::Kind::Discrete,
                                 SymMatrix::from_symmetric(smat(bi.segment(len_s, len_r))), 1});
  }
  certs.gamma = state.gamma;

  // polish: with the locally feasible supplies fixed, re-certify the global
  // couplings exactly and recover the smallest gain they admit
  bool polished = false;
  double polish_margin = cfg.cert.epsilon;
  for (int attempt = 0; attempt < 2 && !polished; ++attempt) {
    const double margin = attempt == 0 ? cfg.cert.epsilon : 0.0;
    SdpProblem pp;
    pp.strictness_margin = margin;
    std::vector<AffineMatrix> s_exprs, r_exprs;
    for (size_t i = 0; i < impl_->models.size(); ++i) {
      s_exprs.push_back(AffineMatrix::constant(certs.S[i].matrix.mat()));
      r_exprs.push_back(AffineMatrix::constant(certs.R[i].matrix.mat()));
    }
    const int nd = impl_->ic.n_d, nz = impl_->ic.n_z;
    const int nm = impl_->ic.n_mu, nzt = impl_->ic.n_zeta;
    AffineMatrix s_expr(nd + nz, nd + nz), r_expr(nm + nzt, nm + nzt);
    std::optional<int> gvar;
    std::optional<MatrixVar> free_s, free_r;
    if (cfg.objective.target == GainObjective::Target::ContinuousL2 && nd + nz > 0) {
      Eigen::MatrixXd dblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      dblk.topLeftCorner(nd, nd).setIdentity();
      Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      zblk.bottomRightCorner(nz, nz) = -Eigen::MatrixXd::Identity(nz, nz);
      s_expr.add_constant(zblk);
      if (cfg.objective.fixed_gamma) {
        s_expr.add_constant(*cfg.objective.fixed_gamma * dblk);
      } else {
        gvar = pp.add_scalar("gamma");
        pp.add_scalar_ineq(-pp.var(*gvar), "gamma >= 0");
        pp.add_linear_cost(*gvar, 1.0);
        s_expr.add_term(*gvar, dblk);
      }
    } else if (cfg.objective.target == GainObjective::Target::Passivity && nd + nz > 0) {
      Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      s0.topRightCorner(nd, nz) = 0.5 * Eigen::MatrixXd::Identity(nd, nz);
      s0.bottomLeftCorner(nz, nd) = 0.5 * Eigen::MatrixXd::Identity(nz, nd);
      s_expr.add_constant(s0);
    } else if (nd + nz > 0) {
      free_s = pp.add_sym("S_global", nd + nz);
      s_expr = pp.var(*free_s);
      if (nz > 0) pp.add_lmi(s_expr.block(nd, nd, nz, nz), "S_global z-block <= 0");
    }
    if (cfg.objective.target == GainObjective::Target::DiscreteL2 && nm + nzt > 0) {
      Eigen::MatrixXd mblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
      mblk.topLeftCorner(nm, nm).setIdentity();
      Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
      zblk.bottomRightCorner(nzt, nzt) = -Eigen::MatrixXd::Identity(nzt, nzt);
      r_expr.add_constant(zblk);
      if (cfg.objective.fixed_gamma) {
        r_expr.add_constant(*cfg.objective.fixed_gamma * mblk);
      } else {
        gvar = pp.add_scalar("gamma");
        pp.add_scalar_ineq(-pp.var(*gvar), "gamma >= 0");
        pp.add_linear_cost(*gvar, 1.0);
        r_expr.add_term(*gvar, mblk);
      }
    } else if (nm + nzt > 0) {
      free_r = pp.add_sym("R_global", nm + nzt);
      r_expr = pp.var(*free_r);
      if (nzt > 0) pp.add_lmi(r_expr.block(nm, nm, nzt, nzt), "R_global zeta-block <= 0");
    }
    pp.add_lmi(lmi_global_continuous(impl_->ic, impl_->models, s_exprs, s_expr, margin),
               "polish continuous coupling");
    pp.add_lmi(lmi_global_discrete(impl_->ic, impl_->models, r_exprs, r_expr, margin),
               "polish discrete coupling");
    for (int k = 0; k < pp.num_unknowns(); ++k) pp.add_quadratic_cost(k, cfg.cert.var_reg);
    SdpSolution sol = solve_sdp(pp, cfg.sdp_tol);
    if (sol.status == SdpStatus::Optimal) {
      polished = true;
      polish_margin = margin;
      if (gvar) certs.gamma = sol.x(*gvar);
      if (nd + nz > 0) {
        Eigen::MatrixXd sg = s_expr.evaluate(sol.x);
        certs.S_global = SymMatrix::from_symmetric(0.5 * (sg + sg.transpose()));
      }
      if (nm + nzt > 0) {
        Eigen::MatrixXd rg = r_expr.evaluate(sol.x);
        certs.R_global = SymMatrix::from_symmetric(0.5 * (rg + rg.transpose()));
      }
    }
  }
  if (!polished) {
    // fall back to the last global iterate's supplies
    if (impl_->last_S_global.size() > 0) {
      certs.S_global = SymMatrix::from_symmetric(
          0.5 * (impl_->last_S_global + impl_->last_S_global.transpose()));
    }
    if (impl_->last_R_global.size() > 0) {
      certs.R_global = SymMatrix::from_symmetric(
          0.5 * (impl_->last_R_global + impl_->last_R_global.transpose()));
    }
    certs.gamma = impl_->last_gamma;
  }
  certs.eta = std::sqrt(std::max(certs.gamma, 0.0));

  res.certificates = std::move(certs);
  res.gamma = res.certificates.gamma;
  res.eta = res.certificates.eta;
  res.polished = polished;
  res.polish_margin = polish_margin;
  res.audit = audit_certificates(impl_->models, impl_->ic, res.certificates, cfg.cert);
  res.status = (res.converged && polished) ? ConsensusStatus::Certified : ConsensusStatus::MaxIter;
  return res;
}

}  // namespace hybridcert
