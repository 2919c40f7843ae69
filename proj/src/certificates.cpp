#include "hybridcert/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "hybridcert/model_io.hpp"

namespace hybridcert {

double StorageCertificate::evaluate(const Eigen::VectorXd& x, int q) const {
  const auto pit = P.find(q);
  const auto lit = lambda.find(q);
  if (pit == P.end() || lit == lambda.end()) {
    throw std::invalid_argument("StorageCertificate: unknown state " + std::to_string(q));
  }
  return x.dot(pit->second.mat() * x) + lit->second;
}

namespace {

// v^T M v for an affine symmetric matrix expression and a constant vector.
AffineScalar quad_form(const AffineMatrix& m, const Eigen::VectorXd& v) {
  AffineScalar r(v.dot(m.constant_part() * v));
  for (const auto& [k, coeff] : m.terms()) {
    const double c = v.dot(coeff * v);
    if (c != 0.0) r += AffineScalar::variable(k, c);
  }
  return r;
}

std::string itos(int v) { return std::to_string(v); }

}  // namespace

StorageVars add_storage_vars(SdpProblem& prob, const SubsystemModel& model,
                             const CertOptions& opts, const std::string& prefix) {
  StorageVars vars;
  const int q0 = model.dfsm.initial_state;
  if (opts.storage_form == StorageForm::ModeIndexed) {
    for (int q : model.dfsm.states) {
      MatrixVar pq = prob.add_sym(prefix + ".P" + itos(q), model.n);
      vars.matrix_vars.push_back(pq);
      vars.P.emplace(q, prob.var(pq));
      if (opts.zero_initial_offset && q == q0) {
        vars.lambda.emplace(q, AffineScalar(0.0));
      } else {
        const int lq = prob.add_scalar(prefix + ".lambda" + itos(q));
        vars.scalar_vars.push_back(lq);
        vars.lambda.emplace(q, prob.var(lq));
      }
    }
  } else {
    // shared quadratic with offsets lambda * q^2; the state cross-term is
    // pinned to zero (a q-changing transition would otherwise make the jump
    // inequality unbounded in x)
    MatrixVar p = prob.add_sym(prefix + ".P", model.n);
    vars.matrix_vars.push_back(p);
    AffineMatrix pexpr = prob.var(p);
    const bool pin_all = opts.zero_initial_offset && q0 != 0;
    std::optional<int> shared;
    if (!pin_all) {
      shared = prob.add_scalar(prefix + ".lambda");
      vars.scalar_vars.push_back(*shared);
    }
    for (int q : model.dfsm.states) {
      vars.P.emplace(q, pexpr);
      if (!shared) {
        vars.lambda.emplace(q, AffineScalar(0.0));
      } else {
        vars.lambda.emplace(q, AffineScalar::variable(*shared, static_cast<double>(q) * q));
      }
    }
  }
  return vars;
}

std::vector<std::pair<int, int>> feasible_mode_pairs(const SubsystemModel& model,
                                                     ModeEnumeration enumeration) {
  std::vector<std::pair<int, int>> pairs;
  if (enumeration == ModeEnumeration::FullProduct) {
    for (int q : model.dfsm.states)
      for (int p : model.dfsm.outputs) pairs.emplace_back(q, p);
    return pairs;
  }
  for (size_t i = 0; i < model.dfsm.states.size(); ++i) {
    std::set<int> seen;
    for (size_t j = 0; j < model.dfsm.inputs.size(); ++j) seen.insert(model.dfsm.output[i][j]);
    for (int p : seen) pairs.emplace_back(model.dfsm.states[i], p);
  }
  return pairs;
}

std::vector<LabeledLmi> lmi_local_continuous(const SubsystemModel& model,
                                             const std::map<int, AffineMatrix>& P,
                                             const AffineMatrix& S,
                                             ModeEnumeration enumeration) {
  const int nw = model.n_w, ny = model.n_y, n = model.n;
  if (S.rows() != nw + ny) throw std::invalid_argument("lmi_local_continuous: supply dim mismatch");
  const AffineMatrix s11 = S.block(0, 0, nw, nw);
  const AffineMatrix s12 = S.block(0, nw, nw, ny);
  const AffineMatrix s22 = S.block(nw, nw, ny, ny);

  std::vector<LabeledLmi> out;
  for (const auto& [q, p] : feasible_mode_pairs(model, enumeration)) {
    const ModeDynamics& md = model.mode(p);
    const AffineMatrix& pq = P.at(q);
    AffineMatrix lmi(n + nw, n + nw);
    AffineMatrix tl = pq.left_mul(md.A.transpose()) + pq.right_mul(md.A) -
                      s22.left_mul(md.C.transpose()).right_mul(md.C);
    lmi.place(tl, 0, 0);
    if (nw > 0) {
      AffineMatrix tr =
          pq.right_mul(md.B) - s12.transpose().left_mul(md.C.transpose());
      lmi.place(tr, 0, n);
      lmi.place(tr.transpose(), n, 0);
      lmi.place(-s11, n, n);
    }
    out.push_back({std::move(lmi),
                   "s" + itos(model.id) + " flow q=" + itos(q) + " p=" + itos(p)});
  }
  return out;
}

DiscreteLocalLmis lmi_local_discrete(const SubsystemModel& model,
                                     const std::map<int, AffineMatrix>& P,
                                     const std::map<int, AffineScalar>& lambda,
                                     const AffineMatrix& R) {
  if (R.rows() != 2) throw std::invalid_argument("lmi_local_discrete: R must be 2x2");
  DiscreteLocalLmis out;
  for (size_t i = 0; i < model.dfsm.states.size(); ++i) {
    const int q = model.dfsm.states[i];
    for (size_t j = 0; j < model.dfsm.inputs.size(); ++j) {
      const int u = model.dfsm.inputs[j];
      const int qn = model.dfsm.next_state[i][j];
      const int p = model.dfsm.output[i][j];
      const std::string tag =
          "s" + itos(model.id) + " jump q=" + itos(q) + " u=" + itos(u);
      out.matrix_constraints.push_back({P.at(qn) - P.at(q), tag + " P"});
      Eigen::Vector2d up(static_cast<double>(u), static_cast<double>(p));
      AffineScalar sc = lambda.at(qn) - lambda.at(q) - quad_form(R, up);
      out.scalar_constraints.push_back({std::move(sc), tag + " lambda"});
    }
  }
  return out;
}

namespace {

AffineMatrix global_coupling(const Eigen::MatrixXd& m, const Eigen::MatrixXd& pc,
                             const std::vector<int>& block_dims,
                             const std::vector<const AffineMatrix*>& locals,
                             const AffineMatrix& global_supply, double margin,
                             const char* what) {
  const int t = static_cast<int>(pc.rows());
  const int cols = static_cast<int>(m.cols());
  if (m.rows() + cols != t) throw std::invalid_argument(std::string(what) + ": dim mismatch");
  Eigen::MatrixXd stacked(t, cols);
  stacked.topRows(m.rows()) = m;
  stacked.bottomRows(cols) = Eigen::MatrixXd::Identity(cols, cols);
  const Eigen::MatrixXd w = pc * stacked;

  AffineMatrix q(t, t);
  int off = 0;
  for (size_t i = 0; i < locals.size(); ++i) {
    if (locals[i]->rows() != block_dims[i]) {
      throw std::invalid_argument(std::string(what) + ": local supply dim mismatch");
    }
    q.place(*locals[i], off, off);
    off += block_dims[i];
  }
  const int gdim = global_supply.rows();
  if (off + gdim != t) throw std::invalid_argument(std::string(what) + ": stacking mismatch");
  if (gdim > 0) q.place(-global_supply, off, off);

  AffineMatrix expr = q.left_mul(w.transpose()).right_mul(w);
  expr.add_constant(margin * Eigen::MatrixXd::Identity(cols, cols));
  return expr;
}

}  // namespace

AffineMatrix lmi_global_continuous(const Interconnection& ic,
                                   const std::vector<SubsystemModel>& models,
                                   const std::vector<AffineMatrix>& S_exprs,
                                   const AffineMatrix& S_global, double margin) {
  std::vector<int> dims;
  std::vector<const AffineMatrix*> locals;
  for (size_t i = 0; i < models.size(); ++i) {
    dims.push_back(models[i].n_w + models[i].n_y);
    locals.push_back(&S_exprs[i]);
  }
  return global_coupling(ic.Mc, ic.Pc_dense(), dims, locals, S_global, margin,
                         "lmi_global_continuous");
}

AffineMatrix lmi_global_discrete(const Interconnection& ic,
                                 const std::vector<SubsystemModel>& models,
                                 const std::vector<AffineMatrix>& R_exprs,
                                 const AffineMatrix& R_global, double margin) {
  std::vector<int> dims(models.size(), 2);
  std::vector<const AffineMatrix*> locals;
  for (size_t i = 0; i < models.size(); ++i) locals.push_back(&R_exprs[i]);
  return global_coupling(ic.Md.cast<double>(), ic.Pd_dense(), dims, locals, R_global, margin,
                         "lmi_global_discrete");
}

StabilityLmis lmi_stability(const SubsystemModel& model, const std::map<int, AffineMatrix>& P,
                            const std::map<int, AffineScalar>& lambda, const CertOptions& opts) {
  StabilityLmis out;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(model.n, model.n);
  for (int q : model.dfsm.states) {
    out.matrix_constraints.push_back(
        {AffineMatrix::constant(opts.epsilon * eye) - P.at(q), "s" + itos(model.id) + " P" + itos(q) + " pd"});
  }
  for (const auto& [q, p] : feasible_mode_pairs(model, opts.enumeration)) {
    const ModeDynamics& md = model.mode(p);
    AffineMatrix decay =
        P.at(q).left_mul(md.A.transpose()) + P.at(q).right_mul(md.A);
    decay.add_constant(opts.epsilon * eye);
    out.matrix_constraints.push_back(
        {std::move(decay), "s" + itos(model.id) + " decay q=" + itos(q) + " p=" + itos(p)});
  }
  for (size_t i = 0; i < model.dfsm.states.size(); ++i) {
    const int q = model.dfsm.states[i];
    for (size_t j = 0; j < model.dfsm.inputs.size(); ++j) {
      const int u = model.dfsm.inputs[j];
      const int qn = model.dfsm.next_state[i][j];
      const std::string tag = "s" + itos(model.id) + " jump q=" + itos(q) + " u=" + itos(u);
      out.matrix_constraints.push_back({P.at(qn) - P.at(q), tag + " P"});
      out.scalar_constraints.push_back({lambda.at(qn) - lambda.at(q), tag + " lambda"});
    }
  }
  return out;
}

StabilityResult solve_stability(const SubsystemModel& model, const CertOptions& opts,
                                double tol) {
  model.validate();
  SdpProblem prob;
  // the stability family is homogeneous in P, so the margin value is
  // immaterial for feasibility; 1.0 keeps the iterates well scaled
  CertOptions local = opts;
  local.epsilon = 1.0;

  std::map<int, AffineMatrix> P;
  std::map<int, AffineScalar> lambda;
  std::vector<MatrixVar> pvars;
  if (opts.storage_form == StorageForm::ModeIndexed) {
    for (int q : model.dfsm.states) {
      MatrixVar pq = prob.add_sym("P" + itos(q), model.n);
      pvars.push_back(pq);
      P.emplace(q, prob.var(pq));
      lambda.emplace(q, AffineScalar(0.0));  // V(0,q) = 0
    }
  } else {
    MatrixVar pv = prob.add_sym("P", model.n);
    pvars.push_back(pv);
    for (int q : model.dfsm.states) {
      P.emplace(q, prob.var(pv));
      lambda.emplace(q, AffineScalar(0.0));
    }
  }
  StabilityLmis fam = lmi_stability(model, P, lambda, local);
  for (auto& c : fam.matrix_constraints) prob.add_lmi(c.expr, c.label);
  for (auto& c : fam.scalar_constraints) prob.add_scalar_ineq(c.expr, c.label);
  for (int k = 0; k < prob.num_unknowns(); ++k) prob.add_quadratic_cost(k, 1e-8);

  SdpSolution sol = solve_sdp(prob, tol);
  StabilityResult r;
  r.status = sol.status;
  if (sol.status == SdpStatus::Optimal) {
    r.certificate.subsystem = model.id;
    for (int q : model.dfsm.states) {
      Eigen::MatrixXd pq = P.at(q).evaluate(sol.x);
      r.certificate.P.emplace(q, SymMatrix::from_symmetric(0.5 * (pq + pq.transpose())));
      r.certificate.lambda.emplace(q, 0.0);
    }
  }
  return r;
}

namespace {

AffineMatrix build_global_supply_cont(SdpProblem& prob, const Interconnection& ic,
                                      const GainObjective& objective, CentralizedProblem& cp) {
  const int nd = ic.n_d, nz = ic.n_z;
  AffineMatrix s(nd + nz, nd + nz);
  if (nd + nz == 0) return s;
  switch (objective.target) {
    case GainObjective::Target::ContinuousL2: {
      Eigen::MatrixXd dblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      dblk.topLeftCorner(nd, nd).setIdentity();
      Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      zblk.bottomRightCorner(nz, nz) = -Eigen::MatrixXd::Identity(nz, nz);
      s.add_constant(zblk);
      if (objective.fixed_gamma) {
        s.add_constant(*objective.fixed_gamma * dblk);
      } else {
        const int g = prob.add_scalar("gamma");
        cp.gamma_var = g;
        prob.add_scalar_ineq(-prob.var(g), "gamma >= 0");
        prob.add_linear_cost(g, 1.0);
        s.add_term(g, dblk);
      }
      return s;
    }
    case GainObjective::Target::DiscreteL2: {
      // continuous global supply free, exogenous-output block nonpositive
      MatrixVar sv = prob.add_sym("S_global", nd + nz);
      cp.S_global_var = sv;
      AffineMatrix sexpr = prob.var(sv);
      if (nz > 0) {
        prob.add_lmi(sexpr.block(nd, nd, nz, nz), "S_global z-block <= 0");
      }
      return sexpr;
    }
    case GainObjective::Target::Passivity: {
      if (nd != nz) throw std::invalid_argument("passivity objective requires n_d == n_z");
      Eigen::MatrixXd s0 = Eigen::MatrixXd::Zero(nd + nz, nd + nz);
      s0.topRightCorner(nd, nz) = 0.5 * Eigen::MatrixXd::Identity(nd, nz);
      s0.bottomLeftCorner(nz, nd) = 0.5 * Eigen::MatrixXd::Identity(nz, nd);
      s.add_constant(s0);
      return s;
    }
  }
  return s;
}

AffineMatrix build_global_supply_disc(SdpProblem& prob, const Interconnection& ic,
                                      const GainObjective& objective, CentralizedProblem& cp) {
  const int nm = ic.n_mu, nzt = ic.n_zeta;
  AffineMatrix r(nm + nzt, nm + nzt);
  if (nm + nzt == 0) return r;
  if (objective.target == GainObjective::Target::DiscreteL2) {
    Eigen::MatrixXd mblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
    mblk.topLeftCorner(nm, nm).setIdentity();
    Eigen::MatrixXd zblk = Eigen::MatrixXd::Zero(nm + nzt, nm + nzt);
    zblk.bottomRightCorner(nzt, nzt) = -Eigen::MatrixXd::Identity(nzt, nzt);
    r.add_constant(zblk);
    if (objective.fixed_gamma) {
      r.add_constant(*objective.fixed_gamma * mblk);
    } else {
      const int g = prob.add_scalar("gamma");
      cp.gamma_var = g;
      prob.add_scalar_ineq(-prob.var(g), "gamma >= 0");
      prob.add_linear_cost(g, 1.0);
      r.add_term(g, mblk);
    }
    return r;
  }
  // free discrete global supply; exogenous-output block nonpositive so the
  // certified continuous gain also bounds zero-exogenous-input executions
  MatrixVar rv = prob.add_sym("R_global", nm + nzt);
  cp.R_global_var = rv;
  AffineMatrix rexpr = prob.var(rv);
  if (nzt > 0) {
    prob.add_lmi(rexpr.block(nm, nm, nzt, nzt), "R_global zeta-block <= 0");
  }
  return rexpr;
}

}  // namespace

CentralizedProblem assemble_centralized(const std::vector<SubsystemModel>& models,
                                        const Interconnection& ic, const GainObjective& objective,
                                        const CertOptions& opts) {
  {
    auto diag = validate_interconnection(ic, models);
    if (!diag.empty()) {
      throw std::invalid_argument("assemble_centralized: invalid interconnection: " +
                                  diag.front().where + ": " + diag.front().message);
    }
  }
  CentralizedProblem cp;
  SdpProblem& prob = cp.problem;
  prob.strictness_margin = opts.epsilon;

  std::vector<AffineMatrix> s_exprs, r_exprs;
  for (const auto& model : models) {
    const std::string prefix = "s" + itos(model.id);
    StorageVars sv = add_storage_vars(prob, model, opts, prefix);
    MatrixVar s_i = prob.add_sym(prefix + ".S", model.n_w + model.n_y);
    MatrixVar r_i = prob.add_sym(prefix + ".R", 2);
    cp.S_vars.push_back(s_i);
    cp.R_vars.push_back(r_i);
    AffineMatrix s_expr = prob.var(s_i);
    AffineMatrix r_expr = prob.var(r_i);

    // storage nonnegativity: P_q >= eps I, lambda_q >= 0
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(model.n, model.n);
    for (const MatrixVar& pv : sv.matrix_vars) {
      prob.add_lmi(AffineMatrix::constant(opts.epsilon * eye) - prob.var(pv),
                   prefix + " storage pd");
    }
    for (int lv : sv.scalar_vars) {
      prob.add_scalar_ineq(-prob.var(lv), prefix + " lambda >= 0");
    }
    for (auto& c : lmi_local_continuous(model, sv.P, s_expr, opts.enumeration)) {
      prob.add_lmi(c.expr, c.label);
    }
    DiscreteLocalLmis d = lmi_local_discrete(model, sv.P, sv.lambda, r_expr);
    for (auto& c : d.matrix_constraints) prob.add_lmi(c.expr, c.label);
    for (auto& c : d.scalar_constraints) prob.add_scalar_ineq(c.expr, c.label);

    cp.storage.push_back(std::move(sv));
    s_exprs.push_back(std::move(s_expr));
    r_exprs.push_back(std::move(r_expr));
  }

  cp.global_S_expr = build_global_supply_cont(prob, ic, objective, cp);
  cp.global_R_expr = build_global_supply_disc(prob, ic, objective, cp);

  prob.add_lmi(lmi_global_continuous(ic, models, s_exprs, cp.global_S_expr, opts.epsilon),
               "global continuous coupling");
  prob.add_lmi(lmi_global_discrete(ic, models, r_exprs, cp.global_R_expr, opts.epsilon),
               "global discrete coupling");

  // bound objective-flat rays (free global supplies, storage scaling)
  if (opts.var_reg > 0.0) {
    for (int k = 0; k < prob.num_unknowns(); ++k) prob.add_quadratic_cost(k, opts.var_reg);
  }
  return cp;
}

CertificateSet extract_certificates(const CentralizedProblem& cp, const Eigen::VectorXd& x,
                                    const std::vector<SubsystemModel>& models,
                                    const Interconnection& ic) {
  CertificateSet cs;
  for (size_t i = 0; i < models.size(); ++i) {
    StorageCertificate sc;
    sc.subsystem = models[i].id;
    for (int q : models[i].dfsm.states) {
      Eigen::MatrixXd pq = cp.storage[i].P.at(q).evaluate(x);
      sc.P.emplace(q, SymMatrix::from_symmetric(0.5 * (pq + pq.transpose())));
      sc.lambda.emplace(q, cp.storage[i].lambda.at(q).evaluate(x));
    }
    cs.storage.push_back(std::move(sc));
    Eigen::MatrixXd s_i = cp.problem.value(cp.S_vars[i], x);
    cs.S.push_back(SupplyRate{SupplyRate::Kind::Continuous, SymMatrix::from_symmetric(s_i),
                              models[i].n_w});
    Eigen::MatrixXd r_i = cp.problem.value(cp.R_vars[i], x);
    cs.R.push_back(SupplyRate{SupplyRate::Kind::Discrete, SymMatrix::from_symmetric(r_i), 1});
  }
  if (ic.n_d + ic.n_z > 0) {
    Eigen::MatrixXd sg = cp.global_S_expr.evaluate(x);
    cs.S_global = SymMatrix::from_symmetric(0.5 * (sg + sg.transpose()));
  }
  if (ic.n_mu + ic.n_zeta > 0) {
    Eigen::MatrixXd rg = cp.global_R_expr.evaluate(x);
    cs.R_global = SymMatrix::from_symmetric(0.5 * (rg + rg.transpose()));
  }
  cs.gamma = cp.gamma_var ? x(*cp.gamma_var) : 0.0;
  cs.eta = std::sqrt(std::max(cs.gamma, 0.0));
  return cs;
}

std::vector<LmiResidual> audit_certificates(const std::vector<SubsystemModel>& models,
                                            const Interconnection& ic, const CertificateSet& certs,
                                            const CertOptions& opts) {
  std::vector<LmiResidual> out;
  const Eigen::VectorXd empty(0);
  auto push_lmi = [&](const AffineMatrix& expr, const std::string& label) {
    if (expr.rows() == 0) return;
    Eigen::MatrixXd f = expr.evaluate(empty);
    auto ed = eigendecompose(SymMatrix(0.5 * (f + f.transpose()), 1e-6));
    out.push_back({label, ed.values.maxCoeff()});
  };
  auto push_scalar = [&](const AffineScalar& expr, const std::string& label) {
    out.push_back({label, expr.evaluate(empty)});
  };

  std::vector<AffineMatrix> s_exprs, r_exprs;
  for (size_t i = 0; i < models.size(); ++i) {
    const auto& model = models[i];
    std::map<int, AffineMatrix> P;
    std::map<int, AffineScalar> lambda;
    for (int q : model.dfsm.states) {
      P.emplace(q, AffineMatrix::constant(certs.storage[i].P.at(q).mat()));
      lambda.emplace(q, AffineScalar(certs.storage[i].lambda.at(q)));
      push_lmi(AffineMatrix::constant(opts.epsilon * Eigen::MatrixXd::Identity(model.n, model.n) -
                                      certs.storage[i].P.at(q).mat()),
               "s" + itos(model.id) + " P" + itos(q) + " pd");
      push_scalar(AffineScalar(-certs.storage[i].lambda.at(q)),
                  "s" + itos(model.id) + " lambda" + itos(q) + " >= 0");
    }
    AffineMatrix s_expr = AffineMatrix::constant(certs.S[i].matrix.mat());
    AffineMatrix r_expr = AffineMatrix::constant(certs.R[i].matrix.mat());
    for (auto& c : lmi_local_continuous(model, P, s_expr, opts.enumeration)) {
      push_lmi(c.expr, c.label);
    }
    DiscreteLocalLmis d = lmi_local_discrete(model, P, lambda, r_expr);
    for (auto& c : d.matrix_constraints) push_lmi(c.expr, c.label);
    for (auto& c : d.scalar_constraints) push_scalar(c.expr, c.label);
    s_exprs.push_back(std::move(s_expr));
    r_exprs.push_back(std::move(r_expr));
  }
  AffineMatrix sg = ic.n_d + ic.n_z > 0 ? AffineMatrix::constant(certs.S_global.mat())
                                        : AffineMatrix(0, 0);
  AffineMatrix rg = ic.n_mu + ic.n_zeta > 0 ? AffineMatrix::constant(certs.R_global.mat())
                                            : AffineMatrix(0, 0);
  push_lmi(lmi_global_continuous(ic, models, s_exprs, sg, opts.epsilon),
           "global continuous coupling");
  push_lmi(lmi_global_discrete(ic, models, r_exprs, rg, opts.epsilon),
           "global discrete coupling");
  return out;
}

// ------------------------------------------------------------------- file io

namespace {
void write_sym(std::ostream& os, const char* tag, const SymMatrix& m) {
  os << tag << " " << m.dim() << "\n";
  for (int i = 0; i < m.dim(); ++i) {
    for (int j = 0; j < m.dim(); ++j) os << (j ? " " : "") << format_double(m(i, j));
    os << "\n";
  }
}

Eigen::MatrixXd read_dense(std::istream& is, int dim) {
  Eigen::MatrixXd m(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) {
      if (!(is >> m(i, j))) throw std::runtime_error("certificate file: truncated matrix");
    }
  return m;
}
}  // namespace

void save_certificates(const std::string& path, const CertificateSet& certs,
                       const std::vector<LmiResidual>& residuals) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os << "hybridcert-certificates 1\n";
  os << "gamma " << format_double(certs.gamma) << "\n";
  os << "eta " << format_double(certs.eta) << "\n";
  os << "subsystems " << certs.storage.size() << "\n";
  for (size_t i = 0; i < certs.storage.size(); ++i) {
    const auto& sc = certs.storage[i];
    os << "subsystem " << sc.subsystem << "\n";
    os << "storage " << sc.P.size() << "\n";
    for (const auto& [q, pm] : sc.P) {
      os << "q " << q << " lambda " << format_double(sc.lambda.at(q)) << "\n";
      write_sym(os, "P", pm);
    }
    write_sym(os, "S", certs.S[i].matrix);
    write_sym(os, "R", certs.R[i].matrix);
  }
  write_sym(os, "S_global", certs.S_global);
  write_sym(os, "R_global", certs.R_global);
  os << "residuals " << residuals.size() << "\n";
  for (const auto& r : residuals) {
    os << format_double(r.max_eig) << " | " << r.label << "\n";
  }
  os << "end\n";
}

CertificateSet load_certificates(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string word;
  auto expect = [&](const char* w) {
    if (!(is >> word) || word != w)
      throw std::runtime_error(std::string("certificate file: expected ") + w);
  };
  expect("hybridcert-certificates");
  int version;
  is >> version;
  CertificateSet cs;
  expect("gamma");
  is >> cs.gamma;
  expect("eta");
  is >> cs.eta;
  expect("subsystems");
  size_t count;
  is >> count;
  for (size_t i = 0; i < count; ++i) {
    expect("subsystem");
    StorageCertificate sc;
    is >> sc.subsystem;
    expect("storage");
    size_t nq;
    is >> nq;
    for (size_t k = 0; k < nq; ++k) {
      expect("q");
      int q;
      is >> q;
      expect("lambda");
      double lam;
      is >> lam;
      expect("P");
      int dim;
      is >> dim;
      sc.P.emplace(q, SymMatrix(read_dense(is, dim), 1e-6));
      sc.lambda.emplace(q, lam);
    }
    expect("S");
    int sdim;
    is >> sdim;
    Eigen::MatrixXd s = read_dense(is, sdim);
    expect("R");
    int rdim;
    is >> rdim;
    Eigen::MatrixXd r = read_dense(is, rdim);
    cs.S.push_back(SupplyRate{SupplyRate::Kind::Continuous, SymMatrix(s, 1e-6), 0});
    cs.R.push_back(SupplyRate{SupplyRate::Kind::Discrete, SymMatrix(r, 1e-6), 1});
    cs.storage.push_back(std::move(sc));
  }
  expect("S_global");
  int sgdim;
  is >> sgdim;
  if (sgdim > 0) cs.S_global = SymMatrix(read_dense(is, sgdim), 1e-6);
  expect("R_global");
  int rgdim;
  is >> rgdim;
  if (rgdim > 0) cs.R_global = SymMatrix(read_dense(is, rgdim), 1e-6);
  return cs;
}

}  // namespace hybridcert
