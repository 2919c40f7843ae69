#include "hybridcert/sdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace hybridcert {

// ---------------------------------------------------------------- AffineScalar

AffineScalar AffineScalar::variable(int idx, double coeff) {
  AffineScalar e;
  if (coeff != 0.0) e.coeffs[idx] = coeff;
  return e;
}

AffineScalar& AffineScalar::operator+=(const AffineScalar& o) {
  constant += o.constant;
  for (const auto& [k, v] : o.coeffs) coeffs[k] += v;
  return *this;
}

AffineScalar& AffineScalar::operator-=(const AffineScalar& o) {
  constant -= o.constant;
  for (const auto& [k, v] : o.coeffs) coeffs[k] -= v;
  return *this;
}

AffineScalar& AffineScalar::operator*=(double a) {
  constant *= a;
  for (auto& [k, v] : coeffs) v *= a;
  return *this;
}

double AffineScalar::evaluate(const Eigen::VectorXd& x) const {
  double r = constant;
  for (const auto& [k, v] : coeffs) r += v * x(k);
  return r;
}

AffineScalar operator+(AffineScalar a, const AffineScalar& b) { return a += b; }
AffineScalar operator-(AffineScalar a, const AffineScalar& b) { return a -= b; }
AffineScalar operator*(double a, AffineScalar e) { return e *= a; }
AffineScalar operator-(AffineScalar e) { return e *= -1.0; }

// ---------------------------------------------------------------- AffineMatrix

AffineMatrix::AffineMatrix(int rows, int cols)
    : rows_(rows), cols_(cols), c0_(Eigen::MatrixXd::Zero(rows, cols)) {}

AffineMatrix AffineMatrix::constant(const Eigen::MatrixXd& c) {
  AffineMatrix m(static_cast<int>(c.rows()), static_cast<int>(c.cols()));
  m.c0_ = c;
  return m;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("AffineMatrix: shape mismatch");
  c0_ += o.c0_;
  for (const auto& [k, v] : o.terms_) {
    auto it = terms_.find(k);
    if (it == terms_.end())
      terms_[k] = v;
    else
      it->second += v;
  }
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("AffineMatrix: shape mismatch");
  c0_ -= o.c0_;
  for (const auto& [k, v] : o.terms_) {
    auto it = terms_.find(k);
    if (it == terms_.end())
      terms_[k] = -v;
    else
      it->second -= v;
  }
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double a) {
  c0_ *= a;
  for (auto& [k, v] : terms_) v *= a;
  return *this;
}

void AffineMatrix::add_constant(const Eigen::MatrixXd& c) { c0_ += c; }

void AffineMatrix::add_term(int var, const Eigen::MatrixXd& coeff) {
  if (coeff.rows() != rows_ || coeff.cols() != cols_) throw std::invalid_argument("AffineMatrix: coeff shape mismatch");
  auto it = terms_.find(var);
  if (it == terms_.end())
    terms_[var] = coeff;
  else
    it->second += coeff;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix r(cols_, rows_);
  r.c0_ = c0_.transpose();
  for (const auto& [k, v] : terms_) r.terms_[k] = v.transpose();
  return r;
}

AffineMatrix AffineMatrix::left_mul(const Eigen::MatrixXd& l) const {
  AffineMatrix r(static_cast<int>(l.rows()), cols_);
  r.c0_ = l * c0_;
  for (const auto& [k, v] : terms_) r.terms_[k] = l * v;
  return r;
}

AffineMatrix AffineMatrix::right_mul(const Eigen::MatrixXd& m) const {
  AffineMatrix r(rows_, static_cast<int>(m.cols()));
  r.c0_ = c0_ * m;
  for (const auto& [k, v] : terms_) r.terms_[k] = v * m;
  return r;
}

AffineMatrix AffineMatrix::block(int i0, int j0, int p, int q) const {
  AffineMatrix r(p, q);
  r.c0_ = c0_.block(i0, j0, p, q);
  for (const auto& [k, v] : terms_) {
    Eigen::MatrixXd b = v.block(i0, j0, p, q);
    if (b.cwiseAbs().maxCoeff() != 0.0) r.terms_[k] = std::move(b);
  }
  return r;
}

void AffineMatrix::place(const AffineMatrix& sub, int i0, int j0) {
  c0_.block(i0, j0, sub.rows_, sub.cols_) += sub.c0_;
  for (const auto& [k, v] : sub.terms_) {
    auto it = terms_.find(k);
    if (it == terms_.end()) it = terms_.emplace(k, Eigen::MatrixXd::Zero(rows_, cols_)).first;
    it->second.block(i0, j0, sub.rows_, sub.cols_) += v;
  }
}

Eigen::MatrixXd AffineMatrix::evaluate(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd r = c0_;
  for (const auto& [k, v] : terms_) r += x(k) * v;
  return r;
}

double AffineMatrix::symmetry_defect() const {
  if (rows_ != cols_) return std::numeric_limits<double>::infinity();
  double d = (c0_ - c0_.transpose()).cwiseAbs().maxCoeff();
  for (const auto& [k, v] : terms_) d = std::max(d, (v - v.transpose()).cwiseAbs().maxCoeff());
  return d;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator*(double a, AffineMatrix m) { return m *= a; }
AffineMatrix operator-(AffineMatrix m) { return m *= -1.0; }

// ----------------------------------------------------------------- SdpProblem

void SdpProblem::grow(int by, const std::string& name) {
  for (int i = 0; i < by; ++i) names_.push_back(name);
  num_unknowns_ += by;
}

int SdpProblem::add_scalar(const std::string& name) {
  const int idx = num_unknowns_;
  grow(1, name);
  return idx;
}

MatrixVar SdpProblem::add_sym(const std::string& name, int dim) {
  if (dim < 1) throw std::invalid_argument("add_sym: dim must be >= 1");
  MatrixVar m;
  m.id = static_cast<int>(lmis_.size() + scalar_ineqs_.size() + num_unknowns_);  // unique-ish tag
  m.dim = dim;
  m.offset = num_unknowns_;
  grow(svec_dim(dim), name);
  return m;
}

int SdpProblem::entry_index(const MatrixVar& m, int i, int j) const {
  if (i > j) std::swap(i, j);
  if (i < 0 || j >= m.dim) throw std::out_of_range("entry_index");
  // row-major upper triangle: offset of row i is i*n - i(i-1)/2
  return m.offset + i * m.dim - i * (i - 1) / 2 + (j - i);
}

AffineMatrix SdpProblem::var(const MatrixVar& m) const {
  AffineMatrix e(m.dim, m.dim);
  for (int i = 0; i < m.dim; ++i) {
    for (int j = i; j < m.dim; ++j) {
      Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(m.dim, m.dim);
      basis(i, j) = 1.0;
      basis(j, i) = 1.0;
      e.add_term(entry_index(m, i, j), basis);
    }
  }
  return e;
}

AffineScalar SdpProblem::var(int scalar_idx) const { return AffineScalar::variable(scalar_idx); }

void SdpProblem::add_lmi(const AffineMatrix& expr, const std::string& label) {
  if (expr.rows() != expr.cols()) throw std::invalid_argument("add_lmi: expression not square");
  if (expr.rows() == 0) return;
  const double defect = expr.symmetry_defect();
  if (defect > 1e-9) throw std::invalid_argument("add_lmi: expression not symmetric (" + label + ")");
  lmis_.push_back(Lmi{expr, label});
}

void SdpProblem::add_scalar_ineq(const AffineScalar& expr, const std::string& label) {
  scalar_ineqs_.push_back(ScalarIneq{expr, label});
}

const Eigen::VectorXd& SdpProblem::linear_cost() const {
  if (c_.size() != num_unknowns_) {
    Eigen::VectorXd tmp = Eigen::VectorXd::Zero(num_unknowns_);
    tmp.head(c_.size()) = c_;
    c_ = tmp;
  }
  return c_;
}

const Eigen::VectorXd& SdpProblem::quadratic_cost() const {
  if (h_.size() != num_unknowns_) {
    Eigen::VectorXd tmp = Eigen::VectorXd::Zero(num_unknowns_);
    tmp.head(h_.size()) = h_;
    h_ = tmp;
  }
  return h_;
}

void SdpProblem::add_linear_cost(int idx, double c) {
  linear_cost();
  c_(idx) += c;
}

void SdpProblem::set_linear_cost(int idx, double c) {
  linear_cost();
  c_(idx) = c;
}

void SdpProblem::add_quadratic_cost(int idx, double h) {
  quadratic_cost();
  h_(idx) += h;
}

double SdpProblem::eval_objective(const Eigen::VectorXd& x) const {
  return linear_cost().dot(x) + 0.5 * x.dot(quadratic_cost().cwiseProduct(x));
}

double SdpProblem::eval_violation(const Eigen::VectorXd& x) const {
  double worst = 0.0;
  for (const auto& l : lmis_) {
    Eigen::MatrixXd f = l.expr.evaluate(x);
    f = 0.5 * (f + f.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f, Eigen::EigenvaluesOnly);
    worst = std::max(worst, es.eigenvalues().maxCoeff());
  }
  for (const auto& s : scalar_ineqs_) worst = std::max(worst, s.expr.evaluate(x));
  return worst;
}

Eigen::MatrixXd SdpProblem::value(const MatrixVar& m, const Eigen::VectorXd& x) const {
  Eigen::MatrixXd r(m.dim, m.dim);
  for (int i = 0; i < m.dim; ++i)
    for (int j = i; j < m.dim; ++j) r(i, j) = r(j, i) = x(entry_index(m, i, j));
  return r;
}

// ---------------------------------------------------------- interior point IPM

namespace {

struct Block {
  int dim = 0;
  Eigen::MatrixXd f0;
  std::vector<std::pair<int, Eigen::MatrixXd>> terms;
  std::string label;
  double scale = 1.0;
};

// Largest a >= 0 with X + a*D PSD-feasible along the boundary, via the
// generalized eigenvalues of L^{-1} D L^{-T} where X = L L^T.
double max_step(const Eigen::LLT<Eigen::MatrixXd>& llt, const Eigen::MatrixXd& d) {
  const auto& l = llt.matrixL();
  Eigen::MatrixXd w = l.solve(d);
  w = l.solve(w.transpose()).transpose();
  w = 0.5 * (w + w.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(w, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  if (lmin >= 0.0) return std::numeric_limits<double>::infinity();
  return -1.0 / lmin;
}

struct Workspace {
  std::vector<Block> blocks;
  Eigen::VectorXd c, h;
  int m = 0;
};

Eigen::VectorXd apply_at(const Block& b, const Eigen::MatrixXd& x, int m) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  for (const auto& [idx, f] : b.terms) r(idx) += f.cwiseProduct(x).sum();
  return r;
}

Eigen::MatrixXd apply_a(const Block& b, const Eigen::VectorXd& dx) {
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(b.dim, b.dim);
  for (const auto& [idx, f] : b.terms) r += dx(idx) * f;
  return r;
}

}  // namespace

SdpSolution solve_sdp(const SdpProblem& p, double tol) {
  SdpOptions o;
  o.tol = tol;
  return solve_sdp(p, o);
}

SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts) {
  if (opts.tol <= 0.0) throw std::invalid_argument("solve_sdp: tol must be > 0");
  const int m = p.num_unknowns();

  SdpSolution sol;
  sol.x = Eigen::VectorXd::Zero(m);

  Workspace ws;
  ws.m = m;
  ws.c = p.linear_cost();
  ws.h = p.quadratic_cost();

  // Compile LMIs and scalar inequalities into scaled blocks; constant blocks
  // are checked directly and dropped.
  auto compile = [&](const Eigen::MatrixXd& f0raw,
                     const std::map<int, Eigen::MatrixXd>& terms_in,
                     const std::string& label) -> bool {
    Block b;
    b.dim = static_cast<int>(f0raw.rows());
    b.f0 = 0.5 * (f0raw + f0raw.transpose());
    double scale = b.f0.cwiseAbs().maxCoeff();
    for (const auto& [idx, f] : terms_in) {
      if (f.cwiseAbs().maxCoeff() == 0.0) continue;
      Eigen::MatrixXd fs = 0.5 * (f + f.transpose());
      scale = std::max(scale, fs.cwiseAbs().maxCoeff());
      b.terms.emplace_back(idx, std::move(fs));
    }
    b.label = label;
    if (b.terms.empty()) {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(b.f0, Eigen::EigenvaluesOnly);
      if (es.eigenvalues().maxCoeff() > opts.tol) {
        sol.status = SdpStatus::Infeasible;
        sol.message = "constant constraint violated: " + (label.empty() ? "<unnamed>" : label);
        return false;
      }
      return true;  // trivially satisfied, drop
    }
    if (scale <= 0.0) scale = 1.0;
    b.scale = scale;
    b.f0 /= scale;
    for (auto& [idx, f] : b.terms) f /= scale;
    ws.blocks.push_back(std::move(b));
    return true;
  };

  for (const auto& l : p.lmis()) {
    std::map<int, Eigen::MatrixXd> t = l.expr.terms();
    if (!compile(l.expr.constant_part(), t, l.label)) return sol;
  }
  for (const auto& s : p.scalar_ineqs()) {
    std::map<int, Eigen::MatrixXd> t;
    for (const auto& [idx, v] : s.expr.coeffs) {
      if (v != 0.0) t[idx] = Eigen::MatrixXd::Constant(1, 1, v);
    }
    Eigen::MatrixXd f0 = Eigen::MatrixXd::Constant(1, 1, s.expr.constant);
    if (!compile(f0, t, s.label)) return sol;
  }

  if (m == 0) {
    sol.status = SdpStatus::Optimal;
    sol.objective = 0.0;
    return sol;
  }

  const int nb = static_cast<int>(ws.blocks.size());
  if (nb == 0) {
    // unconstrained QP: minimize c^T x + (1/2) x^T H x
    Eigen::VectorXd hh = ws.h.array() + 1e-12;
    sol.x = -(ws.c.array() / hh.array()).matrix();
    if (!sol.x.allFinite() || sol.x.lpNorm<Eigen::Infinity>() > 1e14) {
      sol.status = SdpStatus::MaxIter;
      sol.message = "unbounded or free unconstrained direction";
      return sol;
    }
    sol.status = SdpStatus::Optimal;
    sol.objective = p.eval_objective(sol.x);
    return sol;
  }

  double total_dim = 0.0;
  for (const auto& b : ws.blocks) total_dim += b.dim;

  // infeasible start: x = 0, S and Z multiples of identity
  Eigen::VectorXd x = Eigen::VectorXd::Zero(m);
  std::vector<Eigen::MatrixXd> s(nb), z(nb);
  for (int b = 0; b < nb; ++b) {
    const int n = ws.blocks[b].dim;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ws.blocks[b].f0, Eigen::EigenvaluesOnly);
    const double beta = std::max(1.0, 1.5 * es.eigenvalues().maxCoeff() + 0.5);
    s[b] = beta * Eigen::MatrixXd::Identity(n, n);
    z[b] = Eigen::MatrixXd::Identity(n, n);
  }

  double best_score = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_x = x;
  double best_pinf = 0, best_dinf = 0, best_gap = 0;
  int stall_count = 0;
  double mu_prev = std::numeric_limits<double>::infinity();
  std::string stall_msg = "iteration limit";

  const int max_iter = opts.max_iter;
  int it = 0;
  for (; it < max_iter; ++it) {
    // residuals
    Eigen::VectorXd grad = ws.c + ws.h.cwiseProduct(x);
    Eigen::VectorXd atz = Eigen::VectorXd::Zero(m);
    std::vector<Eigen::MatrixXd> rp(nb);
    double mu_total = 0.0;
    double pinf = 0.0;
    for (int b = 0; b < nb; ++b) {
      const Block& blk = ws.blocks[b];
      atz += apply_at(blk, z[b], m);
      rp[b] = s[b] + blk.f0 + apply_a(blk, x);
      mu_total += s[b].cwiseProduct(z[b]).sum();
      pinf = std::max(pinf, rp[b].cwiseAbs().maxCoeff() / (1.0 + blk.f0.cwiseAbs().maxCoeff()));
    }
    Eigen::VectorXd rd = grad + atz;
    const double mu = mu_total / total_dim;
    const double obj = p.eval_objective(x);
    const double dinf =
        rd.lpNorm<Eigen::Infinity>() /
        (1.0 + grad.lpNorm<Eigen::Infinity>() + atz.lpNorm<Eigen::Infinity>());
    const double gap = mu_total / (1.0 + std::abs(obj));

    if (opts.verbose) {
      std::printf("ipm %3d  mu %9.2e  pinf %9.2e  dinf %9.2e  gap %9.2e  obj % .8e stall %d\n",
                  it, mu, pinf, dinf, gap, obj, stall_count);
    }

    const double score = std::max({pinf, dinf, gap});
    if (score < 0.9 * best_score || mu < 0.95 * mu_prev) {
      stall_count = 0;
    } else if (++stall_count > 12) {
      stall_msg = "progress stalled";
      break;  // no measurable progress, stop burning iterations
    }
    mu_prev = mu;
    if (score < best_score) {
      best_score = score;
      best_x = x;
      best_pinf = pinf;
      best_dinf = dinf;
      best_gap = gap;
    }

    if (pinf <= opts.tol && dinf <= opts.tol && gap <= opts.tol) {
      sol.status = SdpStatus::Optimal;
      sol.x = x;
      sol.objective = obj;
      sol.primal_infeas = pinf;
      sol.dual_infeas = dinf;
      sol.gap = gap;
      sol.iterations = it;
      return sol;
    }

    // primal infeasibility certificate: Z >= 0 with sum_b A_b^T Z_b = 0 and
    // sum_b <F0_b, Z_b> > 0
    {
      double znorm = 0.0, theta = 0.0;
      Eigen::VectorXd ray = Eigen::VectorXd::Zero(m);
      for (int b = 0; b < nb; ++b) {
        const Block& blk = ws.blocks[b];
        znorm += z[b].norm();
        theta += blk.f0.cwiseProduct(z[b]).sum();
        ray += apply_at(blk, z[b], m);
      }
      if (znorm > 0.0) {
        theta /= znorm;
        const double rayres = ray.norm() / znorm;
        if (opts.verbose) std::printf("      farkas theta %9.2e rayres %9.2e\n", theta, rayres);
        if (theta > 1e-9 && rayres <= 1e-6 * theta) {
          sol.status = SdpStatus::Infeasible;
          sol.x = x;
          sol.iterations = it;
          sol.message = "primal infeasibility certificate found";
          return sol;
        }
      }
    }

    // Nesterov-Todd scaling point per block: W Z W = S, computed through
    // W = S^{1/2} (S^{1/2} Z S^{1/2})^{-1/2} S^{1/2}.
    std::vector<Eigen::LLT<Eigen::MatrixXd>> slt(nb), zlt(nb);
    std::vector<Eigen::MatrixXd> winv(nb), whalf(nb), wihalf(nb), zinv(nb);
    bool fail = false;
    for (int b = 0; b < nb; ++b) {
      const int n = ws.blocks[b].dim;
      slt[b].compute(s[b]);
      zlt[b].compute(z[b]);
      if (slt[b].info() != Eigen::Success || zlt[b].info() != Eigen::Success) {
        fail = true;
        break;
      }
      zinv[b] = zlt[b].solve(Eigen::MatrixXd::Identity(n, n));
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s[b]);
      const double floor_s = 1e-14 * std::max(1.0, es.eigenvalues().maxCoeff());
      Eigen::VectorXd sqs = es.eigenvalues().cwiseMax(floor_s).cwiseSqrt();
      Eigen::MatrixXd shalf = es.eigenvectors() * sqs.asDiagonal() * es.eigenvectors().transpose();
      Eigen::MatrixXd shalf_inv =
          es.eigenvectors() * sqs.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
      Eigen::MatrixXd t = shalf * z[b] * shalf;
      t = 0.5 * (t + t.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> et(t);
      const double floor_t = 1e-14 * std::max(1.0, et.eigenvalues().maxCoeff());
      Eigen::VectorXd tq = et.eigenvalues().cwiseMax(floor_t).cwiseSqrt().cwiseSqrt();
      Eigen::MatrixXd tquart = et.eigenvectors() * tq.asDiagonal() * et.eigenvectors().transpose();
      // W^{-1} = S^{-1/2} T^{1/2} S^{-1/2}
      Eigen::MatrixXd wi = shalf_inv * tquart * tquart * shalf_inv;
      winv[b] = 0.5 * (wi + wi.transpose()).eval();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ew(winv[b]);
      const double floor_w = 1e-14 * std::max(1.0, ew.eigenvalues().maxCoeff());
      Eigen::VectorXd wq = ew.eigenvalues().cwiseMax(floor_w).cwiseSqrt();
      wihalf[b] = ew.eigenvectors() * wq.asDiagonal() * ew.eigenvectors().transpose();
      whalf[b] = ew.eigenvectors() * wq.cwiseInverse().asDiagonal() * ew.eigenvectors().transpose();
    }
    if (fail) { stall_msg = "slack factorization failed"; break; }

    // Schur complement K = H + M, (M_b)_ij = tr(F_i W^{-1} F_j W^{-1});
    // Gram structure makes K symmetric positive definite.
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m, m);
    for (int b = 0; b < nb; ++b) {
      const Block& blk = ws.blocks[b];
      const int nt = static_cast<int>(blk.terms.size());
      std::vector<Eigen::MatrixXd> g(nt);
      for (int j = 0; j < nt; ++j) g[j] = winv[b] * blk.terms[j].second * winv[b];
      for (int j = 0; j < nt; ++j) {
        const int jj = blk.terms[j].first;
        for (int i = 0; i <= j; ++i) {
          const int ii = blk.terms[i].first;
          const double v = blk.terms[i].second.cwiseProduct(g[j]).sum();
          k(ii, jj) += v;
          if (ii != jj) k(jj, ii) += v;
        }
      }
    }
    k.diagonal() += ws.h;
    Eigen::LDLT<Eigen::MatrixXd> kf(k);
    if (kf.info() != Eigen::Success || !kf.isPositive()) {
      k.diagonal().array() += 1e-12 * (1.0 + k.diagonal().cwiseAbs().maxCoeff());
      kf.compute(k);
      if (kf.info() != Eigen::Success) { stall_msg = "schur factorization failed"; break; }
    }

    // NT complementarity linearization: dS + W dZ W = T_b, with target
    // T_b = sigma*mu*Z^{-1} - S (- second order correction).
    auto solve_direction = [&](const std::vector<Eigen::MatrixXd>& target, Eigen::VectorXd& dx,
                               std::vector<Eigen::MatrixXd>& ds, std::vector<Eigen::MatrixXd>& dz) {
      Eigen::VectorXd rhs = -rd;
      for (int b = 0; b < nb; ++b) {
        const Block& blk = ws.blocks[b];
        rhs -= apply_at(blk, winv[b] * (target[b] + rp[b]) * winv[b], m);
      }
      dx = kf.solve(rhs);
      ds.resize(nb);
      dz.resize(nb);
      for (int b = 0; b < nb; ++b) {
        const Block& blk = ws.blocks[b];
        ds[b] = -rp[b] - apply_a(blk, dx);
        Eigen::MatrixXd t = winv[b] * (target[b] - ds[b]) * winv[b];
        dz[b] = 0.5 * (t + t.transpose());
      }
    };

    auto step_lengths = [&](const std::vector<Eigen::MatrixXd>& ds,
                            const std::vector<Eigen::MatrixXd>& dz, double frac, double& ap,
                            double& ad) {
      ap = 1.0;
      ad = 1.0;
      for (int b = 0; b < nb; ++b) {
        ap = std::min(ap, frac * max_step(slt[b], ds[b]));
        ad = std::min(ad, frac * max_step(zlt[b], dz[b]));
      }
    };

    // predictor (affine, sigma = 0)
    std::vector<Eigen::MatrixXd> target(nb);
    for (int b = 0; b < nb; ++b) target[b] = -s[b];
    Eigen::VectorXd dx;
    std::vector<Eigen::MatrixXd> ds, dz;
    solve_direction(target, dx, ds, dz);
    double ap = 1.0, ad = 1.0;
    step_lengths(ds, dz, 0.99, ap, ad);

    double mu_aff = 0.0;
    for (int b = 0; b < nb; ++b)
      mu_aff += (s[b] + ap * ds[b]).cwiseProduct(z[b] + ad * dz[b]).sum();
    mu_aff = std::max(mu_aff / total_dim, 0.0);
    double sigma = std::pow(mu_aff / std::max(mu, 1e-300), 3.0);
    sigma = std::clamp(sigma, 1e-8, 1.0);
    // while feasibility lags complementarity, favor centering so the Newton
    // steps can clean the residuals at near-unit step lengths
    if (std::max(pinf, dinf) > gap) sigma = std::max(sigma, 0.9);

    // Mehrotra corrector in the scaled space: target adds
    // -W^{1/2} sym(V^{-1} sym(dS~ dZ~)) W^{1/2} with V = W^{1/2} Z W^{1/2}.
    for (int b = 0; b < nb; ++b) {
      const int n = ws.blocks[b].dim;
      Eigen::MatrixXd dst = wihalf[b] * ds[b] * wihalf[b];
      Eigen::MatrixXd dzt = whalf[b] * dz[b] * whalf[b];
      Eigen::MatrixXd e = dst * dzt;
      e = 0.5 * (e + e.transpose()).eval();
      Eigen::MatrixXd v = whalf[b] * z[b] * whalf[b];
      v = 0.5 * (v + v.transpose()).eval();
      Eigen::LLT<Eigen::MatrixXd> vlt(v);
      Eigen::MatrixXd corr = Eigen::MatrixXd::Zero(n, n);
      if (vlt.info() == Eigen::Success) {
        Eigen::MatrixXd vinv_e = vlt.solve(e);
        vinv_e = 0.5 * (vinv_e + vinv_e.transpose()).eval();
        corr = whalf[b] * vinv_e * whalf[b];
      }
      target[b] = sigma * mu * zinv[b] - s[b] - corr;
    }
    solve_direction(target, dx, ds, dz);
    step_lengths(ds, dz, 0.98, ap, ad);
    if (!dx.allFinite() || ap <= 0.0 || ad <= 0.0) {
      // corrector overshoot: retry with plain centering direction
      for (int b = 0; b < nb; ++b) target[b] = sigma * mu * zinv[b] - s[b];
      solve_direction(target, dx, ds, dz);
      step_lengths(ds, dz, 0.98, ap, ad);
      if (!dx.allFinite() || ap <= 0.0 || ad <= 0.0) { stall_msg = "no usable direction"; break; }
    }
    // keep primal and dual progress coupled while feasibility lags the gap;
    // uncoupled steps let mu outrun the residuals and stall the tail
    if (std::max(pinf, dinf) > gap) {
      ap = ad = std::min(ap, ad);
    }

    if (opts.verbose) {
      std::printf("      ap %9.2e ad %9.2e sigma %9.2e |dx| %9.2e\n", ap, ad, sigma,
                  dx.norm());
    }

    x += ap * dx;
    for (int b = 0; b < nb; ++b) {
      s[b] += ap * ds[b];
      z[b] += ad * dz[b];
    }
    if (!x.allFinite() || x.lpNorm<Eigen::Infinity>() > 1e13) { stall_msg = "iterate diverged"; break; }
    if (mu < 1e-30) { stall_msg = "mu underflow"; break; }
  }

  sol.status = SdpStatus::MaxIter;
  sol.x = best_x;
  sol.objective = p.eval_objective(best_x);
  sol.primal_infeas = best_pinf;
  sol.dual_infeas = best_dinf;
  sol.gap = best_gap;
  sol.iterations = it;
  sol.message = stall_msg;
  return sol;
}

}  // namespace hybridcert
