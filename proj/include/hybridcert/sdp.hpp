#ifndef HYBRIDCERT_SDP_HPP
#define HYBRIDCERT_SDP_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcert/linalg.hpp"

namespace hybridcert {

// Affine scalar expression c0 + sum_k coeff_k * x_k over problem unknowns.
struct AffineScalar {
  double constant = 0.0;
  std::map<int, double> coeffs;

  AffineScalar() = default;
  explicit AffineScalar(double c) : constant(c) {}
  static AffineScalar variable(int idx, double coeff = 1.0);

  AffineScalar& operator+=(const AffineScalar& o);
  AffineScalar& operator-=(const AffineScalar& o);
  AffineScalar& operator*=(double a);
  double evaluate(const Eigen::VectorXd& x) const;
};

AffineScalar operator+(AffineScalar a, const AffineScalar& b);
AffineScalar operator-(AffineScalar a, const AffineScalar& b);
AffineScalar operator*(double a, AffineScalar e);
AffineScalar operator-(AffineScalar e);

// Affine matrix expression C0 + sum_k x_k * Ck. Coefficients are dense; all
// problem matrices here are small.
class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols);
  static AffineMatrix constant(const Eigen::MatrixXd& c);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  const Eigen::MatrixXd& constant_part() const { return c0_; }
  const std::map<int, Eigen::MatrixXd>& terms() const { return terms_; }

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
  AffineMatrix& operator*=(double a);
  void add_constant(const Eigen::MatrixXd& c);
  void add_term(int var, const Eigen::MatrixXd& coeff);

  AffineMatrix transpose() const;
  AffineMatrix left_mul(const Eigen::MatrixXd& l) const;   // L * X
  AffineMatrix right_mul(const Eigen::MatrixXd& r) const;  // X * R
  AffineMatrix block(int i0, int j0, int p, int q) const;
  // Accumulate `sub` into the block of `this` with upper-left corner (i0,j0).
  void place(const AffineMatrix& sub, int i0, int j0);

  Eigen::MatrixXd evaluate(const Eigen::VectorXd& x) const;
  // max |X - X^T| entry over constant and coefficients (symmetry check)
  double symmetry_defect() const;

 private:
  int rows_ = 0, cols_ = 0;
  Eigen::MatrixXd c0_;
  std::map<int, Eigen::MatrixXd> terms_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator*(double a, AffineMatrix m);
AffineMatrix operator-(AffineMatrix m);

// Handle for a symmetric matrix unknown: n(n+1)/2 scalar unknowns (upper
// triangle, row-major) starting at `offset`.
struct MatrixVar {
  int id = -1;
  int dim = 0;
  int offset = 0;
};

enum class SdpStatus { Optimal, Infeasible, MaxIter };

struct SdpSolution {
  SdpStatus status = SdpStatus::MaxIter;
  Eigen::VectorXd x;
  double objective = 0.0;
  double primal_infeas = 0.0;  // worst LMI / scalar constraint violation
  double dual_infeas = 0.0;    // stationarity residual (inf norm)
  double gap = 0.0;            // relative complementarity gap
  int iterations = 0;
  std::string message;
};

// Container for a small dense SDP:
//   minimize    c^T x + (1/2) x^T diag(h) x
//   subject to  F_b(x) = F0_b + sum_k x_k Fk_b  <= 0   (PSD order), b = 1..B
//               a_j^T x + b_j <= 0
// Strict "< 0" paper inequalities are encoded by the builders as <= -eps*I
// with eps = strictness_margin. The quadratic term is an extension used for
// proximal/regularization objectives; it is zero by default.
class SdpProblem {
 public:
  int add_scalar(const std::string& name);
  MatrixVar add_sym(const std::string& name, int dim);
  int num_unknowns() const { return num_unknowns_; }

  // Scalar unknown index of entry (i,j) of a matrix unknown (i<=j or j<i).
  int entry_index(const MatrixVar& m, int i, int j) const;

  // Affine expression views of unknowns.
  AffineMatrix var(const MatrixVar& m) const;
  AffineScalar var(int scalar_idx) const;

  void add_lmi(const AffineMatrix& expr, const std::string& label = "");
  void add_scalar_ineq(const AffineScalar& expr, const std::string& label = "");

  void add_linear_cost(int idx, double c);
  void set_linear_cost(int idx, double c);
  void add_quadratic_cost(int idx, double h);  // adds (h/2) x_idx^2

  double strictness_margin = 1e-6;

  // introspection
  struct Lmi {
    AffineMatrix expr;
    std::string label;
  };
  struct ScalarIneq {
    AffineScalar expr;
    std::string label;
  };
  const std::vector<Lmi>& lmis() const { return lmis_; }
  const std::vector<ScalarIneq>& scalar_ineqs() const { return scalar_ineqs_; }
  const Eigen::VectorXd& linear_cost() const;
  const Eigen::VectorXd& quadratic_cost() const;
  const std::string& name_of(int idx) const { return names_[idx]; }

  double eval_objective(const Eigen::VectorXd& x) const;
  // Worst constraint violation at x (max LMI eigenvalue / scalar excess, clipped at 0).
  double eval_violation(const Eigen::VectorXd& x) const;

  Eigen::MatrixXd value(const MatrixVar& m, const Eigen::VectorXd& x) const;

 private:
  void grow(int by, const std::string& name);

  int num_unknowns_ = 0;
  std::vector<std::string> names_;
  std::vector<Lmi> lmis_;
  std::vector<ScalarIneq> scalar_ineqs_;
  mutable Eigen::VectorXd c_, h_;  // resized lazily to num_unknowns_
};

struct SdpOptions {
  double tol = 1e-6;
  int max_iter = 200;
  bool verbose = false;
};

SdpSolution solve_sdp(const SdpProblem& p, double tol);
SdpSolution solve_sdp(const SdpProblem& p, const SdpOptions& opts = SdpOptions{});

}  // namespace hybridcert

#endif  // HYBRIDCERT_SDP_HPP
