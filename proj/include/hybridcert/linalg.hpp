#ifndef HYBRIDCERT_LINALG_HPP
#define HYBRIDCERT_LINALG_HPP

#include <Eigen/Dense>

namespace hybridcert {

// Dense symmetric matrix. Construction symmetrizes by (m + m^T)/2 so that
// entries(i,j) == entries(j,i) exactly; inputs whose asymmetry exceeds the
// relative tolerance are rejected rather than silently fixed.
class SymMatrix {
 public:
  static constexpr double kAsymTol = 1e-9;

  SymMatrix() = default;
  explicit SymMatrix(const Eigen::MatrixXd& m, double asym_tol = kAsymTol);

  static SymMatrix Zero(int dim);
  static SymMatrix Identity(int dim);
  // Trusted constructor for matrices that are symmetric bit-for-bit already
  // (e.g. values produced by smat or by arithmetic on SymMatrix contents).
  static SymMatrix from_symmetric(Eigen::MatrixXd m);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Eigen::MatrixXd& mat() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Eigen::MatrixXd m_;
};

struct Eigendecomposition {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // orthonormal columns, m = V diag(values) V^T
};

// Symmetric eigendecomposition. Throws std::invalid_argument on non-finite
// input. Reconstruction error is within 1e-10 * (1 + ||m||_F).
Eigendecomposition eigendecompose(const SymMatrix& m);

// Frobenius-nearest positive semidefinite matrix: Q max(L,0) Q^T.
SymMatrix project_psd(const SymMatrix& m);

// Scaled vectorization of a symmetric matrix: upper triangle row-major with
// off-diagonals weighted by sqrt(2), so that ||svec(S)||_2 == ||S||_F and
// svec(A) . svec(B) == <A, B>.
int svec_dim(int n);
Eigen::VectorXd svec(const Eigen::MatrixXd& s);
Eigen::MatrixXd smat(const Eigen::VectorXd& v);

}  // namespace hybridcert

#endif  // HYBRIDCERT_LINALG_HPP
