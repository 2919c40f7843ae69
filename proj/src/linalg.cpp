#include "hybridcert/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hybridcert {

SymMatrix::SymMatrix(const Eigen::MatrixXd& m, double asym_tol) {
  if (m.rows() < 1 || m.rows() != m.cols()) {
    throw std::invalid_argument("SymMatrix: matrix must be square with dim >= 1");
  }
  if (!m.allFinite()) {
    throw std::invalid_argument("SymMatrix: non-finite entries");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > asym_tol * scale) {
    throw std::invalid_argument("SymMatrix: asymmetry " + std::to_string(asym) +
                                " exceeds tolerance");
  }
  m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::Zero(int dim) { return from_symmetric(Eigen::MatrixXd::Zero(dim, dim)); }

SymMatrix SymMatrix::Identity(int dim) {
  return from_symmetric(Eigen::MatrixXd::Identity(dim, dim));
}

SymMatrix SymMatrix::from_symmetric(Eigen::MatrixXd m) {
  SymMatrix s;
  s.m_ = std::move(m);
  return s;
}

Eigendecomposition eigendecompose(const SymMatrix& m) {
  if (!m.mat().allFinite()) {
    throw std::invalid_argument("eigendecompose: non-finite entries");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m.mat());
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigendecompose: eigensolver failed to converge");
  }
  return Eigendecomposition{es.eigenvalues(), es.eigenvectors()};
}

SymMatrix project_psd(const SymMatrix& m) {
  const Eigendecomposition ed = eigendecompose(m);
  const Eigen::VectorXd clipped = ed.values.cwiseMax(0.0);
  Eigen::MatrixXd r = ed.vectors * clipped.asDiagonal() * ed.vectors.transpose();
  r = 0.5 * (r + r.transpose()).eval();
  return SymMatrix::from_symmetric(std::move(r));
}

int svec_dim(int n) { return n * (n + 1) / 2; }

Eigen::VectorXd svec(const Eigen::MatrixXd& s) {
  const int n = static_cast<int>(s.rows());
  const double rt2 = std::sqrt(2.0);
  Eigen::VectorXd v(svec_dim(n));
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      v(k++) = (i == j) ? s(i, j) : rt2 * s(i, j);
    }
  }
  return v;
}

Eigen::MatrixXd smat(const Eigen::VectorXd& v) {
  // invert k = n(n+1)/2
  const int m = static_cast<int>(v.size());
  const int n = static_cast<int>(std::lround((std::sqrt(8.0 * m + 1.0) - 1.0) / 2.0));
  if (svec_dim(n) != m) {
    throw std::invalid_argument("smat: vector length is not a triangular number");
  }
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  Eigen::MatrixXd s(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      const double x = (i == j) ? v(k) : inv_rt2 * v(k);
      s(i, j) = x;
      s(j, i) = x;
      ++k;
    }
  }
  return s;
}

}  // namespace hybridcert
