#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hybridcert/linalg.hpp"
#include "hybridcert/sdp.hpp"

using namespace hybridcert;

namespace {

Eigen::MatrixXd random_symmetric(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(rng);
  return 0.5 * (a + a.transpose()).eval();
}

// Independent PSD projection oracle: separate eigendecomposition + clip,
// written against Eigen directly rather than through project_psd.
Eigen::MatrixXd clip_oracle(const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
  Eigen::VectorXd lam = es.eigenvalues();
  for (int i = 0; i < lam.size(); ++i) lam(i) = std::max(lam(i), 0.0);
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Closed-form max eigenvalue of a symmetric 2x2 matrix.
double maxeig2(double a, double b, double c) {
  const double tr = a + c;
  const double det = a * c - b * b;
  return 0.5 * (tr + std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
}

// Hand-calculable bisection oracle for: minimize g s.t. [-2g, 1; 1, -g] <= 0.
double bisection_gamma_oracle() {
  double lo = 0.0, hi = 10.0;
  auto feasible = [](double g) { return maxeig2(-2.0 * g, 1.0, -g) <= 0.0; };
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (feasible(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

}  // namespace

TEST_CASE("SymMatrix construction enforces exact symmetry") {
  Eigen::MatrixXd a(2, 2);
  a << 1.0, 2.0 + 5e-10, 2.0, 3.0;
  SymMatrix s(a);
  CHECK(s(0, 1) == s(1, 0));

  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.5, 3.0;  // asymmetry way beyond 1e-9 relative
  CHECK_THROWS_AS(SymMatrix{bad}, std::invalid_argument);

  Eigen::MatrixXd nan(2, 2);
  nan << 1.0, 0.0, 0.0, std::nan("");
  CHECK_THROWS_AS(SymMatrix{nan}, std::invalid_argument);
}

TEST_CASE("eigendecompose: diagonal and identity inputs") {
  Eigen::MatrixXd d = Eigen::Vector2d(3.0, 1.0).asDiagonal();
  auto ed = eigendecompose(SymMatrix(d));
  CHECK(ed.values(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(ed.values(1) == doctest::Approx(3.0).epsilon(1e-14));
  // eigenvectors form a permutation of the identity up to sign
  for (int j = 0; j < 2; ++j) {
    Eigen::VectorXd col = ed.vectors.col(j).cwiseAbs();
    CHECK(col.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(col.minCoeff() == doctest::Approx(0.0).epsilon(1e-12));
  }

  auto edi = eigendecompose(SymMatrix::Identity(4));
  for (int i = 0; i < 4; ++i) CHECK(edi.values(i) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("eigendecompose: reconstruction and orthonormality on random input") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::MatrixXd a = random_symmetric(8, rng);
    SymMatrix s(a);
    auto ed = eigendecompose(s);
    const double recon =
        (ed.vectors * ed.values.asDiagonal() * ed.vectors.transpose() - s.mat()).norm();
    CHECK(recon <= 1e-10 * (1.0 + s.mat().norm()));
    const double ortho =
        (ed.vectors.transpose() * ed.vectors - Eigen::MatrixXd::Identity(8, 8)).norm();
    CHECK(ortho <= 1e-10);
    for (int i = 1; i < ed.values.size(); ++i) CHECK(ed.values(i - 1) <= ed.values(i));
  }
}

TEST_CASE("project_psd: diagonal clipping and PSD fixed point") {
  Eigen::MatrixXd d = Eigen::Vector2d(2.0, -1.0).asDiagonal();
  auto r = project_psd(SymMatrix(d));
  CHECK(r(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(r(1, 1) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(std::abs(r(0, 1)) <= 1e-14);

  std::mt19937_64 rng(11);
  Eigen::MatrixXd g = random_symmetric(5, rng);
  Eigen::MatrixXd psd = g * g.transpose();
  auto fixed = project_psd(SymMatrix(psd));
  CHECK((fixed.mat() - psd).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + psd.norm()));
}

TEST_CASE("project_psd matches the independent clip oracle on random matrices") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd a = random_symmetric(6, rng);
    auto mine = project_psd(SymMatrix(a));
    Eigen::MatrixXd oracle = clip_oracle(a);
    CHECK((mine.mat() - oracle).cwiseAbs().maxCoeff() <= 1e-10);
  }
}

TEST_CASE("project_psd is idempotent") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd a = random_symmetric(7, rng);
    auto once = project_psd(SymMatrix(a));
    auto twice = project_psd(once);
    CHECK((once.mat() - twice.mat()).cwiseAbs().maxCoeff() <= 1e-12 * (1.0 + once.mat().norm()));
  }
}

TEST_CASE("project_psd is the Frobenius-nearest PSD point against random PSD samples") {
  std::mt19937_64 rng(41);
  Eigen::MatrixXd a = random_symmetric(5, rng);
  auto proj = project_psd(SymMatrix(a));
  const double dproj = (a - proj.mat()).norm();
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    Eigen::MatrixXd gm(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) gm(i, j) = g(rng);
    Eigen::MatrixXd x = gm.transpose() * gm;
    CHECK(dproj <= (a - x).norm() + 1e-12);
  }
}

TEST_CASE("svec/smat round-trip and norm preservation") {
  std::mt19937_64 rng(53);
  Eigen::MatrixXd a = random_symmetric(6, rng);
  Eigen::VectorXd v = svec(a);
  CHECK(v.norm() == doctest::Approx(a.norm()).epsilon(1e-13));
  Eigen::MatrixXd back = smat(v);
  CHECK((back - a).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("solve_sdp: minimize gamma on a 2x2 LMI matches the bisection oracle") {
  SdpProblem p;
  const int g = p.add_scalar("gamma");
  AffineMatrix lmi(2, 2);
  Eigen::MatrixXd c0(2, 2), cg(2, 2);
  c0 << 0, 1, 1, 0;
  cg << -2, 0, 0, -1;
  lmi.add_constant(c0);
  lmi.add_term(g, cg);
  p.add_lmi(lmi, "bisection-example");
  p.add_linear_cost(g, 1.0);

  auto sol = solve_sdp(p, 1e-7);
  REQUIRE(sol.status == SdpStatus::Optimal);
  const double oracle = bisection_gamma_oracle();
  CHECK(oracle == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-9));
  CHECK(sol.x(g) == doctest::Approx(oracle).epsilon(1e-6));
}

TEST_CASE("solve_sdp: Lyapunov feasibility for A = -I") {
  SdpProblem p;
  MatrixVar pm = p.add_sym("P", 2);
  AffineMatrix pv = p.var(pm);
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);

  // P >= I  <=>  I - P <= 0
  AffineMatrix c1 = AffineMatrix::constant(eye) - pv;
  p.add_lmi(c1, "P>=I");
  // A^T P + P A <= -I with A = -I  <=>  -2P + I <= 0
  AffineMatrix c2 = AffineMatrix::constant(eye) - 2.0 * pv;
  p.add_lmi(c2, "lyap");

  auto sol = solve_sdp(p, 1e-7);
  REQUIRE(sol.status == SdpStatus::Optimal);
  Eigen::MatrixXd pval = p.value(pm, sol.x);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(pval - eye, Eigen::EigenvaluesOnly);
  CHECK(es.eigenvalues().minCoeff() >= -1e-6);
}

TEST_CASE("solve_sdp: I <= 0 is infeasible") {
  SdpProblem p;
  (void)p.add_scalar("unused");
  p.add_lmi(AffineMatrix::constant(Eigen::MatrixXd::Identity(3, 3)), "I<=0");
  auto sol = solve_sdp(p, 1e-7);
  CHECK(sol.status == SdpStatus::Infeasible);
}

TEST_CASE("solve_sdp: infeasibility with variables present is certified") {
  // P >= I and 2P <= -I cannot both hold (scalar unstable Lyapunov shape).
  SdpProblem p;
  MatrixVar pm = p.add_sym("P", 1);
  AffineMatrix pv = p.var(pm);
  Eigen::MatrixXd one = Eigen::MatrixXd::Identity(1, 1);
  p.add_lmi(AffineMatrix::constant(one) - pv, "P>=1");
  p.add_lmi(2.0 * pv + AffineMatrix::constant(one), "2P<=-1");
  auto sol = solve_sdp(p, 1e-7);
  CHECK(sol.status == SdpStatus::Infeasible);
}

TEST_CASE("solve_sdp: quadratic objective extension (proximal form)") {
  // minimize (1/2)(x - 3)^2 s.t. x <= 1  ->  x = 1
  SdpProblem p;
  const int xi = p.add_scalar("x");
  p.add_quadratic_cost(xi, 1.0);
  p.add_linear_cost(xi, -3.0);
  AffineScalar con = AffineScalar::variable(xi) - AffineScalar(1.0);
  p.add_scalar_ineq(con, "x<=1");
  auto sol = solve_sdp(p, 1e-7);
  REQUIRE(sol.status == SdpStatus::Optimal);
  CHECK(sol.x(xi) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("solve_sdp: objective is monotone under strictness relaxation") {
  // minimize gamma s.t. [-2P+1, P; P, -gamma] <= -eps*I, P = 1 fixed via
  // bounds; enlarging eps cannot decrease the optimum, and the drift stays
  // below tolerance for eps in [0, 1e-5].
  auto solve_with_margin = [](double eps) {
    SdpProblem p;
    const int g = p.add_scalar("gamma");
    const int pv = p.add_scalar("P");
    AffineMatrix lmi(2, 2);
    Eigen::MatrixXd c0 = Eigen::MatrixXd::Zero(2, 2);
    c0(0, 0) = 1.0;
    lmi.add_constant(c0 + eps * Eigen::MatrixXd::Identity(2, 2));
    Eigen::MatrixXd cp(2, 2), cg(2, 2);
    cp << -2, 1, 1, 0;
    cg << 0, 0, 0, -1;
    lmi.add_term(pv, cp);
    lmi.add_term(g, cg);
    p.add_lmi(lmi, "gain");
    // 0.5 <= P <= 2 keeps the instance bounded
    p.add_scalar_ineq(AffineScalar(0.5) - AffineScalar::variable(pv), "P lower");
    p.add_scalar_ineq(AffineScalar::variable(pv) - AffineScalar(2.0), "P upper");
    p.add_linear_cost(g, 1.0);
    auto sol = solve_sdp(p, 1e-7);
    REQUIRE(sol.status == SdpStatus::Optimal);
    return sol.x(g);
  };

  const double g0 = solve_with_margin(0.0);
  const double g1 = solve_with_margin(1e-6);
  const double g2 = solve_with_margin(1e-5);
  CHECK(g0 == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(g1 >= g0 - 1e-6);
  CHECK(g2 >= g1 - 1e-6);
  CHECK(g2 - g0 <= 1e-3);
}
