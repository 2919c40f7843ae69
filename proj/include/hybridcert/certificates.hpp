#ifndef HYBRIDCERT_CERTIFICATES_HPP
#define HYBRIDCERT_CERTIFICATES_HPP

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridcert/model.hpp"
#include "hybridcert/sdp.hpp"

namespace hybridcert {

// Quadratic supply rate over a stacked (input, output) signal; the partition
// index equals the input block dimension.
struct SupplyRate {
  enum class Kind { Continuous, Discrete };
  Kind kind = Kind::Continuous;
  SymMatrix matrix;
  int input_dim = 0;
};

// Mode-indexed quadratic storage for one subsystem: V(x,q) = x^T P_q x + l_q.
struct StorageCertificate {
  int subsystem = 0;
  std::map<int, SymMatrix> P;
  std::map<int, double> lambda;

  double evaluate(const Eigen::VectorXd& x, int q) const;
};

struct GainObjective {
  enum class Target { ContinuousL2, DiscreteL2, Passivity };
  Target target = Target::ContinuousL2;
  std::optional<double> fixed_gamma;  // feasibility at a fixed gain when set
};

enum class ModeEnumeration { FeasibleOnly, FullProduct };

// ModeIndexed: one P_q and offset per discrete state (default).
// SharedCrossTerm: single shared P with offsets lambda * q^2, the literal
// single-matrix storage with the state cross-term pinned to zero (required
// whenever some transition changes q).
enum class StorageForm { ModeIndexed, SharedCrossTerm };

struct CertOptions {
  ModeEnumeration enumeration = ModeEnumeration::FeasibleOnly;
  StorageForm storage_form = StorageForm::ModeIndexed;
  // Pin the storage offset at the initial discrete state to zero, so the
  // certified gain bounds trajectories from zero initial conditions.
  bool zero_initial_offset = true;
  double epsilon = 1e-6;  // strict inequalities realized as <= -epsilon*I
  double var_reg = 1e-9;  // tiny quadratic cost bounding objective-flat rays
};

// Unknowns of one subsystem's storage function inside an SdpProblem.
struct StorageVars {
  std::map<int, AffineMatrix> P;        // per state value
  std::map<int, AffineScalar> lambda;   // per state value
  std::vector<MatrixVar> matrix_vars;   // distinct matrix unknowns
  std::vector<int> scalar_vars;         // distinct scalar unknowns
};

StorageVars add_storage_vars(SdpProblem& prob, const SubsystemModel& model,
                             const CertOptions& opts, const std::string& prefix);

// (q, p) pairs the continuous dissipation inequality must cover.
std::vector<std::pair<int, int>> feasible_mode_pairs(const SubsystemModel& model,
                                                     ModeEnumeration enumeration);

// Per feasible (q,p): the block LMI
//   [ A_p^T P_q + P_q A_p - C_p^T S22 C_p,  P_q B_p - C_p^T S12^T ;
//     B_p^T P_q - S12 C_p,                 -S11                   ] <= 0
// with S partitioned input-block first.
struct LabeledLmi {
  AffineMatrix expr;
  std::string label;
};
std::vector<LabeledLmi> lmi_local_continuous(
    const SubsystemModel& model, const std::map<int, AffineMatrix>& P, const AffineMatrix& S,
    ModeEnumeration enumeration = ModeEnumeration::FeasibleOnly);

// Per (q,u) with q+ = g(q,u), p = l(q,u):
//   P_{q+} - P_q <= 0   and   l_{q+} - l_q <= [u;p]^T R [u;p].
struct LabeledScalarIneq {
  AffineScalar expr;
  std::string label;
};
struct DiscreteLocalLmis {
  std::vector<LabeledLmi> matrix_constraints;
  std::vector<LabeledScalarIneq> scalar_constraints;
};
DiscreteLocalLmis lmi_local_discrete(const SubsystemModel& model,
                                     const std::map<int, AffineMatrix>& P,
                                     const std::map<int, AffineScalar>& lambda,
                                     const AffineMatrix& R);

// [Mc; I]^T Pc^T diag(S_1..S_N, -S) Pc [Mc; I] + eps*I <= 0 and the discrete
// mirror with Md, Pd, diag(R_1..R_N, -R).
AffineMatrix lmi_global_continuous(const Interconnection& ic,
                                   const std::vector<SubsystemModel>& models,
                                   const std::vector<AffineMatrix>& S_exprs,
                                   const AffineMatrix& S_global, double margin);
AffineMatrix lmi_global_discrete(const Interconnection& ic,
                                 const std::vector<SubsystemModel>& models,
                                 const std::vector<AffineMatrix>& R_exprs,
                                 const AffineMatrix& R_global, double margin);

// Stability family: P_q >= eps*I, A_p^T P_q + P_q A_p <= -eps*I on feasible
// pairs, and nonincreasing storage across every transition.
struct StabilityLmis {
  std::vector<LabeledLmi> matrix_constraints;
  std::vector<LabeledScalarIneq> scalar_constraints;
};
StabilityLmis lmi_stability(const SubsystemModel& model, const std::map<int, AffineMatrix>& P,
                            const std::map<int, AffineScalar>& lambda, const CertOptions& opts);

struct StabilityResult {
  SdpStatus status = SdpStatus::MaxIter;
  StorageCertificate certificate;
};
StabilityResult solve_stability(const SubsystemModel& model, const CertOptions& opts = {},
                                double tol = 1e-6);

// Full certificate bundle for an interconnected system.
struct CertificateSet {
  std::vector<StorageCertificate> storage;
  std::vector<SupplyRate> S;  // per subsystem, over (w_i, y_i)
  std::vector<SupplyRate> R;  // per subsystem, over (u_i, p_i)
  SymMatrix S_global;         // over (d, z); empty when n_d + n_z == 0
  SymMatrix R_global;         // over (mu, zeta); empty when n_mu + n_zeta == 0
  double gamma = 0.0;
  double eta = 0.0;
};

// Monolithic problem: all local families, both global couplings, objective
// minimize gamma with S = [gamma*I, 0; 0, -I] (continuous L2 target;
// discrete and passivity targets analogous).
struct CentralizedProblem {
  SdpProblem problem;
  std::vector<StorageVars> storage;
  std::vector<MatrixVar> S_vars;
  std::vector<MatrixVar> R_vars;
  std::optional<int> gamma_var;
  std::optional<MatrixVar> S_global_var;  // free when the objective is discrete
  std::optional<MatrixVar> R_global_var;  // free when the objective is continuous

  AffineMatrix global_S_expr;  // over (d,z), affine in gamma when minimized
  AffineMatrix global_R_expr;  // over (mu,zeta)
};

CentralizedProblem assemble_centralized(const std::vector<SubsystemModel>& models,
                                        const Interconnection& ic, const GainObjective& objective,
                                        const CertOptions& opts = {});

CertificateSet extract_certificates(const CentralizedProblem& cp, const Eigen::VectorXd& x,
                                    const std::vector<SubsystemModel>& models,
                                    const Interconnection& ic);

// Residual of every certificate LMI (most positive eigenvalue; scalar
// constraints report their excess) evaluated at a fixed certificate.
struct LmiResidual {
  std::string label;
  double max_eig = 0.0;
};
std::vector<LmiResidual> audit_certificates(const std::vector<SubsystemModel>& models,
                                            const Interconnection& ic, const CertificateSet& certs,
                                            const CertOptions& opts = {});

// Text export/import: all matrices at 17 significant digits plus the
// residual list for independent audit.
void save_certificates(const std::string& path, const CertificateSet& certs,
                       const std::vector<LmiResidual>& residuals);
CertificateSet load_certificates(const std::string& path);

}  // namespace hybridcert

#endif  // HYBRIDCERT_CERTIFICATES_HPP
