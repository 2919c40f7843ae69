#ifndef HYBRIDCERT_CONSENSUS_HPP
#define HYBRIDCERT_CONSENSUS_HPP

#include <memory>
#include <string>
#include <vector>

#include "hybridcert/certificates.hpp"
#include "hybridcert/model.hpp"

namespace hybridcert {

enum class AdmmMethod { Admm, FastAdmm };

struct AdmmConfig {
  AdmmMethod method = AdmmMethod::Admm;
  double rho = 1.0;
  double smoothing = 1.0;  // strong-convexity perturbation weight
  int restart_every = 0;   // 0 = no restarts
  int max_iter = 200;
  double tol = 1e-4;       // on max(primal, dual) residual norm
  double sdp_tol = 1e-6;
  bool paper_literal_init = false;   // scaled duals also start at identity
  bool storage_in_consensus = false; // carry storage copies in b/v/s
  bool unsquared_smoothing = false;  // plain Frobenius norms via epigraphs
  bool parallel_local = true;
  GainObjective objective;
  CertOptions cert;
};

struct ResidualTrace {
  std::vector<double> primal, dual, gamma, wall_ms;
  std::vector<std::string> events;  // one (possibly empty) note per iteration
  void write_csv(const std::string& path) const;
};

// Scaled consensus iterate. b holds the per-subsystem local copies, v the
// global copy in the same concatenated layout, s the scaled duals. The
// acceleration auxiliaries v_bar/s_bar coincide with v/s for plain iterations.
struct ConsensusState {
  int k = 0;
  std::vector<Eigen::VectorXd> b;
  Eigen::VectorXd v, s;
  Eigen::VectorXd v_prev, s_prev;
  Eigen::VectorXd v_bar, s_bar;
  double alpha = 1.0;
  double gamma = 0.0;
  double rho = 1.0, ell = 1.0;
  double last_primal = 0.0, last_dual = 0.0;
  std::string last_event;
  std::vector<StorageCertificate> local_storage;
};

enum class ConsensusStatus { Certified, Infeasible, MaxIter };

struct ConsensusResult {
  ConsensusStatus status = ConsensusStatus::MaxIter;
  CertificateSet certificates;
  ResidualTrace trace;
  std::vector<LmiResidual> audit;
  double gamma = 0.0, eta = 0.0;
  bool converged = false;
  bool polished = false;
  double polish_margin = 0.0;
  std::string diagnostic;
  int iterations = 0;
};

class LocalInfeasible : public std::runtime_error {
 public:
  LocalInfeasible(int subsystem, const std::string& what)
      : std::runtime_error(what), subsystem(subsystem) {}
  int subsystem;
};
class GlobalInfeasible : public std::runtime_error {
 public:
  explicit GlobalInfeasible(const std::string& what) : std::runtime_error(what) {}
};

// Consensus splitting of the interconnected certification problem: each
// subsystem owns its storage unknowns and a local copy of (S_i, R_i); the
// global step enforces both coupling LMIs and carries the gain objective.
class AdmmSolver {
 public:
  AdmmSolver(std::vector<SubsystemModel> models, Interconnection ic, AdmmConfig cfg);
  ~AdmmSolver();

  ConsensusState make_initial_state() const;

  // b_i^{+} = argmin over subsystem i's unknowns of
  //   ell*D_i + (rho/2)||b_i - center||^2 s.t. the local certificate family.
  Eigen::VectorXd local_update(int i, const Eigen::VectorXd& center,
                               StorageCertificate* storage_out = nullptr,
                               std::string* event = nullptr);

  // v^{+} = argmin gamma + (rho/2)||b + dual - v||^2 s.t. both global LMIs.
  void global_update(ConsensusState& state, const Eigen::VectorXd& prox_center);

  void step_admm(ConsensusState& state);
  void step_fast_admm(ConsensusState& state);

  ConsensusResult run();

  int block_len(int i) const;
  int block_offset(int i) const;
  int total_len() const;
  const AdmmConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace hybridcert

#endif  // HYBRIDCERT_CONSENSUS_HPP
