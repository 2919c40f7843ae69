#ifndef HYBRIDCERT_SIMULATE_HPP
#define HYBRIDCERT_SIMULATE_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hybridcert/certificates.hpp"
#include "hybridcert/model.hpp"

namespace hybridcert {

struct SimInputs {
  std::function<Eigen::VectorXd(double)> d;   // size n_d
  std::function<Eigen::VectorXi(double)> mu;  // size n_mu
  static SimInputs zero(const Interconnection& ic);
};

struct JumpRecord {
  double t = 0.0;
  int grid_index = 0;
  std::vector<int> q_before, q_after, u, p_mealy;
  // exogenous discrete signals consistent with (u, p_mealy): the values held
  // on the interval arriving at this jump
  Eigen::VectorXi mu_held, zeta_held;
};

// Sampled execution of the interconnected hybrid system. Continuous signal
// rows are right-continuous at jump instants; the audit recomputes arrival
// values per segment from the stored states and mode history.
struct HybridTrajectory {
  double dt = 0.0, tau = 0.0;
  int jump_stride = 1;  // tau / dt
  SignalDims dims;
  int n_d = 0, n_z = 0, n_mu = 0, n_zeta = 0;
  std::vector<double> t;
  Eigen::MatrixXd x;         // samples x n_total
  Eigen::MatrixXd d, w, y, z;
  Eigen::MatrixXi q, p, u;   // samples x N
  Eigen::MatrixXi mu, zeta;  // samples x n_mu / n_zeta
  std::vector<JumpRecord> jumps;
  bool diverged = false;
  double diverged_at = 0.0;
  bool consistent_init = true;  // discrete init resolve reached a fixed point

  int samples() const { return static_cast<int>(t.size()); }
};

// Fixed-step RK4 between jumps; all DFSMs step synchronously at t = k*tau
// (k >= 1), then outputs update on the new states and the interconnection
// resolves (w,z,u,zeta). Divergence is reported in the trajectory, not thrown.
HybridTrajectory simulate(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                          const SimInputs& inputs, const Eigen::VectorXd& x0,
                          const std::vector<int>& q0, double dt, double horizon, double tau);

// Default step size 1e-3 / (fastest mode eigenvalue magnitude).
double default_timestep(const std::vector<SubsystemModel>& models);
// Slowest decay rate: min over modes of |max Re eig(A_p)|.
double slowest_decay(const std::vector<SubsystemModel>& models);

struct AuditCheck {
  std::string name;
  double slack = 0.0;     // positive = violation
  double tol = 0.0;
  bool pass = true;
};

struct AuditReport {
  std::vector<AuditCheck> checks;
  double max_storage_increase = 0.0;  // over consecutive samples, total storage
  double dissipation_slack = 0.0;     // global, normalized
  double empirical_gain = 0.0;        // ||z||_L2 / ||d||_L2 over the horizon
  bool pass = true;
  std::string to_text() const;
};

// Trajectory audit of the dissipation inequalities: per subsystem with local
// supplies and globally with the summed storage against the global supplies.
// Quadratures are segment-wise trapezoid rules on the sample grid.
AuditReport audit_dissipation(const HybridTrajectory& traj,
                              const std::vector<SubsystemModel>& models,
                              const Interconnection& ic, const CertificateSet& certs,
                              double tol_rel = 1e-3);

struct GainReport {
  double eta = 0.0;
  double max_ratio = 0.0;
  std::vector<double> ratios;
  int diverged = 0;
  bool pass = true;
};

struct GainTrialConfig {
  int trials = 100;
  std::uint64_t seed = 1;
  double dt = 0.0;       // 0 = derive from models
  double horizon = 0.0;  // 0 = derive from models
  double tau = 0.0;      // 0 = dt
  double omega_max = 0.0;
};

// Zero-state trials with random band-limited d (and the exogenous discrete
// input held at its smallest alphabet value); asserts max ratio <= eta*1.05.
GainReport empirical_gain(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                          const CertificateSet& certs, double eta, const GainTrialConfig& cfg);

// Wraps a single subsystem for autonomous analysis: w = 0, z = y, and the
// discrete input driven directly by the exogenous channel (u = mu).
std::pair<std::vector<SubsystemModel>, Interconnection> make_standalone(
    const SubsystemModel& model);

void save_trajectory_csv(const std::string& path, const HybridTrajectory& traj);

}  // namespace hybridcert

#endif  // HYBRIDCERT_SIMULATE_HPP
