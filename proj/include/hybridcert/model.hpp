#ifndef HYBRIDCERT_MODEL_HPP
#define HYBRIDCERT_MODEL_HPP

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hybridcert/dfsm.hpp"

namespace hybridcert {

// Per-mode LTI continuous dynamics: xdot = A x + B w, y = C x. No affine or
// feedthrough term, so the unforced drift vanishes at x = 0 for every mode.
struct ModeDynamics {
  Eigen::MatrixXd A;  // n x n
  Eigen::MatrixXd B;  // n x n_w
  Eigen::MatrixXd C;  // n_y x n
};

// A hybrid subsystem: one continuous block per discrete output value, plus
// the finite-state module that selects the active mode.
struct SubsystemModel {
  int id = 0;
  int n = 0;
  int n_w = 0;
  int n_y = 0;
  std::map<int, ModeDynamics> modes;  // keyed by output alphabet value
  Dfsm dfsm;

  void validate() const;  // throws std::invalid_argument
  const ModeDynamics& mode(int p) const;
};

// Static interconnection: [w; z] = Mc [y; d] for the continuous signals and
// [u; zeta] = Md [p; mu] for the discrete ones, with per-subsystem signals
// stacked in subsystem order. Pc and Pd are permutation index maps
// (out[k] = in[perm[k]]) realizing the interleaved stackings.
struct Interconnection {
  int N = 0;
  Eigen::MatrixXd Mc;  // (n_w + n_z) x (n_y + n_d)
  Eigen::MatrixXi Md;  // (N + n_zeta) x (N + n_mu)
  int n_d = 0, n_z = 0, n_mu = 0, n_zeta = 0;
  std::vector<int> mu_alphabet{0, 1};
  std::vector<int> Pc, Pd;

  Eigen::MatrixXd Pc_dense() const;
  Eigen::MatrixXd Pd_dense() const;
};

// Stacked continuous signal dimensions derived from the subsystem list.
struct SignalDims {
  int N = 0;
  std::vector<int> n, nw, ny;
  std::vector<int> x_off, w_off, y_off;
  int n_total = 0, nw_total = 0, ny_total = 0;
};
SignalDims signal_dims(const std::vector<SubsystemModel>& models);

// Permutations mapping the global stackings onto the per-subsystem
// interleaved stackings:
//   Pc: (w, z, y, d)      -> (w_1, y_1, ..., w_N, y_N, d, z)
//   Pd: (u, zeta, p, mu)  -> (u_1, p_1, ..., u_N, p_N, mu, zeta)
std::pair<std::vector<int>, std::vector<int>> build_permutations(
    const std::vector<SubsystemModel>& models, int n_d, int n_z, int n_mu, int n_zeta);

// Applies an index-map permutation (bit-exact).
Eigen::VectorXd apply_permutation(const std::vector<int>& perm, const Eigen::VectorXd& v);
Eigen::VectorXd apply_permutation_transpose(const std::vector<int>& perm,
                                            const Eigen::VectorXd& v);

Interconnection make_interconnection(const std::vector<SubsystemModel>& models,
                                     Eigen::MatrixXd Mc, Eigen::MatrixXi Md, int n_d, int n_z,
                                     int n_mu, int n_zeta,
                                     std::vector<int> mu_alphabet = {0, 1});

struct Violation {
  std::string where;
  std::string message;
};

// Structural diagnostics: shapes, permutation validity, mode keying, and the
// discrete alphabet check (every input value reachable through an Md row over
// the emitted outputs and the exogenous alphabet must land in that
// subsystem's input alphabet). Returns all violations; empty means pass.
// Well-posedness of the interconnection is assumed, not verified.
std::vector<Violation> validate_interconnection(const Interconnection& ic,
                                                const std::vector<SubsystemModel>& models);

}  // namespace hybridcert

#endif  // HYBRIDCERT_MODEL_HPP
