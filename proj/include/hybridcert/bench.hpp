#ifndef HYBRIDCERT_BENCH_HPP
#define HYBRIDCERT_BENCH_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hybridcert/consensus.hpp"
#include "hybridcert/model.hpp"

namespace hybridcert {

// Random interconnected-system generator. Per subsystem and mode, a dense
// random A is shifted so its largest eigenvalue real part equals eig_norm
// exactly; B and C get unit-norm columns. Subsystem outputs couple to
// `neighbors` successors in a circulant pattern; the exogenous continuous
// channel enters subsystem 0 and leaves from subsystem N-1 (randomized under
// random_io). Deterministic for a fixed seed.
struct BenchConfig {
  int N = 6;
  int n = 10;
  int io = 2;  // n_w = n_y per subsystem
  int modes = 3;
  int neighbors = 3;
  double eig_norm = -2.0;
  std::uint64_t seed = 0;
  double coupling = 0.4;  // total coupling gain budget per subsystem
  int n_mu = 1, n_zeta = 1;
  bool random_io = false;
};

BenchConfig load_bench_config(const std::string& path);  // key = value lines
void save_bench_config(const std::string& path, const BenchConfig& cfg);

// Three-state, two-input machine driving three modes: u=1 walks the cycle
// q1->q2->q3->q1; u=0 holds in q1/q2 and releases q3; outputs echo the input
// in q1, invert it in q2, and are 0 in q3.
Dfsm three_state_cycle_machine();

std::pair<std::vector<SubsystemModel>, Interconnection> generate(const BenchConfig& cfg);

struct MethodResult {
  std::string name;
  ConsensusStatus status = ConsensusStatus::MaxIter;
  double final_primal = 0.0, final_dual = 0.0;
  double gamma = 0.0, eta = 0.0;
  int iters_to_tol = -1;  // -1 = tolerance not reached
  double wall_ms = 0.0;
  std::string csv_path;
  std::string error;
  ResidualTrace trace;
};

struct SweepResult {
  std::vector<MethodResult> rows;
  std::string table() const;
};

// The standard comparison set: plain consensus iterations plus accelerated
// ones with restart periods {none, 10, 20, 50}.
std::vector<std::pair<std::string, AdmmConfig>> standard_method_set(const AdmmConfig& base);

// Runs every method on the identical instance and initialization, writing one
// residual CSV per method into out_dir (when nonempty).
SweepResult compare_methods(const std::vector<SubsystemModel>& models, const Interconnection& ic,
                            const AdmmConfig& base, int max_iter, const std::string& out_dir);

}  // namespace hybridcert

#endif  // HYBRIDCERT_BENCH_HPP
