#ifndef HYBRIDCERT_DFSM_HPP
#define HYBRIDCERT_DFSM_HPP

#include <set>
#include <utility>
#include <vector>

namespace hybridcert {

// Deterministic finite state machine over integer alphabets. Transition and
// output tables are total on states x inputs and indexed positionally;
// alphabet values are arbitrary integers.
struct Dfsm {
  std::vector<int> states;
  std::vector<int> inputs;
  std::vector<int> outputs;
  int initial_state = 0;
  // tables[state_index][input_index], entries are alphabet VALUES
  std::vector<std::vector<int>> next_state;
  std::vector<std::vector<int>> output;

  int state_index(int q) const;  // throws on out-of-alphabet values
  int input_index(int u) const;

  // Throws std::invalid_argument when the alphabets are empty, the tables are
  // not total, or a table entry falls outside its alphabet.
  void validate() const;

  // Output values actually emitted by the output table; may be a strict
  // subset of the declared output alphabet.
  std::set<int> emitted_outputs() const;
};

// One synchronous step: q+ = g(q,u), p = l(q,u).
std::pair<int, int> dfsm_step(const Dfsm& d, int q, int u);

}  // namespace hybridcert

#endif  // HYBRIDCERT_DFSM_HPP
