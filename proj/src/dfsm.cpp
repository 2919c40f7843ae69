#include "hybridcert/dfsm.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hybridcert {

namespace {
int index_of(const std::vector<int>& alphabet, int value, const char* what) {
  auto it = std::find(alphabet.begin(), alphabet.end(), value);
  if (it == alphabet.end()) {
    throw std::invalid_argument(std::string(what) + " value " + std::to_string(value) +
                                " not in alphabet");
  }
  return static_cast<int>(it - alphabet.begin());
}
}  // namespace

int Dfsm::state_index(int q) const { return index_of(states, q, "state"); }
int Dfsm::input_index(int u) const { return index_of(inputs, u, "input"); }

void Dfsm::validate() const {
  if (states.empty() || inputs.empty() || outputs.empty()) {
    throw std::invalid_argument("Dfsm: alphabets must be nonempty");
  }
  (void)state_index(initial_state);
  if (next_state.size() != states.size() || output.size() != states.size()) {
    throw std::invalid_argument("Dfsm: tables must have one row per state");
  }
  for (size_t i = 0; i < states.size(); ++i) {
    if (next_state[i].size() != inputs.size() || output[i].size() != inputs.size()) {
      throw std::invalid_argument("Dfsm: tables must be total on states x inputs");
    }
    for (size_t j = 0; j < inputs.size(); ++j) {
      (void)state_index(next_state[i][j]);
      if (std::find(outputs.begin(), outputs.end(), output[i][j]) == outputs.end()) {
        throw std::invalid_argument("Dfsm: output value " + std::to_string(output[i][j]) +
                                    " not in output alphabet");
      }
    }
  }
}

std::set<int> Dfsm::emitted_outputs() const {
  std::set<int> out;
  for (const auto& row : output) out.insert(row.begin(), row.end());
  return out;
}

std::pair<int, int> dfsm_step(const Dfsm& d, int q, int u) {
  const int qi = d.state_index(q);
  const int ui = d.input_index(u);
  return {d.next_state[qi][ui], d.output[qi][ui]};
}

}  // namespace hybridcert
