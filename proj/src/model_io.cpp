#include "hybridcert/model_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace hybridcert {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

void write_matrix(std::ostream& os, const char* tag, const Eigen::MatrixXd& m) {
  os << tag << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      os << (j ? " " : "") << format_double(m(i, j));
    }
    os << "\n";
  }
}

void write_alphabet(std::ostream& os, const char* tag, const std::vector<int>& a) {
  os << tag << " " << a.size() << " :";
  for (int v : a) os << " " << v;
  os << "\n";
}

class Tokens {
 public:
  explicit Tokens(std::istream& is) : is_(is) {}
  std::string word() {
    std::string w;
    if (!(is_ >> w)) throw std::runtime_error("system file: unexpected end of input");
    return w;
  }
  void expect(const std::string& w) {
    const std::string got = word();
    if (got != w) throw std::runtime_error("system file: expected '" + w + "', got '" + got + "'");
  }
  long integer() {
    const std::string w = word();
    size_t pos = 0;
    long v = std::stol(w, &pos);
    if (pos != w.size()) throw std::runtime_error("system file: bad integer '" + w + "'");
    return v;
  }
  double real() {
    const std::string w = word();
    size_t pos = 0;
    double v = std::stod(w, &pos);
    if (pos != w.size()) throw std::runtime_error("system file: bad number '" + w + "'");
    return v;
  }

 private:
  std::istream& is_;
};

std::vector<int> read_alphabet(Tokens& t, const char* tag) {
  t.expect(tag);
  const long k = t.integer();
  t.expect(":");
  std::vector<int> a(k);
  for (long i = 0; i < k; ++i) a[i] = static_cast<int>(t.integer());
  return a;
}

Eigen::MatrixXd read_matrix(Tokens& t, const char* tag, int rows, int cols) {
  t.expect(tag);
  Eigen::MatrixXd m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = t.real();
  return m;
}

}  // namespace

void save_system(std::ostream& os, const std::vector<SubsystemModel>& models,
                 const Interconnection& ic) {
  os << "hybridsys 1\n";
  os << "subsystems " << models.size() << "\n";
  for (const auto& m : models) {
    os << "subsystem " << m.id << "\n";
    os << "dims " << m.n << " " << m.n_w << " " << m.n_y << "\n";
    os << "dfsm\n";
    write_alphabet(os, "states", m.dfsm.states);
    write_alphabet(os, "inputs", m.dfsm.inputs);
    write_alphabet(os, "outputs", m.dfsm.outputs);
    os << "initial " << m.dfsm.initial_state << "\n";
    os << "table\n";
    for (size_t i = 0; i < m.dfsm.states.size(); ++i) {
      for (size_t j = 0; j < m.dfsm.inputs.size(); ++j) {
        os << m.dfsm.states[i] << " " << m.dfsm.inputs[j] << " " << m.dfsm.next_state[i][j]
           << " " << m.dfsm.output[i][j] << "\n";
      }
    }
    os << "end\n";
    for (const auto& [p, md] : m.modes) {
      os << "mode " << p << "\n";
      write_matrix(os, "A", md.A);
      write_matrix(os, "B", md.B);
      write_matrix(os, "C", md.C);
    }
  }
  os << "interconnection\n";
  os << "exo " << ic.n_d << " " << ic.n_z << " " << ic.n_mu << " " << ic.n_zeta << "\n";
  write_alphabet(os, "mu_alphabet", ic.mu_alphabet);
  os << "Mc " << ic.Mc.rows() << " " << ic.Mc.cols() << "\n";
  for (Eigen::Index i = 0; i < ic.Mc.rows(); ++i) {
    for (Eigen::Index j = 0; j < ic.Mc.cols(); ++j) os << (j ? " " : "") << format_double(ic.Mc(i, j));
    os << "\n";
  }
  os << "Md " << ic.Md.rows() << " " << ic.Md.cols() << "\n";
  for (Eigen::Index i = 0; i < ic.Md.rows(); ++i) {
    for (Eigen::Index j = 0; j < ic.Md.cols(); ++j) os << (j ? " " : "") << ic.Md(i, j);
    os << "\n";
  }
  os << "end\n";
}

void save_system(const std::string& path, const std::vector<SubsystemModel>& models,
                 const Interconnection& ic) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  save_system(f, models, ic);
}

std::pair<std::vector<SubsystemModel>, Interconnection> load_system(std::istream& is) {
  Tokens t(is);
  t.expect("hybridsys");
  if (t.integer() != 1) throw std::runtime_error("system file: unsupported version");
  t.expect("subsystems");
  const long count = t.integer();
  std::vector<SubsystemModel> models;
  models.reserve(count);
  for (long s = 0; s < count; ++s) {
    SubsystemModel m;
    t.expect("subsystem");
    m.id = static_cast<int>(t.integer());
    t.expect("dims");
    m.n = static_cast<int>(t.integer());
    m.n_w = static_cast<int>(t.integer());
    m.n_y = static_cast<int>(t.integer());
    t.expect("dfsm");
    m.dfsm.states = read_alphabet(t, "states");
    m.dfsm.inputs = read_alphabet(t, "inputs");
    m.dfsm.outputs = read_alphabet(t, "outputs");
    t.expect("initial");
    m.dfsm.initial_state = static_cast<int>(t.integer());
    t.expect("table");
    const size_t nq = m.dfsm.states.size(), nu = m.dfsm.inputs.size();
    m.dfsm.next_state.assign(nq, std::vector<int>(nu, 0));
    m.dfsm.output.assign(nq, std::vector<int>(nu, 0));
    for (size_t i = 0; i < nq * nu; ++i) {
      const int q = static_cast<int>(t.integer());
      const int u = static_cast<int>(t.integer());
      const int qn = static_cast<int>(t.integer());
      const int p = static_cast<int>(t.integer());
      m.dfsm.next_state[m.dfsm.state_index(q)][m.dfsm.input_index(u)] = qn;
      m.dfsm.output[m.dfsm.state_index(q)][m.dfsm.input_index(u)] = p;
    }
    t.expect("end");
    for (size_t k = 0; k < m.dfsm.outputs.size(); ++k) {
      t.expect("mode");
      const int p = static_cast<int>(t.integer());
      ModeDynamics md;
      md.A = read_matrix(t, "A", m.n, m.n);
      md.B = read_matrix(t, "B", m.n, m.n_w);
      md.C = read_matrix(t, "C", m.n_y, m.n);
      m.modes[p] = std::move(md);
    }
    m.validate();
    models.push_back(std::move(m));
  }
  t.expect("interconnection");
  t.expect("exo");
  const int n_d = static_cast<int>(t.integer());
  const int n_z = static_cast<int>(t.integer());
  const int n_mu = static_cast<int>(t.integer());
  const int n_zeta = static_cast<int>(t.integer());
  std::vector<int> mu_alphabet = read_alphabet(t, "mu_alphabet");
  t.expect("Mc");
  const int mcr = static_cast<int>(t.integer());
  const int mcc = static_cast<int>(t.integer());
  Eigen::MatrixXd mc(mcr, mcc);
  for (int i = 0; i < mcr; ++i)
    for (int j = 0; j < mcc; ++j) mc(i, j) = t.real();
  t.expect("Md");
  const int mdr = static_cast<int>(t.integer());
  const int mdc = static_cast<int>(t.integer());
  Eigen::MatrixXi md(mdr, mdc);
  for (int i = 0; i < mdr; ++i)
    for (int j = 0; j < mdc; ++j) md(i, j) = static_cast<int>(t.integer());
  t.expect("end");
  Interconnection ic =
      make_interconnection(models, std::move(mc), std::move(md), n_d, n_z, n_mu, n_zeta,
                           std::move(mu_alphabet));
  return {std::move(models), std::move(ic)};
}

std::pair<std::vector<SubsystemModel>, Interconnection> load_system(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  return load_system(f);
}

}  // namespace hybridcert
