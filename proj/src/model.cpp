#include "hybridcert/model.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace hybridcert {

void SubsystemModel::validate() const {
  if (n < 1 || n_w < 0 || n_y < 0) throw std::invalid_argument("SubsystemModel: bad dimensions");
  dfsm.validate();
  std::set<int> keys;
  for (const auto& [p, md] : modes) {
    keys.insert(p);
    if (md.A.rows() != n || md.A.cols() != n || md.B.rows() != n || md.B.cols() != n_w ||
        md.C.rows() != n_y || md.C.cols() != n) {
      throw std::invalid_argument("SubsystemModel: mode " + std::to_string(p) +
                                  " matrix dimensions inconsistent");
    }
  }
  std::set<int> declared(dfsm.outputs.begin(), dfsm.outputs.end());
  if (keys != declared) {
    throw std::invalid_argument("SubsystemModel: modes must be keyed exactly by the output alphabet");
  }
}

const ModeDynamics& SubsystemModel::mode(int p) const {
  auto it = modes.find(p);
  if (it == modes.end()) throw std::invalid_argument("unknown mode " + std::to_string(p));
  return it->second;
}

SignalDims signal_dims(const std::vector<SubsystemModel>& models) {
  SignalDims d;
  d.N = static_cast<int>(models.size());
  for (const auto& m : models) {
    d.x_off.push_back(d.n_total);
    d.w_off.push_back(d.nw_total);
    d.y_off.push_back(d.ny_total);
    d.n.push_back(m.n);
    d.nw.push_back(m.n_w);
    d.ny.push_back(m.n_y);
    d.n_total += m.n;
    d.nw_total += m.n_w;
    d.ny_total += m.n_y;
  }
  return d;
}

std::pair<std::vector<int>, std::vector<int>> build_permutations(
    const std::vector<SubsystemModel>& models, int n_d, int n_z, int n_mu, int n_zeta) {
  if (n_d < 0 || n_z < 0 || n_mu < 0 || n_zeta < 0) {
    throw std::invalid_argument("build_permutations: negative exogenous dimension");
  }
  const SignalDims dims = signal_dims(models);
  const int N = dims.N;

  // continuous: source (w, z, y, d), target (w_1, y_1, ..., w_N, y_N, d, z)
  const int w0 = 0;
  const int z0 = dims.nw_total;
  const int y0 = z0 + n_z;
  const int d0 = y0 + dims.ny_total;
  std::vector<int> pc;
  pc.reserve(d0 + n_d);
  for (int i = 0; i < N; ++i) {
    for (int k = 0; k < dims.nw[i]; ++k) pc.push_back(w0 + dims.w_off[i] + k);
    for (int k = 0; k < dims.ny[i]; ++k) pc.push_back(y0 + dims.y_off[i] + k);
  }
  for (int k = 0; k < n_d; ++k) pc.push_back(d0 + k);
  for (int k = 0; k < n_z; ++k) pc.push_back(z0 + k);

  // discrete: source (u, zeta, p, mu), target (u_1, p_1, ..., u_N, p_N, mu, zeta)
  const int u0 = 0;
  const int zeta0 = N;
  const int p0 = zeta0 + n_zeta;
  const int mu0 = p0 + N;
  std::vector<int> pd;
  pd.reserve(mu0 + n_mu);
  for (int i = 0; i < N; ++i) {
    pd.push_back(u0 + i);
    pd.push_back(p0 + i);
  }
  for (int k = 0; k < n_mu; ++k) pd.push_back(mu0 + k);
  for (int k = 0; k < n_zeta; ++k) pd.push_back(zeta0 + k);

  return {pc, pd};
}

Eigen::VectorXd apply_permutation(const std::vector<int>& perm, const Eigen::VectorXd& v) {
  if (static_cast<int>(perm.size()) != v.size()) {
    throw std::invalid_argument("apply_permutation: size mismatch");
  }
  Eigen::VectorXd out(v.size());
  for (size_t k = 0; k < perm.size(); ++k) out(static_cast<int>(k)) = v(perm[k]);
  return out;
}

Eigen::VectorXd apply_permutation_transpose(const std::vector<int>& perm,
                                            const Eigen::VectorXd& v) {
  if (static_cast<int>(perm.size()) != v.size()) {
    throw std::invalid_argument("apply_permutation_transpose: size mismatch");
  }
  Eigen::VectorXd out(v.size());
  for (size_t k = 0; k < perm.size(); ++k) out(perm[k]) = v(static_cast<int>(k));
  return out;
}

namespace {
Eigen::MatrixXd perm_dense(const std::vector<int>& perm) {
  const int n = static_cast<int>(perm.size());
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) p(k, perm[k]) = 1.0;
  return p;
}
}  // namespace

Eigen::MatrixXd Interconnection::Pc_dense() const { return perm_dense(Pc); }
Eigen::MatrixXd Interconnection::Pd_dense() const { return perm_dense(Pd); }

Interconnection make_interconnection(const std::vector<SubsystemModel>& models,
                                     Eigen::MatrixXd Mc, Eigen::MatrixXi Md, int n_d, int n_z,
                                     int n_mu, int n_zeta, std::vector<int> mu_alphabet) {
  Interconnection ic;
  ic.N = static_cast<int>(models.size());
  ic.Mc = std::move(Mc);
  ic.Md = std::move(Md);
  ic.n_d = n_d;
  ic.n_z = n_z;
  ic.n_mu = n_mu;
  ic.n_zeta = n_zeta;
  ic.mu_alphabet = std::move(mu_alphabet);
  std::tie(ic.Pc, ic.Pd) = build_permutations(models, n_d, n_z, n_mu, n_zeta);
  return ic;
}

namespace {
bool is_permutation(const std::vector<int>& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (int s : perm) {
    if (s < 0 || s >= static_cast<int>(perm.size()) || seen[s]) return false;
    seen[s] = 1;
  }
  return true;
}
}  // namespace

std::vector<Violation> validate_interconnection(const Interconnection& ic,
                                                const std::vector<SubsystemModel>& models) {
  std::vector<Violation> v;
  auto add = [&](const std::string& where, const std::string& msg) {
    v.push_back(Violation{where, msg});
  };

  if (ic.N != static_cast<int>(models.size())) {
    add("interconnection", "subsystem count mismatch");
    return v;
  }
  for (const auto& m : models) {
    try {
      m.validate();
    } catch (const std::exception& e) {
      add("subsystem " + std::to_string(m.id), e.what());
    }
  }
  if (!v.empty()) return v;

  const SignalDims dims = signal_dims(models);
  const int mc_rows = dims.nw_total + ic.n_z;
  const int mc_cols = dims.ny_total + ic.n_d;
  if (ic.Mc.rows() != mc_rows || ic.Mc.cols() != mc_cols) {
    add("Mc", "shape is " + std::to_string(ic.Mc.rows()) + "x" + std::to_string(ic.Mc.cols()) +
                  ", expected " + std::to_string(mc_rows) + "x" + std::to_string(mc_cols));
  }
  const int md_rows = dims.N + ic.n_zeta;
  const int md_cols = dims.N + ic.n_mu;
  if (ic.Md.rows() != md_rows || ic.Md.cols() != md_cols) {
    add("Md", "shape is " + std::to_string(ic.Md.rows()) + "x" + std::to_string(ic.Md.cols()) +
                  ", expected " + std::to_string(md_rows) + "x" + std::to_string(md_cols));
  }
  if (static_cast<int>(ic.Pc.size()) != mc_rows + mc_cols || !is_permutation(ic.Pc)) {
    add("Pc", "not a valid permutation of size " + std::to_string(mc_rows + mc_cols));
  }
  if (static_cast<int>(ic.Pd.size()) != md_rows + md_cols || !is_permutation(ic.Pd)) {
    add("Pd", "not a valid permutation of size " + std::to_string(md_rows + md_cols));
  }
  if (ic.mu_alphabet.empty() && ic.n_mu > 0) {
    add("mu_alphabet", "empty exogenous discrete alphabet");
  }
  if (!v.empty()) return v;

  // Discrete alphabet propagation: image of row i of Md over the emitted
  // output sets and the exogenous alphabet must land in subsystem i's input
  // alphabet. Exact set propagation with a size cap.
  std::vector<std::set<int>> emitted;
  for (const auto& m : models) emitted.push_back(m.dfsm.emitted_outputs());
  constexpr size_t kImageCap = 100000;
  for (int i = 0; i < dims.N; ++i) {
    std::set<int> image{0};
    bool capped = false;
    auto absorb = [&](int coeff, const std::set<int>& values) {
      if (coeff == 0 || capped) return;
      std::set<int> next;
      for (int base : image) {
        for (int val : values) {
          next.insert(base + coeff * val);
          if (next.size() > kImageCap) {
            capped = true;
            return;
          }
        }
      }
      image = std::move(next);
    };
    for (int j = 0; j < dims.N && !capped; ++j) absorb(ic.Md(i, j), emitted[j]);
    std::set<int> mu_set(ic.mu_alphabet.begin(), ic.mu_alphabet.end());
    for (int k = 0; k < ic.n_mu && !capped; ++k) absorb(ic.Md(i, dims.N + k), mu_set);
    if (capped) {
      add("Md row " + std::to_string(i), "alphabet image too large to verify");
      continue;
    }
    const auto& alphabet = models[i].dfsm.inputs;
    for (int val : image) {
      if (std::find(alphabet.begin(), alphabet.end(), val) == alphabet.end()) {
        add("Md row " + std::to_string(i),
            "subsystem " + std::to_string(models[i].id) + " can receive input " +
                std::to_string(val) + " outside its alphabet");
        break;
      }
    }
  }
  return v;
}

}  // namespace hybridcert
