#include "neurorx/reservoir.hpp"

#include <Eigen/Eigenvalues>
#include <random>

namespace neurorx {

ReservoirModel init_reservoir(int n_in_raw, int n_out, int n_neurons,
                              int window_len, Real spectral_radius,
                              Real input_scale, uint64_t seed) {
  if (n_neurons < 1) throw ConfigError("n_neurons must be >= 1");
  if (window_len < 1) throw ConfigError("window_len must be >= 1");

  ReservoirModel m;
  m.n_in_raw = n_in_raw;
  m.n_out = n_out;
  m.n_neurons = n_neurons;
  m.window_len = window_len;
  m.seed = seed;

  std::mt19937_64 rng(derive_seed(seed, 0x5e5))
      ;
  std::uniform_real_distribution<Real> uni(-1.0, 1.0);

  m.w_in = ComplexGrid(n_neurons, m.input_dim());
  for (Eigen::Index j = 0; j < m.w_in.cols(); ++j)
    for (Eigen::Index i = 0; i < m.w_in.rows(); ++i)
      m.w_in(i, j) = Cx(uni(rng), uni(rng)) * input_scale;

  m.w_res = ComplexGrid(n_neurons, n_neurons);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  for (Eigen::Index j = 0; j < n_neurons; ++j)
    for (Eigen::Index i = 0; i < n_neurons; ++i)
      m.w_res(i, j) = Cx(gauss(rng), gauss(rng));
  Eigen::ComplexEigenSolver<ComplexGrid> eig(m.w_res, false);
  const Real radius = eig.eigenvalues().cwiseAbs().maxCoeff();
  if (radius > 0.0) m.w_res *= spectral_radius / radius;

  m.w_out = ComplexGrid::Zero(n_out, m.feature_dim());
  return m;
}

namespace {

inline Cx tanh_split(Cx v) { return Cx(std::tanh(v.real()), std::tanh(v.imag())); }

}  // namespace

RcStreamState zero_stream_state(const ReservoirModel& model) {
  RcStreamState st;
  st.state = CxVec::Zero(model.n_neurons);
  st.window = CxVec::Zero(model.input_dim());
  return st;
}

ComplexGrid run_states_stream(const ReservoirModel& model,
                              const ComplexGrid& input, RcStreamState& st) {
  if (input.rows() != model.n_in_raw)
    throw ConfigError("input rows do not match reservoir raw input dimension");
  const Eigen::Index T = input.cols();
  const int win = model.window_len;
  const int raw = model.n_in_raw;

  ComplexGrid traj(model.feature_dim(), T);
  CxVec pre(model.n_neurons);
  for (Eigen::Index m = 0; m < T; ++m) {
    // u = [y(m); y(m-1); ...; y(m-win+1)], zero-padded before stream start.
    if (win > 1) {
      for (int w = win - 1; w >= 1; --w)
        st.window.segment(static_cast<Eigen::Index>(w) * raw, raw) =
            st.window.segment(static_cast<Eigen::Index>(w - 1) * raw, raw);
    }
    st.window.head(raw) = input.col(m);

    pre.noalias() = model.w_res * st.state;
    pre.noalias() += model.w_in * st.window;
    for (int i = 0; i < model.n_neurons; ++i) st.state[i] = tanh_split(pre[i]);

    traj.col(m).head(model.n_neurons) = st.state;
    traj.col(m).tail(model.input_dim()) = st.window;
  }
  return traj;
}

ComplexGrid run_states(const ReservoirModel& model, const ComplexGrid& input) {
  RcStreamState st = zero_stream_state(model);
  return run_states_stream(model, input, st);
}

LsSolution train_ls(const ComplexGrid& traj, const ComplexGrid& targets,
                    Real ridge) {
  if (traj.cols() != targets.cols())
    throw ConfigError("trajectory/target column mismatch");
  const Eigen::Index d = traj.rows();
  ComplexGrid gram = traj * traj.adjoint();
  gram.diagonal().array() += ridge;

  Eigen::LDLT<ComplexGrid> ldlt(gram);
  if (ldlt.info() != Eigen::Success)
    throw SubframeError("rc-ls", "normal matrix factorization failed");

  LsSolution sol;
  sol.phi_inv = ldlt.solve(ComplexGrid::Identity(d, d));
  sol.w_out = (ldlt.solve(traj * targets.adjoint())).adjoint();
  if (!all_finite(sol.w_out))
    throw SubframeError("rc-ls", "non-finite output weights (rank deficiency?)");
  sol.residual = (sol.w_out * traj - targets).norm();
  return sol;
}

void rls_step(ComplexGrid& w_out, RlsState& rls, const CxVec& z,
              const CxVec& target) {
  const CxVec pz = rls.phi_inv * z;
  const Cx denom = rls.alpha + z.dot(pz);  // z^H P z (dot conjugates lhs)
  const CxVec v = pz / denom;
  const CxVec err = target - w_out * z;
  w_out.noalias() += err * v.adjoint();
  rls.phi_inv.noalias() -= v * (z.adjoint() * rls.phi_inv);
  rls.phi_inv /= rls.alpha;
  if (++rls.steps % 512 == 0) {
    // The rank-1 update preserves Hermitian structure algebraically; fold
    // accumulated roundoff back periodically.
    rls.phi_inv = ((rls.phi_inv + rls.phi_inv.adjoint()) * 0.5).eval();
  }
  if (!v.allFinite() || !w_out.allFinite())
    throw SubframeError("rc-rls", "non-finite RLS update");
}

}  // namespace neurorx
