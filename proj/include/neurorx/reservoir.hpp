#pragma once

#include "neurorx/core.hpp"

namespace neurorx {

/// Complex echo-state network. Input and recurrent weights are fixed at
/// construction; only w_out is trainable (one-shot LS on pilots, then RLS
/// decision-feedback updates).
struct ReservoirModel {
  ComplexGrid w_in;   // n_neurons x (n_in_raw * window_len)
  ComplexGrid w_res;  // n_neurons x n_neurons, spectral radius < 1
  ComplexGrid w_out;  // n_out x (n_neurons + n_in_raw * window_len)
  int n_in_raw = 0;
  int n_out = 0;
  int n_neurons = 0;
  int window_len = 1;
  uint64_t seed = 0;

  int input_dim() const { return n_in_raw * window_len; }
  int feature_dim() const { return n_neurons + input_dim(); }
};

struct RlsState {
  ComplexGrid phi_inv;  // feature_dim x feature_dim, Hermitian
  Real alpha = 0.9995;
  long steps = 0;
};

ReservoirModel init_reservoir(int n_in_raw, int n_out, int n_neurons,
                              int window_len, Real spectral_radius,
                              Real input_scale, uint64_t seed);

/// Streaming state for symbol-by-symbol trajectory generation.
struct RcStreamState {
  CxVec state;   // s(m-1)
  CxVec window;  // stacked u(m-1)
};
RcStreamState zero_stream_state(const ReservoirModel& model);

/// State trajectory continuing from `st` (updated in place):
/// s(m) = tanh_c(W s(m-1) + W_in u(m)) with tanh applied separately to real
/// and imaginary parts; u(m) stacks the current and window_len-1 past input
/// columns. Column m of the result is [s(m); u(m)].
ComplexGrid run_states_stream(const ReservoirModel& model,
                              const ComplexGrid& input, RcStreamState& st);

/// Zero-initial-state run over a whole input grid.
ComplexGrid run_states(const ReservoirModel& model, const ComplexGrid& input);

struct LsSolution {
  ComplexGrid w_out;
  ComplexGrid phi_inv;  // (Z Z^H + ridge I)^{-1}, RLS warm start
  Real residual = 0.0;  // ||W Z - O||_F
};

/// Ridge-regularized least squares fit of targets = w_out * Z.
LsSolution train_ls(const ComplexGrid& traj, const ComplexGrid& targets,
                    Real ridge);

/// One forgetting-factor RLS update (conjugate transposes throughout):
///   e = target - W z;  v = P z / (alpha + z^H P z);
///   W += e v^H;        P = (P - v (z^H P)) / alpha.
void rls_step(ComplexGrid& w_out, RlsState& rls, const CxVec& z,
              const CxVec& target);

inline ComplexGrid rc_forward(const ReservoirModel& model, const ComplexGrid& traj) {
  return model.w_out * traj;
}

}  // namespace neurorx
