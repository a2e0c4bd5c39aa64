#pragma once

#include "neurorx/core.hpp"

namespace neurorx {

struct AttentionBlockParams {
  RealGrid w_q;  // input_dim x n_k
  RealGrid w_k;  // input_dim x n_k
  RealGrid w_v;  // input_dim x input_dim (value dim tied to input)
};

/// Two attention blocks over the pilot grid: rows of the time block are OFDM
/// symbols (features 2*n_sc), rows of the frequency block are subcarriers
/// (features 2*n_p, a pure permutation of the same grid). Heads are
/// concatenated, projected by w_o and added to the input.
struct TwoDMhaParams {
  AttentionBlockParams time_block;  // over n_p x 2 n_sc inputs
  AttentionBlockParams freq_block;  // over n_sc x 2 n_p inputs
  RealGrid w_o;                     // 4 n_sc x 2 n_sc
  int n_p = 0;
  int n_sc = 0;
};

TwoDMhaParams init_twod_mha(int n_p, int n_sc, int nk_time, int nk_freq,
                            uint64_t seed);
TwoDMhaParams zeros_like(const TwoDMhaParams& p);

/// Row-stochastic softmax with max-subtraction stabilization.
RealGrid softmax_rows(const RealGrid& a);

/// softmax(U w_q (U w_k)^T / sqrt(n_k)) * (U w_v)
RealGrid attention_head(const RealGrid& u, const AttentionBlockParams& p);

/// n_p x 2 n_sc <-> n_sc x 2 n_p entry permutation (f_R layout preserved:
/// first feature half = real parts, second half = imaginary parts).
RealGrid to_freq_layout(const RealGrid& grid, int n_sc);
RealGrid from_freq_layout(const RealGrid& tilde, int n_p);

struct MhaCache {
  RealGrid input;
  RealGrid q_t, k_t, v_t, p_t;  // time block intermediates
  RealGrid q_f, k_f, v_f, p_f;  // frequency block intermediates
  RealGrid concat;
};

RealGrid twod_mha_forward(const RealGrid& input, const TwoDMhaParams& p,
                          MhaCache* cache = nullptr);

struct MhaGrads {
  TwoDMhaParams params;  // same shapes, zero-initialized
  RealGrid input;
};

/// Exact reverse-mode gradients of twod_mha_forward. When `accumulate` is
/// given, parameter gradients are added into it (input grad returned fresh).
MhaGrads twod_mha_backward(const TwoDMhaParams& p, const MhaCache& cache,
                           const RealGrid& upstream, MhaGrads* accumulate = nullptr);

void axpy_params(TwoDMhaParams& dst, const TwoDMhaParams& grad, Real step);

}  // namespace neurorx
