#include "neurorx/attention.hpp"

#include <random>

namespace neurorx {

namespace {

RealGrid fan_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const Real bound = std::sqrt(6.0 / static_cast<Real>(rows + cols));
  std::uniform_real_distribution<Real> uni(-bound, bound);
  RealGrid out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = uni(rng);
  return out;
}

}  // namespace

TwoDMhaParams init_twod_mha(int n_p, int n_sc, int nk_time, int nk_freq,
                            uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x2d1a));
  TwoDMhaParams p;
  p.n_p = n_p;
  p.n_sc = n_sc;
  p.time_block.w_q = fan_uniform(2 * n_sc, nk_time, rng);
  p.time_block.w_k = fan_uniform(2 * n_sc, nk_time, rng);
  p.time_block.w_v = fan_uniform(2 * n_sc, 2 * n_sc, rng);
  p.freq_block.w_q = fan_uniform(2 * n_p, nk_freq, rng);
  p.freq_block.w_k = fan_uniform(2 * n_p, nk_freq, rng);
  p.freq_block.w_v = fan_uniform(2 * n_p, 2 * n_p, rng);
  // Zero output projection: the module starts as the residual identity and
  // only deviates where training pulls it.
  p.w_o = RealGrid::Zero(4 * n_sc, 2 * n_sc);
  return p;
}

TwoDMhaParams zeros_like(const TwoDMhaParams& p) {
  TwoDMhaParams z;
  z.n_p = p.n_p;
  z.n_sc = p.n_sc;
  z.time_block.w_q = RealGrid::Zero(p.time_block.w_q.rows(), p.time_block.w_q.cols());
  z.time_block.w_k = RealGrid::Zero(p.time_block.w_k.rows(), p.time_block.w_k.cols());
  z.time_block.w_v = RealGrid::Zero(p.time_block.w_v.rows(), p.time_block.w_v.cols());
  z.freq_block.w_q = RealGrid::Zero(p.freq_block.w_q.rows(), p.freq_block.w_q.cols());
  z.freq_block.w_k = RealGrid::Zero(p.freq_block.w_k.rows(), p.freq_block.w_k.cols());
  z.freq_block.w_v = RealGrid::Zero(p.freq_block.w_v.rows(), p.freq_block.w_v.cols());
  z.w_o = RealGrid::Zero(p.w_o.rows(), p.w_o.cols());
  return z;
}

RealGrid softmax_rows(const RealGrid& a) {
  RealGrid out(a.rows(), a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    const Real mx = a.row(i).maxCoeff();
    out.row(i) = (a.row(i).array() - mx).exp();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

RealGrid attention_head(const RealGrid& u, const AttentionBlockParams& p) {
  if (u.cols() != p.w_q.rows()) throw ConfigError("attention input width mismatch");
  const RealGrid q = u * p.w_q;
  const RealGrid k = u * p.w_k;
  const RealGrid v = u * p.w_v;
  const RealGrid probs =
      softmax_rows(q * k.transpose() / std::sqrt(static_cast<Real>(p.w_q.cols())));
  return probs * v;
}

RealGrid to_freq_layout(const RealGrid& grid, int n_sc) {
  const int n_p = static_cast<int>(grid.rows());
  RealGrid out(n_sc, 2 * n_p);
  for (int k = 0; k < n_sc; ++k)
    for (int p = 0; p < n_p; ++p) {
      out(k, p) = grid(p, k);
      out(k, n_p + p) = grid(p, n_sc + k);
    }
  return out;
}

RealGrid from_freq_layout(const RealGrid& tilde, int n_p) {
  const int n_sc = static_cast<int>(tilde.rows());
  RealGrid out(n_p, 2 * n_sc);
  for (int k = 0; k < n_sc; ++k)
    for (int p = 0; p < n_p; ++p) {
      out(p, k) = tilde(k, p);
      out(p, n_sc + k) = tilde(k, n_p + p);
    }
  return out;
}

namespace {

struct HeadCache {
  RealGrid q, k, v, p;
};

RealGrid head_forward(const RealGrid& u, const AttentionBlockParams& blk,
                      HeadCache& c) {
  c.q = u * blk.w_q;
  c.k = u * blk.w_k;
  c.v = u * blk.w_v;
  c.p = softmax_rows(c.q * c.k.transpose() /
                     std::sqrt(static_cast<Real>(blk.w_q.cols())));
  return c.p * c.v;
}

/// Returns d(input); writes parameter grads.
RealGrid head_backward(const RealGrid& u, const AttentionBlockParams& blk,
                       const HeadCache& c, const RealGrid& d_head,
                       AttentionBlockParams& grads) {
  const Real inv_sqrt = 1.0 / std::sqrt(static_cast<Real>(blk.w_q.cols()));
  const RealGrid d_p = d_head * c.v.transpose();
  const RealGrid d_v = c.p.transpose() * d_head;

  // Softmax backward per row: dS_i = (dP_i - <dP_i, P_i>) .* P_i
  RealGrid d_scores(d_p.rows(), d_p.cols());
  for (Eigen::Index i = 0; i < d_p.rows(); ++i) {
    const Real inner = d_p.row(i).cwiseProduct(c.p.row(i)).sum();
    d_scores.row(i) = (d_p.row(i).array() - inner) * c.p.row(i).array();
  }
  const RealGrid d_q = d_scores * c.k * inv_sqrt;
  const RealGrid d_k = d_scores.transpose() * c.q * inv_sqrt;

  grads.w_q.noalias() += u.transpose() * d_q;
  grads.w_k.noalias() += u.transpose() * d_k;
  grads.w_v.noalias() += u.transpose() * d_v;
  return d_q * blk.w_q.transpose() + d_k * blk.w_k.transpose() +
         d_v * blk.w_v.transpose();
}

}  // namespace

RealGrid twod_mha_forward(const RealGrid& input, const TwoDMhaParams& p,
                          MhaCache* cache) {
  if (input.rows() != p.n_p || input.cols() != 2 * p.n_sc)
    throw ConfigError("2D MHA input must be n_p x 2*n_sc");
  HeadCache tc, fc;
  const RealGrid head_t = head_forward(input, p.time_block, tc);
  const RealGrid tilde = to_freq_layout(input, p.n_sc);
  const RealGrid head_f = head_forward(tilde, p.freq_block, fc);
  const RealGrid head_f_back = from_freq_layout(head_f, p.n_p);

  RealGrid concat(p.n_p, 4 * p.n_sc);
  concat.leftCols(2 * p.n_sc) = head_t;
  concat.rightCols(2 * p.n_sc) = head_f_back;

  if (cache) {
    cache->input = input;
    cache->q_t = tc.q; cache->k_t = tc.k; cache->v_t = tc.v; cache->p_t = tc.p;
    cache->q_f = fc.q; cache->k_f = fc.k; cache->v_f = fc.v; cache->p_f = fc.p;
    cache->concat = concat;
  }
  return input + concat * p.w_o;
}

MhaGrads twod_mha_backward(const TwoDMhaParams& p, const MhaCache& cache,
                           const RealGrid& upstream, MhaGrads* accumulate) {
  MhaGrads local;
  MhaGrads& g = accumulate ? *accumulate : local;
  if (!accumulate) g.params = zeros_like(p);

  g.params.w_o.noalias() += cache.concat.transpose() * upstream;
  const RealGrid d_concat = upstream * p.w_o.transpose();
  const RealGrid d_head_t = d_concat.leftCols(2 * p.n_sc);
  const RealGrid d_head_f = to_freq_layout(d_concat.rightCols(2 * p.n_sc), p.n_sc);

  HeadCache tc{cache.q_t, cache.k_t, cache.v_t, cache.p_t};
  HeadCache fc{cache.q_f, cache.k_f, cache.v_f, cache.p_f};
  const RealGrid tilde = to_freq_layout(cache.input, p.n_sc);

  RealGrid d_input = upstream;  // residual path
  d_input += head_backward(cache.input, p.time_block, tc, d_head_t,
                           g.params.time_block);
  d_input += from_freq_layout(
      head_backward(tilde, p.freq_block, fc, d_head_f, g.params.freq_block),
      p.n_p);

  if (accumulate) {
    MhaGrads out;
    out.input = d_input;
    return out;
  }
  g.input = d_input;
  return g;
}

void axpy_params(TwoDMhaParams& dst, const TwoDMhaParams& grad, Real step) {
  dst.time_block.w_q += step * grad.time_block.w_q;
  dst.time_block.w_k += step * grad.time_block.w_k;
  dst.time_block.w_v += step * grad.time_block.w_v;
  dst.freq_block.w_q += step * grad.freq_block.w_q;
  dst.freq_block.w_k += step * grad.freq_block.w_k;
  dst.freq_block.w_v += step * grad.freq_block.w_v;
  dst.w_o += step * grad.w_o;
}

}  // namespace neurorx
