#include <doctest.h>

#include <random>

#include "neurorx/attention.hpp"

using namespace neurorx;

namespace {

RealGrid random_grid(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<Real> g(0, 1);
  RealGrid out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = g(rng);
  return out;
}

/// Scalar probe loss sum(out .* r) for gradient checking.
Real probe_loss(const RealGrid& input, const TwoDMhaParams& p, const RealGrid& r) {
  return (twod_mha_forward(input, p).array() * r.array()).sum();
}

struct ParamRef {
  RealGrid* mat;
};

std::vector<RealGrid*> all_params(TwoDMhaParams& p) {
  return {&p.time_block.w_q, &p.time_block.w_k, &p.time_block.w_v,
          &p.freq_block.w_q, &p.freq_block.w_k, &p.freq_block.w_v, &p.w_o};
}

std::vector<const RealGrid*> all_grads(const TwoDMhaParams& g) {
  return {&g.time_block.w_q, &g.time_block.w_k, &g.time_block.w_v,
          &g.freq_block.w_q, &g.freq_block.w_k, &g.freq_block.w_v, &g.w_o};
}

}  // namespace

TEST_CASE("softmax rows: uniform, saturation, shift invariance") {
  RealGrid a = RealGrid::Zero(1, 4);
  RealGrid s = softmax_rows(a);
  for (int j = 0; j < 4; ++j) CHECK(s(0, j) == doctest::Approx(0.25));

  a = RealGrid(1, 2);
  a << 1000.0, 0.0;
  s = softmax_rows(a);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(0, 1) == doctest::Approx(0.0));

  std::mt19937_64 rng(1);
  RealGrid b = random_grid(3, 5, rng);
  RealGrid shifted = b;
  shifted.col(0).array() += 0.0;  // per-row constant shift below
  for (int i = 0; i < 3; ++i) shifted.row(i).array() += 7.5;
  CHECK((softmax_rows(b) - softmax_rows(shifted)).cwiseAbs().maxCoeff() < 1e-12);

  // Row stochasticity.
  const RealGrid sm = softmax_rows(b);
  for (int i = 0; i < 3; ++i)
    CHECK(std::abs(sm.row(i).sum() - 1.0) < 1e-12);
}

TEST_CASE("attention head special cases") {
  std::mt19937_64 rng(2);
  const int rows = 4, in = 6, nk = 3;
  const RealGrid u = random_grid(rows, in, rng);

  // Zero q/k force uniform attention; identity values average the rows.
  AttentionBlockParams p;
  p.w_q = RealGrid::Zero(in, nk);
  p.w_k = RealGrid::Zero(in, nk);
  p.w_v = RealGrid::Identity(in, in);
  const RealGrid head = attention_head(u, p);
  const RealGrid mean = u.colwise().mean().replicate(rows, 1);
  CHECK((head - mean).cwiseAbs().maxCoeff() < 1e-12);

  // Single-row input: softmax of 1x1 is 1.
  const RealGrid u1 = random_grid(1, in, rng);
  AttentionBlockParams p2;
  p2.w_q = random_grid(in, nk, rng);
  p2.w_k = random_grid(in, nk, rng);
  p2.w_v = random_grid(in, in, rng);
  CHECK((attention_head(u1, p2) - u1 * p2.w_v).cwiseAbs().maxCoeff() < 1e-12);

  // Straight-line reference evaluation.
  const RealGrid q = u * p2.w_q, k = u * p2.w_k, v = u * p2.w_v;
  const RealGrid ref = softmax_rows(q * k.transpose() / std::sqrt(Real(nk))) * v;
  CHECK((attention_head(u, p2) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("permutation to the frequency layout is a pure reshuffle") {
  std::mt19937_64 rng(3);
  const int n_p = 4, n_sc = 8;
  const RealGrid grid = random_grid(n_p, 2 * n_sc, rng);
  const RealGrid tilde = to_freq_layout(grid, n_sc);
  CHECK(tilde.rows() == n_sc);
  CHECK(tilde.cols() == 2 * n_p);
  CHECK((from_freq_layout(tilde, n_p) - grid).cwiseAbs().maxCoeff() == 0.0);
  // Entry-level check: real and imaginary halves transpose independently.
  for (int p = 0; p < n_p; ++p)
    for (int k = 0; k < n_sc; ++k) {
      CHECK(tilde(k, p) == grid(p, k));
      CHECK(tilde(k, n_p + p) == grid(p, n_sc + k));
    }
}

TEST_CASE("zero parameters reduce the 2D MHA to the residual identity") {
  std::mt19937_64 rng(4);
  const int n_p = 3, n_sc = 5;
  TwoDMhaParams p = init_twod_mha(n_p, n_sc, 4, 3, 9);
  for (auto* m : all_params(p)) m->setZero();
  const RealGrid input = random_grid(n_p, 2 * n_sc, rng);
  CHECK((twod_mha_forward(input, p) - input).cwiseAbs().maxCoeff() == 0.0);

  // Input gradient through the residual path alone is the upstream.
  MhaCache cache;
  twod_mha_forward(input, p, &cache);
  const RealGrid upstream = random_grid(n_p, 2 * n_sc, rng);
  const MhaGrads g = twod_mha_backward(p, cache, upstream);
  CHECK((g.input - upstream).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("forward matches a straight-line composition") {
  std::mt19937_64 rng(5);
  const int n_p = 4, n_sc = 6;
  TwoDMhaParams p = init_twod_mha(n_p, n_sc, 5, 3, 17);
  p.w_o = random_grid(4 * n_sc, 2 * n_sc, rng) * 0.2;
  const RealGrid input = random_grid(n_p, 2 * n_sc, rng);

  const RealGrid head_t = attention_head(input, p.time_block);
  const RealGrid head_f =
      from_freq_layout(attention_head(to_freq_layout(input, n_sc), p.freq_block),
                       n_p);
  RealGrid concat(n_p, 4 * n_sc);
  concat << head_t, head_f;
  const RealGrid ref = input + concat * p.w_o;
  CHECK((twod_mha_forward(input, p) - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("zero upstream gradient zeroes every parameter gradient") {
  std::mt19937_64 rng(6);
  const int n_p = 3, n_sc = 4;
  TwoDMhaParams p = init_twod_mha(n_p, n_sc, 4, 2, 23);
  p.w_o = random_grid(4 * n_sc, 2 * n_sc, rng) * 0.2;
  const RealGrid input = random_grid(n_p, 2 * n_sc, rng);
  MhaCache cache;
  twod_mha_forward(input, p, &cache);
  const MhaGrads g =
      twod_mha_backward(p, cache, RealGrid::Zero(n_p, 2 * n_sc));
  for (const auto* m : all_grads(g.params)) CHECK(m->norm() == 0.0);
  CHECK(g.input.norm() == 0.0);
}

TEST_CASE("gradients match central finite differences") {
  const int n_p = 4, n_sc = 8;
  const Real step = 1e-5;
  Real worst = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(900 + seed);
    TwoDMhaParams p = init_twod_mha(n_p, n_sc, 5, 4, seed);
    p.w_o = random_grid(4 * n_sc, 2 * n_sc, rng) * 0.2;  // exercise the head paths
    const RealGrid input = random_grid(n_p, 2 * n_sc, rng);
    const RealGrid probe = random_grid(n_p, 2 * n_sc, rng);

    MhaCache cache;
    twod_mha_forward(input, p, &cache);
    const MhaGrads g = twod_mha_backward(p, cache, probe);

    auto params = all_params(p);
    auto grads = all_grads(g.params);
    for (size_t pi = 0; pi < params.size(); ++pi) {
      RealGrid& mat = *params[pi];
      // Probe a handful of entries per matrix.
      for (int probe_i = 0; probe_i < 5; ++probe_i) {
        const Eigen::Index idx = (7919 * (probe_i + 1)) % mat.size();
        const Real saved = mat.data()[idx];
        mat.data()[idx] = saved + step;
        const Real up = probe_loss(input, p, probe);
        mat.data()[idx] = saved - step;
        const Real dn = probe_loss(input, p, probe);
        mat.data()[idx] = saved;
        const Real fd = (up - dn) / (2 * step);
        const Real an = grads[pi]->data()[idx];
        const Real rel = std::abs(fd - an) / std::max(1e-8, std::abs(fd));
        worst = std::max(worst, rel);
      }
    }
    // Input gradient too.
    RealGrid in_mut = input;
    for (int probe_i = 0; probe_i < 5; ++probe_i) {
      const Eigen::Index idx = (5417 * (probe_i + 1)) % in_mut.size();
      const Real saved = in_mut.data()[idx];
      in_mut.data()[idx] = saved + step;
      const Real up = probe_loss(in_mut, p, probe);
      in_mut.data()[idx] = saved - step;
      const Real dn = probe_loss(in_mut, p, probe);
      in_mut.data()[idx] = saved;
      const Real fd = (up - dn) / (2 * step);
      const Real an = g.input.data()[idx];
      worst = std::max(worst, std::abs(fd - an) / std::max(1e-8, std::abs(fd)));
    }
  }
  CHECK(worst < 1e-4);
}
