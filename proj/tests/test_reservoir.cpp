#include <doctest.h>

#include <random>

#include "neurorx/reservoir.hpp"

using namespace neurorx;

namespace {

ComplexGrid random_grid(int rows, int cols, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<Real> g(0, 1);
  ComplexGrid out(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) out(i, j) = Cx(g(rng), g(rng));
  return out;
}

Real power_iteration_radius(const ComplexGrid& w) {
  CxVec v = CxVec::Ones(w.rows()).normalized();
  Real lambda = 0;
  for (int it = 0; it < 2000; ++it) {
    v = (w * v).eval();
    lambda = v.norm();
    v /= lambda;
  }
  return lambda;
}

}  // namespace

TEST_CASE("spectral radius scaling via power iteration oracle") {
  const auto m = init_reservoir(2, 2, 16, 4, 0.9, 0.5, 7);
  CHECK(std::abs(power_iteration_radius(m.w_res) - 0.9) < 1e-6);
}

TEST_CASE("same seed gives identical weights") {
  const auto a = init_reservoir(2, 2, 8, 4, 0.9, 0.5, 3);
  const auto b = init_reservoir(2, 2, 8, 4, 0.9, 0.5, 3);
  CHECK((a.w_in - b.w_in).norm() == 0.0);
  CHECK((a.w_res - b.w_res).norm() == 0.0);
}

TEST_CASE("zero input gives zero trajectory; states bounded") {
  const auto m = init_reservoir(2, 2, 8, 4, 0.9, 0.5, 3);
  const ComplexGrid z = run_states(m, ComplexGrid::Zero(2, 20));
  CHECK(z.norm() == 0.0);

  const ComplexGrid traj = run_states(m, 3.0 * random_grid(2, 50, 1));
  for (int j = 0; j < 50; ++j)
    for (int i = 0; i < m.n_neurons; ++i) {
      CHECK(std::abs(traj(i, j).real()) < 1.0);
      CHECK(std::abs(traj(i, j).imag()) < 1.0);
    }
}

TEST_CASE("echo-state forgetting of the first input column") {
  const auto m = init_reservoir(1, 1, 16, 1, 0.9, 0.5, 11);
  ComplexGrid u = random_grid(1, 240, 2);
  ComplexGrid u2 = u;
  u2(0, 0) += Cx(2.0, -1.0);
  const ComplexGrid za = run_states(m, u);
  const ComplexGrid zb = run_states(m, u2);
  const Real dist =
      (za.col(200).head(m.n_neurons) - zb.col(200).head(m.n_neurons)).norm();
  CHECK(dist < 1e-3);
}

TEST_CASE("windowed input is causal with bounded memory") {
  const int win = 4;
  const auto m = init_reservoir(1, 1, 4, win, 0.0, 0.5, 5);  // no recurrence
  ComplexGrid u = random_grid(1, 30, 3);
  ComplexGrid u2 = u;
  u2(0, 10) += Cx(1.0, 1.0);
  const ComplexGrid za = run_states(m, u);
  const ComplexGrid zb = run_states(m, u2);
  // Columns before the perturbation are identical (causality)...
  for (int j = 0; j < 10; ++j) CHECK((za.col(j) - zb.col(j)).norm() == 0.0);
  // ...and with zero recurrence the effect dies after the window.
  for (int j = 10 + win; j < 30; ++j)
    CHECK((za.col(j) - zb.col(j)).norm() == 0.0);
  CHECK((za.col(10) - zb.col(10)).norm() > 0.0);
}

TEST_CASE("LS training recovers an exactly representable target") {
  const auto m = init_reservoir(2, 1, 8, 2, 0.9, 0.5, 9);
  const ComplexGrid z = run_states(m, random_grid(2, 60, 4));
  const ComplexGrid target = z.row(0);
  const LsSolution sol = train_ls(z, target, 0.0);
  CHECK(sol.residual < 1e-10);
  CHECK(std::abs(sol.w_out(0, 0) - Cx(1, 0)) < 1e-8);
}

TEST_CASE("LS matches an independent normal-equations solve") {
  const ComplexGrid z = random_grid(6, 40, 8);
  const ComplexGrid o = random_grid(2, 40, 9);
  const Real ridge = 1e-8;
  const LsSolution sol = train_ls(z, o, ridge);

  ComplexGrid gram = z * z.adjoint();
  gram.diagonal().array() += ridge;
  const ComplexGrid w_ref = o * z.adjoint() * gram.inverse();
  CHECK((sol.w_out - w_ref).norm() / w_ref.norm() < 1e-8);
}

TEST_CASE("huge ridge shrinks the weights to zero") {
  const ComplexGrid z = random_grid(6, 40, 8);
  const ComplexGrid o = random_grid(2, 40, 9);
  CHECK(train_ls(z, o, 1e12).w_out.norm() < 1e-6);
}

TEST_CASE("RLS with alpha=1 reproduces ridge LS") {
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 8, n = 120;
    const ComplexGrid z = random_grid(d, n, 100 + trial);
    const ComplexGrid o = random_grid(2, n, 200 + trial);
    const Real delta = 1e-6;

    ComplexGrid w = ComplexGrid::Zero(2, d);
    RlsState rls;
    rls.alpha = 1.0;
    rls.phi_inv = ComplexGrid::Identity(d, d) / delta;
    for (int j = 0; j < n; ++j) rls_step(w, rls, z.col(j), o.col(j));

    const LsSolution ref = train_ls(z, o, delta);
    CHECK((w - ref.w_out).norm() / ref.w_out.norm() < 1e-6);
  }
}

TEST_CASE("zero-error sample leaves the weights unchanged") {
  const int d = 6;
  ComplexGrid w = random_grid(2, d, 31);
  RlsState rls;
  rls.alpha = 0.99;
  rls.phi_inv = ComplexGrid::Identity(d, d);
  const CxVec z = random_grid(d, 1, 32).col(0);
  const CxVec target = w * z;
  const ComplexGrid before = w;
  rls_step(w, rls, z, target);
  CHECK((w - before).norm() < 1e-12);
}

TEST_CASE("phi stays Hermitian across many updates") {
  const int d = 6;
  ComplexGrid w = ComplexGrid::Zero(1, d);
  RlsState rls;
  rls.alpha = 0.999;
  rls.phi_inv = ComplexGrid::Identity(d, d) * 1e6;
  std::mt19937_64 rng(5);
  std::normal_distribution<Real> g(0, 1);
  for (int it = 0; it < 10000; ++it) {
    CxVec z(d), o(1);
    for (int i = 0; i < d; ++i) z[i] = Cx(g(rng), g(rng));
    o[0] = Cx(g(rng), g(rng));
    rls_step(w, rls, z, o);
  }
  CHECK((rls.phi_inv - rls.phi_inv.adjoint()).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("forgetting factor tracks a switching channel better") {
  // Scalar channel y = h x, h switches halfway; z = [x].
  std::mt19937_64 rng(17);
  std::normal_distribution<Real> g(0, 1);
  const int n = 400;
  ComplexGrid z(1, n), o(1, n);
  for (int j = 0; j < n; ++j) {
    const Cx x(g(rng), g(rng));
    const Cx h = j < n / 2 ? Cx(1.0, 0.3) : Cx(-0.4, 0.8);
    z(0, j) = x;
    o(0, j) = h * x;
  }
  auto run = [&](Real alpha) {
    ComplexGrid w = ComplexGrid::Zero(1, 1);
    RlsState rls;
    rls.alpha = alpha;
    rls.phi_inv = ComplexGrid::Identity(1, 1) * 1e6;
    Real tail_err = 0;
    for (int j = 0; j < n; ++j) {
      if (j >= 3 * n / 4) tail_err += std::norm(o(0, j) - (w * z.col(j))(0));
      rls_step(w, rls, z.col(j), o.col(j));
    }
    return tail_err;
  };
  CHECK(run(0.95) < run(1.0));
}

TEST_CASE("identity task reaches low NMSE after LS training") {
  const auto m = init_reservoir(1, 1, 16, 8, 0.9, 0.5, 21);
  const ComplexGrid u = random_grid(1, 600, 6);
  const ComplexGrid z = run_states(m, u);
  const LsSolution sol = train_ls(z.leftCols(400), u.leftCols(400), 1e-9);

  const ComplexGrid pred = sol.w_out * z.rightCols(200);
  const Real nmse = (pred - u.rightCols(200)).squaredNorm() /
                    u.rightCols(200).squaredNorm();
  CHECK(10.0 * std::log10(nmse) < -30.0);
}

TEST_CASE("pilot-trained equalization of a static flat channel") {
  // y = H x + w at 30 dB; the linear readout sees windowed y.
  std::mt19937_64 rng(23);
  std::normal_distribution<Real> g(0, 1);
  const int n_t = 2, n_r = 2, n = 800;
  ComplexGrid h(n_r, n_t);
  for (int j = 0; j < n_t; ++j)
    for (int i = 0; i < n_r; ++i) h(i, j) = Cx(g(rng), g(rng)) / std::sqrt(2.0);
  ComplexGrid x = random_grid(n_t, n, 7) / std::sqrt(2.0);
  ComplexGrid y = h * x;
  const Real noise = std::sqrt(1e-3 / 2.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n_r; ++i) y(i, j) += Cx(noise * g(rng), noise * g(rng));

  const auto m = init_reservoir(n_r, n_t, 16, 4, 0.9, 0.5, 29);
  const ComplexGrid z = run_states(m, y);
  const LsSolution sol = train_ls(z.leftCols(500), x.leftCols(500), 1e-9);
  const ComplexGrid pred = sol.w_out * z.rightCols(200);
  const Real nmse = (pred - x.rightCols(200)).squaredNorm() /
                    x.rightCols(200).squaredNorm();
  CHECK(10.0 * std::log10(nmse) < -20.0);
}
