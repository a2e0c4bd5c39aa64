#include <doctest.h>

#include <random>

#include "neurorx/qam.hpp"
#include "neurorx/structnet.hpp"

using namespace neurorx;

namespace {

RealGrid random_grid(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  std::normal_distribution<Real> g(0, 1);
  RealGrid out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = g(rng);
  return out;
}

/// Exact noiseless ratio oracle from the true channel: recovers the aligned
/// lattice coordinate and saturates the clamped log ratio at +-30.
LogRatioFn oracle_ratio(const RealGrid& h_true) {
  const RealGrid h_inv = h_true.inverse();
  return [h_inv](const RealVec& y, int dim, Real shift_value) -> Real {
    const Real coord = (h_inv * y)(dim) + shift_value;
    const long rounded = std::lround(coord);
    if (std::abs(coord - rounded) > 1e-6) return 0.0;
    if (rounded == 1) return 30.0;
    if (rounded == -1) return -30.0;
    return 0.0;
  };
}

}  // namespace

TEST_CASE("binary sample construction matches the published table") {
  auto [p3, n3] = construct_binary_samples(-3, 16);
  CHECK(p3.shift_value == 4.0);
  CHECK(n3.shift_value == 2.0);
  CHECK(p3.label == 1);
  CHECK(n3.label == -1);

  auto [p1, n1] = construct_binary_samples(1, 16);
  CHECK(p1.shift_value == 0.0);
  CHECK(n1.shift_value == -2.0);

  // QPSK: K = 0.
  auto [pq, nq] = construct_binary_samples(1, 4);
  CHECK(pq.shift_value == 0.0);
  CHECK(nq.shift_value == -2.0);

  CHECK_THROWS_AS(construct_binary_samples(2, 16), ConfigError);
  CHECK_THROWS_AS(construct_binary_samples(5, 16), ConfigError);
}

TEST_CASE("incorrect PAM labels flip at most one of the two binary samples") {
  // Exhaustive over ordered pairs (true, assumed) for M in {4, 16, 64}.
  for (int m : {4, 16, 64}) {
    for (int truth : qam::pam_lattice(m))
      for (int wrong : qam::pam_lattice(m)) {
        if (truth == wrong) continue;
        auto [pos, neg] = construct_binary_samples(wrong, m);
        const Real b_pos = pos.shift_value + truth;
        const Real b_neg = neg.shift_value + truth;
        const int mislabeled = (b_pos < 0 ? 1 : 0) + (b_neg > 0 ? 1 : 0);
        CHECK(mislabeled <= 1);
      }
  }
}

TEST_CASE("shifting process identities") {
  std::mt19937_64 rng(1);
  const RealGrid pe = random_grid(4, 4, rng);
  const RealVec y = random_grid(4, 1, rng).col(0);

  CHECK((shift(y, 0.0, pe, 2) - y).norm() == 0.0);
  const RealVec ab = shift(shift(y, 1.5, pe, 1), -3.0, pe, 1);
  CHECK((ab - shift(y, -1.5, pe, 1)).norm() < 1e-12);

  // Noiseless consistency: for y = H x, shifting moves the n-th symbol.
  RealVec x(4);
  x << -3, 1, 3, -1;
  const RealVec yx = pe * x;
  RealVec x_shift = x;
  x_shift[2] += 4.0;
  CHECK((shift(yx, 4.0, pe, 2) - pe * x_shift).norm() < 1e-12);
}

TEST_CASE("binary_forward basics") {
  Mlp clf = init_mlp(4, 8, 2, 3);
  clf.w1.setZero();
  clf.b1.setZero();
  clf.w2.setZero();
  clf.b2.setZero();
  std::mt19937_64 rng(2);
  const RealVec in = random_grid(4, 1, rng).col(0);
  auto [pp, pm] = binary_forward(clf, in);
  CHECK(pp == doctest::Approx(0.5));
  CHECK(pm == doctest::Approx(0.5));

  clf = init_mlp(4, 8, 2, 4);
  auto [p2, m2] = binary_forward(clf, in);
  CHECK(p2 + m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p2 > 0.0);
  CHECK(p2 < 1.0);
}

TEST_CASE("posterior assembly special cases") {
  // A ratio of one everywhere gives the uniform posterior.
  const LogRatioFn flat = [](const RealVec&, int, Real) { return 0.0; };
  RealVec y = RealVec::Zero(4);
  const ClassPosterior post = assemble_class_posterior(flat, y, 0, 16);
  CHECK(post.probs.size() == 4);
  for (int j = 0; j < 4; ++j) CHECK(post.probs[j] == doctest::Approx(0.25));
  CHECK(std::abs(post.probs.sum() - 1.0) < 1e-9);

  // QPSK reduces to the single ratio at shift zero.
  const LogRatioFn biased = [](const RealVec&, int, Real s) {
    return s == 0.0 ? 2.0 : -100.0;  // only shift 0 is ever requested
  };
  const ClassPosterior q = assemble_class_posterior(biased, y, 0, 4);
  CHECK(q.probs.size() == 2);
  CHECK(q.probs[1] / q.probs[0] == doctest::Approx(std::exp(2.0)));
  CHECK(q.argmax_level == 1);
}

TEST_CASE("noiseless oracle detection is exact over 1e4 trials") {
  std::mt19937_64 rng(5);
  const auto lattice = qam::pam_lattice(16);
  std::uniform_int_distribution<int> pick(0, 3);
  long errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    RealGrid h = random_grid(4, 4, rng);
    while (std::abs(h.determinant()) < 0.3) h = random_grid(4, 4, rng);
    const LogRatioFn oracle = oracle_ratio(h);
    for (int rep = 0; rep < 25; ++rep) {
      RealVec x(4);
      for (int i = 0; i < 4; ++i) x[i] = lattice[pick(rng)];
      const RealVec y = h * x;
      for (int n = 0; n < 4; ++n) {
        const ClassPosterior post = assemble_class_posterior(oracle, y, n, 16);
        if (post.argmax_level != static_cast<int>(x[n])) ++errors;
      }
    }
  }
  CHECK(errors == 0);
}

TEST_CASE("attention weight thresholding") {
  CHECK(attention_weight(0.49, 0.5) == 0.0);
  CHECK(attention_weight(0.8, 0.5) == 0.8);
  CHECK(attention_weight(0.5, 0.5) == 0.5);
}

TEST_CASE("offline pretraining yields an accurate nearest-neighbor mapper") {
  const int d = 4;
  const Mlp clf = offline_pretrain(d, 32, 4, 1000, 150, 0.05, 11);
  const Mlp clf2 = offline_pretrain(d, 32, 4, 1000, 150, 0.05, 11);
  CHECK((clf.w1 - clf2.w1).norm() == 0.0);  // determinism

  // Behavioral check from the identity-like task.
  RealVec probe = RealVec::Zero(d);
  probe[0] = 1.0;
  auto [pp, pm] = binary_forward(clf, probe);
  CHECK(pp > 0.5);

  // Held-out accuracy at 10 dB.
  std::mt19937_64 rng(12);
  std::normal_distribution<Real> g(0, 1);
  std::uniform_int_distribution<int> sgn(0, 1);
  const Real sigma = std::sqrt(1.0 / (2.0 * std::pow(10.0, 1.0)));
  StructNetParams params;
  params.pe = RealGrid::Identity(d, d);
  params.clf = clf;
  long correct = 0, total = 0;
  for (int i = 0; i < 2000; ++i) {
    const int n = i % d;
    const int e = sgn(rng) ? 1 : -1;
    RealVec y(d);
    for (int j = 0; j < d; ++j) y[j] = (sgn(rng) ? 1.0 : -1.0) + sigma * g(rng);
    y[n] = e + sigma * g(rng);
    auto [pp2, pm2] = binary_forward(params.clf, masked_input(params.pe, y, n, 0.0));
    if ((pp2 > 0.5) == (e > 0)) ++correct;
    ++total;
  }
  CHECK(static_cast<Real>(correct) / total > 0.95);
}

TEST_CASE("PE initialization fits the effective channel") {
  std::mt19937_64 rng(13);
  const auto lattice = qam::pam_lattice(16);
  std::uniform_int_distribution<int> pick(0, 3);
  RealGrid x(4, 200);
  for (int j = 0; j < 200; ++j)
    for (int i = 0; i < 4; ++i) x(i, j) = lattice[pick(rng)];

  // Perfectly equalized pilots at mild noise: pe approaches identity.
  std::normal_distribution<Real> g(0, 1);
  RealGrid y = x;
  for (int j = 0; j < 200; ++j)
    for (int i = 0; i < 4; ++i) y(i, j) += 0.05 * g(rng);
  const RealGrid pe = init_pe_lmmse(y, x);
  CHECK((pe - RealGrid::Identity(4, 4)).norm() < 0.05);
  for (int n = 0; n < 4; ++n) CHECK(pe.col(n).norm() < 10.0);

  CHECK_THROWS_AS(init_pe_lmmse(RealGrid(4, 0), RealGrid(4, 0)), ConfigError);
}

TEST_CASE("pilot training: doubling, monotone loss on a noiseless batch") {
  std::mt19937_64 rng(17);
  const RealGrid h = random_grid(4, 4, rng) * 0.5 +
                     RealGrid::Identity(4, 4);  // mild channel
  const auto lattice = qam::pam_lattice(16);
  std::uniform_int_distribution<int> pick(0, 3);
  const int P = 160;
  RealGrid x(4, P);
  for (int j = 0; j < P; ++j)
    for (int i = 0; i < 4; ++i) x(i, j) = lattice[pick(rng)];
  const RealGrid y = h * x;

  RealGrid feats(4, P * 4);
  Eigen::VectorXi dims(P * 4), labels(P * 4);
  for (int j = 0; j < P; ++j)
    for (int i = 0; i < 4; ++i) {
      feats.col(j * 4 + i) = y.col(j);
      dims[j * 4 + i] = i;
      labels[j * 4 + i] = static_cast<int>(x(i, j));
    }
  const SampleBatch batch =
      make_binary_batch(feats, dims, labels, 16, RealVec::Ones(P * 4));
  CHECK(batch.size() == 2 * P * 4);

  StructNetParams params;
  params.pe = h;
  params.clf = init_mlp(4, 32, 2, 19);
  TrainOptions opts;
  opts.epochs = 30;
  opts.lr_clf = 0.02;
  opts.lr_pe = 0.005;
  const auto losses = train_pilot(params, batch, opts);
  for (size_t i = 1; i < losses.size(); ++i)
    CHECK(losses[i] <= losses[i - 1] + 1e-6);
}

TEST_CASE("struct loss gradients match finite differences") {
  const Real step = 1e-5;
  Real worst = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(300 + seed);
    const int d = 4, P = 6;
    StructNetParams params;
    params.pe = random_grid(d, d, rng);
    params.clf = init_mlp(d, 5, 2, seed);

    const auto lattice = qam::pam_lattice(16);
    std::uniform_int_distribution<int> pick(0, 3);
    RealGrid feats = random_grid(d, P, rng);
    Eigen::VectorXi dims(P), labels(P);
    RealVec weights(P);
    std::uniform_real_distribution<Real> uni(0.2, 1.0);
    for (int j = 0; j < P; ++j) {
      dims[j] = j % d;
      labels[j] = lattice[pick(rng)];
      weights[j] = uni(rng);
    }
    const SampleBatch batch = make_binary_batch(feats, dims, labels, 16, weights);
    const StructLossGrads g = struct_loss_grads(params, batch, false);

    auto loss_of = [&]() { return struct_loss_grads(params, batch, false).loss; };
    std::vector<std::pair<RealGrid*, const RealGrid*>> mats = {
        {&params.pe, &g.pe},
        {&params.clf.w1, &g.clf.w1},
        {&params.clf.w2, &g.clf.w2}};
    for (auto& [mat, grad] : mats) {
      for (int probe_i = 0; probe_i < 6; ++probe_i) {
        const Eigen::Index idx = (7919 * (probe_i + 1)) % mat->size();
        const Real saved = mat->data()[idx];
        mat->data()[idx] = saved + step;
        const Real up = loss_of();
        mat->data()[idx] = saved - step;
        const Real dn = loss_of();
        mat->data()[idx] = saved;
        const Real fd = (up - dn) / (2 * step);
        const Real an = grad->data()[idx];
        if (std::abs(fd) < 1e-10 && std::abs(an) < 1e-10) continue;
        worst = std::max(worst, std::abs(fd - an) / std::max(1e-7, std::abs(fd)));
      }
    }
    // Bias vectors.
    std::vector<std::pair<RealVec*, const RealVec*>> vecs = {
        {&params.clf.b1, &g.clf.b1}, {&params.clf.b2, &g.clf.b2}};
    for (auto& [vec, grad] : vecs)
      for (int probe_i = 0; probe_i < 3; ++probe_i) {
        const Eigen::Index idx = (131 * (probe_i + 1)) % vec->size();
        const Real saved = (*vec)[idx];
        (*vec)[idx] = saved + step;
        const Real up = loss_of();
        (*vec)[idx] = saved - step;
        const Real dn = loss_of();
        (*vec)[idx] = saved;
        const Real fd = (up - dn) / (2 * step);
        worst = std::max(worst,
                         std::abs(fd - (*grad)[idx]) / std::max(1e-7, std::abs(fd)));
      }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("DF fine-tuning skips when every weight is below threshold") {
  std::mt19937_64 rng(23);
  StructNetParams params;
  params.pe = RealGrid::Identity(4, 4);
  params.clf = init_mlp(4, 8, 2, 29);
  const Mlp before = params.clf;

  const RealGrid feats = random_grid(4, 6, rng);
  Eigen::VectorXi dims(6), detected(6);
  RealVec conf(6);
  for (int i = 0; i < 6; ++i) {
    dims[i] = i % 4;
    detected[i] = 1;
    conf[i] = 0.9;
  }
  TrainOptions opts;
  opts.epochs = 2;
  CHECK(!finetune_df(params, feats, dims, detected, conf, 1.01, 16, opts));
  CHECK((params.clf.w1 - before.w1).norm() == 0.0);
  CHECK(finetune_df(params, feats, dims, detected, conf, 0.5, 16, opts));
}

TEST_CASE("70 percent corrupted PAM labels give 35 percent binary errors") {
  std::mt19937_64 rng(31);
  const auto lattice = qam::pam_lattice(16);
  std::uniform_int_distribution<int> pick(0, 3), alt(0, 2);
  const int P = 20000;
  long wrong_binary = 0;
  for (int i = 0; i < P; ++i) {
    const int truth = lattice[pick(rng)];
    int label = truth;
    if (i < static_cast<int>(0.7 * P)) {
      // Uniform replacement over the other levels.
      int repl = lattice[alt(rng)];
      if (repl == truth) repl = lattice[3];
      label = repl;
    }
    auto [pos, neg] = construct_binary_samples(label, 16);
    if (pos.shift_value + truth < 0) ++wrong_binary;
    if (neg.shift_value + truth > 0) ++wrong_binary;
  }
  const Real rate = static_cast<Real>(wrong_binary) / (2 * P);
  CHECK(rate == doctest::Approx(0.35).epsilon(0.01));
  CHECK(rate <= 0.5);
}
