#include "neurorx/toylab.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <atomic>
#include <mutex>
#include <random>
#include <thread>

#include "neurorx/qam.hpp"

namespace neurorx::toylab {

namespace {
constexpr int kDim = 4;  // 2x2 lifted
}

RealGrid toy_channel_sample(uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x70c4));
  std::normal_distribution<Real> gauss(0.0, 1.0);
  for (long attempt = 0; attempt < 1000000; ++attempt) {
    ComplexGrid h(2, 2);
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i)
        h(i, j) = Cx(gauss(rng), gauss(rng)) / std::sqrt(2.0);
    RealGrid lifted = real_channel_form(h);
    Eigen::JacobiSVD<RealGrid> svd(lifted);
    const Real cond = svd.singularValues()(0) / svd.singularValues()(3);
    if (cond < 1.5) return lifted;
  }
  throw ConfigError("toy channel rejection sampling exceeded the draw guard");
}

std::string toy_method_name(ToyMethod m) {
  switch (m) {
    case ToyMethod::AdnnGt: return "adnn-gt";
    case ToyMethod::AdnnLmmse: return "adnn-lmmse";
    case ToyMethod::StructNet: return "structnet";
    case ToyMethod::FourClassMlp: return "fourclass-mlp";
  }
  return "?";
}

Real ToyCell::median_ser() const {
  std::vector<Real> v = ser_per_channel;
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

const ToyCell& ToyResult::cell(ToyMethod m, Real x) const {
  for (const auto& c : cells)
    if (c.method == m && std::abs(c.x - x) < 1e-12) return c;
  throw ConfigError("toy cell not found");
}

namespace {

struct ToySet {
  RealGrid x;  // lattice symbols, kDim x n
  RealGrid y;  // received, kDim x n
};

/// Eb/No in the no-OFDM toy: per-receive-dimension signal power over
/// (2 * bits-per-PAM-symbol) times the per-dimension noise variance, i.e.
/// sigma^2 = P_dim / (2 * log2(sqrt(M)) * 10^(EbNo/10)).
Real toy_noise_sigma(const RealGrid& h, int mod_order, Real ebno_db) {
  const auto lattice = qam::pam_lattice(mod_order);
  Real lattice_power = 0;
  for (int l : lattice) lattice_power += static_cast<Real>(l) * l;
  lattice_power /= lattice.size();
  const Real p_dim = h.array().square().rowwise().sum().mean() * lattice_power;
  const Real bits_per_pam = std::log2(static_cast<Real>(qam::pam_levels(mod_order)));
  return std::sqrt(p_dim /
                   (2.0 * bits_per_pam * std::pow(10.0, ebno_db / 10.0)));
}

ToySet draw_set(const RealGrid& h, int n, int mod_order, Real sigma,
                std::mt19937_64& rng) {
  const auto lattice = qam::pam_lattice(mod_order);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(lattice.size()) - 1);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  ToySet set;
  set.x = RealGrid(kDim, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < kDim; ++i) set.x(i, j) = lattice[pick(rng)];
  set.y = h * set.x;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < kDim; ++i) set.y(i, j) += sigma * gauss(rng);
  return set;
}

RealGrid lmmse_fit(const ToySet& set, Real sigma) {
  RealGrid gram = set.x * set.x.transpose();
  gram.diagonal().array() += sigma * sigma + 1e-9;
  return gram.ldlt().solve(set.x * set.y.transpose()).transpose();
}

struct FlatSamples {
  RealGrid feats;          // kDim x P (feature column per PAM sample)
  Eigen::VectorXi dims;    // P
  Eigen::VectorXi labels;  // P, lattice levels (possibly corrupted)
  Eigen::VectorXi truth;   // P, actual lattice levels
};

FlatSamples flatten(const ToySet& set) {
  const int n = static_cast<int>(set.x.cols());
  FlatSamples f;
  f.feats = RealGrid(kDim, n * kDim);
  f.dims = Eigen::VectorXi(n * kDim);
  f.labels = Eigen::VectorXi(n * kDim);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < kDim; ++i) {
      f.feats.col(j * kDim + i) = set.y.col(j);
      f.dims[j * kDim + i] = i;
      f.labels[j * kDim + i] = static_cast<int>(set.x(i, j));
    }
  f.truth = f.labels;
  return f;
}

void corrupt_labels(FlatSamples& f, Real fraction, int mod_order,
                    std::mt19937_64& rng) {
  const auto lattice = qam::pam_lattice(mod_order);
  const Eigen::Index P = f.labels.size();
  std::vector<Eigen::Index> order(P);
  for (Eigen::Index i = 0; i < P; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  const Eigen::Index n_corrupt = static_cast<Eigen::Index>(std::lround(fraction * P));
  std::uniform_int_distribution<int> pick(0, static_cast<int>(lattice.size()) - 2);
  for (Eigen::Index i = 0; i < n_corrupt; ++i) {
    const Eigen::Index idx = order[i];
    int repl = lattice[pick(rng)];
    if (repl == f.labels[idx]) repl = lattice.back();
    f.labels[idx] = repl;
  }
}

struct AuditCounts {
  long binary_samples = 0;
  long binary_wrong = 0;
  long pam_corrupted = 0;
};

/// Counts constructed binary samples whose sign label disagrees with the
/// label implied by the true transmitted symbol (b = s + x_true).
AuditCounts audit_binary(const FlatSamples& f, int mod_order) {
  AuditCounts a;
  for (Eigen::Index i = 0; i < f.labels.size(); ++i) {
    const auto [pos, neg] = construct_binary_samples(f.labels[i], mod_order);
    const Real b_pos = pos.shift_value + f.truth[i];
    const Real b_neg = neg.shift_value + f.truth[i];
    a.binary_samples += 2;
    if (b_pos < 0) ++a.binary_wrong;
    if (b_neg > 0) ++a.binary_wrong;
    if (f.labels[i] != f.truth[i]) ++a.pam_corrupted;
  }
  return a;
}

StructNetParams train_toy_struct(const RealGrid& pe_init, bool learn_pe,
                                 const FlatSamples& train, const Mlp& offline,
                                 const ToyOptions& opts, int mod_order) {
  StructNetParams params;
  params.pe = pe_init;
  params.clf = offline;
  SampleBatch batch = make_binary_batch(train.feats, train.dims, train.labels,
                                        mod_order, RealVec::Ones(train.dims.size()));
  TrainOptions warm;
  warm.epochs = opts.warm_epochs;
  warm.lr_clf = opts.lr_clf;
  warm.train_pe = false;
  train_pilot(params, batch, warm);
  TrainOptions topt;
  // Frozen-PE baselines converge on the classifier alone in half the budget.
  topt.epochs = learn_pe ? opts.epochs : opts.epochs / 2;
  topt.lr_clf = opts.lr_clf;
  topt.lr_pe = opts.lr_pe;
  topt.train_pe = learn_pe;
  train_pilot(params, batch, topt);
  return params;
}

long count_errors(const StructNetParams& params, const ToySet& test,
                  int mod_order, long* bit_errors) {
  Detection det = detect_pam(params, test.y, mod_order);
  long errors = 0;
  for (Eigen::Index j = 0; j < test.x.cols(); ++j)
    for (int i = 0; i < kDim; ++i) {
      const int truth = static_cast<int>(test.x(i, j));
      if (det.levels(i, j) != truth) ++errors;
      if (bit_errors) {
        Bits a, b;
        qam::append_level_bits(det.levels(i, j), mod_order, a);
        qam::append_level_bits(truth, mod_order, b);
        for (size_t u = 0; u < a.size(); ++u)
          if (a[u] != b[u]) ++(*bit_errors);
      }
    }
  return errors;
}

/// Direct multi-class comparator: same masked interface driven by the true
/// channel, output layer of lattice size.
Mlp train_fourclass(const RealGrid& h, const FlatSamples& train,
                    const ToyOptions& opts, int mod_order, uint64_t seed) {
  const auto lattice = qam::pam_lattice(mod_order);
  Mlp mlp = init_mlp(kDim, opts.hidden, static_cast<int>(lattice.size()), seed);
  const Eigen::Index P = train.dims.size();
  RealGrid inputs(kDim, P);
  Eigen::VectorXi cls(P);
  for (Eigen::Index i = 0; i < P; ++i) {
    inputs.col(i) = masked_input(h, train.feats.col(i), train.dims[i], 0.0);
    cls[i] = (train.labels[i] + static_cast<int>(lattice.size()) - 1) / 2;
  }
  const RealVec w = RealVec::Ones(P);
  for (int ep = 0; ep < opts.warm_epochs + opts.epochs / 2; ++ep) {
    Mlp grads = zeros_like(mlp);
    mlp_ce_backward(mlp, inputs, cls, w, grads, nullptr);
    axpy(mlp, grads, -opts.lr_clf);
  }
  return mlp;
}

long count_errors_fourclass(const Mlp& mlp, const RealGrid& h, const ToySet& test,
                            int mod_order, long* bit_errors) {
  const auto lattice = qam::pam_lattice(mod_order);
  const Eigen::Index n = test.x.cols();
  RealGrid inputs(kDim, n * kDim);
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < kDim; ++i)
      inputs.col(j * kDim + i) = masked_input(h, test.y.col(j), i, 0.0);
  RealGrid logits = mlp_logits(mlp, inputs);
  long errors = 0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (int i = 0; i < kDim; ++i) {
      Eigen::Index arg = 0;
      logits.col(j * kDim + i).maxCoeff(&arg);
      const int level = lattice[static_cast<int>(arg)];
      const int truth = static_cast<int>(test.x(i, j));
      if (level != truth) ++errors;
      if (bit_errors) {
        Bits a, b;
        qam::append_level_bits(level, mod_order, a);
        qam::append_level_bits(truth, mod_order, b);
        for (size_t u = 0; u < a.size(); ++u)
          if (a[u] != b[u]) ++(*bit_errors);
      }
    }
  return errors;
}

template <typename PerChannel>
void parallel_channels(int n_channels, int parallelism, const PerChannel& fn) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      const int c = next.fetch_add(1);
      if (c >= n_channels) return;
      fn(c);
    }
  };
  std::vector<std::thread> pool;
  for (int w = 1; w < std::max(1, parallelism); ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace

ToyResult toy_experiment_a(const std::vector<Real>& ebno_list,
                           const ToyOptions& opts, uint64_t seed) {
  const int mod = opts.mod_order;
  const Mlp offline =
      offline_pretrain(kDim, opts.hidden, mod, opts.offline_samples,
                       opts.offline_epochs, opts.offline_lr, derive_seed(seed, 1));

  const std::vector<ToyMethod> methods = {ToyMethod::AdnnGt, ToyMethod::AdnnLmmse,
                                          ToyMethod::StructNet};
  ToyResult res;
  for (ToyMethod m : methods)
    for (Real e : ebno_list) {
      ToyCell c;
      c.method = m;
      c.x = e;
      c.ser_per_channel.assign(opts.n_channels, 0.0);
      res.cells.push_back(c);
    }
  auto cell_at = [&](ToyMethod m, size_t ei) -> ToyCell& {
    for (auto& c : res.cells)
      if (c.method == m && c.x == ebno_list[ei]) return c;
    throw ConfigError("cell");
  };

  std::mutex mu;

  parallel_channels(opts.n_channels, opts.parallelism, [&](int c) {
    const RealGrid h = toy_channel_sample(derive_seed(seed, 2, c));
    std::mt19937_64 rng(derive_seed(seed, 3, c));
    for (size_t ei = 0; ei < ebno_list.size(); ++ei) {
      const Real sigma = toy_noise_sigma(h, mod, ebno_list[ei]);
      const ToySet lmmse_set = draw_set(h, opts.n_lmmse, mod, sigma, rng);
      const ToySet train_set =
          draw_set(h, opts.n_train - opts.n_lmmse, mod, sigma, rng);
      const ToySet test_set = draw_set(h, opts.n_test, mod, sigma, rng);
      const RealGrid h_est = lmmse_fit(lmmse_set, sigma);
      const FlatSamples train = flatten(train_set);

      for (ToyMethod m : methods) {
        StructNetParams params;
        if (m == ToyMethod::AdnnGt)
          params = train_toy_struct(h, false, train, offline, opts, mod);
        else if (m == ToyMethod::AdnnLmmse)
          params = train_toy_struct(h_est, false, train, offline, opts, mod);
        else
          params = train_toy_struct(h_est, true, train, offline, opts, mod);
        long bit_errors = 0;
        const long errors = count_errors(params, test_set, mod, &bit_errors);
        std::lock_guard<std::mutex> lock(mu);
        ToyCell& cell = cell_at(m, ei);
        cell.ser_per_channel[c] =
            static_cast<Real>(errors) / (opts.n_test * kDim);
        cell.symbols += opts.n_test * kDim;
        cell.symbol_errors += errors;
        cell.bits += static_cast<long>(opts.n_test) * kDim * 2;
        cell.bit_errors += bit_errors;
      }
    }
  });
  return res;
}

ToyResult toy_experiment_b(const std::vector<Real>& corrupt_fractions,
                           const ToyOptions& opts, uint64_t seed) {
  const int mod = opts.mod_order;
  const Real ebno_db = 5.0;
  const Mlp offline =
      offline_pretrain(kDim, opts.hidden, mod, opts.offline_samples,
                       opts.offline_epochs, opts.offline_lr, derive_seed(seed, 1));

  const std::vector<ToyMethod> methods = {ToyMethod::StructNet,
                                          ToyMethod::FourClassMlp, ToyMethod::AdnnGt,
                                          ToyMethod::AdnnLmmse};
  ToyResult res;
  for (ToyMethod m : methods)
    for (Real f : corrupt_fractions) {
      ToyCell c;
      c.method = m;
      c.x = f;
      c.ser_per_channel.assign(opts.n_channels, 0.0);
      res.cells.push_back(c);
    }
  auto cell_at = [&](ToyMethod m, size_t fi) -> ToyCell& {
    for (auto& c : res.cells)
      if (c.method == m && c.x == corrupt_fractions[fi]) return c;
    throw ConfigError("cell");
  };
  std::mutex mu;

  parallel_channels(opts.n_channels, opts.parallelism, [&](int c) {
    const RealGrid h = toy_channel_sample(derive_seed(seed, 2, c));
    std::mt19937_64 rng(derive_seed(seed, 3, c));
    const Real sigma = toy_noise_sigma(h, mod, ebno_db);
    const ToySet lmmse_set = draw_set(h, opts.n_lmmse, mod, sigma, rng);
    const ToySet train_clean =
        draw_set(h, opts.n_train - opts.n_lmmse, mod, sigma, rng);
    const ToySet test_set = draw_set(h, opts.n_test, mod, sigma, rng);
    const RealGrid h_est = lmmse_fit(lmmse_set, sigma);

    for (size_t fi = 0; fi < corrupt_fractions.size(); ++fi) {
      FlatSamples train = flatten(train_clean);
      corrupt_labels(train, corrupt_fractions[fi], mod, rng);
      const AuditCounts audit = audit_binary(train, mod);

      for (ToyMethod m : methods) {
        long errors = 0, bit_errors = 0;
        if (m == ToyMethod::FourClassMlp) {
          const Mlp mlp =
              train_fourclass(h, train, opts, mod, derive_seed(seed, 4, c));
          errors = count_errors_fourclass(mlp, h, test_set, mod, &bit_errors);
        } else {
          StructNetParams params;
          if (m == ToyMethod::AdnnGt)
            params = train_toy_struct(h, false, train, offline, opts, mod);
          else if (m == ToyMethod::AdnnLmmse)
            params = train_toy_struct(h_est, false, train, offline, opts, mod);
          else
            params = train_toy_struct(h_est, true, train, offline, opts, mod);
          errors = count_errors(params, test_set, mod, &bit_errors);
        }
        std::lock_guard<std::mutex> lock(mu);
        ToyCell& cell = cell_at(m, fi);
        cell.ser_per_channel[c] =
            static_cast<Real>(errors) / (opts.n_test * kDim);
        cell.symbols += opts.n_test * kDim;
        cell.symbol_errors += errors;
        cell.bits += static_cast<long>(opts.n_test) * kDim * 2;
        cell.bit_errors += bit_errors;
      }
      std::lock_guard<std::mutex> lock(mu);
      res.audit_binary_samples += audit.binary_samples;
      res.audit_binary_wrong += audit.binary_wrong;
      res.audit_pam_corrupted += audit.pam_corrupted;
      if (audit.binary_wrong > audit.pam_corrupted) res.audit_bound_violated = true;
    }
  });
  return res;
}

}  // namespace neurorx::toylab
