#include "neurorx/structnet.hpp"

#include <random>

#include "neurorx/qam.hpp"

namespace neurorx {

namespace {

constexpr Real kLogitClamp = 30.0;

/// Rational tanh approximation (|error| ~ 1e-7); a single branch-free pass
/// that auto-vectorizes, since std::tanh on doubles dominates the training
/// profile otherwise. The backward pass differentiates this exact rational,
/// not the ideal tanh, so gradients match finite differences everywhere
/// including the clamp region.
struct TanhPoly {
  static constexpr Real bound = 7.90531110763549805;
  static constexpr Real a1 = 4.89352455891786e-03, a3 = 6.37261928875436e-04,
                        a5 = 1.48572235717979e-05, a7 = 5.12229709037114e-08,
                        a9 = -8.60467152213735e-11, a11 = 2.00018790482477e-13,
                        a13 = -2.76076847742355e-16;
  static constexpr Real b0 = 4.89352518554385e-03, b2 = 2.26843463243900e-03,
                        b4 = 1.18534705686654e-04, b6 = 1.19825839466702e-06;
};

inline Real tanh_scalar(Real v) {
  using T = TanhPoly;
  const Real t = std::min(T::bound, std::max(-T::bound, v));
  const Real t2 = t * t;
  const Real p =
      t * (T::a1 + t2 * (T::a3 + t2 * (T::a5 + t2 * (T::a7 + t2 * (T::a9 + t2 * (T::a11 + t2 * T::a13))))));
  const Real q = T::b0 + t2 * (T::b2 + t2 * (T::b4 + t2 * T::b6));
  return p / q;
}

void tanh_inplace(RealGrid& x) {
  Real* p = x.data();
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) p[i] = tanh_scalar(p[i]);
}

/// Writes tanh(x) into x and its exact derivative into deriv.
void tanh_with_deriv(RealGrid& x, RealGrid& deriv) {
  using T = TanhPoly;
  deriv.resize(x.rows(), x.cols());
  Real* px = x.data();
  Real* pd = deriv.data();
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const Real v = px[i];
    const Real t = std::min(T::bound, std::max(-T::bound, v));
    const Real t2 = t * t;
    const Real pp = T::a1 + t2 * (T::a3 + t2 * (T::a5 + t2 * (T::a7 + t2 * (T::a9 + t2 * (T::a11 + t2 * T::a13)))));
    const Real p = t * pp;
    // dP/dt2 terms for p = t * P(t2): p' = P + 2 t2 P'
    const Real pprime =
        pp + 2.0 * t2 * (T::a3 + t2 * (2.0 * T::a5 + t2 * (3.0 * T::a7 + t2 * (4.0 * T::a9 + t2 * (5.0 * T::a11 + t2 * 6.0 * T::a13)))));
    const Real q = T::b0 + t2 * (T::b2 + t2 * (T::b4 + t2 * T::b6));
    const Real qprime = 2.0 * t * (T::b2 + t2 * (2.0 * T::b4 + t2 * 3.0 * T::b6));
    px[i] = p / q;
    const bool clamped = v != t;
    pd[i] = clamped ? 0.0 : (pprime * q - p * qprime) / (q * q);
  }
}

}  // namespace

Mlp init_mlp(int in_dim, int hidden, int out_dim, uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x31f0));
  auto fan = [&rng](Eigen::Index rows, Eigen::Index cols) {
    const Real bound = std::sqrt(6.0 / static_cast<Real>(rows + cols));
    std::uniform_real_distribution<Real> uni(-bound, bound);
    RealGrid out(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j)
      for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = uni(rng);
    return out;
  };
  Mlp m;
  m.w1 = fan(hidden, in_dim);
  m.b1 = RealVec::Zero(hidden);
  m.w2 = fan(out_dim, hidden);
  m.b2 = RealVec::Zero(out_dim);
  return m;
}

Mlp zeros_like(const Mlp& m) {
  Mlp z;
  z.w1 = RealGrid::Zero(m.w1.rows(), m.w1.cols());
  z.b1 = RealVec::Zero(m.b1.size());
  z.w2 = RealGrid::Zero(m.w2.rows(), m.w2.cols());
  z.b2 = RealVec::Zero(m.b2.size());
  return z;
}

void axpy(Mlp& dst, const Mlp& grad, Real step) {
  dst.w1 += step * grad.w1;
  dst.b1 += step * grad.b1;
  dst.w2 += step * grad.w2;
  dst.b2 += step * grad.b2;
}

RealGrid mlp_logits(const Mlp& m, const RealGrid& x) {
  const Eigen::Index S = x.cols();
  RealGrid out(m.w2.rows(), S);
  constexpr Eigen::Index kBlock = 1024;
  RealGrid h;
  for (Eigen::Index start = 0; start < S; start += kBlock) {
    const Eigen::Index nb = std::min(kBlock, S - start);
    h = (m.w1 * x.middleCols(start, nb)).colwise() + m.b1;
    tanh_inplace(h);
    out.middleCols(start, nb) = (m.w2 * h).colwise() + m.b2;
  }
  return out;
}

Real mlp_ce_backward(const Mlp& m, const RealGrid& x,
                     const Eigen::VectorXi& class_idx, const RealVec& weights,
                     Mlp& grads, RealGrid* d_input) {
  const Eigen::Index S = x.cols();
  const Real norm = 1.0 / static_cast<Real>(S);
  if (d_input) d_input->resize(x.rows(), S);
  Real loss = 0;

  // Column blocks keep the hidden activations cache-resident.
  constexpr Eigen::Index kBlock = 1024;
  RealGrid h, dtanh, logits, d_logits, d_h;
  for (Eigen::Index start = 0; start < S; start += kBlock) {
    const Eigen::Index nb = std::min(kBlock, S - start);
    const auto xb = x.middleCols(start, nb);
    h = (m.w1 * xb).colwise() + m.b1;
    tanh_with_deriv(h, dtanh);
    logits = (m.w2 * h).colwise() + m.b2;

    // Softmax + CE, stabilized.
    RealVec mx = logits.colwise().maxCoeff().transpose();
    d_logits = (logits.rowwise() - mx.transpose()).array().exp();
    RealVec z = d_logits.colwise().sum().transpose();
    d_logits.array().rowwise() /= z.transpose().array();
    for (Eigen::Index j = 0; j < nb; ++j) {
      const Eigen::Index col = start + j;
      loss -= weights[col] * (logits(class_idx[col], j) - mx[j] - std::log(z[j]));
      d_logits(class_idx[col], j) -= 1.0;
    }
    d_logits.array().rowwise() *=
        (weights.segment(start, nb).transpose().array() * norm);

    grads.w2.noalias() += d_logits * h.transpose();
    grads.b2 += d_logits.rowwise().sum();
    d_h = (m.w2.transpose() * d_logits).array() * dtanh.array();
    grads.w1.noalias() += d_h * xb.transpose();
    grads.b1 += d_h.rowwise().sum();
    if (d_input) d_input->middleCols(start, nb).noalias() = m.w1.transpose() * d_h;
  }
  return loss * norm;
}

RealVec shift(const RealVec& y, Real s, const RealGrid& pe, int n) {
  return y + s * pe.col(n);
}

RealVec masked_input(const RealGrid& pe, const RealVec& y, int n, Real s) {
  return (y + s * pe.col(n)).cwiseProduct(pe.col(n));
}

std::pair<BinarySample, BinarySample> construct_binary_samples(int pam_label,
                                                               int mod_order) {
  const int k = qam::pam_k(mod_order);
  if (pam_label < -(2 * k + 1) || pam_label > 2 * k + 1 || (pam_label % 2) == 0)
    throw ConfigError("PAM label " + std::to_string(pam_label) +
                      " outside the lattice for M=" + std::to_string(mod_order));
  BinarySample pos{+1, static_cast<Real>(-pam_label + 1), 0, 1.0};
  BinarySample neg{-1, static_cast<Real>(-pam_label - 1), 0, 1.0};
  return {pos, neg};
}

SampleBatch make_binary_batch(const RealGrid& feats, const Eigen::VectorXi& dims,
                              const Eigen::VectorXi& pam_labels, int mod_order,
                              const RealVec& weights) {
  const Eigen::Index P = dims.size();
  SampleBatch b;
  b.feats = RealGrid(feats.rows(), 2 * P);
  b.dims = Eigen::VectorXi(2 * P);
  b.shifts = RealVec(2 * P);
  b.labels = Eigen::VectorXi(2 * P);
  b.weights = RealVec(2 * P);
  for (Eigen::Index i = 0; i < P; ++i) {
    auto [pos, neg] = construct_binary_samples(pam_labels[i], mod_order);
    b.feats.col(2 * i) = feats.col(i);
    b.feats.col(2 * i + 1) = feats.col(i);
    b.dims[2 * i] = dims[i];
    b.dims[2 * i + 1] = dims[i];
    b.shifts[2 * i] = pos.shift_value;
    b.shifts[2 * i + 1] = neg.shift_value;
    b.labels[2 * i] = pos.label;
    b.labels[2 * i + 1] = neg.label;
    b.weights[2 * i] = weights[i];
    b.weights[2 * i + 1] = weights[i];
  }
  return b;
}

std::pair<Real, Real> binary_forward(const Mlp& clf, const RealVec& input) {
  RealGrid logits = mlp_logits(clf, input);
  const Real mx = logits.col(0).maxCoeff();
  const Real ep = std::exp(logits(0, 0) - mx);
  const Real em = std::exp(logits(1, 0) - mx);
  return {ep / (ep + em), em / (ep + em)};
}

LogRatioFn mlp_log_ratio(const StructNetParams& params) {
  return [&params](const RealVec& y, int dim, Real shift_value) -> Real {
    const RealVec in = masked_input(params.pe, y, dim, shift_value);
    RealGrid logits = mlp_logits(params.clf, in);
    return std::clamp(logits(0, 0) - logits(1, 0), -kLogitClamp, kLogitClamp);
  };
}

ClassPosterior assemble_class_posterior(const LogRatioFn& ratio, const RealVec& y,
                                        int n, int mod_order) {
  const int k_max = qam::pam_k(mod_order);
  const int levels = qam::pam_levels(mod_order);

  // Unnormalized log-probability of level -2k+1 is the cumulative sum of the
  // log ratios at shifts 2k', k' = k..K; the base level -2K-1 has score 0.
  RealVec scores(levels);
  scores[0] = 0.0;
  for (int j = 1; j < levels; ++j) {
    const int k = k_max - (j - 1);
    scores[j] = scores[j - 1] + ratio(y, n, 2.0 * k);
  }

  ClassPosterior out;
  const Real mx = scores.maxCoeff();
  out.probs = (scores.array() - mx).exp();
  out.probs /= out.probs.sum();
  Eigen::Index arg = 0;
  out.confidence = out.probs.maxCoeff(&arg);
  out.argmax_level = 2 * static_cast<int>(arg) - (levels - 1);
  return out;
}

Detection detect_pam(const StructNetParams& params, const RealGrid& feats,
                     int mod_order) {
  const int k_max = qam::pam_k(mod_order);
  const int levels = qam::pam_levels(mod_order);
  const int n_shifts = 2 * k_max + 1;
  const Eigen::Index d = feats.rows();
  const Eigen::Index P = feats.cols();

  // One forward pass over all (column, dim, shift) masked inputs.
  RealGrid inputs(d, P * d * n_shifts);
  Eigen::Index col = 0;
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index n = 0; n < d; ++n) {
      const Real* f = feats.col(p).data();
      const Real* pe = params.pe.col(n).data();
      for (int k = -k_max; k <= k_max; ++k) {
        Real* out = inputs.col(col++).data();
        const Real s = 2.0 * k;
        for (Eigen::Index j = 0; j < d; ++j) out[j] = (f[j] + s * pe[j]) * pe[j];
      }
    }

  RealGrid logits = mlp_logits(params.clf, inputs);

  Detection det;
  det.levels = IntGrid(d, P);
  det.conf = RealGrid(d, P);
  RealVec scores(levels);
  col = 0;
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index n = 0; n < d; ++n) {
      // Ratios indexed by k = -K..K occupy cols [col, col + n_shifts).
      scores[0] = 0.0;
      for (int j = 1; j < levels; ++j) {
        const int k = k_max - (j - 1);
        const Real r = std::clamp(logits(0, col + (k + k_max)) -
                                      logits(1, col + (k + k_max)),
                                  -kLogitClamp, kLogitClamp);
        scores[j] = scores[j - 1] + r;
      }
      const Real mx = scores.maxCoeff();
      RealVec probs = (scores.array() - mx).exp();
      probs /= probs.sum();
      Eigen::Index arg = 0;
      det.conf(n, p) = probs.maxCoeff(&arg);
      det.levels(n, p) = 2 * static_cast<int>(arg) - (levels - 1);
      col += n_shifts;
    }
  return det;
}

Real attention_weight(Real confidence, Real eta) {
  return confidence >= eta ? confidence : 0.0;
}

StructLossGrads struct_loss_grads(const StructNetParams& params,
                                  const SampleBatch& batch, bool want_feat_grads) {
  const Eigen::Index S = batch.size();
  const Eigen::Index d = batch.feats.rows();

  RealGrid inputs(d, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const Real* f = batch.feats.col(i).data();
    const Real* pe = params.pe.col(batch.dims[i]).data();
    const Real s = batch.shifts[i];
    Real* out = inputs.col(i).data();
    for (Eigen::Index j = 0; j < d; ++j) out[j] = (f[j] + s * pe[j]) * pe[j];
  }

  Eigen::VectorXi class_idx(S);
  for (Eigen::Index i = 0; i < S; ++i) class_idx[i] = batch.labels[i] > 0 ? 0 : 1;

  StructLossGrads out;
  out.clf = zeros_like(params.clf);
  out.pe = RealGrid::Zero(params.pe.rows(), params.pe.cols());
  RealGrid d_inputs;
  out.loss = mlp_ce_backward(params.clf, inputs, class_idx, batch.weights, out.clf,
                             &d_inputs);

  if (want_feat_grads) out.feats = RealGrid::Zero(d, S);
  for (Eigen::Index i = 0; i < S; ++i) {
    const int n = batch.dims[i];
    const Real s = batch.shifts[i];
    const Real* f = batch.feats.col(i).data();
    const Real* pe = params.pe.col(n).data();
    const Real* din = d_inputs.col(i).data();
    Real* dpe = out.pe.col(n).data();
    // input_j = (y_j + s h_j) h_j  =>  d input_j / d h_j = y_j + 2 s h_j
    for (Eigen::Index j = 0; j < d; ++j) dpe[j] += din[j] * (f[j] + 2.0 * s * pe[j]);
    if (want_feat_grads) {
      Real* df = out.feats.col(i).data();
      for (Eigen::Index j = 0; j < d; ++j) df[j] = din[j] * pe[j];
    }
  }
  return out;
}

std::vector<Real> train_pilot(StructNetParams& params, const SampleBatch& batch,
                              const TrainOptions& opts) {
  std::vector<Real> losses;
  losses.reserve(opts.epochs);
  for (int ep = 0; ep < opts.epochs; ++ep) {
    StructLossGrads g = struct_loss_grads(params, batch, false);
    losses.push_back(g.loss);
    if (!std::isfinite(g.loss))
      throw SubframeError("structnet-train", "non-finite training loss");
    const bool pe_epoch = opts.train_pe && (ep % 2 == 1);
    if (pe_epoch)
      params.pe -= opts.lr_pe * g.pe;
    else
      axpy(params.clf, g.clf, -opts.lr_clf);
  }
  return losses;
}

bool finetune_df(StructNetParams& params, const RealGrid& feats,
                 const Eigen::VectorXi& dims, const Eigen::VectorXi& detected,
                 const RealVec& confidences, Real eta, int mod_order,
                 const TrainOptions& opts) {
  const Eigen::Index P = dims.size();
  std::vector<Eigen::Index> keep;
  keep.reserve(P);
  for (Eigen::Index i = 0; i < P; ++i)
    if (attention_weight(confidences[i], eta) > 0.0) keep.push_back(i);
  if (keep.empty()) return false;

  RealGrid kf(feats.rows(), static_cast<Eigen::Index>(keep.size()));
  Eigen::VectorXi kd(keep.size()), kl(keep.size());
  RealVec kw(keep.size());
  for (size_t i = 0; i < keep.size(); ++i) {
    kf.col(i) = feats.col(keep[i]);
    kd[i] = dims[keep[i]];
    kl[i] = detected[keep[i]];
    kw[i] = attention_weight(confidences[keep[i]], eta);
  }
  const SampleBatch batch = make_binary_batch(kf, kd, kl, mod_order, kw);
  train_pilot(params, batch, opts);
  return true;
}

RealGrid init_pe_lmmse(const RealGrid& feats, const RealGrid& lattice_targets,
                       Real ridge) {
  if (feats.cols() == 0) throw ConfigError("init_pe_lmmse: no pilot samples");
  if (feats.cols() != lattice_targets.cols())
    throw ConfigError("init_pe_lmmse: sample count mismatch");
  RealGrid gram = lattice_targets * lattice_targets.transpose();
  gram.diagonal().array() += ridge * (1.0 + gram.trace() / gram.rows());
  Eigen::LDLT<RealGrid> ldlt(gram);
  RealGrid pe = ldlt.solve(lattice_targets * feats.transpose()).transpose();
  if (!all_finite(pe)) throw SubframeError("pe-init", "non-finite PE fit");
  return pe;
}

Mlp offline_pretrain(int d, int hidden, int mod_order, int n_samples,
                     int epochs, Real lr, uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0x0ff1));
  std::uniform_real_distribution<Real> ebno(0.0, 15.0);
  std::uniform_int_distribution<int> sign(0, 1);
  std::normal_distribution<Real> gauss(0.0, 1.0);
  const Real bits = std::log2(static_cast<Real>(mod_order));

  // Each sample: +-1 symbols on every dimension plus Gaussian noise at a
  // randomly drawn Eb/No; the probed dimension's symbol is the PAM label.
  RealGrid feats = RealGrid::Zero(d, n_samples);
  Eigen::VectorXi dims(n_samples), labels(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const Real sigma = std::sqrt(1.0 / (bits * std::pow(10.0, ebno(rng) / 10.0)));
    for (int j = 0; j < d; ++j)
      feats(j, i) = (sign(rng) ? 1.0 : -1.0) + sigma * gauss(rng);
    dims[i] = i % d;
    const int e = sign(rng) ? 1 : -1;
    feats(dims[i], i) = e + sigma * gauss(rng);
    labels[i] = e;
  }

  StructNetParams params;
  params.pe = RealGrid::Identity(d, d);
  params.clf = init_mlp(d, hidden, 2, derive_seed(seed, 0x0ff2));
  const SampleBatch batch =
      make_binary_batch(feats, dims, labels, /*mod_order=*/4, RealVec::Ones(n_samples));
  TrainOptions opts;
  opts.epochs = epochs;
  opts.lr_clf = lr;
  opts.train_pe = false;
  train_pilot(params, batch, opts);
  return params.clf;
}

}  // namespace neurorx
