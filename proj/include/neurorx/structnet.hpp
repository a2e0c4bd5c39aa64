#pragma once

#include <functional>

#include "neurorx/core.hpp"

namespace neurorx {

/// Two-layer MLP, tanh hidden activation, linear output logits.
struct Mlp {
  RealGrid w1;  // hidden x in_dim
  RealVec b1;
  RealGrid w2;  // out_dim x hidden
  RealVec b2;

  int in_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w2.rows()); }
};

Mlp init_mlp(int in_dim, int hidden, int out_dim, uint64_t seed);
Mlp zeros_like(const Mlp& m);
void axpy(Mlp& dst, const Mlp& grad, Real step);

/// Column-wise logits for a batch of inputs.
RealGrid mlp_logits(const Mlp& m, const RealGrid& x);

/// Weighted softmax cross-entropy over a batch; returns mean loss and
/// accumulates parameter grads plus (optionally) input grads.
Real mlp_ce_backward(const Mlp& m, const RealGrid& x,
                     const Eigen::VectorXi& class_idx, const RealVec& weights,
                     Mlp& grads, RealGrid* d_input);

// ---------------------------------------------------------------------------
// StructNet: PE layer (learned effective channel, one column per real
// dimension) + one binary classifier shared across all dimensions and shifts.
// The classifier sees the shifted signal gated by the PE column:
//   input = (y + s * pe.col(n)) .* pe.col(n)
// so a single parameter set serves every dimension while the PE column both
// realizes the shifting process and selects the dimension under test.
// ---------------------------------------------------------------------------

struct StructNetParams {
  RealGrid pe;  // d x d effective channel estimate (d = 2 * streams)
  Mlp clf;      // d -> hidden -> 2 logits (p_plus, p_minus)
};

/// Shifting process: y + s * (column n of pe).
RealVec shift(const RealVec& y, Real s, const RealGrid& pe, int n);

/// Classifier input for (y, dim n, shift s).
RealVec masked_input(const RealGrid& pe, const RealVec& y, int n, Real s);

struct BinarySample {
  int label = +1;       // +1 or -1
  Real shift_value = 0; // s_n
  int dim_index = 0;    // n
  Real weight = 1.0;
};

/// Positive/negative pair for a PAM training label:
/// (b=+1, s=-x+1) and (b=-1, s=-x-1).
std::pair<BinarySample, BinarySample> construct_binary_samples(int pam_label,
                                                               int mod_order);

/// Flat batch of binary samples sharing a feature matrix.
struct SampleBatch {
  RealGrid feats;         // d x S raw (unshifted) feature vectors
  Eigen::VectorXi dims;   // S
  RealVec shifts;         // S
  Eigen::VectorXi labels; // S, +1/-1
  RealVec weights;        // S

  Eigen::Index size() const { return dims.size(); }
};

/// Expands PAM samples (one column + dim + lattice label each) into the
/// doubled binary batch.
SampleBatch make_binary_batch(const RealGrid& feats, const Eigen::VectorXi& dims,
                              const Eigen::VectorXi& pam_labels, int mod_order,
                              const RealVec& weights);

std::pair<Real, Real> binary_forward(const Mlp& clf, const RealVec& input);

/// log(p_plus / p_minus) with logits clamped to +-30.
using LogRatioFn = std::function<Real(const RealVec& y, int dim, Real shift_value)>;
LogRatioFn mlp_log_ratio(const StructNetParams& params);

struct ClassPosterior {
  RealVec probs;        // over the PAM lattice, ascending levels
  int argmax_level = 0; // detected lattice level
  Real confidence = 0;  // probability of the argmax
};

ClassPosterior assemble_class_posterior(const LogRatioFn& ratio, const RealVec& y,
                                        int n, int mod_order);

struct Detection {
  IntGrid levels;    // d x P lattice decisions
  RealGrid conf;     // d x P confidence of each decision
};

/// Batched detection of every dimension of every feature column.
Detection detect_pam(const StructNetParams& params, const RealGrid& feats,
                     int mod_order);

/// q(x) = x if x >= eta else 0.
Real attention_weight(Real confidence, Real eta);

/// Loss + gradients over one binary batch (weighted CE, mean over samples).
struct StructLossGrads {
  Real loss = 0;
  Mlp clf;
  RealGrid pe;
  RealGrid feats;  // populated when requested
};

StructLossGrads struct_loss_grads(const StructNetParams& params,
                                  const SampleBatch& batch, bool want_feat_grads);

struct TrainOptions {
  int epochs = 20;
  Real lr_clf = 0.01;
  Real lr_pe = 0.005;
  bool train_pe = true;   // alternate classifier/PE epochs when set
};

/// Full-batch gradient descent with alternating classifier/PE epochs
/// (even -> classifier, odd -> PE). Returns the per-epoch loss trace.
std::vector<Real> train_pilot(StructNetParams& params, const SampleBatch& batch,
                              const TrainOptions& opts);

/// DF fine-tuning: same loss, sample weights q(confidence); zero-weight
/// samples are skipped. Returns false (params untouched) when every weight
/// is zero.
bool finetune_df(StructNetParams& params, const RealGrid& feats,
                 const Eigen::VectorXi& dims, const Eigen::VectorXi& detected,
                 const RealVec& confidences, Real eta, int mod_order,
                 const TrainOptions& opts);

/// Regularized LS fit of feats ~= pe * lattice_targets over pilot samples.
RealGrid init_pe_lmmse(const RealGrid& feats, const RealGrid& lattice_targets,
                       Real ridge = 1e-3);

/// Offline classifier initialization: binary +-1 symbols through an identity
/// effective channel at per-sample Eb/No drawn from [0, 15] dB. Weights are
/// meant to be trained once and reused across subframes.
Mlp offline_pretrain(int d, int hidden, int mod_order, int n_samples,
                     int epochs, Real lr, uint64_t seed);

}  // namespace neurorx
