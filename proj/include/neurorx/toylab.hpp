#pragma once

#include "neurorx/structnet.hpp"

namespace neurorx::toylab {

/// 2x2 complex Gaussian channel, real-lifted to 4x4, rejection-sampled to
/// condition number < 1.5.
RealGrid toy_channel_sample(uint64_t seed);

enum class ToyMethod { AdnnGt, AdnnLmmse, StructNet, FourClassMlp };
std::string toy_method_name(ToyMethod m);

struct ToyOptions {
  int mod_order = 16;  // 4-PAM per real dimension
  int n_channels = 100;
  int n_train = 1000;  // 4 reserved for the LMMSE fit
  int n_lmmse = 4;
  int n_test = 3000;
  int warm_epochs = 16;  // classifier-only warmup before alternation
  int epochs = 48;       // alternating classifier/PE epochs
  Real lr_clf = 0.05;
  Real lr_pe = 0.2;
  int hidden = 128;
  int offline_samples = 2000;
  int offline_epochs = 300;
  Real offline_lr = 0.05;
  int parallelism = 2;
};

struct ToyCell {
  ToyMethod method;
  Real x = 0;  // Eb/No dB (experiment a) or corruption fraction (b)
  std::vector<Real> ser_per_channel;
  long symbols = 0, symbol_errors = 0;
  long bits = 0, bit_errors = 0;

  Real median_ser() const;
  Real ser() const {
    return symbols ? static_cast<Real>(symbol_errors) / symbols : 0.0;
  }
};

struct ToyResult {
  std::vector<ToyCell> cells;
  /// Binary-label audit over every corrupted training batch.
  long audit_binary_samples = 0;
  long audit_binary_wrong = 0;
  long audit_pam_corrupted = 0;
  bool audit_bound_violated = false;  // binary wrong > PAM corrupted (never)

  const ToyCell& cell(ToyMethod m, Real x) const;
};

/// SER vs Eb/No for {ADNN-GT, ADNN-LMMSE, StructNet} on condition-filtered
/// channels; per-channel training with true labels.
ToyResult toy_experiment_a(const std::vector<Real>& ebno_list,
                           const ToyOptions& opts, uint64_t seed);

/// SER vs PAM-label corruption at 5 dB for {StructNet, FourClassMlp,
/// ADNN-GT, ADNN-LMMSE}; corrupted labels are replaced uniformly over the
/// other lattice levels.
ToyResult toy_experiment_b(const std::vector<Real>& corrupt_fractions,
                           const ToyOptions& opts, uint64_t seed);

}  // namespace neurorx::toylab
