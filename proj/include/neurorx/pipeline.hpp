#pragma once

#include <map>
#include <optional>

#include "neurorx/attention.hpp"
#include "neurorx/baselines.hpp"
#include "neurorx/channel.hpp"
#include "neurorx/reservoir.hpp"
#include "neurorx/structnet.hpp"
#include "neurorx/subframe.hpp"

namespace neurorx {

enum class Variant {
  RcStruct,          // frozen LMMSE-initialized PE, no DF, no MHA
  RcStructDf,        // + time/frequency decision feedback
  RcStructNetDf,     // + learned PE layer
  RcAttStructNetDf,  // + 2D MHA and attention loss
  Lmmse,
  SphereDecoder,
  MlOracle,
};

bool is_rc_variant(Variant v);
std::string variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);
std::string csi_source_name(baselines::CsiSource s);
std::optional<baselines::CsiSource> csi_source_from_name(const std::string& name);

struct ReservoirConfig {
  int n_neurons = 16;
  int window_len = 32;
  int layers = 1;  // cascaded reservoirs
  /// Equalization target delay in samples: the readout at stream position m
  /// estimates x(m - delay), so delayed multipath energy is visible. The
  /// trailing delay samples of each OFDM symbol come from the symbol's own
  /// cyclic extension, keeping detection causal at symbol granularity.
  /// -1 selects n_cp / 2.
  int delay = -1;
  Real spectral_radius = 0.9;
  Real input_scale = 0.5;
  Real ls_ridge = 1e-6;
  Real rls_delta = 1e-6;
  Real rls_alpha = 0.9995;
};

struct AttentionConfig {
  int nk_time = 216;
  int nk_freq = 8;
  Real lr = 0.01;
};

struct StructNetConfig {
  int hidden = 128;
  int pilot_epochs = 20;
  int df_epochs = 3;
  int group_size = 108;  // subcarriers sharing one PE + classifier
  int offline_samples = 2000;
  int offline_epochs = 1000;
  Real offline_lr = 0.05;
  Real lr_clf = 0.01;
  Real lr_pe = 0.005;
  Real eta = 0.5;
  Real pe_ridge = 1e-3;
};

struct DetectorConfig {
  Variant variant = Variant::RcAttStructNetDf;
  baselines::CsiSource csi_source = baselines::CsiSource::Interpolated;
  ReservoirConfig rc;
  AttentionConfig att;
  StructNetConfig sn;

  std::string name() const;
};

struct DetectionReport {
  std::vector<IntGrid> detected_levels;  // per data symbol, 2*n_t x n_sc
  Bits detected_bits;
  long bits = 0, bit_errors = 0;
  long symbols = 0, symbol_errors = 0;
  std::array<long, 20> confidence_hist{};
  std::map<std::string, Real> stage_seconds;

  Real ber() const { return bits ? static_cast<Real>(bit_errors) / bits : 0.0; }
  Real ser() const {
    return symbols ? static_cast<Real>(symbol_errors) / symbols : 0.0;
  }
  /// Deterministic content dump (timings excluded).
  std::string serialize() const;
};

struct DetectInputs {
  const SubframeTx* tx = nullptr;
  const ComplexGrid* rx_time = nullptr;
  Real noise_var = 0.0;
  const ChannelRealization* channel = nullptr;  // Oracle CSI
  const Mlp* offline_clf = nullptr;             // shared offline weights
  uint64_t model_seed = 1;
};

/// RC-family detection per the online training procedure: pilot LS training
/// of the reservoir, LMMSE PE initialization, pilot training of (MHA +)
/// StructNet, then symbol-by-symbol decision feedback.
DetectionReport detect_subframe(const DetectorConfig& cfg, const DetectInputs& in);

/// Classical chain: channel estimation per csi_source, then per-subcarrier
/// LMMSE / sphere / ML detection.
DetectionReport detect_subframe_conventional(const DetectorConfig& cfg,
                                             const DetectInputs& in);

/// Dispatches on cfg.variant.
DetectionReport detect(const DetectorConfig& cfg, const DetectInputs& in);

struct McCell {
  Real ebno_db = 0;
  int n_subframes = 0;
  long bits = 0, bit_errors = 0;
  long symbols = 0, symbol_errors = 0;
  int excluded_subframes = 0;
  Real seconds = 0;

  Real ber() const { return bits ? static_cast<Real>(bit_errors) / bits : 0.0; }
  Real ser() const {
    return symbols ? static_cast<Real>(symbol_errors) / symbols : 0.0;
  }
};

struct McResult {
  std::vector<McCell> cells;  // one per Eb/No point
  std::vector<Real> subframe_ber;  // per (ebno, subframe), row-major
};

/// Independent channel + payload + noise per subframe; stage-local seeds are
/// derived from (master, ebno index, subframe index) only, so detector
/// variants see identical realizations. Aggregation uses integer counters,
/// making results independent of the worker count.
McResult run_montecarlo(const DetectorConfig& cfg, const SubframeSpec& spec,
                        const ChannelProfile& profile, const PaConfig& pa,
                        const std::vector<Real>& ebno_list, int n_subframes,
                        uint64_t master_seed, int parallelism);

/// Offline classifier weights for the configured system, trained once.
Mlp pretrain_offline(const DetectorConfig& cfg, const SubframeSpec& spec,
                     uint64_t master_seed);

}  // namespace neurorx
