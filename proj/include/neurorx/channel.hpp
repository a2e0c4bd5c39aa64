#pragma once

#include "neurorx/core.hpp"
#include "neurorx/subframe.hpp"

namespace neurorx {

enum class ChannelModel { BlockStaticGaussian, TdlJakes };

struct ChannelProfile {
  int n_taps = 8;
  RealVec power_delay_profile;  // linear, sums to 1; empty -> exponential
  Real doppler_hz = 97.2;       // 30 km/h at 3.5 GHz
  Real sample_rate_hz = 512 * 15e3;
  ChannelModel model = ChannelModel::TdlJakes;

  void validate() const;
};

/// Exponential profile decaying to -20 dB at the last tap, normalized to
/// unit total power.
RealVec exponential_pdp(int n_taps, Real decay_db = 20.0);

struct PaConfig {
  Real x_sat = 1.0;
  Real rho = 3.0;
  bool enabled = false;
  Real ibo_db = 9.0;
  /// When set, uses the outer exponent 0.5*rho instead of the conventional
  /// Rapp exponent 1/(2*rho).
  bool literal_exponent = false;
};

/// Per-(rx, tx) tap trajectories sampled at the baseband rate. Immutable
/// after creation; taps[l] stores the (n_r*n_t)-stacked tap value per sample
/// column (a single column for sample-time-constant realizations).
struct ChannelRealization {
  int n_r = 0, n_t = 0, n_taps = 0;
  Eigen::Index n_samples = 0;
  std::vector<ComplexGrid> taps;
  uint64_t seed = 0;

  /// Tap l as an n_r x n_t matrix at sample time m.
  Eigen::Map<const ComplexGrid> tap(int l, Eigen::Index m) const {
    const Eigen::Index col = std::min<Eigen::Index>(m, taps[l].cols() - 1);
    return Eigen::Map<const ComplexGrid>(taps[l].col(col).data(), n_r, n_t);
  }
};

ChannelRealization generate_channel(const ChannelProfile& profile, int n_r,
                                    int n_t, Eigen::Index n_samples,
                                    uint64_t seed);

/// Rapp saturation nonlinearity; phase preserving, |g(x)| < x_sat.
Cx rapp_pa(Cx x, const PaConfig& cfg);

/// Input gain that sets the PA operating point: with mean input power p_in,
/// the scaled signal hits ibo_db = 10*log10(x_sat^2 / (gamma^2 p_in)).
Real pa_input_gain(const PaConfig& cfg, Real mean_input_power);
Real ibo_from_gain(const PaConfig& cfg, Real gain, Real mean_input_power);

/// PA referenced to its operating point: g(gamma*x)/gamma, unity small-signal
/// gain. Identity when the PA is disabled.
ComplexGrid pa_distort(const ComplexGrid& x, const PaConfig& cfg);

/// y_{n_r}(m) = sum_{n_t} sum_{l} h_{n_r,n_t,l}(m) g(x_{n_t}(m-l)) + w(m),
/// w ~ CN(0, noise_var). The PA acts at its IBO operating point.
ComplexGrid apply_channel(const ComplexGrid& x_time, const ChannelRealization& ch,
                          const PaConfig& pa, Real noise_var, uint64_t noise_seed);

ComplexGrid add_awgn(const ComplexGrid& x, Real noise_var, uint64_t seed);

/// Noise variance per complex receive sample from Eb/No, with signal power
/// measured pre-PA at unit constellation power (n_t unit-power streams
/// through a unit-power channel).
Real noise_var_from_ebno(Real ebno_db, int mod_order, const SubframeSpec& spec);

/// Per-subcarrier channel response at the midpoint of an OFDM symbol;
/// out[k] is n_r x n_t.
std::vector<ComplexGrid> true_freq_response(const ChannelRealization& ch,
                                            int symbol_index,
                                            const SubframeSpec& spec);

}  // namespace neurorx
