#include "neurorx/channel.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace neurorx {

namespace {
constexpr int kJakesSinusoids = 32;
}

void ChannelProfile::validate() const {
  if (n_taps < 1) throw ConfigError("n_taps must be >= 1");
  if (power_delay_profile.size() != 0) {
    if (power_delay_profile.size() != n_taps)
      throw ConfigError("power_delay_profile length must equal n_taps");
    if (power_delay_profile.minCoeff() < 0.0)
      throw ConfigError("power_delay_profile entries must be nonnegative");
    if (std::abs(power_delay_profile.sum() - 1.0) > 1e-9)
      throw ConfigError("power_delay_profile must sum to 1");
  }
  if (doppler_hz < 0.0) throw ConfigError("doppler_hz must be >= 0");
  if (sample_rate_hz <= 0.0) throw ConfigError("sample_rate_hz must be > 0");
}

RealVec exponential_pdp(int n_taps, Real decay_db) {
  RealVec pdp(n_taps);
  if (n_taps == 1) {
    pdp[0] = 1.0;
    return pdp;
  }
  const Real rate = decay_db / 10.0 * std::numbers::ln10 / (n_taps - 1);
  for (int l = 0; l < n_taps; ++l) pdp[l] = std::exp(-rate * l);
  pdp /= pdp.sum();
  return pdp;
}

ChannelRealization generate_channel(const ChannelProfile& profile, int n_r,
                                    int n_t, Eigen::Index n_samples,
                                    uint64_t seed) {
  profile.validate();
  ChannelRealization ch;
  ch.n_r = n_r;
  ch.n_t = n_t;
  ch.seed = seed;
  ch.n_samples = n_samples;

  std::mt19937_64 rng(derive_seed(seed, 0xc4a2));
  std::normal_distribution<Real> gauss(0.0, 1.0);
  std::uniform_real_distribution<Real> angle(0.0, 2.0 * std::numbers::pi);

  if (profile.model == ChannelModel::BlockStaticGaussian) {
    ch.n_taps = 1;
    ch.taps.assign(1, ComplexGrid(n_r * n_t, 1));
    for (Eigen::Index i = 0; i < ch.taps[0].size(); ++i)
      ch.taps[0](i, 0) = Cx(gauss(rng), gauss(rng)) / std::sqrt(2.0);
    return ch;
  }

  ch.n_taps = profile.n_taps;
  const RealVec pdp = profile.power_delay_profile.size()
                          ? profile.power_delay_profile
                          : exponential_pdp(profile.n_taps);
  const bool is_static = profile.doppler_hz == 0.0;
  const Eigen::Index cols = is_static ? 1 : n_samples;
  ch.taps.assign(profile.n_taps, ComplexGrid::Zero(n_r * n_t, cols));

  // Clarke sum-of-sinusoids: per (rx, tx, tap), equal-power sinusoids with
  // uniform arrival angles and phases reproduce the J0(2 pi f_d tau)
  // autocorrelation in expectation.
  const Real ts = 1.0 / profile.sample_rate_hz;
  std::vector<Cx> phasor(kJakesSinusoids), step(kJakesSinusoids);
  for (int l = 0; l < profile.n_taps; ++l) {
    const Real amp = std::sqrt(pdp[l] / kJakesSinusoids);
    for (int i = 0; i < n_r * n_t; ++i) {
      for (int s = 0; s < kJakesSinusoids; ++s) {
        const Real omega =
            2.0 * std::numbers::pi * profile.doppler_hz * std::cos(angle(rng));
        const Real phi = angle(rng);
        phasor[s] = std::polar(amp, phi);
        step[s] = std::polar(1.0, omega * ts);
      }
      for (Eigen::Index m = 0; m < cols; ++m) {
        Cx acc(0.0, 0.0);
        for (int s = 0; s < kJakesSinusoids; ++s) {
          acc += phasor[s];
          phasor[s] *= step[s];
        }
        ch.taps[l](i, m) = acc;
      }
    }
  }
  return ch;
}

Cx rapp_pa(Cx x, const PaConfig& cfg) {
  if (cfg.x_sat <= 0.0) throw ConfigError("x_sat must be > 0");
  const Real mag = std::abs(x);
  if (mag == 0.0) return x;
  const Real ratio = std::pow(mag / cfg.x_sat, 2.0 * cfg.rho);
  const Real expo = cfg.literal_exponent ? 0.5 * cfg.rho : 0.5 / cfg.rho;
  return x / std::pow(1.0 + ratio, expo);
}

Real pa_input_gain(const PaConfig& cfg, Real mean_input_power) {
  if (mean_input_power <= 0.0) throw ConfigError("mean input power must be > 0");
  const Real target_in_power =
      cfg.x_sat * cfg.x_sat / std::pow(10.0, cfg.ibo_db / 10.0);
  return std::sqrt(target_in_power / mean_input_power);
}

Real ibo_from_gain(const PaConfig& cfg, Real gain, Real mean_input_power) {
  return 10.0 * std::log10(cfg.x_sat * cfg.x_sat /
                           (gain * gain * mean_input_power));
}

ComplexGrid pa_distort(const ComplexGrid& x, const PaConfig& cfg) {
  if (!cfg.enabled) return x;
  const Real mean_power = x.squaredNorm() / static_cast<Real>(x.size());
  const Real gamma = pa_input_gain(cfg, mean_power);
  ComplexGrid out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      out(i, j) = rapp_pa(gamma * x(i, j), cfg) / gamma;
  return out;
}

ComplexGrid apply_channel(const ComplexGrid& x_time, const ChannelRealization& ch,
                          const PaConfig& pa, Real noise_var, uint64_t noise_seed) {
  if (x_time.rows() != ch.n_t)
    throw ConfigError("transmit rows do not match channel n_t");
  if (ch.n_samples < x_time.cols())
    throw ConfigError("channel realization shorter than signal");

  const ComplexGrid gx = pa_distort(x_time, pa);
  const Eigen::Index T = x_time.cols();
  ComplexGrid y = ComplexGrid::Zero(ch.n_r, T);
  for (Eigen::Index m = 0; m < T; ++m) {
    for (int l = 0; l < ch.n_taps && l <= m; ++l)
      y.col(m) += ch.tap(l, m) * gx.col(m - l);
  }
  if (noise_var > 0.0) y = add_awgn(y, noise_var, noise_seed);
  return y;
}

ComplexGrid add_awgn(const ComplexGrid& x, Real noise_var, uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0xa3617));
  std::normal_distribution<Real> gauss(0.0, std::sqrt(noise_var / 2.0));
  ComplexGrid out = x;
  for (Eigen::Index j = 0; j < out.cols(); ++j)
    for (Eigen::Index i = 0; i < out.rows(); ++i)
      out(i, j) += Cx(gauss(rng), gauss(rng));
  return out;
}

Real noise_var_from_ebno(Real ebno_db, int mod_order, const SubframeSpec& spec) {
  const Real bits = std::log2(static_cast<Real>(mod_order));
  const Real signal_power = static_cast<Real>(spec.n_t);
  return signal_power / (bits * std::pow(10.0, ebno_db / 10.0));
}

std::vector<ComplexGrid> true_freq_response(const ChannelRealization& ch,
                                            int symbol_index,
                                            const SubframeSpec& spec) {
  const Eigen::Index mid =
      static_cast<Eigen::Index>(symbol_index) * spec.samples_per_symbol() +
      spec.n_cp + spec.n_sc / 2;
  if (mid >= ch.n_samples && ch.taps[0].cols() > 1)
    throw ConfigError("symbol outside realization span");

  std::vector<ComplexGrid> out(spec.n_sc);
  for (int k = 0; k < spec.n_sc; ++k) out[k] = ComplexGrid::Zero(ch.n_r, ch.n_t);
  for (int l = 0; l < ch.n_taps; ++l) {
    const auto h = ch.tap(l, std::min<Eigen::Index>(mid, ch.n_samples - 1));
    for (int k = 0; k < spec.n_sc; ++k) {
      const Cx w = std::polar(1.0, -2.0 * std::numbers::pi * k * l / spec.n_sc);
      out[k] += h * w;
    }
  }
  return out;
}

}  // namespace neurorx
