#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "neurorx/channel.hpp"
#include "neurorx/ofdm.hpp"

using namespace neurorx;

namespace {

SubframeSpec small_spec() {
  SubframeSpec spec;
  spec.n_t = 1;
  spec.n_r = 1;
  spec.n_sc = 32;
  spec.n_cp = 8;
  spec.n_total = 4;
  spec.n_pilot = 1;
  spec.mod_order = 4;
  return spec;
}

}  // namespace

TEST_CASE("zero doppler keeps taps constant") {
  ChannelProfile p;
  p.n_taps = 3;
  p.doppler_hz = 0.0;
  p.sample_rate_hz = 1e6;
  const auto ch = generate_channel(p, 2, 2, 500, 1);
  for (int l = 0; l < 3; ++l) {
    const ComplexGrid first = ch.tap(l, 0);
    for (int m : {100, 499}) CHECK((ch.tap(l, m) - first).norm() == 0.0);
  }
}

TEST_CASE("Jakes autocorrelation tracks the Bessel oracle") {
  ChannelProfile p;
  p.n_taps = 1;
  p.power_delay_profile = RealVec::Ones(1);
  p.doppler_hz = 100.0;
  p.sample_rate_hz = 10e3;
  const int n_real = 10000, span = 60;

  std::vector<Cx> corr(span, Cx(0, 0));
  Real power = 0;
  for (int r = 0; r < n_real; ++r) {
    const auto ch = generate_channel(p, 1, 1, span + 1, 1000 + r);
    const Cx h0 = ch.taps[0](0, 0);
    power += std::norm(h0);
    for (int lag = 0; lag < span; ++lag)
      corr[lag] += ch.taps[0](0, lag) * std::conj(h0);
  }
  power /= n_real;
  CHECK(power == doctest::Approx(1.0).epsilon(0.03));
  for (int lag : {5, 15, 30, 50}) {
    const Real tau = lag / p.sample_rate_hz;
    const Real oracle = std::cyl_bessel_j(0.0, 2.0 * std::numbers::pi *
                                                   p.doppler_hz * tau);
    CHECK(std::abs(corr[lag].real() / n_real - oracle) < 0.05);
    CHECK(std::abs(corr[lag].imag() / n_real) < 0.05);
  }
}

TEST_CASE("per-tap power matches the configured PDP") {
  ChannelProfile p;
  p.n_taps = 4;
  p.power_delay_profile = exponential_pdp(4);
  p.doppler_hz = 50.0;
  p.sample_rate_hz = 1e5;
  RealVec power = RealVec::Zero(4);
  const int n_real = 10000;
  for (int r = 0; r < n_real; ++r) {
    const auto ch = generate_channel(p, 1, 1, 1, 77 + r);
    for (int l = 0; l < 4; ++l) power[l] += std::norm(ch.taps[l](0, 0));
  }
  power /= n_real;
  for (int l = 0; l < 4; ++l)
    CHECK(std::abs(power[l] - p.power_delay_profile[l]) <
          0.03 * p.power_delay_profile[l] + 1e-4);
}

TEST_CASE("rapp PA basics") {
  PaConfig cfg;
  cfg.x_sat = 1.0;
  cfg.rho = 3.0;

  CHECK(rapp_pa(Cx(0, 0), cfg) == Cx(0, 0));

  // Saturation from below at 100 * x_sat.
  const Real big = std::abs(rapp_pa(Cx(100.0, 0), cfg));
  CHECK(big < cfg.x_sat);
  CHECK(big > 0.99 * cfg.x_sat);

  // Phase preservation / complex scaling oddness.
  const Cx x(0.4, 0.9);
  const Cx rot = std::polar(1.0, 0.7);
  CHECK(std::abs(rapp_pa(rot * x, cfg) - rot * rapp_pa(x, cfg)) < 1e-14);

  // |g| strictly increasing in |x|.
  Real prev = 0;
  for (Real a = 0.05; a < 3.0; a += 0.05) {
    const Real cur = std::abs(rapp_pa(Cx(a, 0), cfg));
    CHECK(cur > prev);
    prev = cur;
  }

  // Near-linear for small inputs.
  for (Real a : {0.01, 0.05, 0.09}) {
    const Real out = std::abs(rapp_pa(Cx(a, 0), cfg));
    CHECK(std::abs(out - a) / a < 0.01);
  }
}

TEST_CASE("IBO calibration helper round trip") {
  PaConfig cfg;
  cfg.x_sat = 1.0;
  cfg.ibo_db = 6.0;
  const Real p_in = 0.37;
  const Real gamma = pa_input_gain(cfg, p_in);
  CHECK(std::abs(ibo_from_gain(cfg, gamma, p_in) - cfg.ibo_db) < 1e-9);
}

TEST_CASE("identity channel passes the signal through") {
  ChannelProfile p;
  p.model = ChannelModel::TdlJakes;
  p.n_taps = 1;
  p.power_delay_profile = RealVec::Ones(1);
  p.doppler_hz = 0.0;
  p.sample_rate_hz = 1e6;
  ChannelRealization ch = generate_channel(p, 1, 1, 64, 5);
  ch.taps[0].setOnes();  // force unit tap

  ComplexGrid x(1, 64);
  std::mt19937_64 rng(2);
  std::normal_distribution<Real> g(0, 1);
  for (int j = 0; j < 64; ++j) x(0, j) = Cx(g(rng), g(rng));
  const ComplexGrid y = apply_channel(x, ch, PaConfig{}, 0.0, 0);
  CHECK((y - x).norm() == 0.0);
}

TEST_CASE("apply_channel matches the frequency-domain oracle") {
  const SubframeSpec spec = small_spec();
  ChannelProfile p;
  p.n_taps = 2;
  p.power_delay_profile = (RealVec(2) << 0.7, 0.3).finished();
  p.doppler_hz = 0.0;
  p.sample_rate_hz = 1e6;
  const ChannelRealization ch =
      generate_channel(p, 1, 1, spec.samples_per_symbol(), 8);

  std::mt19937_64 rng(4);
  std::normal_distribution<Real> g(0, 1);
  ComplexGrid xf(1, spec.n_sc);
  for (int k = 0; k < spec.n_sc; ++k) xf(0, k) = Cx(g(rng), g(rng));
  const ComplexGrid xt = ofdm::modulate(xf, spec.n_cp);
  const ComplexGrid yt = apply_channel(xt, ch, PaConfig{}, 0.0, 0);
  const ComplexGrid yf = ofdm::demodulate(yt, spec.n_cp);

  const auto h = true_freq_response(ch, 0, spec);
  for (int k = 0; k < spec.n_sc; ++k)
    CHECK(std::abs(yf(0, k) - h[k](0, 0) * xf(0, k)) < 1e-8);
}

TEST_CASE("superposition when PA off and noiseless") {
  ChannelProfile p;
  p.n_taps = 3;
  p.doppler_hz = 40.0;
  p.sample_rate_hz = 1e5;
  const ChannelRealization ch = generate_channel(p, 2, 2, 50, 12);
  std::mt19937_64 rng(6);
  std::normal_distribution<Real> g(0, 1);
  ComplexGrid a(2, 50), b(2, 50);
  for (int j = 0; j < 50; ++j)
    for (int i = 0; i < 2; ++i) {
      a(i, j) = Cx(g(rng), g(rng));
      b(i, j) = Cx(g(rng), g(rng));
    }
  const ComplexGrid ya = apply_channel(a, ch, PaConfig{}, 0.0, 0);
  const ComplexGrid yb = apply_channel(b, ch, PaConfig{}, 0.0, 0);
  const ComplexGrid yab = apply_channel(a + b, ch, PaConfig{}, 0.0, 0);
  CHECK((yab - ya - yb).norm() < 1e-10);
}

TEST_CASE("noise-only output variance") {
  ChannelProfile p;
  p.n_taps = 1;
  p.doppler_hz = 0.0;
  p.sample_rate_hz = 1e6;
  const long n = 100000;
  const ChannelRealization ch = generate_channel(p, 1, 1, n, 3);
  const ComplexGrid x = ComplexGrid::Zero(1, n);
  const Real noise_var = 0.64;
  const ComplexGrid y = apply_channel(x, ch, PaConfig{}, noise_var, 99);
  const Real measured = y.squaredNorm() / static_cast<Real>(n);
  CHECK(std::abs(measured - noise_var) < 0.02 * noise_var);
}

TEST_CASE("noise_var_from_ebno calibration points") {
  SubframeSpec spec = small_spec();
  spec.n_t = 1;
  CHECK(noise_var_from_ebno(200.0, 4, spec) < 1e-15);
  CHECK(noise_var_from_ebno(0.0, 4, spec) == doctest::Approx(0.5));
  const Real v16 = noise_var_from_ebno(10.0, 16, spec);
  const Real v64 = noise_var_from_ebno(10.0, 64, spec);
  CHECK(v64 / v16 == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("true frequency response special cases") {
  const SubframeSpec spec = small_spec();
  ChannelProfile p;
  p.n_taps = 2;
  p.power_delay_profile = (RealVec(2) << 0.5, 0.5).finished();
  p.doppler_hz = 0.0;
  p.sample_rate_hz = 1e6;
  ChannelRealization ch = generate_channel(p, 1, 1, spec.total_samples(), 21);

  ch.taps[0].setOnes();
  ch.taps[1].setZero();
  auto h = true_freq_response(ch, 0, spec);
  for (int k = 0; k < spec.n_sc; ++k) CHECK(std::abs(h[k](0, 0) - Cx(1, 0)) < 1e-12);

  ch.taps[0].setZero();
  ch.taps[1].setOnes();
  h = true_freq_response(ch, 0, spec);
  for (int k = 0; k < spec.n_sc; ++k) {
    const Cx ramp = std::polar(1.0, -2.0 * std::numbers::pi * k / spec.n_sc);
    CHECK(std::abs(h[k](0, 0) - ramp) < 1e-12);
  }
}

TEST_CASE("fixed seed reproduces the realization") {
  ChannelProfile p;
  p.n_taps = 2;
  p.doppler_hz = 80.0;
  p.sample_rate_hz = 1e5;
  const auto a = generate_channel(p, 2, 3, 40, 1234);
  const auto b = generate_channel(p, 2, 3, 40, 1234);
  for (int l = 0; l < 2; ++l) CHECK((a.taps[l] - b.taps[l]).norm() == 0.0);
}

TEST_CASE("tap count beyond the realization span is caught") {
  ChannelProfile p;
  p.n_taps = 1;
  p.doppler_hz = 10.0;
  p.sample_rate_hz = 1e5;
  const auto ch = generate_channel(p, 1, 2, 16, 0);
  const ComplexGrid x = ComplexGrid::Zero(2, 32);
  CHECK_THROWS_AS(apply_channel(x, ch, PaConfig{}, 0.0, 0), ConfigError);
}
