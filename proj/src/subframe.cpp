#include "neurorx/subframe.hpp"

#include <random>

#include "neurorx/ofdm.hpp"
#include "neurorx/qam.hpp"

namespace neurorx {

void SubframeSpec::validate() const {
  if (n_t < 1 || n_r < 1) throw ConfigError("antenna counts must be >= 1");
  if (n_sc < 2) throw ConfigError("n_sc must be >= 2");
  if (n_cp < 0 || n_cp > n_sc) throw ConfigError("n_cp out of range");
  qam::pam_levels(mod_order);  // perfect-square check
  if (pilot_pattern == PilotPattern::BlockLeading) {
    if (n_pilot < 1 || n_pilot >= n_total)
      throw ConfigError("n_pilot must satisfy 1 <= n_pilot < n_total");
  } else {
    if (n_total != 14)
      throw ConfigError("Scattered5GLike pattern requires n_total = 14");
    if (n_pilot != 3)
      throw ConfigError("Scattered5GLike pattern carries 3 pilot symbols");
  }
}

namespace subframe {

std::vector<int> pilot_symbol_indices(const SubframeSpec& spec) {
  if (spec.pilot_pattern == PilotPattern::BlockLeading) {
    std::vector<int> out(spec.n_pilot);
    for (int i = 0; i < spec.n_pilot; ++i) out[i] = i;
    return out;
  }
  return {2, 7, 11};
}

bool is_pilot_symbol(const SubframeSpec& spec, int symbol) {
  if (spec.pilot_pattern == PilotPattern::BlockLeading)
    return symbol < spec.n_pilot;
  return symbol == 2 || symbol == 7 || symbol == 11;
}

int pilot_owner(const SubframeSpec& spec, int symbol, int subcarrier) {
  if (spec.pilot_mode == PilotMode::RandomFull) return -1;
  return (subcarrier + symbol) % spec.n_t;
}

Real pilot_occupancy(const SubframeSpec& spec) {
  const auto pilots = pilot_symbol_indices(spec);
  return static_cast<Real>(pilots.size()) / static_cast<Real>(spec.n_total);
}

int data_symbol_count(const SubframeSpec& spec) {
  return spec.n_total - static_cast<int>(pilot_symbol_indices(spec).size());
}

size_t required_data_bits(const SubframeSpec& spec) {
  return static_cast<size_t>(data_symbol_count(spec)) * spec.n_sc * spec.n_t *
         qam::bits_per_symbol(spec.mod_order);
}

}  // namespace subframe

const ComplexGrid& SubframeTx::pilot_grid(int symbol) const {
  if (!is_pilot(symbol)) throw ConfigError("symbol is not pilot-bearing");
  return freq[symbol];
}

SubframeTx assemble_subframe(const SubframeSpec& spec, const Bits& data_bits,
                             uint64_t seed) {
  spec.validate();
  if (data_bits.size() != subframe::required_data_bits(spec))
    throw ConfigError("payload size mismatch: got " +
                      std::to_string(data_bits.size()) + " bits, expected " +
                      std::to_string(subframe::required_data_bits(spec)));

  SubframeTx tx;
  tx.spec = spec;
  tx.data_bits = data_bits;
  tx.freq.assign(spec.n_total, ComplexGrid::Zero(spec.n_t, spec.n_sc));

  // Pilots are drawn uniformly from the data constellation.
  std::mt19937_64 rng(derive_seed(seed, 0x9170u));
  std::uniform_int_distribution<int> level_idx(0, qam::pam_levels(spec.mod_order) - 1);
  const Real scale = qam::qam_scale(spec.mod_order);
  auto random_point = [&] {
    const int levels = qam::pam_levels(spec.mod_order);
    const int li = 2 * level_idx(rng) - (levels - 1);
    const int lq = 2 * level_idx(rng) - (levels - 1);
    return Cx(li, lq) / scale;
  };

  for (int sym : subframe::pilot_symbol_indices(spec)) {
    for (int k = 0; k < spec.n_sc; ++k) {
      if (spec.pilot_mode == PilotMode::RandomFull) {
        for (int t = 0; t < spec.n_t; ++t) tx.freq[sym](t, k) = random_point();
      } else {
        const int owner = subframe::pilot_owner(spec, sym, k);
        tx.freq[sym](owner, k) = random_point();
      }
    }
  }

  // Payload: antenna-major within each data symbol.
  const int bps = qam::bits_per_symbol(spec.mod_order);
  size_t pos = 0;
  for (int sym = 0; sym < spec.n_total; ++sym) {
    if (subframe::is_pilot_symbol(spec, sym)) continue;
    for (int t = 0; t < spec.n_t; ++t) {
      Bits slice(data_bits.begin() + pos, data_bits.begin() + pos + spec.n_sc * bps);
      pos += static_cast<size_t>(spec.n_sc) * bps;
      tx.freq[sym].row(t) = qam::map_bits_to_qam(slice, spec.mod_order).transpose();
    }
  }
  return tx;
}

Bits random_bits(size_t count, uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, 0xb175));
  std::bernoulli_distribution bit(0.5);
  Bits out(count);
  for (auto& b : out) b = bit(rng) ? 1 : 0;
  return out;
}

ComplexGrid subframe_to_time(const SubframeTx& tx) {
  const auto& spec = tx.spec;
  ComplexGrid out(spec.n_t, spec.total_samples());
  for (int sym = 0; sym < spec.n_total; ++sym)
    out.middleCols(static_cast<Eigen::Index>(sym) * spec.samples_per_symbol(),
                   spec.samples_per_symbol()) = ofdm::modulate(tx.freq[sym], spec.n_cp);
  return out;
}

}  // namespace neurorx
