#pragma once

#include "neurorx/core.hpp"

namespace neurorx {

enum class PilotPattern { BlockLeading, Scattered5GLike };
enum class PilotMode { RandomFull, OrthogonalEmpty };

/// Dimensions and pilot layout of one transmission.
struct SubframeSpec {
  int n_t = 4;
  int n_r = 4;
  int n_sc = 512;
  int n_cp = 32;
  int n_total = 20;   // OFDM symbols per subframe
  int n_pilot = 4;    // pilot-bearing symbols
  int mod_order = 16;
  PilotPattern pilot_pattern = PilotPattern::BlockLeading;
  PilotMode pilot_mode = PilotMode::RandomFull;

  int n_data() const { return n_total - n_pilot; }
  int samples_per_symbol() const { return n_sc + n_cp; }
  int total_samples() const { return n_total * samples_per_symbol(); }

  void validate() const;
};

namespace subframe {

/// Indices of pilot-bearing OFDM symbols. BlockLeading: 0..n_pilot-1.
/// Scattered5GLike: a fixed 14-symbol lattice with pilots on symbols
/// {2, 7, 11}; pilot-bearing symbols carry no payload in either mode.
std::vector<int> pilot_symbol_indices(const SubframeSpec& spec);
bool is_pilot_symbol(const SubframeSpec& spec, int symbol);

/// Antenna owning pilot RE (symbol, subcarrier) under OrthogonalEmpty
/// (comb across subcarriers, staggered per symbol); -1 when every antenna
/// transmits (RandomFull).
int pilot_owner(const SubframeSpec& spec, int symbol, int subcarrier);

/// Fraction of resource elements unavailable for payload.
Real pilot_occupancy(const SubframeSpec& spec);

int data_symbol_count(const SubframeSpec& spec);
size_t required_data_bits(const SubframeSpec& spec);

}  // namespace subframe

/// One assembled subframe: the transmitter's frequency grids plus the
/// receiver-known pilot record and the ground truth kept for scoring.
struct SubframeTx {
  SubframeSpec spec;
  std::vector<ComplexGrid> freq;  // per symbol, n_t x n_sc, unit-power points
  Bits data_bits;                 // ground truth payload (scoring only)

  bool is_pilot(int symbol) const { return subframe::is_pilot_symbol(spec, symbol); }
  /// Receiver-known pilot grid for a pilot-bearing symbol.
  const ComplexGrid& pilot_grid(int symbol) const;
};

/// Fills pilot REs per pilot_mode and maps payload bits onto data REs.
SubframeTx assemble_subframe(const SubframeSpec& spec, const Bits& data_bits,
                             uint64_t seed);

/// Random payload convenience used by the experiment drivers.
Bits random_bits(size_t count, uint64_t seed);

/// IFFT + CP per symbol, concatenated: n_t x n_total*(n_sc+n_cp).
ComplexGrid subframe_to_time(const SubframeTx& tx);

}  // namespace neurorx
