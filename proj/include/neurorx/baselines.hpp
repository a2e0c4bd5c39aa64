#pragma once

#include "neurorx/channel.hpp"
#include "neurorx/core.hpp"
#include "neurorx/subframe.hpp"

namespace neurorx::baselines {

enum class CsiSource { PilotOnly, Interpolated, DecisionDirected, Oracle };

/// Per-subcarrier channel matrices for one OFDM symbol.
using CsiFrame = std::vector<ComplexGrid>;

struct CsiEstimate {
  CsiSource source = CsiSource::PilotOnly;
  /// One frame per OFDM symbol of the subframe.
  std::vector<CsiFrame> frames;
};

/// Joint per-subcarrier regularized LS over all pilot symbols:
/// H_k = Y_k X_k^H (X_k X_k^H + noise_var I)^{-1}. Every symbol of the
/// returned estimate carries the same frame.
CsiEstimate lmmse_channel_estimate(const SubframeTx& tx,
                                   const std::vector<ComplexGrid>& rx_freq,
                                   Real noise_var);

/// Per-pilot-symbol estimates (OrthogonalEmpty combs: owned subcarriers
/// solved directly, the rest filled by linear frequency interpolation;
/// RandomFull needs the joint solve, so the single joint frame is returned
/// at the pilot block's center).
struct PilotSymbolEstimates {
  std::vector<int> symbols;      // time positions of the estimates
  std::vector<CsiFrame> frames;
};
PilotSymbolEstimates lmmse_pilot_symbol_estimates(
    const SubframeTx& tx, const std::vector<ComplexGrid>& rx_freq, Real noise_var);

/// Linear time interpolation/extrapolation of pilot estimates across the
/// subframe; a single estimate extends as a constant.
CsiEstimate interpolate_csi(const PilotSymbolEstimates& pilots, int n_total);

/// Per-subcarrier RLS tracking of the channel rows with decided symbols as
/// regressors, starting from the pilot estimate.
CsiEstimate dd_rls_csi(const SubframeTx& tx,
                       const std::vector<ComplexGrid>& rx_freq,
                       const std::vector<std::vector<CxVec>>& decided_symbols,
                       const CsiEstimate& pilot_csi, Real alpha, Real noise_var);

CsiEstimate oracle_csi(const ChannelRealization& ch, const SubframeSpec& spec);

/// x_hat = (H^H H + noise_var I)^{-1} H^H y projected to the nearest
/// constellation point; pseudo-inverse when noise_var == 0.
CxVec lmmse_detect(const CxVec& y, const ComplexGrid& h, Real noise_var,
                   int mod_order);

/// Exact ML by enumeration; guards the M^{N_t} search space at 1e6.
CxVec ml_detect_bruteforce(const CxVec& y, const ComplexGrid& h, int mod_order);

struct SphereResult {
  CxVec symbols;
  long nodes = 0;           // search tree nodes visited
  bool fallback = false;    // brute force used (rank deficiency)
};

/// Exact ML via QR-based Schnorr-Euchner depth-first search on the
/// real-valued lifted lattice with radius shrinking.
SphereResult sphere_decode(const CxVec& y, const ComplexGrid& h, int mod_order);

}  // namespace neurorx::baselines
