#pragma once

#include "neurorx/core.hpp"

namespace neurorx::ofdm {

/// Unitary DFT conventions (1/sqrt(n) both directions) so signal power is
/// invariant across domains.

/// freq (rows x n_sc) -> time (rows x (n_sc + n_cp)); the leading n_cp
/// samples replicate the tail (cyclic prefix).
ComplexGrid modulate(const ComplexGrid& freq_symbol, int n_cp);

/// time (rows x (n_sc + n_cp)) -> freq (rows x n_sc).
ComplexGrid demodulate(const ComplexGrid& time_symbol, int n_cp);

/// Per-row unitary transforms without CP handling.
ComplexGrid fft_rows(const ComplexGrid& x);
ComplexGrid ifft_rows(const ComplexGrid& x);

}  // namespace neurorx::ofdm
