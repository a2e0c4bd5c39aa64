#pragma once

#include "neurorx/core.hpp"

namespace neurorx::qam {

/// Odd-integer PAM lattice {-2K-1, ..., 2K+1} with K = (sqrt(M)-2)/2.
int pam_levels(int mod_order);           // sqrt(M)
int pam_k(int mod_order);                // K
std::vector<int> pam_lattice(int mod_order);

/// Scale between the internal integer lattice and the unit-average-power
/// constellation: physical = lattice / qam_scale(M).
Real qam_scale(int mod_order);

int bits_per_symbol(int mod_order);      // log2(M)

/// Gray <-> binary codeword helpers (reflected-binary, per I/Q axis).
uint32_t gray_to_binary(uint32_t g);
uint32_t binary_to_gray(uint32_t b);

/// Lattice level carried by a gray codeword of log2(sqrt(M)) bits, and back.
int gray_code_to_level(uint32_t code, int mod_order);
uint32_t level_to_gray_code(int level, int mod_order);

/// Gray-coded M-QAM at unit average power. Bit groups of log2(M) split as
/// [I bits | Q bits], MSB first within each axis.
CxVec map_bits_to_qam(const Bits& bits, int mod_order);
Bits demap_qam_to_bits(const CxVec& symbols, int mod_order);

/// Nearest lattice level / constellation point.
int nearest_pam_level(Real lattice_coord, int mod_order);
Cx nearest_qam_point(Cx physical, int mod_order);

/// Bits carried by one PAM lattice level (half of a QAM symbol's bits).
void append_level_bits(int level, int mod_order, Bits& out);

}  // namespace neurorx::qam
