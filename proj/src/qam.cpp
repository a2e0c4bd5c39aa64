#include "neurorx/qam.hpp"

#include <cmath>

namespace neurorx::qam {

namespace {

bool is_perfect_square(int m) {
  const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m))));
  return r * r == m;
}

void check_mod_order(int mod_order) {
  if (mod_order < 4 || !is_perfect_square(mod_order))
    throw ConfigError("mod_order must be a perfect square >= 4, got " +
                      std::to_string(mod_order));
}

}  // namespace

int pam_levels(int mod_order) {
  check_mod_order(mod_order);
  return static_cast<int>(std::lround(std::sqrt(static_cast<double>(mod_order))));
}

int pam_k(int mod_order) { return (pam_levels(mod_order) - 2) / 2; }

std::vector<int> pam_lattice(int mod_order) {
  const int levels = pam_levels(mod_order);
  std::vector<int> out(levels);
  for (int i = 0; i < levels; ++i) out[i] = 2 * i - (levels - 1);
  return out;
}

Real qam_scale(int mod_order) {
  check_mod_order(mod_order);
  return std::sqrt(2.0 * (mod_order - 1) / 3.0);
}

int bits_per_symbol(int mod_order) {
  const int levels = pam_levels(mod_order);
  int b = 0;
  while ((1 << b) < levels) ++b;
  return 2 * b;
}

uint32_t gray_to_binary(uint32_t g) {
  uint32_t b = g;
  while (g >>= 1) b ^= g;
  return b;
}

uint32_t binary_to_gray(uint32_t b) { return b ^ (b >> 1); }

int gray_code_to_level(uint32_t code, int mod_order) {
  const int levels = pam_levels(mod_order);
  const uint32_t idx = gray_to_binary(code);
  // Descending so the all-zeros codeword lands on the top level (+1 for QPSK).
  return (levels - 1) - 2 * static_cast<int>(idx);
}

uint32_t level_to_gray_code(int level, int mod_order) {
  const int levels = pam_levels(mod_order);
  const uint32_t idx = static_cast<uint32_t>(((levels - 1) - level) / 2);
  return binary_to_gray(idx);
}

CxVec map_bits_to_qam(const Bits& bits, int mod_order) {
  const int bps = bits_per_symbol(mod_order);
  if (bits.size() % static_cast<size_t>(bps) != 0)
    throw ConfigError("bit count " + std::to_string(bits.size()) +
                      " not divisible by log2(M) = " + std::to_string(bps));
  const int half = bps / 2;
  const Real scale = qam_scale(mod_order);
  const Eigen::Index n = static_cast<Eigen::Index>(bits.size()) / bps;
  CxVec out(n);
  for (Eigen::Index s = 0; s < n; ++s) {
    uint32_t ci = 0, cq = 0;
    for (int b = 0; b < half; ++b) {
      ci = (ci << 1) | bits[s * bps + b];
      cq = (cq << 1) | bits[s * bps + half + b];
    }
    out[s] = Cx(gray_code_to_level(ci, mod_order),
                gray_code_to_level(cq, mod_order)) / scale;
  }
  return out;
}

Bits demap_qam_to_bits(const CxVec& symbols, int mod_order) {
  const Real scale = qam_scale(mod_order);
  Bits out;
  out.reserve(symbols.size() * bits_per_symbol(mod_order));
  for (Eigen::Index s = 0; s < symbols.size(); ++s) {
    const int li = nearest_pam_level(symbols[s].real() * scale, mod_order);
    const int lq = nearest_pam_level(symbols[s].imag() * scale, mod_order);
    append_level_bits(li, mod_order, out);
    append_level_bits(lq, mod_order, out);
  }
  return out;
}

int nearest_pam_level(Real lattice_coord, int mod_order) {
  const int levels = pam_levels(mod_order);
  int idx = static_cast<int>(std::lround((lattice_coord + (levels - 1)) / 2.0));
  idx = std::max(0, std::min(levels - 1, idx));
  return 2 * idx - (levels - 1);
}

Cx nearest_qam_point(Cx physical, int mod_order) {
  const Real scale = qam_scale(mod_order);
  return Cx(nearest_pam_level(physical.real() * scale, mod_order),
            nearest_pam_level(physical.imag() * scale, mod_order)) / scale;
}

void append_level_bits(int level, int mod_order, Bits& out) {
  const int half = bits_per_symbol(mod_order) / 2;
  const uint32_t code = level_to_gray_code(level, mod_order);
  for (int b = half - 1; b >= 0; --b) out.push_back((code >> b) & 1u);
}

}  // namespace neurorx::qam
