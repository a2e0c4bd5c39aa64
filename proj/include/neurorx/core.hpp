#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace neurorx {

using Real = double;
using Cx = std::complex<Real>;

/// Universal signal carrier: rows are antennas/streams, cols are samples or
/// subcarriers depending on the axis semantics declared at the call site.
using ComplexGrid = Eigen::MatrixXcd;
using RealGrid = Eigen::MatrixXd;
using CxVec = Eigen::VectorXcd;
using RealVec = Eigen::VectorXd;
using IntGrid = Eigen::MatrixXi;

using Bits = std::vector<uint8_t>;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Stage-tagged numerical failure raised while detecting a subframe.
struct SubframeError : std::runtime_error {
  std::string stage;
  SubframeError(std::string stage_, const std::string& what_)
      : std::runtime_error(stage_ + ": " + what_), stage(std::move(stage_)) {}
};

// ---------------------------------------------------------------------------
// Seed derivation. One master seed fans out into independent per-stage
// streams through a SplitMix64 chain, so paired experiments can replay the
// exact same channel/data/noise draws across detector variants.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a) {
  return splitmix64(base ^ splitmix64(a + 0x100001b3ULL));
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b) {
  return derive_seed(derive_seed(base, a), b);
}

inline uint64_t derive_seed(uint64_t base, uint64_t a, uint64_t b, uint64_t c) {
  return derive_seed(derive_seed(base, a, b), c);
}

// ---------------------------------------------------------------------------
// Complex <-> real lifting used by the frequency-domain networks.
// ---------------------------------------------------------------------------

/// Stacks real parts over imaginary parts; doubles the length.
inline RealVec complex_to_real(const CxVec& v) {
  RealVec out(2 * v.size());
  out.head(v.size()) = v.real();
  out.tail(v.size()) = v.imag();
  return out;
}

inline CxVec real_to_complex(const RealVec& v) {
  const Eigen::Index n = v.size() / 2;
  CxVec out(n);
  out.real() = v.head(n);
  out.imag() = v.tail(n);
  return out;
}

/// [[Re, -Im], [Im, Re]] block lifting; satisfies
/// real_channel_form(H) * complex_to_real(x) == complex_to_real(H * x).
inline RealGrid real_channel_form(const ComplexGrid& h) {
  const Eigen::Index r = h.rows(), c = h.cols();
  RealGrid out(2 * r, 2 * c);
  out.topLeftCorner(r, c) = h.real();
  out.topRightCorner(r, c) = -h.imag();
  out.bottomLeftCorner(r, c) = h.imag();
  out.bottomRightCorner(r, c) = h.real();
  return out;
}

inline bool all_finite(const ComplexGrid& g) { return g.allFinite(); }
inline bool all_finite(const RealGrid& g) { return g.allFinite(); }

}  // namespace neurorx
