#include "neurorx/ofdm.hpp"

#include <unsupported/Eigen/FFT>

namespace neurorx::ofdm {

namespace {

// One plan cache per thread; Eigen::FFT keeps per-size kissfft plans.
Eigen::FFT<Real>& fft_engine() {
  thread_local Eigen::FFT<Real> fft;
  return fft;
}

}  // namespace

ComplexGrid fft_rows(const ComplexGrid& x) {
  auto& fft = fft_engine();
  const Eigen::Index n = x.cols();
  const Real scale = 1.0 / std::sqrt(static_cast<Real>(n));
  ComplexGrid out(x.rows(), n);
  CxVec in_row(n), out_row(n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    in_row = x.row(r).transpose();
    fft.fwd(out_row, in_row);
    out.row(r) = out_row.transpose() * scale;
  }
  return out;
}

ComplexGrid ifft_rows(const ComplexGrid& x) {
  auto& fft = fft_engine();
  const Eigen::Index n = x.cols();
  // Eigen's inv already divides by n; rescale to the unitary convention.
  const Real scale = std::sqrt(static_cast<Real>(n));
  ComplexGrid out(x.rows(), n);
  CxVec in_row(n), out_row(n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    in_row = x.row(r).transpose();
    fft.inv(out_row, in_row);
    out.row(r) = out_row.transpose() * scale;
  }
  return out;
}

ComplexGrid modulate(const ComplexGrid& freq_symbol, int n_cp) {
  const Eigen::Index n_sc = freq_symbol.cols();
  if (n_cp < 0 || n_cp > n_sc) throw ConfigError("invalid CP length");
  ComplexGrid body = ifft_rows(freq_symbol);
  ComplexGrid out(freq_symbol.rows(), n_sc + n_cp);
  out.leftCols(n_cp) = body.rightCols(n_cp);
  out.rightCols(n_sc) = body;
  return out;
}

ComplexGrid demodulate(const ComplexGrid& time_symbol, int n_cp) {
  const Eigen::Index n_sc = time_symbol.cols() - n_cp;
  if (n_sc <= 0) throw ConfigError("time symbol shorter than CP");
  return fft_rows(time_symbol.rightCols(n_sc));
}

}  // namespace neurorx::ofdm
