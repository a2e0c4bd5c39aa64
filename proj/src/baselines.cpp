#include "neurorx/baselines.hpp"

#include <Eigen/QR>

#include "neurorx/qam.hpp"

namespace neurorx::baselines {

namespace {

using neurorx::subframe::pilot_owner;
using neurorx::subframe::pilot_symbol_indices;

ComplexGrid solve_subcarrier(const ComplexGrid& y_stack, const ComplexGrid& x_stack,
                             Real noise_var, int subcarrier) {
  ComplexGrid gram = x_stack * x_stack.adjoint();
  gram.diagonal().array() += std::max(noise_var, 1e-12);
  Eigen::LDLT<ComplexGrid> ldlt(gram);
  ComplexGrid h = ldlt.solve(x_stack * y_stack.adjoint()).adjoint();
  if (!all_finite(h))
    throw SubframeError("lmmse-csi", "rank-deficient pilot matrix at subcarrier " +
                                         std::to_string(subcarrier));
  return h;
}

}  // namespace

CsiEstimate lmmse_channel_estimate(const SubframeTx& tx,
                                   const std::vector<ComplexGrid>& rx_freq,
                                   Real noise_var) {
  const auto& spec = tx.spec;
  const auto pilots = pilot_symbol_indices(spec);

  CsiFrame frame(spec.n_sc);
  ComplexGrid y_stack(spec.n_r, pilots.size());
  ComplexGrid x_stack(spec.n_t, pilots.size());
  for (int k = 0; k < spec.n_sc; ++k) {
    for (size_t s = 0; s < pilots.size(); ++s) {
      y_stack.col(s) = rx_freq[pilots[s]].col(k);
      x_stack.col(s) = tx.freq[pilots[s]].col(k);
    }
    frame[k] = solve_subcarrier(y_stack, x_stack, noise_var, k);
  }

  CsiEstimate out;
  out.source = CsiSource::PilotOnly;
  out.frames.assign(spec.n_total, frame);
  return out;
}

PilotSymbolEstimates lmmse_pilot_symbol_estimates(
    const SubframeTx& tx, const std::vector<ComplexGrid>& rx_freq, Real noise_var) {
  const auto& spec = tx.spec;
  const auto pilots = pilot_symbol_indices(spec);
  PilotSymbolEstimates out;

  if (spec.pilot_mode == PilotMode::RandomFull) {
    // Full pilots interfere across antennas; only the joint solve is
    // well-posed, anchored at the pilot block's center.
    CsiEstimate joint = lmmse_channel_estimate(tx, rx_freq, noise_var);
    int center = 0;
    for (int s : pilots) center += s;
    out.symbols = {center / static_cast<int>(pilots.size())};
    out.frames = {joint.frames[0]};
    return out;
  }

  for (int sym : pilots) {
    CsiFrame frame(spec.n_sc, ComplexGrid::Zero(spec.n_r, spec.n_t));
    // Direct per-RE estimate on owned subcarriers.
    std::vector<std::vector<int>> owned(spec.n_t);
    for (int k = 0; k < spec.n_sc; ++k) {
      const int owner = pilot_owner(spec, sym, k);
      const Cx p = tx.freq[sym](owner, k);
      const Real denom = std::norm(p) + std::max(noise_var, 1e-12);
      frame[k].col(owner) = rx_freq[sym].col(k) * (std::conj(p) / denom);
      owned[owner].push_back(k);
    }
    // Linear frequency interpolation of each antenna's column over the comb.
    for (int t = 0; t < spec.n_t; ++t) {
      const auto& ks = owned[t];
      for (int k = 0; k < spec.n_sc; ++k) {
        if (pilot_owner(spec, sym, k) == t) continue;
        auto it = std::lower_bound(ks.begin(), ks.end(), k);
        if (it == ks.begin())
          frame[k].col(t) = frame[ks.front()].col(t);
        else if (it == ks.end())
          frame[k].col(t) = frame[ks.back()].col(t);
        else {
          const int hi = *it, lo = *(it - 1);
          const Real w = static_cast<Real>(k - lo) / static_cast<Real>(hi - lo);
          frame[k].col(t) = (1.0 - w) * frame[lo].col(t) + w * frame[hi].col(t);
        }
      }
    }
    out.symbols.push_back(sym);
    out.frames.push_back(std::move(frame));
  }
  return out;
}

CsiEstimate interpolate_csi(const PilotSymbolEstimates& pilots, int n_total) {
  if (pilots.frames.empty()) throw ConfigError("interpolate_csi: no pilot estimates");
  CsiEstimate out;
  out.source = CsiSource::Interpolated;
  out.frames.resize(n_total);

  const int n_sc = static_cast<int>(pilots.frames[0].size());
  for (int sym = 0; sym < n_total; ++sym) {
    if (pilots.frames.size() == 1) {
      out.frames[sym] = pilots.frames[0];
      continue;
    }
    // Bracketing pilot estimates inside the pilot span; beyond it the line
    // through the first and last estimates extrapolates (the widest baseline
    // keeps the slope noise down).
    size_t lo, hi;
    if (sym <= pilots.symbols.front() || sym >= pilots.symbols.back()) {
      lo = 0;
      hi = pilots.symbols.size() - 1;
    } else {
      hi = 0;
      while (hi + 1 < pilots.symbols.size() && pilots.symbols[hi + 1] < sym) ++hi;
      lo = hi;
      hi = hi + 1;
    }
    const Real t0 = pilots.symbols[lo], t1 = pilots.symbols[hi];
    const Real w = (sym - t0) / (t1 - t0);
    CsiFrame frame(n_sc);
    for (int k = 0; k < n_sc; ++k)
      frame[k] = (1.0 - w) * pilots.frames[lo][k] + w * pilots.frames[hi][k];
    out.frames[sym] = std::move(frame);
  }
  return out;
}

CsiEstimate dd_rls_csi(const SubframeTx& tx,
                       const std::vector<ComplexGrid>& rx_freq,
                       const std::vector<std::vector<CxVec>>& decided_symbols,
                       const CsiEstimate& pilot_csi, Real alpha, Real noise_var) {
  const auto& spec = tx.spec;
  CsiEstimate out;
  out.source = CsiSource::DecisionDirected;
  out.frames.resize(spec.n_total);

  // Per-subcarrier RLS over h rows: regressor x_hat, target y.
  std::vector<ComplexGrid> h(spec.n_sc);
  std::vector<ComplexGrid> p(spec.n_sc);
  const auto pilots = pilot_symbol_indices(spec);
  ComplexGrid x_stack(spec.n_t, pilots.size());
  for (int k = 0; k < spec.n_sc; ++k) {
    h[k] = pilot_csi.frames[pilots.back()][k];
    for (size_t s = 0; s < pilots.size(); ++s)
      x_stack.col(s) = tx.freq[pilots[s]].col(k);
    ComplexGrid gram = x_stack * x_stack.adjoint();
    gram.diagonal().array() += std::max(noise_var, 1e-9);
    p[k] = gram.inverse();
  }

  size_t data_idx = 0;
  for (int sym = 0; sym < spec.n_total; ++sym) {
    if (tx.is_pilot(sym)) {
      out.frames[sym].resize(spec.n_sc);
      for (int k = 0; k < spec.n_sc; ++k) out.frames[sym][k] = h[k];
      continue;
    }
    // Estimate for this symbol uses the state tracked so far, then the
    // symbol's decisions update the tracker.
    out.frames[sym].resize(spec.n_sc);
    for (int k = 0; k < spec.n_sc; ++k) out.frames[sym][k] = h[k];
    const auto& decisions = decided_symbols[data_idx++];
    for (int k = 0; k < spec.n_sc; ++k) {
      const CxVec& x = decisions[k];
      const CxVec pz = p[k] * x;
      const Cx denom = alpha + x.dot(pz);
      const CxVec v = pz / denom;
      const CxVec err = rx_freq[sym].col(k) - h[k] * x;
      h[k].noalias() += err * v.adjoint();
      p[k] = (p[k] - v * (x.adjoint() * p[k])) / alpha;
    }
  }
  return out;
}

CsiEstimate oracle_csi(const ChannelRealization& ch, const SubframeSpec& spec) {
  CsiEstimate out;
  out.source = CsiSource::Oracle;
  out.frames.resize(spec.n_total);
  for (int sym = 0; sym < spec.n_total; ++sym)
    out.frames[sym] = true_freq_response(ch, sym, spec);
  return out;
}

CxVec lmmse_detect(const CxVec& y, const ComplexGrid& h, Real noise_var,
                   int mod_order) {
  CxVec x_eq;
  if (noise_var > 0.0) {
    ComplexGrid gram = h.adjoint() * h;
    gram.diagonal().array() += noise_var;
    x_eq = gram.ldlt().solve(h.adjoint() * y);
  } else {
    x_eq = h.completeOrthogonalDecomposition().solve(y);
  }
  CxVec out(x_eq.size());
  for (Eigen::Index i = 0; i < x_eq.size(); ++i)
    out[i] = qam::nearest_qam_point(x_eq[i], mod_order);
  return out;
}

CxVec ml_detect_bruteforce(const CxVec& y, const ComplexGrid& h, int mod_order) {
  const int n_t = static_cast<int>(h.cols());
  double space = std::pow(static_cast<double>(mod_order), n_t);
  if (space > 1e6) throw ConfigError("ML search space exceeds 1e6 candidates");

  const auto lattice = qam::pam_lattice(mod_order);
  const int levels = static_cast<int>(lattice.size());
  const Real scale = qam::qam_scale(mod_order);

  std::vector<int> idx(2 * n_t, 0);  // [i0, q0, i1, q1, ...]
  CxVec best(n_t), cand(n_t);
  Real best_cost = std::numeric_limits<Real>::infinity();
  const long total = static_cast<long>(space);
  for (long it = 0; it < total; ++it) {
    long rem = it;
    for (int t = 0; t < n_t; ++t) {
      const int i_lvl = static_cast<int>(rem % levels); rem /= levels;
      const int q_lvl = static_cast<int>(rem % levels); rem /= levels;
      cand[t] = Cx(lattice[i_lvl], lattice[q_lvl]) / scale;
    }
    const Real cost = (y - h * cand).squaredNorm();
    if (cost < best_cost) {
      best_cost = cost;
      best = cand;
    }
  }
  return best;
}

SphereResult sphere_decode(const CxVec& y, const ComplexGrid& h, int mod_order) {
  const int n_t = static_cast<int>(h.cols());
  const int dim = 2 * n_t;
  const int levels = qam::pam_levels(mod_order);
  const int lo = -(levels - 1), hi = levels - 1;
  const Real scale = qam::qam_scale(mod_order);

  // Real-valued lifting in lattice coordinates: y = (H~ / scale) x~.
  RealGrid a = real_channel_form(h) / scale;
  RealVec yr = complex_to_real(y);

  Eigen::HouseholderQR<RealGrid> qr(a);
  RealGrid r_full = qr.matrixQR().triangularView<Eigen::Upper>();
  RealGrid q_full = qr.householderQ();
  RealGrid r = r_full.topRows(dim);
  RealGrid q = q_full.leftCols(dim);
  // Positive diagonal convention.
  for (int i = 0; i < dim; ++i)
    if (r(i, i) < 0) {
      r.row(i) = -r.row(i);
      q.col(i) = -q.col(i);
    }

  SphereResult res;
  const Real rank_tol = 1e-9 * std::max<Real>(1.0, r.cwiseAbs().maxCoeff());
  for (int i = 0; i < dim; ++i)
    if (std::abs(r(i, i)) < rank_tol) {
      res.symbols = ml_detect_bruteforce(y, h, mod_order);
      res.fallback = true;
      return res;
    }

  const RealVec yq = q.transpose() * yr;

  // Schnorr-Euchner depth-first enumeration with radius shrinking.
  RealVec xt(dim), ksi = RealVec::Zero(dim), dist = RealVec::Zero(dim);
  std::vector<int> delta(dim, 0);
  std::vector<int> best(dim, lo);
  Real radius = std::numeric_limits<Real>::infinity();
  bool found = false;

  auto seed_level = [&](int i) {
    const Real babai = (yq[i] - ksi[i]) / r(i, i);
    int lvl = 2 * static_cast<int>(std::lround((babai + (levels - 1)) / 2.0)) -
              (levels - 1);
    lvl = std::max(lo, std::min(hi, lvl));
    xt[i] = lvl;
    delta[i] = (yq[i] - ksi[i] - r(i, i) * lvl) >= 0 ? 2 : -2;
    if (lvl <= lo) delta[i] = 2;
    if (lvl >= hi) delta[i] = -2;
  };
  auto enumerate_next = [&](int i) {
    xt[i] += delta[i];
    delta[i] = -delta[i] - (delta[i] > 0 ? 2 : -2);
  };

  int i = dim - 1;
  seed_level(i);
  while (true) {
    ++res.nodes;
    const Real diff = yq[i] - ksi[i] - r(i, i) * xt[i];
    const Real level_dist = diff * diff;

    bool in_set = xt[i] >= lo && xt[i] <= hi;
    if (!in_set || dist[i] + level_dist >= radius) {
      // Outside the sphere or the signal set: zig-zag within this level,
      // or backtrack when the level is exhausted.
      bool exhausted = false;
      if (!in_set) {
        const Real next = xt[i] + delta[i];
        exhausted = (xt[i] < lo && next > hi) || (xt[i] > hi && next < lo);
      } else {
        // Inside the set but outside the sphere: SE ordering means every
        // remaining sibling is at least this far; prune the level.
        exhausted = true;
      }
      if (exhausted) {
        if (i == dim - 1) break;
        ++i;
        enumerate_next(i);
      } else {
        enumerate_next(i);
      }
      continue;
    }

    if (i > 0) {
      dist[i - 1] = dist[i] + level_dist;
      ksi[i - 1] = 0;
      for (int j = i; j < dim; ++j) ksi[i - 1] += r(i - 1, j) * xt[j];
      --i;
      seed_level(i);
    } else {
      radius = dist[0] + level_dist;
      found = true;
      for (int j = 0; j < dim; ++j) best[j] = static_cast<int>(xt[j]);
      ++i;
      if (i >= dim) break;
      enumerate_next(i);
    }
  }

  if (!found) {
    res.symbols = ml_detect_bruteforce(y, h, mod_order);
    res.fallback = true;
    return res;
  }
  res.symbols = CxVec(n_t);
  for (int t = 0; t < n_t; ++t)
    res.symbols[t] = Cx(best[t], best[n_t + t]) / scale;
  return res;
}

}  // namespace neurorx::baselines
