#include "neurorx/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <thread>

#include "neurorx/ofdm.hpp"
#include "neurorx/qam.hpp"

namespace neurorx {

bool is_rc_variant(Variant v) {
  return v == Variant::RcStruct || v == Variant::RcStructDf ||
         v == Variant::RcStructNetDf || v == Variant::RcAttStructNetDf;
}

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::RcStruct: return "rc-struct";
    case Variant::RcStructDf: return "rc-struct-df";
    case Variant::RcStructNetDf: return "rc-structnet-df";
    case Variant::RcAttStructNetDf: return "rc-att-structnet-df";
    case Variant::Lmmse: return "lmmse";
    case Variant::SphereDecoder: return "sd";
    case Variant::MlOracle: return "ml";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  for (Variant v : {Variant::RcStruct, Variant::RcStructDf, Variant::RcStructNetDf,
                    Variant::RcAttStructNetDf, Variant::Lmmse,
                    Variant::SphereDecoder, Variant::MlOracle})
    if (variant_name(v) == name) return v;
  return std::nullopt;
}

std::string csi_source_name(baselines::CsiSource s) {
  switch (s) {
    case baselines::CsiSource::PilotOnly: return "pilot";
    case baselines::CsiSource::Interpolated: return "interp";
    case baselines::CsiSource::DecisionDirected: return "dd";
    case baselines::CsiSource::Oracle: return "oracle";
  }
  return "?";
}

std::optional<baselines::CsiSource> csi_source_from_name(const std::string& name) {
  for (auto s : {baselines::CsiSource::PilotOnly, baselines::CsiSource::Interpolated,
                 baselines::CsiSource::DecisionDirected, baselines::CsiSource::Oracle})
    if (csi_source_name(s) == name) return s;
  return std::nullopt;
}

std::string DetectorConfig::name() const {
  if (is_rc_variant(variant)) return variant_name(variant);
  return variant_name(variant) + ":" + csi_source_name(csi_source);
}

std::string DetectionReport::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "bits=" << bits << " bit_errors=" << bit_errors << " symbols=" << symbols
     << " symbol_errors=" << symbol_errors << "\n";
  for (const auto& g : detected_levels) {
    for (Eigen::Index i = 0; i < g.rows(); ++i) {
      for (Eigen::Index j = 0; j < g.cols(); ++j) os << g(i, j) << ",";
      os << "\n";
    }
  }
  for (long h : confidence_hist) os << h << ",";
  os << "\n";
  return os.str();
}

namespace {

using Clock = std::chrono::steady_clock;

struct StageTimer {
  DetectionReport& report;
  std::string stage;
  Clock::time_point start = Clock::now();
  StageTimer(DetectionReport& r, std::string s) : report(r), stage(std::move(s)) {}
  ~StageTimer() {
    report.stage_seconds[stage] +=
        std::chrono::duration<Real>(Clock::now() - start).count();
  }
};

RealGrid lattice_features(const ComplexGrid& freq, Real scale) {
  RealGrid f(2 * freq.rows(), freq.cols());
  f.topRows(freq.rows()) = freq.real() * scale;
  f.bottomRows(freq.rows()) = freq.imag() * scale;
  return f;
}

IntGrid lattice_levels(const ComplexGrid& freq, Real scale) {
  IntGrid out(2 * freq.rows(), freq.cols());
  for (Eigen::Index j = 0; j < freq.cols(); ++j)
    for (Eigen::Index i = 0; i < freq.rows(); ++i) {
      out(i, j) = static_cast<int>(std::lround(freq(i, j).real() * scale));
      out(i + freq.rows(), j) = static_cast<int>(std::lround(freq(i, j).imag() * scale));
    }
  return out;
}

struct Groups {
  std::vector<int> start, size;
  int count() const { return static_cast<int>(start.size()); }
  int of_subcarrier(int k) const {
    for (int g = 0; g < count(); ++g)
      if (k >= start[g] && k < start[g] + size[g]) return g;
    return count() - 1;
  }
};

Groups make_groups(int n_sc, int group_size) {
  Groups g;
  for (int s = 0; s < n_sc; s += group_size) {
    g.start.push_back(s);
    g.size.push_back(std::min(group_size, n_sc - s));
  }
  return g;
}

/// Valid PAM training dims for a pilot RE: every dim under RandomFull, the
/// owner antenna's I/Q dims under OrthogonalEmpty.
std::vector<int> valid_pilot_dims(const SubframeSpec& spec, int sym, int k) {
  std::vector<int> dims;
  if (spec.pilot_mode == PilotMode::RandomFull) {
    dims.resize(2 * spec.n_t);
    for (int n = 0; n < 2 * spec.n_t; ++n) dims[n] = n;
  } else {
    const int owner = subframe::pilot_owner(spec, sym, k);
    dims = {owner, owner + spec.n_t};
  }
  return dims;
}

struct ScoreAccumulator {
  const SubframeTx& tx;
  DetectionReport& report;
  Real scale;

  void add_symbol(int sym, const IntGrid& levels, const RealGrid& conf) {
    const auto& spec = tx.spec;
    const IntGrid truth = lattice_levels(tx.freq[sym], scale);
    report.detected_levels.push_back(levels);
    for (int k = 0; k < spec.n_sc; ++k)
      for (int t = 0; t < spec.n_t; ++t) {
        ++report.symbols;
        if (levels(t, k) != truth(t, k) ||
            levels(t + spec.n_t, k) != truth(t + spec.n_t, k))
          ++report.symbol_errors;
      }
    for (Eigen::Index j = 0; j < conf.cols(); ++j)
      for (Eigen::Index i = 0; i < conf.rows(); ++i) {
        int bin = std::min(19, static_cast<int>(conf(i, j) * 20.0));
        ++report.confidence_hist[std::max(0, bin)];
      }
  }

  void finalize_bits() {
    const auto& spec = tx.spec;
    const int bps = qam::bits_per_symbol(spec.mod_order);
    report.detected_bits.reserve(report.detected_levels.size() * spec.n_t *
                                 spec.n_sc * bps);
    size_t sym_idx = 0;
    for (int sym = 0; sym < spec.n_total; ++sym) {
      if (tx.is_pilot(sym)) continue;
      const IntGrid& lv = report.detected_levels[sym_idx++];
      for (int t = 0; t < spec.n_t; ++t)
        for (int k = 0; k < spec.n_sc; ++k) {
          qam::append_level_bits(lv(t, k), spec.mod_order, report.detected_bits);
          qam::append_level_bits(lv(t + spec.n_t, k), spec.mod_order,
                                 report.detected_bits);
        }
    }
    report.bits = static_cast<long>(tx.data_bits.size());
    for (size_t i = 0; i < tx.data_bits.size(); ++i)
      if (tx.data_bits[i] != report.detected_bits[i]) ++report.bit_errors;
  }
};

void check_finite(const ComplexGrid& g, const char* stage) {
  if (!all_finite(g)) throw SubframeError(stage, "non-finite values");
}

// -------------------------------------------------------------------------
// RC-family detection
// -------------------------------------------------------------------------

struct RcRun {
  std::vector<ReservoirModel> models;
  /// Per OFDM symbol: feature_dim x (sps + delay); the readout for in-symbol
  /// sample j lives at column j + delay.
  std::vector<ComplexGrid> sym_traj;
  int delay = 0;

  ComplexGrid readout(const ComplexGrid& w_out, int sym, int sps) const {
    return w_out * sym_traj[sym].middleCols(delay, sps);
  }
};

/// Runs (and pilot-trains) the reservoir cascade symbol by symbol. Each
/// symbol's trajectory is extended by `delay` columns fed with the symbol's
/// own body head (exact under the cyclic prefix), so delayed estimates never
/// read past the symbol.
RcRun train_rc_pilot(const DetectorConfig& cfg, const SubframeSpec& spec,
                     const ComplexGrid& rx_time,
                     const std::vector<int>& pilot_syms,
                     const std::vector<ComplexGrid>& pilot_targets,
                     uint64_t seed, ComplexGrid* phi_inv_out) {
  const int sps = spec.samples_per_symbol();
  RcRun out;
  out.delay = cfg.rc.delay < 0 ? spec.n_cp / 2 : cfg.rc.delay;
  if (out.delay > spec.n_sc)
    throw ConfigError("reservoir delay larger than the OFDM body");

  // Per-symbol input segments of the current layer.
  std::vector<ComplexGrid> input(spec.n_total);
  for (int sym = 0; sym < spec.n_total; ++sym)
    input[sym] = rx_time.middleCols(static_cast<Eigen::Index>(sym) * sps, sps);

  for (int layer = 0; layer < cfg.rc.layers; ++layer) {
    ReservoirModel model = init_reservoir(
        static_cast<int>(input[0].rows()), spec.n_t, cfg.rc.n_neurons,
        cfg.rc.window_len, cfg.rc.spectral_radius, cfg.rc.input_scale,
        derive_seed(seed, 0xe5c0, layer));

    std::vector<ComplexGrid> traj(spec.n_total);
    RcStreamState st = zero_stream_state(model);
    for (int sym = 0; sym < spec.n_total; ++sym) {
      traj[sym] = ComplexGrid(model.feature_dim(), sps + out.delay);
      traj[sym].leftCols(sps) = run_states_stream(model, input[sym], st);
      if (out.delay > 0) {
        RcStreamState wrap = st;
        traj[sym].rightCols(out.delay) = run_states_stream(
            model, input[sym].middleCols(spec.n_cp, out.delay), wrap);
      }
    }

    ComplexGrid z_pilot(model.feature_dim(),
                        static_cast<Eigen::Index>(pilot_syms.size()) * sps);
    ComplexGrid o_pilot(spec.n_t,
                        static_cast<Eigen::Index>(pilot_syms.size()) * sps);
    for (size_t p = 0; p < pilot_syms.size(); ++p) {
      z_pilot.middleCols(p * sps, sps) =
          traj[pilot_syms[p]].middleCols(out.delay, sps);
      o_pilot.middleCols(p * sps, sps) = pilot_targets[p];
    }
    LsSolution ls = train_ls(z_pilot, o_pilot, cfg.rc.ls_ridge);
    model.w_out = ls.w_out;

    if (layer == cfg.rc.layers - 1) {
      if (phi_inv_out) *phi_inv_out = ls.phi_inv;
      out.sym_traj = std::move(traj);
      out.models.push_back(std::move(model));
      break;
    }
    for (int sym = 0; sym < spec.n_total; ++sym)
      input[sym] = model.w_out * traj[sym].middleCols(out.delay, sps);
    out.models.push_back(std::move(model));
  }
  return out;
}

struct MhaGridIo {
  /// Per-antenna pilot grid (n_p x 2 n_sc) from per-symbol feature grids.
  static RealGrid build(const std::vector<RealGrid>& feats, int antenna, int n_t,
                        int n_sc) {
    RealGrid grid(static_cast<Eigen::Index>(feats.size()), 2 * n_sc);
    for (size_t p = 0; p < feats.size(); ++p) {
      grid.row(p).head(n_sc) = feats[p].row(antenna);
      grid.row(p).tail(n_sc) = feats[p].row(antenna + n_t);
    }
    return grid;
  }
  /// Scatter one antenna's MHA output row back into a feature grid.
  static void scatter_row(const RealGrid& out_grid, Eigen::Index row, int antenna,
                          int n_t, int n_sc, RealGrid& feats) {
    feats.row(antenna) = out_grid.row(row).head(n_sc);
    feats.row(antenna + n_t) = out_grid.row(row).tail(n_sc);
  }
};

}  // namespace

DetectionReport detect_subframe(const DetectorConfig& cfg, const DetectInputs& in) {
  const SubframeTx& tx = *in.tx;
  const SubframeSpec& spec = tx.spec;
  const ComplexGrid& rx_time = *in.rx_time;
  const Real scale = qam::qam_scale(spec.mod_order);
  const int d = 2 * spec.n_t;
  const bool use_df = cfg.variant != Variant::RcStruct;
  const bool learn_pe = cfg.variant == Variant::RcStructNetDf ||
                        cfg.variant == Variant::RcAttStructNetDf;
  // The attention mechanism is the 2D MHA together with the attention loss;
  // the other DF variants fine-tune on every detected sample at unit weight.
  const bool use_mha = cfg.variant == Variant::RcAttStructNetDf;
  const bool use_att_loss = cfg.variant == Variant::RcAttStructNetDf;

  DetectionReport report;
  ScoreAccumulator score{tx, report, scale};

  const auto pilot_syms = subframe::pilot_symbol_indices(spec);
  const int sps = spec.samples_per_symbol();

  // --- Time domain: reservoir pilot training over the received stream.
  ComplexGrid phi_inv;
  RcRun rc;
  {
    StageTimer t(report, "rc-pilot");
    std::vector<ComplexGrid> pilot_targets;
    for (int sym : pilot_syms)
      pilot_targets.push_back(ofdm::modulate(tx.freq[sym], spec.n_cp));
    rc = train_rc_pilot(cfg, spec, rx_time, pilot_syms, pilot_targets,
                        in.model_seed, &phi_inv);
  }
  ComplexGrid w_out = rc.models.back().w_out;

  // --- Pilot-phase frequency features and labels.
  std::vector<RealGrid> pilot_feats;   // per pilot symbol, d x n_sc
  std::vector<IntGrid> pilot_labels;   // lattice
  {
    StageTimer t(report, "rc-pilot-freq");
    for (int sym : pilot_syms) {
      ComplexGrid out_time = rc.readout(w_out, sym, sps);
      check_finite(out_time, "rc-pilot-freq");
      ComplexGrid out_freq = ofdm::demodulate(out_time, spec.n_cp);
      pilot_feats.push_back(lattice_features(out_freq, scale));
      pilot_labels.push_back(lattice_levels(tx.freq[sym], scale));
    }
  }

  // --- Frequency domain: per-group StructNets.
  const Groups groups = make_groups(spec.n_sc, cfg.sn.group_size);
  std::vector<StructNetParams> nets(groups.count());
  Mlp offline = in.offline_clf
                    ? *in.offline_clf
                    : offline_pretrain(d, cfg.sn.hidden, spec.mod_order,
                                       cfg.sn.offline_samples, cfg.sn.offline_epochs,
                                       cfg.sn.offline_lr,
                                       derive_seed(in.model_seed, 0x0ff1));
  {
    StageTimer t(report, "pe-init");
    for (int g = 0; g < groups.count(); ++g) {
      std::vector<Eigen::Index> cols;
      for (size_t p = 0; p < pilot_syms.size(); ++p)
        for (int k = groups.start[g]; k < groups.start[g] + groups.size[g]; ++k)
          cols.push_back(static_cast<Eigen::Index>(p) * spec.n_sc + k);
      RealGrid feats(d, cols.size()), targets(d, cols.size());
      for (size_t i = 0; i < cols.size(); ++i) {
        const int p = static_cast<int>(cols[i] / spec.n_sc);
        const int k = static_cast<int>(cols[i] % spec.n_sc);
        feats.col(i) = pilot_feats[p].col(k);
        targets.col(i) = pilot_labels[p].col(k).cast<Real>();
      }
      nets[g].pe = init_pe_lmmse(feats, targets, cfg.sn.pe_ridge);
      nets[g].clf = offline;
    }
  }

  // --- Pilot training of (MHA +) StructNet with unit attention weights.
  TwoDMhaParams mha;
  if (use_mha)
    mha = init_twod_mha(static_cast<int>(pilot_syms.size()), spec.n_sc,
                        cfg.att.nk_time, cfg.att.nk_freq,
                        derive_seed(in.model_seed, 0x2d1a));
  {
    StageTimer t(report, "freq-pilot-train");
    const int n_p = static_cast<int>(pilot_syms.size());

    // PAM sample index: every valid (pilot symbol, subcarrier, dim) per group.
    std::vector<std::vector<std::array<int, 3>>> group_items(groups.count());
    for (int g = 0; g < groups.count(); ++g)
      for (int p = 0; p < n_p; ++p)
        for (int k = groups.start[g]; k < groups.start[g] + groups.size[g]; ++k)
          for (int n : valid_pilot_dims(spec, pilot_syms[p], k))
            group_items[g].push_back({p, k, n});

    auto make_batch = [&](const std::vector<std::array<int, 3>>& items,
                          const std::vector<RealGrid>& feats) {
      RealGrid f(d, items.size());
      Eigen::VectorXi dims(items.size()), labels(items.size());
      for (size_t i = 0; i < items.size(); ++i) {
        f.col(i) = feats[items[i][0]].col(items[i][1]);
        dims[i] = items[i][2];
        labels[i] = pilot_labels[items[i][0]](items[i][2], items[i][1]);
      }
      return make_binary_batch(f, dims, labels, spec.mod_order,
                               RealVec::Ones(items.size()));
    };

    for (int ep = 0; ep < cfg.sn.pilot_epochs; ++ep) {
      const bool pe_epoch = learn_pe && (ep % 2 == 1);

      // Classifier / PE stream: raw reservoir features, the distribution the
      // decision-feedback sweep detects on.
      for (int g = 0; g < groups.count(); ++g) {
        StructLossGrads lg =
            struct_loss_grads(nets[g], make_batch(group_items[g], pilot_feats),
                              false);
        if (!std::isfinite(lg.loss))
          throw SubframeError("freq-pilot-train", "non-finite loss");
        if (pe_epoch)
          nets[g].pe -= cfg.sn.lr_pe * lg.pe;
        else
          axpy(nets[g].clf, lg.clf, -cfg.sn.lr_clf);
      }

      // Attention stream (classifier epochs): each pilot symbol takes the
      // query (last) row of a window holding the other pilots - the
      // composition the first data symbol sees at inference. The MHA learns
      // to transform the query row so the frozen classifier scores it
      // better; classifier and PE never co-adapt to attention features.
      if (use_mha && !pe_epoch) {
        std::vector<RealGrid> feats = pilot_feats;
        std::vector<std::vector<MhaCache>> caches(n_p,
                                                  std::vector<MhaCache>(spec.n_t));
        for (int q = 0; q < n_p; ++q) {
          std::vector<RealGrid> window;
          for (int p = 0; p < n_p; ++p)
            if (p != q) window.push_back(pilot_feats[p]);
          window.push_back(pilot_feats[q]);
          for (int t_ant = 0; t_ant < spec.n_t; ++t_ant) {
            RealGrid grid = MhaGridIo::build(window, t_ant, spec.n_t, spec.n_sc);
            RealGrid out = twod_mha_forward(grid, mha, &caches[q][t_ant]);
            MhaGridIo::scatter_row(out, n_p - 1, t_ant, spec.n_t, spec.n_sc,
                                   feats[q]);
          }
        }

        std::vector<RealGrid> d_feats(n_p, RealGrid::Zero(d, spec.n_sc));
        for (int g = 0; g < groups.count(); ++g) {
          StructLossGrads lg =
              struct_loss_grads(nets[g], make_batch(group_items[g], feats), true);
          if (!std::isfinite(lg.loss))
            throw SubframeError("freq-pilot-train", "non-finite attention loss");
          const auto& items = group_items[g];
          for (size_t i = 0; i < items.size(); ++i) {
            d_feats[items[i][0]].col(items[i][1]) += lg.feats.col(2 * i);
            d_feats[items[i][0]].col(items[i][1]) += lg.feats.col(2 * i + 1);
          }
        }

        MhaGrads acc;
        acc.params = zeros_like(mha);
        std::vector<RealGrid> zero_rows(n_p, RealGrid::Zero(d, spec.n_sc));
        for (int q = 0; q < n_p; ++q) {
          // Upstream gradient lands on the query row only.
          std::vector<RealGrid> up_rows = zero_rows;
          up_rows[n_p - 1] = d_feats[q];
          for (int t_ant = 0; t_ant < spec.n_t; ++t_ant) {
            RealGrid upstream =
                MhaGridIo::build(up_rows, t_ant, spec.n_t, spec.n_sc);
            twod_mha_backward(mha, caches[q][t_ant], upstream, &acc);
          }
        }
        axpy_params(mha, acc.params, -cfg.att.lr);
      }
    }
  }

  // --- Decision feedback sweep.
  RlsState rls;
  rls.phi_inv = phi_inv;
  rls.alpha = cfg.rc.rls_alpha;
  bool first_data = true;

  for (int sym = 0; sym < spec.n_total; ++sym) {
    const bool pilot = tx.is_pilot(sym);
    if (pilot && spec.pilot_pattern == PilotPattern::BlockLeading) continue;

    ComplexGrid xhat_time = rc.readout(w_out, sym, sps);
    check_finite(xhat_time, "rc-df");
    ComplexGrid xhat_freq = ofdm::demodulate(xhat_time, spec.n_cp);
    RealGrid feats_raw = lattice_features(xhat_freq, scale);

    if (use_df) {
      StageTimer t(report, "rc-rls");
      // Nearest-constellation targets (ground truth on pilot-bearing symbols).
      ComplexGrid xbar_freq(spec.n_t, spec.n_sc);
      if (pilot) {
        xbar_freq = tx.freq[sym];
      } else {
        for (int k = 0; k < spec.n_sc; ++k)
          for (int t_ant = 0; t_ant < spec.n_t; ++t_ant)
            xbar_freq(t_ant, k) =
                qam::nearest_qam_point(xhat_freq(t_ant, k), spec.mod_order);
      }
      ComplexGrid xbar_time = ofdm::modulate(xbar_freq, spec.n_cp);
      for (int m = 0; m < sps; ++m)
        rls_step(w_out, rls, rc.sym_traj[sym].col(rc.delay + m),
                 xbar_time.col(m));
    }

    if (!pilot) {
      StageTimer t(report, "freq-detect");
      RealGrid feats_detect = feats_raw;
      if (use_mha && first_data) {
        // Query-window composition matching pilot training: the last n_p-1
        // pilot grids provide context, this symbol takes the query row.
        std::vector<RealGrid> window(pilot_feats.end() - (pilot_syms.size() - 1),
                                     pilot_feats.end());
        window.push_back(feats_raw);
        for (int t_ant = 0; t_ant < spec.n_t; ++t_ant) {
          RealGrid grid = MhaGridIo::build(window, t_ant, spec.n_t, spec.n_sc);
          RealGrid out = twod_mha_forward(grid, mha, nullptr);
          MhaGridIo::scatter_row(out, grid.rows() - 1, t_ant, spec.n_t, spec.n_sc,
                                 feats_detect);
        }
      }
      first_data = false;

      IntGrid levels(d, spec.n_sc);
      RealGrid conf(d, spec.n_sc);
      for (int g = 0; g < groups.count(); ++g) {
        Detection det = detect_pam(
            nets[g], feats_detect.middleCols(groups.start[g], groups.size[g]),
            spec.mod_order);
        levels.middleCols(groups.start[g], groups.size[g]) = det.levels;
        conf.middleCols(groups.start[g], groups.size[g]) = det.conf;
      }
      score.add_symbol(sym, levels, conf);

      if (use_df) {
        StageTimer t2(report, "freq-finetune");
        TrainOptions opts;
        opts.epochs = cfg.sn.df_epochs;
        opts.lr_clf = cfg.sn.lr_clf;
        opts.lr_pe = cfg.sn.lr_pe;
        opts.train_pe = learn_pe;
        for (int g = 0; g < groups.count(); ++g) {
          const int gs = groups.size[g];
          RealGrid f(d, static_cast<Eigen::Index>(gs) * d);
          Eigen::VectorXi dims(gs * d), detected(gs * d);
          RealVec confv(gs * d);
          Eigen::Index i = 0;
          for (int k = groups.start[g]; k < groups.start[g] + gs; ++k)
            for (int n = 0; n < d; ++n, ++i) {
              f.col(i) = feats_raw.col(k);
              dims[i] = n;
              detected[i] = levels(n, k);
              confv[i] = use_att_loss ? conf(n, k) : 1.0;
            }
          finetune_df(nets[g], f, dims, detected, confv,
                      use_att_loss ? cfg.sn.eta : 0.0, spec.mod_order, opts);
        }
      }
    } else if (use_df) {
      // Scattered pattern: ground-truth refresh of the frequency nets on
      // pilot-bearing symbols swept mid-subframe.
      StageTimer t(report, "freq-finetune");
      TrainOptions opts;
      opts.epochs = cfg.sn.df_epochs;
      opts.lr_clf = cfg.sn.lr_clf;
      opts.lr_pe = cfg.sn.lr_pe;
      opts.train_pe = learn_pe;
      const IntGrid truth = lattice_levels(tx.freq[sym], scale);
      for (int g = 0; g < groups.count(); ++g) {
        std::vector<std::array<int, 2>> items;
        for (int k = groups.start[g]; k < groups.start[g] + groups.size[g]; ++k)
          for (int n : valid_pilot_dims(spec, sym, k)) items.push_back({k, n});
        RealGrid f(d, items.size());
        Eigen::VectorXi dims(items.size()), labels(items.size());
        RealVec confv = RealVec::Ones(items.size());
        for (size_t i = 0; i < items.size(); ++i) {
          f.col(i) = feats_raw.col(items[i][0]);
          dims[i] = items[i][1];
          labels[i] = truth(items[i][1], items[i][0]);
        }
        finetune_df(nets[g], f, dims, labels, confv, 0.0, spec.mod_order, opts);
      }
    }
  }

  score.finalize_bits();
  return report;
}

// ---------------------------------------------------------------------------
// Conventional detectors
// ---------------------------------------------------------------------------

DetectionReport detect_subframe_conventional(const DetectorConfig& cfg,
                                             const DetectInputs& in) {
  const SubframeTx& tx = *in.tx;
  const SubframeSpec& spec = tx.spec;
  const Real scale = qam::qam_scale(spec.mod_order);

  DetectionReport report;
  ScoreAccumulator score{tx, report, scale};

  std::vector<ComplexGrid> rx_freq(spec.n_total);
  {
    StageTimer t(report, "demod");
    const int sps = spec.samples_per_symbol();
    for (int sym = 0; sym < spec.n_total; ++sym)
      rx_freq[sym] = ofdm::demodulate(
          in.rx_time->middleCols(static_cast<Eigen::Index>(sym) * sps, sps),
          spec.n_cp);
  }

  baselines::CsiEstimate csi;
  const bool decision_directed =
      cfg.csi_source == baselines::CsiSource::DecisionDirected;
  {
    StageTimer t(report, "csi");
    switch (cfg.csi_source) {
      case baselines::CsiSource::PilotOnly:
      case baselines::CsiSource::DecisionDirected:
        csi = baselines::lmmse_channel_estimate(tx, rx_freq, in.noise_var);
        break;
      case baselines::CsiSource::Interpolated:
        csi = baselines::interpolate_csi(
            baselines::lmmse_pilot_symbol_estimates(tx, rx_freq, in.noise_var),
            spec.n_total);
        break;
      case baselines::CsiSource::Oracle:
        if (!in.channel)
          throw ConfigError("oracle CSI requires the channel realization");
        csi = baselines::oracle_csi(*in.channel, spec);
        break;
    }
  }

  // DD state: per-subcarrier channel + inverse correlation trackers.
  std::vector<ComplexGrid> dd_h, dd_p;
  const Real dd_alpha = 0.995;
  if (decision_directed) {
    dd_h.resize(spec.n_sc);
    dd_p.resize(spec.n_sc);
    const auto pilots = subframe::pilot_symbol_indices(spec);
    ComplexGrid x_stack(spec.n_t, pilots.size());
    for (int k = 0; k < spec.n_sc; ++k) {
      dd_h[k] = csi.frames[0][k];
      for (size_t s = 0; s < pilots.size(); ++s)
        x_stack.col(s) = tx.freq[pilots[s]].col(k);
      ComplexGrid gram = x_stack * x_stack.adjoint();
      gram.diagonal().array() += std::max(in.noise_var, 1e-9);
      dd_p[k] = gram.inverse();
    }
  }

  auto dd_update = [&](int k, const CxVec& x, const CxVec& y) {
    const CxVec pz = dd_p[k] * x;
    const Cx denom = dd_alpha + x.dot(pz);
    const CxVec v = pz / denom;
    const CxVec err = y - dd_h[k] * x;
    dd_h[k].noalias() += err * v.adjoint();
    dd_p[k] = (dd_p[k] - v * (x.adjoint() * dd_p[k])) / dd_alpha;
  };

  {
    StageTimer t(report, "detect");
    for (int sym = 0; sym < spec.n_total; ++sym) {
      if (tx.is_pilot(sym)) {
        if (decision_directed &&
            spec.pilot_pattern == PilotPattern::Scattered5GLike)
          for (int k = 0; k < spec.n_sc; ++k)
            dd_update(k, tx.freq[sym].col(k), rx_freq[sym].col(k));
        continue;
      }
      IntGrid levels(2 * spec.n_t, spec.n_sc);
      RealGrid conf = RealGrid::Ones(2 * spec.n_t, spec.n_sc);
      for (int k = 0; k < spec.n_sc; ++k) {
        const ComplexGrid& h = decision_directed ? dd_h[k] : csi.frames[sym][k];
        const CxVec y = rx_freq[sym].col(k);
        CxVec x;
        switch (cfg.variant) {
          case Variant::Lmmse:
            x = baselines::lmmse_detect(y, h, in.noise_var, spec.mod_order);
            break;
          case Variant::SphereDecoder:
            x = baselines::sphere_decode(y, h, spec.mod_order).symbols;
            break;
          case Variant::MlOracle:
            x = baselines::ml_detect_bruteforce(y, h, spec.mod_order);
            break;
          default:
            throw ConfigError("not a conventional variant");
        }
        for (int t_ant = 0; t_ant < spec.n_t; ++t_ant) {
          levels(t_ant, k) = static_cast<int>(std::lround(x[t_ant].real() * scale));
          levels(t_ant + spec.n_t, k) =
              static_cast<int>(std::lround(x[t_ant].imag() * scale));
        }
        if (decision_directed) dd_update(k, x, y);
      }
      score.add_symbol(sym, levels, conf);
    }
  }

  score.finalize_bits();
  return report;
}

DetectionReport detect(const DetectorConfig& cfg, const DetectInputs& in) {
  return is_rc_variant(cfg.variant) ? detect_subframe(cfg, in)
                                    : detect_subframe_conventional(cfg, in);
}

// ---------------------------------------------------------------------------
// Monte-Carlo driver
// ---------------------------------------------------------------------------

Mlp pretrain_offline(const DetectorConfig& cfg, const SubframeSpec& spec,
                     uint64_t master_seed) {
  return offline_pretrain(2 * spec.n_t, cfg.sn.hidden, spec.mod_order,
                          cfg.sn.offline_samples, cfg.sn.offline_epochs,
                          cfg.sn.offline_lr, derive_seed(master_seed, 0x0ff1));
}

McResult run_montecarlo(const DetectorConfig& cfg, const SubframeSpec& spec,
                        const ChannelProfile& profile, const PaConfig& pa,
                        const std::vector<Real>& ebno_list, int n_subframes,
                        uint64_t master_seed, int parallelism) {
  if (n_subframes < 1) throw ConfigError("n_subframes must be >= 1");
  spec.validate();
  profile.validate();

  Mlp offline;
  const bool rc = is_rc_variant(cfg.variant);
  if (rc) offline = pretrain_offline(cfg, spec, master_seed);

  struct Item {
    long bits = 0, bit_errors = 0, symbols = 0, symbol_errors = 0;
    bool excluded = false;
    Real seconds = 0;
  };
  const size_t total = ebno_list.size() * static_cast<size_t>(n_subframes);
  std::vector<Item> items(total);

  std::atomic<size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= total) return;
      const size_t e = idx / n_subframes;
      const size_t s = idx % n_subframes;
      Item& item = items[idx];
      const auto t0 = Clock::now();
      try {
        const uint64_t seed_chan = derive_seed(master_seed, 0xc0, e, s);
        const uint64_t seed_data = derive_seed(master_seed, 0xd0, e, s);
        const uint64_t seed_noise = derive_seed(master_seed, 0xa0, e, s);
        const uint64_t seed_model = derive_seed(master_seed, 0xe0, e, s);

        Bits payload = random_bits(subframe::required_data_bits(spec), seed_data);
        SubframeTx tx = assemble_subframe(spec, payload, seed_data);
        ComplexGrid x_time = subframe_to_time(tx);
        ChannelRealization ch =
            generate_channel(profile, spec.n_r, spec.n_t, x_time.cols(), seed_chan);
        const Real noise_var =
            noise_var_from_ebno(ebno_list[e], spec.mod_order, spec);
        ComplexGrid rx = apply_channel(x_time, ch, pa, noise_var, seed_noise);

        DetectInputs in;
        in.tx = &tx;
        in.rx_time = &rx;
        in.noise_var = noise_var;
        in.channel = &ch;
        in.offline_clf = rc ? &offline : nullptr;
        in.model_seed = seed_model;

        DetectionReport rep = detect(cfg, in);
        item.bits = rep.bits;
        item.bit_errors = rep.bit_errors;
        item.symbols = rep.symbols;
        item.symbol_errors = rep.symbol_errors;
      } catch (const SubframeError&) {
        item.excluded = true;
      }
      item.seconds = std::chrono::duration<Real>(Clock::now() - t0).count();
    }
  };

  const int workers = std::max(1, parallelism);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  McResult res;
  res.subframe_ber.assign(total, std::numeric_limits<Real>::quiet_NaN());
  for (size_t e = 0; e < ebno_list.size(); ++e) {
    McCell cell;
    cell.ebno_db = ebno_list[e];
    cell.n_subframes = n_subframes;
    for (int s = 0; s < n_subframes; ++s) {
      const Item& item = items[e * n_subframes + s];
      if (item.excluded) {
        ++cell.excluded_subframes;
      } else {
        cell.bits += item.bits;
        cell.bit_errors += item.bit_errors;
        cell.symbols += item.symbols;
        cell.symbol_errors += item.symbol_errors;
        res.subframe_ber[e * n_subframes + s] =
            item.bits ? static_cast<Real>(item.bit_errors) / item.bits : 0.0;
      }
      cell.seconds += item.seconds;
    }
    res.cells.push_back(cell);
  }
  return res;
}

}  // namespace neurorx
