#pragma once

#include "neurorx/pipeline.hpp"

namespace neurorx {

/// Flat key=value configuration with [section] headers. Unknown keys are
/// rejected with their line number; every default is echoed on serialize.
struct RunConfig {
  SubframeSpec spec;
  ChannelProfile profile;  // sample_rate_hz derived from subcarrier spacing
  PaConfig pa;
  ReservoirConfig rc;
  AttentionConfig att;
  StructNetConfig sn;

  Real subcarrier_spacing_hz = 15e3;
  Real pdp_decay_db = 20.0;
  std::vector<Real> ebno_list = {9, 12, 15, 18, 21};
  int n_subframes = 10;
  std::vector<std::string> detectors = {"rc-att-structnet-df", "lmmse:interp"};

  /// Re-derives dependent fields and checks cross-field constraints
  /// (e.g. channel taps within the CP).
  void finalize();

  DetectorConfig detector_config(const std::string& name) const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);

}  // namespace neurorx
