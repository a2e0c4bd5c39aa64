#include "neurorx/config.hpp"

#include <fstream>
#include <sstream>

namespace neurorx {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Setter {
  int line = 0;

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError("line " + std::to_string(line) + ": " + msg);
  }
  int to_int(const std::string& v) const {
    try {
      size_t pos = 0;
      const int out = std::stoi(v, &pos);
      if (pos != v.size()) fail("expected integer, got '" + v + "'");
      return out;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      fail("expected integer, got '" + v + "'");
    }
  }
  Real to_real(const std::string& v) const {
    try {
      size_t pos = 0;
      const Real out = std::stod(v, &pos);
      if (pos != v.size()) fail("expected number, got '" + v + "'");
      return out;
    } catch (const ConfigError&) {
      throw;
    } catch (...) {
      fail("expected number, got '" + v + "'");
    }
  }
  bool to_bool(const std::string& v) const {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("expected boolean, got '" + v + "'");
  }
};

}  // namespace

void RunConfig::finalize() {
  spec.validate();
  profile.sample_rate_hz = spec.n_sc * subcarrier_spacing_hz;
  if (profile.power_delay_profile.size() == 0)
    profile.power_delay_profile = exponential_pdp(profile.n_taps, pdp_decay_db);
  profile.validate();
  if (profile.model == ChannelModel::TdlJakes && profile.n_taps > spec.n_cp)
    throw ConfigError("channel n_taps (" + std::to_string(profile.n_taps) +
                      ") exceeds CP length (" + std::to_string(spec.n_cp) + ")");
  if (sn.eta < 0.0) throw ConfigError("eta must be >= 0");
  for (const auto& d : detectors) detector_config(d);
}

DetectorConfig RunConfig::detector_config(const std::string& name) const {
  DetectorConfig cfg;
  cfg.rc = rc;
  cfg.att = att;
  cfg.sn = sn;
  std::string base = name, csi;
  if (const auto colon = name.find(':'); colon != std::string::npos) {
    base = name.substr(0, colon);
    csi = name.substr(colon + 1);
  }
  const auto variant = variant_from_name(base);
  if (!variant) throw ConfigError("unknown detector '" + base + "'");
  cfg.variant = *variant;
  if (is_rc_variant(cfg.variant)) {
    if (!csi.empty())
      throw ConfigError("detector '" + base + "' does not take a CSI source");
    return cfg;
  }
  if (cfg.variant == Variant::MlOracle) {
    cfg.csi_source = baselines::CsiSource::Oracle;
    if (!csi.empty() && csi != "oracle")
      throw ConfigError("ml detector is oracle-CSI only");
    return cfg;
  }
  if (!csi.empty()) {
    const auto src = csi_source_from_name(csi);
    if (!src) throw ConfigError("unknown CSI source '" + csi + "'");
    cfg.csi_source = *src;
  }
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string raw;
  std::string section;
  Setter at;
  int line_no = 0;

  while (std::getline(ss, raw)) {
    ++line_no;
    at.line = line_no;
    std::string line = trim(raw);
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = trim(line.substr(0, hash));
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') at.fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "subframe" && section != "channel" && section != "pa" &&
          section != "reservoir" && section != "attention" &&
          section != "structnet" && section != "run")
        at.fail("unknown section '" + section + "'");
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) at.fail("expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (key.empty()) at.fail("empty key");

    auto unknown = [&]() {
      at.fail("unknown key '" + key + "' in section [" + section + "]");
    };

    if (section == "subframe") {
      if (key == "n_t") cfg.spec.n_t = at.to_int(val);
      else if (key == "n_r") cfg.spec.n_r = at.to_int(val);
      else if (key == "n_sc") cfg.spec.n_sc = at.to_int(val);
      else if (key == "n_cp") cfg.spec.n_cp = at.to_int(val);
      else if (key == "n_total") cfg.spec.n_total = at.to_int(val);
      else if (key == "n_pilot") cfg.spec.n_pilot = at.to_int(val);
      else if (key == "mod_order") cfg.spec.mod_order = at.to_int(val);
      else if (key == "pilot_pattern") {
        if (val == "block") cfg.spec.pilot_pattern = PilotPattern::BlockLeading;
        else if (val == "scattered") {
          cfg.spec.pilot_pattern = PilotPattern::Scattered5GLike;
          cfg.spec.n_total = 14;
          cfg.spec.n_pilot = 3;
        } else at.fail("pilot_pattern must be block|scattered");
      } else if (key == "pilot_mode") {
        if (val == "random") cfg.spec.pilot_mode = PilotMode::RandomFull;
        else if (val == "orthogonal") cfg.spec.pilot_mode = PilotMode::OrthogonalEmpty;
        else at.fail("pilot_mode must be random|orthogonal");
      } else unknown();
    } else if (section == "channel") {
      if (key == "model") {
        if (val == "tdl-jakes") cfg.profile.model = ChannelModel::TdlJakes;
        else if (val == "block-static")
          cfg.profile.model = ChannelModel::BlockStaticGaussian;
        else at.fail("model must be tdl-jakes|block-static");
      } else if (key == "n_taps") cfg.profile.n_taps = at.to_int(val);
      else if (key == "doppler_hz") cfg.profile.doppler_hz = at.to_real(val);
      else if (key == "subcarrier_spacing_hz")
        cfg.subcarrier_spacing_hz = at.to_real(val);
      else if (key == "pdp_decay_db") cfg.pdp_decay_db = at.to_real(val);
      else unknown();
    } else if (section == "pa") {
      if (key == "enabled") cfg.pa.enabled = at.to_bool(val);
      else if (key == "x_sat") cfg.pa.x_sat = at.to_real(val);
      else if (key == "rho") cfg.pa.rho = at.to_real(val);
      else if (key == "ibo_db") cfg.pa.ibo_db = at.to_real(val);
      else if (key == "literal_exponent") cfg.pa.literal_exponent = at.to_bool(val);
      else unknown();
    } else if (section == "reservoir") {
      if (key == "n_neurons") cfg.rc.n_neurons = at.to_int(val);
      else if (key == "window_len") cfg.rc.window_len = at.to_int(val);
      else if (key == "layers") cfg.rc.layers = at.to_int(val);
      else if (key == "delay") cfg.rc.delay = at.to_int(val);
      else if (key == "spectral_radius") cfg.rc.spectral_radius = at.to_real(val);
      else if (key == "input_scale") cfg.rc.input_scale = at.to_real(val);
      else if (key == "ls_ridge") cfg.rc.ls_ridge = at.to_real(val);
      else if (key == "rls_delta") cfg.rc.rls_delta = at.to_real(val);
      else if (key == "rls_alpha") cfg.rc.rls_alpha = at.to_real(val);
      else unknown();
    } else if (section == "attention") {
      if (key == "nk_time") cfg.att.nk_time = at.to_int(val);
      else if (key == "nk_freq") cfg.att.nk_freq = at.to_int(val);
      else if (key == "lr") cfg.att.lr = at.to_real(val);
      else unknown();
    } else if (section == "structnet") {
      if (key == "hidden") cfg.sn.hidden = at.to_int(val);
      else if (key == "pilot_epochs") cfg.sn.pilot_epochs = at.to_int(val);
      else if (key == "df_epochs") cfg.sn.df_epochs = at.to_int(val);
      else if (key == "group_size") cfg.sn.group_size = at.to_int(val);
      else if (key == "offline_samples") cfg.sn.offline_samples = at.to_int(val);
      else if (key == "offline_epochs") cfg.sn.offline_epochs = at.to_int(val);
      else if (key == "offline_lr") cfg.sn.offline_lr = at.to_real(val);
      else if (key == "lr_clf") cfg.sn.lr_clf = at.to_real(val);
      else if (key == "lr_pe") cfg.sn.lr_pe = at.to_real(val);
      else if (key == "eta") cfg.sn.eta = at.to_real(val);
      else if (key == "pe_ridge") cfg.sn.pe_ridge = at.to_real(val);
      else unknown();
    } else if (section == "run") {
      if (key == "ebno_db") {
        cfg.ebno_list.clear();
        for (const auto& v : split_list(val)) cfg.ebno_list.push_back(at.to_real(v));
        if (cfg.ebno_list.empty()) at.fail("ebno_db list is empty");
      } else if (key == "n_subframes") cfg.n_subframes = at.to_int(val);
      else if (key == "detectors") {
        cfg.detectors = split_list(val);
        if (cfg.detectors.empty()) at.fail("detectors list is empty");
      } else unknown();
    } else {
      at.fail("key '" + key + "' outside any section");
    }
  }

  try {
    cfg.finalize();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config validation: ") + e.what());
  }
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
  os << "[subframe]\n";
  os << "n_t = " << cfg.spec.n_t << "\n";
  os << "n_r = " << cfg.spec.n_r << "\n";
  os << "n_sc = " << cfg.spec.n_sc << "\n";
  os << "n_cp = " << cfg.spec.n_cp << "\n";
  os << "n_total = " << cfg.spec.n_total << "\n";
  os << "n_pilot = " << cfg.spec.n_pilot << "\n";
  os << "mod_order = " << cfg.spec.mod_order << "\n";
  os << "pilot_pattern = "
     << (cfg.spec.pilot_pattern == PilotPattern::BlockLeading ? "block"
                                                              : "scattered")
     << "\n";
  os << "pilot_mode = "
     << (cfg.spec.pilot_mode == PilotMode::RandomFull ? "random" : "orthogonal")
     << "\n";
  os << "[channel]\n";
  os << "model = "
     << (cfg.profile.model == ChannelModel::TdlJakes ? "tdl-jakes" : "block-static")
     << "\n";
  os << "n_taps = " << cfg.profile.n_taps << "\n";
  os << "doppler_hz = " << cfg.profile.doppler_hz << "\n";
  os << "subcarrier_spacing_hz = " << cfg.subcarrier_spacing_hz << "\n";
  os << "pdp_decay_db = " << cfg.pdp_decay_db << "\n";
  os << "[pa]\n";
  os << "enabled = " << (cfg.pa.enabled ? "true" : "false") << "\n";
  os << "x_sat = " << cfg.pa.x_sat << "\n";
  os << "rho = " << cfg.pa.rho << "\n";
  os << "ibo_db = " << cfg.pa.ibo_db << "\n";
  os << "literal_exponent = " << (cfg.pa.literal_exponent ? "true" : "false")
     << "\n";
  os << "[reservoir]\n";
  os << "n_neurons = " << cfg.rc.n_neurons << "\n";
  os << "window_len = " << cfg.rc.window_len << "\n";
  os << "layers = " << cfg.rc.layers << "\n";
  os << "delay = " << cfg.rc.delay << "\n";
  os << "spectral_radius = " << cfg.rc.spectral_radius << "\n";
  os << "input_scale = " << cfg.rc.input_scale << "\n";
  os << "ls_ridge = " << cfg.rc.ls_ridge << "\n";
  os << "rls_delta = " << cfg.rc.rls_delta << "\n";
  os << "rls_alpha = " << cfg.rc.rls_alpha << "\n";
  os << "[attention]\n";
  os << "nk_time = " << cfg.att.nk_time << "\n";
  os << "nk_freq = " << cfg.att.nk_freq << "\n";
  os << "lr = " << cfg.att.lr << "\n";
  os << "[structnet]\n";
  os << "hidden = " << cfg.sn.hidden << "\n";
  os << "pilot_epochs = " << cfg.sn.pilot_epochs << "\n";
  os << "df_epochs = " << cfg.sn.df_epochs << "\n";
  os << "group_size = " << cfg.sn.group_size << "\n";
  os << "offline_samples = " << cfg.sn.offline_samples << "\n";
  os << "offline_epochs = " << cfg.sn.offline_epochs << "\n";
  os << "offline_lr = " << cfg.sn.offline_lr << "\n";
  os << "lr_clf = " << cfg.sn.lr_clf << "\n";
  os << "lr_pe = " << cfg.sn.lr_pe << "\n";
  os << "eta = " << cfg.sn.eta << "\n";
  os << "pe_ridge = " << cfg.sn.pe_ridge << "\n";
  os << "[run]\n";
  os << "ebno_db = ";
  for (size_t i = 0; i < cfg.ebno_list.size(); ++i)
    os << (i ? ", " : "") << cfg.ebno_list[i];
  os << "\n";
  os << "n_subframes = " << cfg.n_subframes << "\n";
  os << "detectors = ";
  for (size_t i = 0; i < cfg.detectors.size(); ++i)
    os << (i ? ", " : "") << cfg.detectors[i];
  os << "\n";
  return os.str();
}

}  // namespace neurorx
