#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "neurorx/config.hpp"
#include "neurorx/csv.hpp"

using namespace neurorx;

TEST_CASE("empty config yields the documented defaults") {
  RunConfig cfg = parse_config("");
  CHECK(cfg.spec.n_sc == 512);
  CHECK(cfg.spec.n_cp == 32);
  CHECK(cfg.spec.n_total == 20);
  CHECK(cfg.spec.n_pilot == 4);
  CHECK(cfg.spec.n_t == 4);
  CHECK(cfg.rc.n_neurons == 16);
  CHECK(cfg.rc.window_len == 32);
  CHECK(cfg.att.nk_time == 216);
  CHECK(cfg.att.nk_freq == 8);
  CHECK(cfg.sn.hidden == 128);
  CHECK(cfg.sn.eta == 0.5);
  CHECK(cfg.sn.offline_samples == 2000);
  CHECK(cfg.sn.offline_epochs == 1000);
}

TEST_CASE("unknown keys and bad values are rejected with line numbers") {
  auto fails_with = [](const std::string& text, const std::string& needle) {
    try {
      parse_config(text);
      return false;
    } catch (const ConfigError& e) {
      return std::string(e.what()).find(needle) != std::string::npos;
    }
  };
  CHECK(fails_with("[subframe]\nbogus = 3\n", "line 2"));
  CHECK(fails_with("[subframe]\nbogus = 3\n", "bogus"));
  CHECK(fails_with("[subframe]\nn_sc = twelve\n", "integer"));
  CHECK(fails_with("[nonsense]\n", "unknown section"));
  CHECK(fails_with("x = 1\n", "outside any section"));
  CHECK(fails_with("[subframe]\nmod_order = 15\n", "perfect square"));
  CHECK(fails_with("[subframe]\nn_cp = 2\n[channel]\nn_taps = 8\n", "CP"));
}

TEST_CASE("config serialization round trips") {
  RunConfig cfg = parse_config(
      "[subframe]\nn_sc = 64\nn_cp = 8\nmod_order = 64\n"
      "[channel]\nn_taps = 4\ndoppler_hz = 55.5\n"
      "[reservoir]\nwindow_len = 8\ndelay = 2\n"
      "[run]\nebno_db = 9, 15\nn_subframes = 3\ndetectors = lmmse:oracle, sd\n");
  const std::string text = serialize_config(cfg);
  RunConfig back = parse_config(text);
  CHECK(serialize_config(back) == text);
  CHECK(back.spec.n_sc == 64);
  CHECK(back.profile.doppler_hz == 55.5);
  CHECK(back.rc.delay == 2);
  CHECK(back.ebno_list == std::vector<Real>{9, 15});
  CHECK(back.detectors == std::vector<std::string>{"lmmse:oracle", "sd"});
}

TEST_CASE("detector descriptors validate") {
  RunConfig cfg;
  cfg.finalize();
  CHECK(cfg.detector_config("rc-att-structnet-df").variant ==
        Variant::RcAttStructNetDf);
  CHECK(cfg.detector_config("lmmse:dd").csi_source ==
        baselines::CsiSource::DecisionDirected);
  CHECK(cfg.detector_config("ml").csi_source == baselines::CsiSource::Oracle);
  CHECK_THROWS_AS(cfg.detector_config("turbo"), ConfigError);
  CHECK_THROWS_AS(cfg.detector_config("lmmse:psychic"), ConfigError);
  CHECK_THROWS_AS(cfg.detector_config("rc-struct:oracle"), ConfigError);
}

TEST_CASE("CSV writer emits the contract header and exact ratios") {
  const std::string path = "test_out/cells.csv";
  std::filesystem::remove_all("test_out");
  {
    CsvWriter csv(path, {"seed = 7"}, false);
    McCell cell;
    cell.ebno_db = 12;
    cell.n_subframes = 3;
    cell.bits = 7;
    cell.bit_errors = 2;
    cell.symbols = 4;
    cell.symbol_errors = 1;
    cell.seconds = 0.25;
    csv.write_cell("lmmse:interp", cell);
    csv.close();
  }
  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line == "# seed = 7");
  std::getline(in, line);
  CHECK(line ==
        "detector,ebno_db,n_subframes,bits,bit_errors,ber,symbols,"
        "symbol_errors,ser,excluded_subframes,seconds");
  std::getline(in, line);
  CHECK(line.find("lmmse:interp,12,3,7,2,0.2857142857142857") == 0);
  std::getline(in, line);
  CHECK(!in);  // exactly one data row

  // Refuses to overwrite unless forced.
  CHECK_THROWS_AS(CsvWriter(path, {}, false), ConfigError);
  CsvWriter forced(path, {}, true);
  forced.close();
  std::filesystem::remove_all("test_out");
}
