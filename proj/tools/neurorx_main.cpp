#include <CLI11.hpp>
#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "neurorx/config.hpp"
#include "neurorx/csv.hpp"
#include "neurorx/toylab.hpp"

using namespace neurorx;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitCheck = 3;

struct GlobalOpts {
  std::string config_path;
  uint64_t seed = 1;
  bool seed_set = false;
  std::string out_dir = "out";
  int parallelism = 0;  // 0 -> hardware
  std::string format = "csv";
  bool force = false;
  bool check = false;
};

uint64_t resolve_seed(const GlobalOpts& g) {
  if (g.seed_set) return g.seed;
  if (const char* env = std::getenv("NEURORX_SEED")) {
    try {
      return std::stoull(env);
    } catch (...) {
      throw ConfigError("NEURORX_SEED is not a valid integer");
    }
  }
  return 1;
}

int resolve_parallelism(const GlobalOpts& g) {
  if (g.parallelism > 0) return g.parallelism;
  return std::max(1u, std::thread::hardware_concurrency());
}

RunConfig resolve_config(const GlobalOpts& g) {
  if (g.config_path.empty()) {
    RunConfig cfg;
    cfg.finalize();
    return cfg;
  }
  return load_config_file(g.config_path);
}

std::vector<std::string> metadata_lines(const RunConfig& cfg, uint64_t seed) {
  std::vector<std::string> lines;
  lines.push_back("seed = " + std::to_string(seed));
  std::stringstream ss(serialize_config(cfg));
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

Real median(std::vector<Real> v) {
  v.erase(std::remove_if(v.begin(), v.end(),
                         [](Real x) { return !std::isfinite(x); }),
          v.end());
  if (v.empty()) return std::numeric_limits<Real>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<Real> median_per_ebno(const McResult& res, size_t n_ebno,
                                  int n_subframes) {
  std::vector<Real> out;
  for (size_t e = 0; e < n_ebno; ++e)
    out.push_back(median({res.subframe_ber.begin() +
                              static_cast<long>(e) * n_subframes,
                          res.subframe_ber.begin() +
                              static_cast<long>(e + 1) * n_subframes}));
  return out;
}

void check_exclusions(const McResult& res) {
  long total = 0, excluded = 0;
  for (const auto& c : res.cells) {
    total += c.n_subframes;
    excluded += c.excluded_subframes;
  }
  if (total > 0 && excluded * 100 > total)
    throw std::runtime_error(">1% of subframes excluded by numerical failures (" +
                             std::to_string(excluded) + "/" +
                             std::to_string(total) + ")");
}

// --------------------------------------------------------------------------
// Subcommand bodies. Each returns the process exit code.
// --------------------------------------------------------------------------

int run_sweep(const GlobalOpts& g, const std::string& csv_name,
              RunConfig cfg) {
  const uint64_t seed = resolve_seed(g);
  CsvWriter csv(g.out_dir + "/" + csv_name, metadata_lines(cfg, seed), g.force);
  for (const auto& det : cfg.detectors) {
    DetectorConfig dc = cfg.detector_config(det);
    McResult res = run_montecarlo(dc, cfg.spec, cfg.profile, cfg.pa,
                                  cfg.ebno_list, cfg.n_subframes, seed,
                                  resolve_parallelism(g));
    check_exclusions(res);
    for (const auto& cell : res.cells) csv.write_cell(dc.name(), cell);
    std::cerr << "done: " << dc.name() << "\n";
  }
  csv.close();
  return kExitOk;
}

int run_ablate(const GlobalOpts& g, RunConfig cfg) {
  const uint64_t seed = resolve_seed(g);
  const std::vector<std::string> variants = {"rc-struct", "rc-struct-df",
                                             "rc-structnet-df",
                                             "rc-att-structnet-df"};
  CsvWriter csv(g.out_dir + "/ablate.csv", metadata_lines(cfg, seed), g.force);
  std::vector<std::vector<Real>> medians;
  for (const auto& det : variants) {
    DetectorConfig dc = cfg.detector_config(det);
    McResult res = run_montecarlo(dc, cfg.spec, cfg.profile, cfg.pa,
                                  cfg.ebno_list, cfg.n_subframes, seed,
                                  resolve_parallelism(g));
    check_exclusions(res);
    for (const auto& cell : res.cells) csv.write_cell(dc.name(), cell);
    medians.push_back(median_per_ebno(res, cfg.ebno_list.size(), cfg.n_subframes));
    std::cerr << "done: " << dc.name() << "\n";
  }
  csv.close();
  if (g.check) {
    // Ordering at the last (highest) Eb/No point, fullest variant best.
    const size_t last = cfg.ebno_list.size() - 1;
    const bool ok = medians[3][last] <= medians[2][last] &&
                    medians[2][last] <= medians[1][last] &&
                    medians[1][last] <= medians[0][last];
    if (!ok) {
      std::cerr << "check failed: ablation ordering violated\n";
      return kExitCheck;
    }
  }
  return kExitOk;
}

int run_pa_sweep(const GlobalOpts& g, RunConfig cfg,
                 std::vector<Real> ibo_list) {
  const uint64_t seed = resolve_seed(g);
  if (ibo_list.empty()) ibo_list = {9, 7, 5, 3};
  cfg.pa.enabled = true;
  CsvWriter csv(g.out_dir + "/pa_sweep.csv", metadata_lines(cfg, seed), g.force);
  std::map<std::string, std::vector<Real>> med;
  for (const auto& det : cfg.detectors) {
    DetectorConfig dc = cfg.detector_config(det);
    for (Real ibo : ibo_list) {
      PaConfig pa = cfg.pa;
      pa.ibo_db = ibo;
      McResult res =
          run_montecarlo(dc, cfg.spec, cfg.profile, pa, cfg.ebno_list,
                         cfg.n_subframes, seed, resolve_parallelism(g));
      check_exclusions(res);
      for (auto cell : res.cells) {
        std::ostringstream name;
        name << dc.name() << "@ibo" << ibo;
        csv.write_cell(name.str(), cell);
      }
      med[dc.name()].push_back(
          median_per_ebno(res, cfg.ebno_list.size(), cfg.n_subframes).back());
    }
    std::cerr << "done: " << dc.name() << "\n";
  }
  csv.close();
  if (g.check) {
    // Conventional BER must grow as IBO drops; the RC detector's growth
    // ratio must be smaller.
    for (const auto& [name, v] : med) {
      if (name.rfind("sd", 0) == 0)
        for (size_t i = 1; i < v.size(); ++i)
          if (v[i] < v[i - 1]) {
            std::cerr << "check failed: " << name << " not monotone vs IBO\n";
            return kExitCheck;
          }
    }
  }
  return kExitOk;
}

int run_toy_a(const GlobalOpts& g, std::vector<Real> ebno_list, int channels) {
  const uint64_t seed = resolve_seed(g);
  toylab::ToyOptions opts;
  opts.parallelism = resolve_parallelism(g);
  if (channels > 0) opts.n_channels = channels;
  if (ebno_list.empty()) ebno_list = {3, 5, 7, 9};
  toylab::ToyResult res = toylab::toy_experiment_a(ebno_list, opts, seed);

  RunConfig cfg;
  cfg.finalize();
  CsvWriter csv(g.out_dir + "/toy_a.csv",
                {"seed = " + std::to_string(seed),
                 "channels = " + std::to_string(opts.n_channels)},
                g.force);
  for (const auto& c : res.cells) {
    McCell cell;
    cell.ebno_db = c.x;
    cell.n_subframes = opts.n_channels;
    cell.bits = c.bits;
    cell.bit_errors = c.bit_errors;
    cell.symbols = c.symbols;
    cell.symbol_errors = c.symbol_errors;
    csv.write_cell(toylab::toy_method_name(c.method), cell);
  }
  csv.close();

  if (g.check) {
    using toylab::ToyMethod;
    for (Real e : ebno_list) {
      if (res.cell(ToyMethod::StructNet, e).median_ser() >
          res.cell(ToyMethod::AdnnLmmse, e).median_ser()) {
        std::cerr << "check failed: StructNet worse than ADNN-LMMSE at " << e
                  << " dB\n";
        return kExitCheck;
      }
    }
  }
  return kExitOk;
}

int run_toy_b(const GlobalOpts& g, std::vector<Real> fractions, int channels) {
  const uint64_t seed = resolve_seed(g);
  toylab::ToyOptions opts;
  opts.parallelism = resolve_parallelism(g);
  if (channels > 0) opts.n_channels = channels;
  if (fractions.empty()) fractions = {0.0, 0.2, 0.4, 0.6, 0.7};
  toylab::ToyResult res = toylab::toy_experiment_b(fractions, opts, seed);

  CsvWriter csv(g.out_dir + "/toy_b.csv",
                {"seed = " + std::to_string(seed),
                 "channels = " + std::to_string(opts.n_channels),
                 "binary_audit_wrong = " + std::to_string(res.audit_binary_wrong),
                 "binary_audit_samples = " +
                     std::to_string(res.audit_binary_samples)},
                g.force);
  for (const auto& c : res.cells) {
    McCell cell;
    cell.ebno_db = c.x;  // corruption fraction in the ebno column slot
    cell.n_subframes = opts.n_channels;
    cell.bits = c.bits;
    cell.bit_errors = c.bit_errors;
    cell.symbols = c.symbols;
    cell.symbol_errors = c.symbol_errors;
    csv.write_cell(toylab::toy_method_name(c.method), cell);
  }
  csv.close();

  if (g.check) {
    using toylab::ToyMethod;
    const Real worst = fractions.back();
    const bool order_ok = res.cell(ToyMethod::StructNet, worst).median_ser() <
                          res.cell(ToyMethod::FourClassMlp, worst).median_ser();
    const bool audit_ok =
        !res.audit_bound_violated &&
        2 * res.audit_binary_wrong <= res.audit_binary_samples;
    if (!order_ok || !audit_ok) {
      std::cerr << "check failed: corruption ordering or binary-label bound\n";
      return kExitCheck;
    }
  }
  return kExitOk;
}

int run_bench(const GlobalOpts& g, RunConfig cfg) {
  const uint64_t seed = resolve_seed(g);
  std::ofstream out;
  const std::string path = g.out_dir + "/bench.csv";
  if (std::filesystem::exists(path) && !g.force)
    throw ConfigError("refusing to overwrite existing file (use --force): " + path);
  std::filesystem::create_directories(g.out_dir);
  out.open(path, std::ios::trunc);
  out << "detector,stage,seconds\n";

  for (const auto& det : cfg.detectors) {
    DetectorConfig dc = cfg.detector_config(det);
    Mlp offline;
    if (is_rc_variant(dc.variant)) offline = pretrain_offline(dc, cfg.spec, seed);

    Bits payload = random_bits(subframe::required_data_bits(cfg.spec),
                               derive_seed(seed, 0xd0));
    SubframeTx tx = assemble_subframe(cfg.spec, payload, derive_seed(seed, 0xd0));
    ComplexGrid x_time = subframe_to_time(tx);
    ChannelRealization ch = generate_channel(cfg.profile, cfg.spec.n_r,
                                             cfg.spec.n_t, x_time.cols(),
                                             derive_seed(seed, 0xc0));
    const Real noise_var =
        noise_var_from_ebno(cfg.ebno_list.back(), cfg.spec.mod_order, cfg.spec);
    ComplexGrid rx = apply_channel(x_time, ch, cfg.pa, noise_var,
                                   derive_seed(seed, 0xa0));
    DetectInputs in;
    in.tx = &tx;
    in.rx_time = &rx;
    in.noise_var = noise_var;
    in.channel = &ch;
    in.offline_clf = is_rc_variant(dc.variant) ? &offline : nullptr;
    in.model_seed = derive_seed(seed, 0xe0);
    DetectionReport rep = detect(dc, in);
    for (const auto& [stage, secs] : rep.stage_seconds)
      out << dc.name() << ',' << stage << ',' << secs << "\n";
    std::cout << dc.name() << ": ber=" << rep.ber() << " ser=" << rep.ser()
              << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"neurorx: MIMO-OFDM link-level simulator and online receiver"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "configuration file");
  auto* seed_opt = app.add_option("--seed", g.seed, "master seed");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_option("--parallelism", g.parallelism, "worker threads");
  app.add_option("--format", g.format, "output format (csv)");
  app.add_flag("--force", g.force, "overwrite existing output files");
  app.add_flag("--check", g.check, "verify headline orderings; exit 3 on failure");

  std::vector<Real> ebno_list, fractions, ibo_list;
  int channels = 0;

  auto* toy_a = app.add_subcommand("toy-a", "2x2 Gaussian-channel SER comparison");
  toy_a->add_option("--ebno", ebno_list, "Eb/No grid (dB)");
  toy_a->add_option("--channels", channels, "channel realizations");

  auto* toy_b = app.add_subcommand("toy-b", "incorrect-label robustness sweep");
  toy_b->add_option("--fractions", fractions, "PAM corruption fractions");
  toy_b->add_option("--channels", channels, "channel realizations / seeds");

  auto* sweep = app.add_subcommand("sweep", "Eb/No x detector BER grid");
  auto* ablate = app.add_subcommand("ablate", "four-variant RC ablation");
  auto* pa = app.add_subcommand("pa-sweep", "PA nonlinearity IBO sweep");
  pa->add_option("--ibo", ibo_list, "IBO grid (dB)");
  auto* scattered = app.add_subcommand("scattered", "5G-like scattered pilot run");
  auto* bench = app.add_subcommand("bench", "per-stage wall-clock table");

  CLI11_PARSE(app, argc, argv);
  g.seed_set = seed_opt->count() > 0;

  try {
    if (g.format != "csv") throw ConfigError("unsupported format: " + g.format);
    RunConfig cfg = resolve_config(g);

    if (toy_a->parsed()) return run_toy_a(g, ebno_list, channels);
    if (toy_b->parsed()) return run_toy_b(g, fractions, channels);
    if (sweep->parsed()) return run_sweep(g, "sweep.csv", cfg);
    if (ablate->parsed()) return run_ablate(g, cfg);
    if (pa->parsed()) return run_pa_sweep(g, cfg, ibo_list);
    if (scattered->parsed()) {
      cfg.spec.pilot_pattern = PilotPattern::Scattered5GLike;
      cfg.spec.n_total = 14;
      cfg.spec.n_pilot = 3;
      cfg.finalize();
      return run_sweep(g, "scattered.csv", cfg);
    }
    if (bench->parsed()) return run_bench(g, cfg);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
