// Command-line front end: pattern generation, measurement simulation,
// training, reconstruction, benchmarking and sRGB rendering.
//
// Exit codes: 0 success, 2 usage/input error, 3 format/version error,
// 4 numerical failure.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "spim/bench.hpp"
#include "spim/dataio.hpp"
#include "spim/imaging.hpp"
#include "spim/metrics.hpp"
#include "spim/patterns.hpp"
#include "spim/reconstruct.hpp"
#include "spim/trainer.hpp"
#include "spim/tv.hpp"

namespace {

using nlohmann::json;

void write_run_config(const std::filesystem::path& path, const json& j) {
  spim::atomic_write_file(path, [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

std::filesystem::path run_config_path(const std::filesystem::path& primary_out) {
  std::filesystem::path p = primary_out;
  p += ".run.json";
  return p;
}

spim::NoiseSpec parse_noise(const std::string& text, std::uint64_t seed) {
  spim::NoiseSpec spec;
  spec.seed = seed;
  if (text == "none") return spec;

  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string args = colon == std::string::npos ? "" : text.substr(colon + 1);
  auto to_double = [&](const std::string& s) {
    try {
      std::size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing junk");
      return v;
    } catch (const std::exception&) {
      throw spim::invalid_input("bad noise parameter '" + s + "' in '" + text + "'");
    }
  };

  if (kind == "gaussian") {
    spec.model = spim::NoiseModel::gaussian;
    spec.sigma = to_double(args);
    return spec;
  }
  if (kind == "pg") {
    const auto comma = args.find(',');
    if (comma == std::string::npos)
      throw spim::invalid_input("pg noise needs 'pg:<gamma>,<sigma>'");
    spec.model = spim::NoiseModel::poisson_gaussian;
    spec.gamma = to_double(args.substr(0, comma));
    spec.sigma = to_double(args.substr(comma + 1));
    return spec;
  }
  throw spim::invalid_input("unknown noise model '" + text +
                            "' (use none, gaussian:<sigma>, pg:<gamma>,<sigma>)");
}

/// `synth:<count>` for generated phantoms, otherwise a directory of .pgm files.
std::vector<spim::Image> load_images(const std::string& source, int side, int limit,
                                     std::uint64_t seed) {
  spim::Dataset ds;
  if (source.rfind("synth:", 0) == 0) {
    const std::string count_text = source.substr(6);
    int count = 0;
    try {
      std::size_t pos = 0;
      count = std::stoi(count_text, &pos);
      if (pos != count_text.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw spim::invalid_input("bad synthetic image count '" + count_text + "'");
    }
    ds = spim::synth_phantoms(count, side, seed);
    if (limit > 0 && static_cast<int>(ds.items.size()) > limit) ds.items.resize(limit);
  } else {
    ds = spim::load_directory(source, side, limit, seed);
    if (ds.skipped > 0)
      std::cerr << "warning: skipped " << ds.skipped << " unusable file(s) in "
                << source << "\n";
  }
  std::vector<spim::Image> images;
  images.reserve(ds.items.size());
  for (auto& item : ds.items) images.push_back(std::move(item.image));
  return images;
}

std::map<std::string, std::string> parse_kv_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw spim::invalid_input("cannot open config file: " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw spim::invalid_input("config line " + std::to_string(line_no) +
                                " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw spim::invalid_input("config line " + std::to_string(line_no) +
                                               " has an empty key");
    kv[key] = value;
  }
  return kv;
}

// ---------------------------------------------------------------------------
// gen-patterns

struct GenArgs {
  std::string kind = "sh";
  int n = 0;
  int m = 0;
  std::uint64_t seed = 1;
  int sv_limit = 1024;
  std::string out;
};

int cmd_gen_patterns(const GenArgs& a) {
  if (a.kind != "sh")
    throw spim::invalid_input("unknown pattern kind '" + a.kind +
                              "' (learned patterns come from train --export-patterns)");
  const spim::PatternMatrix full = spim::scrambled_hadamard(a.n, a.seed);
  const spim::PatternMatrix sel =
      a.m == a.n ? full : spim::select_rows(full, a.m, a.seed);
  spim::save_patterns(a.out, sel);

  std::cout << "fill_factor," << spim::fill_factor(sel) << '\n';
  std::cout << "compression," << spim::compression_percentage(a.m, a.n) << '\n';
  if (a.m <= a.sv_limit) {
    const spim::PatternDiagnostics d = spim::singular_spectrum(sel);
    for (std::size_t i = 0; i < d.singular_values.size(); ++i)
      std::cout << "sv," << i << ',' << d.singular_values[i] << '\n';
  } else {
    std::cerr << "note: spectrum skipped (m > " << a.sv_limit
              << "; raise --sv-limit to force)\n";
  }

  write_run_config(run_config_path(a.out),
                   json{{"subcommand", "gen-patterns"},
                        {"kind", a.kind},
                        {"n", a.n},
                        {"m", a.m},
                        {"seed", a.seed},
                        {"out", a.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// measure

struct MeasureArgs {
  std::string patterns;
  std::vector<std::string> images;
  std::string cube;
  std::string noise = "none";
  std::uint64_t seed = 0;
  std::string out;
};

int cmd_measure(const MeasureArgs& a) {
  const spim::PatternMatrix patterns = spim::load_patterns(a.patterns);
  if (!a.cube.empty() && !a.images.empty())
    throw spim::invalid_input("give either --image or --cube, not both");
  if (a.cube.empty() && a.images.empty())
    throw spim::invalid_input("need an input: --image <pgm> (repeatable) or --cube <spcb>");

  spim::MeasurementSet set;
  if (!a.cube.empty()) {
    const spim::SpectralCube cube = spim::load_cube(a.cube);
    set.wavelengths_nm = cube.wavelengths_nm;
    for (std::size_t c = 0; c < cube.planes.size(); ++c) {
      spim::Measurement y = spim::forward_measure(patterns, cube.planes[c]);
      y.channel_index = static_cast<int>(c);
      set.channels.push_back(std::move(y));
    }
  } else {
    for (std::size_t c = 0; c < a.images.size(); ++c) {
      const spim::Image img = spim::fit_to_side(spim::load_pgm(a.images[c]), patterns.side());
      spim::Measurement y = spim::forward_measure(patterns, img);
      y.channel_index = static_cast<int>(c);
      set.channels.push_back(std::move(y));
    }
  }

  const spim::NoiseSpec spec = parse_noise(a.noise, a.seed);
  for (spim::Measurement& ch : set.channels) ch = spim::simulate_noise(ch, spec);
  spim::save_measurements(a.out, set);

  std::cout << "m," << set.channels.front().m() << '\n';
  std::cout << "channels," << set.channels.size() << '\n';

  write_run_config(run_config_path(a.out),
                   json{{"subcommand", "measure"},
                        {"patterns", a.patterns},
                        {"images", a.images},
                        {"cube", a.cube},
                        {"noise", a.noise},
                        {"seed", a.seed},
                        {"out", a.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string config;
  std::string data;
  int side = 32;
  int m = 0;
  int levels = 0;
  int base_channels = 32;
  double sigma = 0.25;
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  double w1 = 0.2, w2 = 0.8, w3 = 16.0;
  int patience = 5;
  double freeze_tol = 1e-4;
  int limit = 0;
  std::uint64_t seed = 1;
  std::string out;
  std::string export_patterns;
  std::string fixed_patterns;
  std::string init_from;
};

int cmd_train(const TrainArgs& a) {
  spim::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch_size = a.batch_size;
  cfg.lr = static_cast<float>(a.lr);
  cfg.sigma_train = static_cast<float>(a.sigma);
  cfg.w1 = static_cast<float>(a.w1);
  cfg.w2 = static_cast<float>(a.w2);
  cfg.w3 = static_cast<float>(a.w3);
  cfg.freeze_patience = a.patience;
  cfg.freeze_rel_tol = a.freeze_tol;
  cfg.seed = a.seed;

  spim::LedModel model;
  if (!a.init_from.empty()) {
    if (!a.fixed_patterns.empty())
      throw spim::invalid_input("--init-from and --fixed-patterns are exclusive");
    const spim::Checkpoint ckpt = spim::load_checkpoint(a.init_from);
    model = spim::model_from_checkpoint(ckpt, cfg);
  } else if (!a.fixed_patterns.empty()) {
    const spim::PatternMatrix fixed = spim::load_patterns(a.fixed_patterns);
    spim::ArchitectureConfig arch;
    arch.m = fixed.m;
    arch.side = fixed.side();
    arch.unet_levels = a.levels;
    arch.base_channels = a.base_channels;
    model = spim::make_led_model_fixed_encoder(arch, cfg, fixed);
  } else {
    spim::ArchitectureConfig arch;
    arch.m = a.m;
    arch.side = a.side;
    arch.unet_levels = a.levels;
    arch.base_channels = a.base_channels;
    model = spim::make_led_model(arch, cfg);
  }

  const std::vector<spim::Image> images =
      load_images(a.data, model.arch.side, a.limit, a.seed);
  std::cerr << "training on " << images.size() << " images, side "
            << model.arch.side << ", m " << model.arch.m << "\n";

  const spim::FitResult fr = spim::fit(model, images, &std::cout);
  spim::save_checkpoint(a.out, fr.checkpoint);
  std::cerr << "encoder froze after epoch " << fr.freeze_epoch << "\n";

  if (!a.export_patterns.empty())
    spim::save_patterns(a.export_patterns, spim::encoder_patterns(model));

  write_run_config(run_config_path(a.out),
                   json{{"subcommand", "train"},
                        {"data", a.data},
                        {"side", model.arch.side},
                        {"m", model.arch.m},
                        {"levels", model.arch.unet_levels},
                        {"base-channels", model.arch.base_channels},
                        {"sigma", a.sigma},
                        {"epochs", a.epochs},
                        {"batch-size", a.batch_size},
                        {"lr", a.lr},
                        {"w1", a.w1},
                        {"w2", a.w2},
                        {"w3", a.w3},
                        {"patience", a.patience},
                        {"freeze-tol", a.freeze_tol},
                        {"limit", a.limit},
                        {"seed", a.seed},
                        {"out", a.out},
                        {"export-patterns", a.export_patterns},
                        {"fixed-patterns", a.fixed_patterns},
                        {"init-from", a.init_from},
                        {"freeze-epoch", fr.freeze_epoch}});
  return 0;
}

// ---------------------------------------------------------------------------
// reconstruct

struct ReconstructArgs {
  std::string method;
  std::string ckpt;
  std::string patterns;
  std::string measurements;
  std::string truth;
  double mu = 512.0;
  double beta = 16.0;
  int max_outer = 300;
  int max_inner = 5;
  double tol = 1e-4;
  bool anisotropic = false;
  std::string out;
};

int cmd_reconstruct(const ReconstructArgs& a, CLI::App* sub) {
  const spim::Method method = spim::method_from_name(a.method);
  const bool learned = method == spim::Method::led || method == spim::Method::sh_ld;
  if (learned && a.ckpt.empty()) {
    std::cerr << sub->help();
    throw spim::invalid_input("--ckpt is required for method '" + a.method + "'");
  }
  if (!learned && a.patterns.empty()) {
    std::cerr << sub->help();
    throw spim::invalid_input("--patterns is required for method '" + a.method + "'");
  }

  const spim::MeasurementSet set = spim::load_measurements(a.measurements);

  spim::Checkpoint ckpt;
  spim::PatternMatrix patterns;
  spim::ReconstructResources res;
  if (learned) {
    ckpt = spim::load_checkpoint(a.ckpt);
    res.ckpt = &ckpt;
  } else {
    patterns = spim::load_patterns(a.patterns);
    res.patterns = &patterns;
    res.tv.mu = a.mu;
    res.tv.beta = a.beta;
    res.tv.max_outer = a.max_outer;
    res.tv.max_inner = a.max_inner;
    res.tv.tol = a.tol;
    res.tv.isotropic = !a.anisotropic;
  }

  const auto t0 = std::chrono::steady_clock::now();
  const spim::SpectralCube cube = spim::reconstruct_multispectral(method, set, res);
  const double ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
          .count();

  const std::string ext = std::filesystem::path(a.out).extension().string();
  if (ext == ".spcb" || (ext != ".pgm" && cube.channels() > 1)) {
    spim::save_cube(a.out, cube);
  } else {
    if (cube.channels() > 1)
      throw spim::invalid_input("multichannel result cannot be saved as .pgm; use .spcb");
    spim::save_pgm(a.out, cube.planes.front(), 16);
  }

  double psnr_value = std::numeric_limits<double>::quiet_NaN();
  double ssim_value = std::numeric_limits<double>::quiet_NaN();
  if (!a.truth.empty()) {
    std::vector<spim::Image> truth_planes;
    if (std::filesystem::path(a.truth).extension() == ".spcb") {
      const spim::SpectralCube tc = spim::load_cube(a.truth);
      truth_planes = tc.planes;
    } else {
      truth_planes.push_back(
          spim::fit_to_side(spim::load_pgm(a.truth), cube.side()));
    }
    if (static_cast<int>(truth_planes.size()) != cube.channels())
      throw spim::invalid_input("truth channel count does not match the result");
    double psnr_acc = 0, ssim_acc = 0;
    for (int c = 0; c < cube.channels(); ++c) {
      psnr_acc += spim::psnr(truth_planes[c], cube.planes[c]);
      ssim_acc += spim::ssim(truth_planes[c], cube.planes[c]);
    }
    psnr_value = psnr_acc / cube.channels();
    ssim_value = ssim_acc / cube.channels();
  }

  std::cout << "method,psnr,ssim,ms\n";
  std::cout << a.method << ',' << psnr_value << ',' << ssim_value << ',' << ms << '\n';

  write_run_config(run_config_path(a.out),
                   json{{"subcommand", "reconstruct"},
                        {"method", a.method},
                        {"ckpt", a.ckpt},
                        {"patterns", a.patterns},
                        {"measurements", a.measurements},
                        {"truth", a.truth},
                        {"mu", a.mu},
                        {"beta", a.beta},
                        {"max-outer", a.max_outer},
                        {"max-inner", a.max_inner},
                        {"tol", a.tol},
                        {"anisotropic", a.anisotropic},
                        {"out", a.out}});
  return 0;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchmarkArgs {
  std::string config;
  std::string out_dir;
  int jobs = 0;  // 0 = take from config (default 1)
};

int cmd_benchmark(const BenchmarkArgs& a) {
  const auto kv = parse_kv_file(a.config);
  auto get = [&](const std::string& key, const std::string& fallback) {
    const auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  };
  auto get_int = [&](const std::string& key, int fallback) {
    const std::string v = get(key, std::to_string(fallback));
    try {
      std::size_t pos = 0;
      const int out = std::stoi(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing junk");
      return out;
    } catch (const std::exception&) {
      throw spim::invalid_input("bad integer for '" + key + "': " + v);
    }
  };
  auto get_double = [&](const std::string& key, double fallback) {
    std::ostringstream def;
    def.precision(17);
    def << fallback;
    const std::string v = get(key, def.str());
    try {
      std::size_t pos = 0;
      const double out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing junk");
      return out;
    } catch (const std::exception&) {
      throw spim::invalid_input("bad number for '" + key + "': " + v);
    }
  };

  static const std::vector<std::string> known = {
      "images", "side",      "limit",     "sigma",       "seed",
      "timing_reps", "jobs", "mu",        "beta",        "max_outer",
      "max_inner",   "tol",  "anisotropic", "led_ckpt",  "sh_patterns",
      "shld_ckpt",   "le_patterns"};
  for (const auto& [key, value] : kv)
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw spim::invalid_input("unknown benchmark config key '" + key + "'");

  const std::string images_src = get("images", "");
  if (images_src.empty()) throw spim::invalid_input("benchmark config needs 'images'");
  const int side = get_int("side", 0);
  if (side < 2) throw spim::invalid_input("benchmark config needs 'side'");

  spim::BenchmarkConfig bcfg;
  bcfg.sigma = get_double("sigma", 0.25);
  bcfg.seed = static_cast<std::uint64_t>(get_int("seed", 99));
  bcfg.timing_reps = get_int("timing_reps", 3);
  bcfg.jobs = a.jobs > 0 ? a.jobs : get_int("jobs", 1);

  spim::TVConfig tv;
  tv.mu = get_double("mu", tv.mu);
  tv.beta = get_double("beta", tv.beta);
  tv.max_outer = get_int("max_outer", tv.max_outer);
  tv.max_inner = get_int("max_inner", tv.max_inner);
  tv.tol = get_double("tol", tv.tol);
  tv.isotropic = get_int("anisotropic", 0) == 0;

  const std::vector<spim::Image> images =
      load_images(images_src, side, get_int("limit", 0), bcfg.seed);

  // owning storage behind the MethodSpec pointers
  std::vector<std::unique_ptr<spim::Checkpoint>> ckpts;
  std::vector<std::unique_ptr<spim::PatternMatrix>> mats;
  std::vector<spim::MethodSpec> specs;

  auto add_decoder_method = [&](spim::Method method, const std::string& path) {
    ckpts.push_back(std::make_unique<spim::Checkpoint>(spim::load_checkpoint(path)));
    mats.push_back(std::make_unique<spim::PatternMatrix>(spim::encoder_patterns(
        spim::model_from_checkpoint(*ckpts.back(), spim::TrainConfig{}))));
    spim::MethodSpec spec;
    spec.method = method;
    spec.patterns = mats.back().get();
    spec.res.ckpt = ckpts.back().get();
    specs.push_back(spec);
  };
  auto add_tv_method = [&](spim::Method method, const std::string& path) {
    mats.push_back(std::make_unique<spim::PatternMatrix>(spim::load_patterns(path)));
    spim::MethodSpec spec;
    spec.method = method;
    spec.patterns = mats.back().get();
    spec.res.patterns = mats.back().get();
    spec.res.tv = tv;
    specs.push_back(spec);
  };

  if (kv.count("led_ckpt")) add_decoder_method(spim::Method::led, kv.at("led_ckpt"));
  if (kv.count("sh_patterns")) add_tv_method(spim::Method::tval3, kv.at("sh_patterns"));
  if (kv.count("shld_ckpt")) add_decoder_method(spim::Method::sh_ld, kv.at("shld_ckpt"));
  if (kv.count("le_patterns"))
    add_tv_method(spim::Method::le_tval3, kv.at("le_patterns"));
  if (specs.empty())
    throw spim::invalid_input(
        "benchmark config configures no methods "
        "(set led_ckpt / sh_patterns / shld_ckpt / le_patterns)");

  const spim::BenchmarkResult result = spim::run_benchmark(images, specs, bcfg);

  std::filesystem::create_directories(a.out_dir);
  const std::filesystem::path dir(a.out_dir);
  spim::atomic_write_file(dir / "summary.csv",
                          [&](std::ostream& os) { spim::write_summary_csv(os, result); });
  spim::atomic_write_file(dir / "detail.csv",
                          [&](std::ostream& os) { spim::write_detail_csv(os, result); });
  spim::write_summary_csv(std::cout, result);
  if (result.warnings > 0)
    std::cerr << "warning: " << result.warnings << " reconstruction(s) failed\n";

  json jk;
  for (const auto& [key, value] : kv) jk[key] = value;
  write_run_config(dir / "run.json", json{{"subcommand", "benchmark"},
                                          {"config", a.config},
                                          {"out", a.out_dir},
                                          {"jobs", bcfg.jobs},
                                          {"resolved", jk}});
  return 0;
}

// ---------------------------------------------------------------------------
// spectra

struct SpectraArgs {
  std::string cube;
  std::string out;
};

int cmd_spectra(const SpectraArgs& a) {
  const spim::SpectralCube cube = spim::load_cube(a.cube);
  spim::save_ppm(a.out, spim::spectral_to_srgb(cube));
  std::cout << "side," << cube.side() << '\n';
  std::cout << "channels," << cube.channels() << '\n';
  write_run_config(run_config_path(a.out),
                   json{{"subcommand", "spectra"}, {"cube", a.cube}, {"out", a.out}});
  return 0;
}

// CLI11 only reads config files attached to the top-level app, so the train
// subcommand applies its own file here: values fill options the command line
// left untouched (flags win).
void apply_config_file(CLI::App& cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw spim::invalid_input("cannot open config file: " + path);
  for (const auto& item : CLI::ConfigTOML{}.from_config(in)) {
    if (!item.parents.empty() || item.name == "config" || item.inputs.empty())
      throw spim::invalid_input("bad config entry: " + item.fullname());
    CLI::Option* op = cmd.get_option_no_throw("--" + item.name);
    if (op == nullptr) throw spim::invalid_input("unknown config key: " + item.name);
    if (op->count() > 0) continue;
    op->add_result(item.inputs);
    op->run_callback();
  }
}

} // namespace

int main(int argc, char** argv) {
  std::cout.precision(10);

  CLI::App app{"single-pixel imaging toolkit: binary patterns, measurement "
               "simulation, decoder training, reconstruction and benchmarks"};
  app.require_subcommand(1);

  GenArgs gen;
  CLI::App* gen_cmd = app.add_subcommand("gen-patterns", "generate a binary pattern set");
  gen_cmd->add_option("--kind", gen.kind, "pattern family (sh)")->capture_default_str();
  gen_cmd->add_option("--n", gen.n, "pixel count (power of two)")->required();
  gen_cmd->add_option("--m", gen.m, "number of patterns")->required();
  gen_cmd->add_option("--seed", gen.seed, "scrambling seed")->capture_default_str();
  gen_cmd->add_option("--sv-limit", gen.sv_limit,
                      "print the singular spectrum only when m is at most this")
      ->capture_default_str();
  gen_cmd->add_option("--out", gen.out, "output SPIP path")->required();

  MeasureArgs meas;
  CLI::App* meas_cmd = app.add_subcommand("measure", "simulate detector measurements");
  meas_cmd->add_option("--patterns", meas.patterns, "SPIP pattern file")->required();
  meas_cmd->add_option("--image", meas.images, "input PGM (repeat per channel)");
  meas_cmd->add_option("--cube", meas.cube, "input SPCB spectral cube");
  meas_cmd->add_option("--noise", meas.noise,
                       "none | gaussian:<sigma> | pg:<gamma>,<sigma>")
      ->capture_default_str();
  meas_cmd->add_option("--seed", meas.seed, "noise seed")->capture_default_str();
  meas_cmd->add_option("--out", meas.out, "output SPIM path")->required();

  TrainArgs tr;
  CLI::App* train_cmd = app.add_subcommand("train", "train the encoder/decoder pair");
  train_cmd->add_option("--config", tr.config,
                        "plain-text key = value config; flags win");
  train_cmd->add_option("--data", tr.data, "image directory or synth:<count>")->required();
  train_cmd->add_option("--side", tr.side, "working image side")->capture_default_str();
  train_cmd->add_option("--m", tr.m, "number of measurements");
  train_cmd->add_option("--levels", tr.levels, "u-net levels (0 = derive from side)")
      ->capture_default_str();
  train_cmd->add_option("--base-channels", tr.base_channels, "first conv width")
      ->capture_default_str();
  train_cmd->add_option("--sigma", tr.sigma, "training noise on standardised y")
      ->capture_default_str();
  train_cmd->add_option("--epochs", tr.epochs)->capture_default_str();
  train_cmd->add_option("--batch-size", tr.batch_size)->capture_default_str();
  train_cmd->add_option("--lr", tr.lr, "adam learning rate")->capture_default_str();
  train_cmd->add_option("--w1", tr.w1, "l1 weight")->capture_default_str();
  train_cmd->add_option("--w2", tr.w2, "ssim weight")->capture_default_str();
  train_cmd->add_option("--w3", tr.w3, "binarisation weight")->capture_default_str();
  train_cmd->add_option("--patience", tr.patience, "freeze plateau patience")
      ->capture_default_str();
  train_cmd->add_option("--freeze-tol", tr.freeze_tol, "freeze plateau tolerance")
      ->capture_default_str();
  train_cmd->add_option("--limit", tr.limit, "cap on loaded images (0 = all)")
      ->capture_default_str();
  train_cmd->add_option("--seed", tr.seed)->capture_default_str();
  train_cmd->add_option("--out", tr.out, "output SPIC checkpoint")->required();
  train_cmd->add_option("--export-patterns", tr.export_patterns,
                        "also write the frozen encoder as SPIP");
  train_cmd->add_option("--fixed-patterns", tr.fixed_patterns,
                        "freeze the encoder to this SPIP file (decoder-only training)");
  train_cmd->add_option("--init-from", tr.init_from, "resume from a checkpoint");

  ReconstructArgs rec;
  CLI::App* rec_cmd = app.add_subcommand("reconstruct", "invert measurements");
  rec_cmd->add_option("--method", rec.method, "led | tval3 | sh-ld | le-tval3")
      ->required();
  rec_cmd->add_option("--ckpt", rec.ckpt, "SPIC checkpoint (led, sh-ld)");
  rec_cmd->add_option("--patterns", rec.patterns, "SPIP patterns (tval3, le-tval3)");
  rec_cmd->add_option("--measurements", rec.measurements, "SPIM input")->required();
  rec_cmd->add_option("--truth", rec.truth, "reference PGM/SPCB for psnr and ssim");
  rec_cmd->add_option("--mu", rec.mu, "tval3 fidelity weight")->capture_default_str();
  rec_cmd->add_option("--beta", rec.beta, "tval3 splitting weight")->capture_default_str();
  rec_cmd->add_option("--max-outer", rec.max_outer)->capture_default_str();
  rec_cmd->add_option("--max-inner", rec.max_inner)->capture_default_str();
  rec_cmd->add_option("--tol", rec.tol)->capture_default_str();
  rec_cmd->add_flag("--anisotropic", rec.anisotropic, "anisotropic TV");
  rec_cmd->add_option("--out", rec.out, "output image (.pgm) or cube (.spcb)")
      ->required();

  BenchmarkArgs bench;
  CLI::App* bench_cmd = app.add_subcommand("benchmark", "compare methods on a set");
  bench_cmd->add_option("--config", bench.config, "key = value benchmark description")
      ->required();
  bench_cmd->add_option("--out", bench.out_dir, "output directory")->required();
  bench_cmd->add_option("--jobs", bench.jobs, "worker threads (overrides config)");

  SpectraArgs spec;
  CLI::App* spectra_cmd = app.add_subcommand("spectra", "render a cube to sRGB");
  spectra_cmd->add_option("--cube", spec.cube, "input SPCB")->required();
  spectra_cmd->add_option("--out", spec.out, "output PPM")->required();

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed() && !tr.config.empty())
      apply_config_file(*train_cmd, tr.config);
    if (gen_cmd->parsed()) return cmd_gen_patterns(gen);
    if (meas_cmd->parsed()) return cmd_measure(meas);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (rec_cmd->parsed()) return cmd_reconstruct(rec, rec_cmd);
    if (bench_cmd->parsed()) return cmd_benchmark(bench);
    if (spectra_cmd->parsed()) return cmd_spectra(spec);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const spim::invalid_input& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const spim::format_error& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 3;
  } catch (const spim::numerical_error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << '\n';
    return 4;
  }
}
