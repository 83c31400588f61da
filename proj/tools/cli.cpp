#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <sstream>

#include "spikecode/checkpoint.hpp"
#include "spikecode/codec.hpp"
#include "spikecode/csv.hpp"
#include "spikecode/errors.hpp"
#include "spikecode/image.hpp"
#include "spikecode/lif.hpp"
#include "spikecode/manifest.hpp"
#include "spikecode/train.hpp"
#include "spikecode/version.hpp"

namespace spikecode::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) throw IoError("failed writing " + path.string());
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

/// key=value lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path.string() + ":" + std::to_string(number) + ": expected key=value");
    auto value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    out.emplace_back(trim(line.substr(0, eq)), value);
  }
  return out;
}

/// Applies config entries to options not given on the command line.
void apply_config(CLI::App& sub, const std::vector<std::pair<std::string, std::string>>& entries) {
  for (const auto& [key, value] : entries) {
    if (key == "config") throw std::invalid_argument("config files cannot include other config files");
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (!opt) throw std::invalid_argument("unknown config key '" + key + "'");
    if (opt->count() > 0) continue;  // flags win
    opt->add_result(value);
    opt->run_callback();
  }
}

std::string strip_brackets(std::string s) {
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') s = s.substr(1, s.size() - 2);
  return s;
}

/// Every option of the subcommand with its effective value.
std::vector<std::pair<std::string, std::string>> effective_parameters(const CLI::App& sub) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name == "config") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& r = opt->results();
      for (std::size_t i = 0; i < r.size(); ++i) value += (i ? "," : "") + r[i];
    } else {
      value = strip_brackets(opt->get_default_str());
    }
    out.emplace_back(name, value);
  }
  return out;
}

std::vector<FileDigest> digest_images(const fs::path& dir) {
  std::vector<FileDigest> out;
  for (const auto& p : list_images(dir)) out.push_back(digest_of(p));
  return out;
}

std::vector<ImageGray> load_corpus(const fs::path& dir) {
  const auto paths = list_images(dir);
  if (paths.empty()) throw IoError("no .pgm or .png images in " + dir.string());
  std::vector<ImageGray> out;
  for (const auto& p : paths) out.push_back(load_image(p));
  return out;
}

struct Context {
  CLI::App* sub = nullptr;
  std::ostream* out = nullptr;
  std::ostream* err = nullptr;
  std::optional<std::uint64_t> seed;
  std::vector<FileDigest> inputs;

  void finish(const std::vector<fs::path>& outputs) const {
    RunManifest m;
    m.subcommand = sub->get_name();
    m.version = std::string(kVersion);
    m.seed = seed;
    m.parameters = effective_parameters(*sub);
    m.inputs = inputs;
    for (const auto& p : outputs) m.outputs.push_back(digest_of(p));
    write_manifest(m, manifest_path_for(outputs.front()));
  }
};

// --- staircase -------------------------------------------------------------

struct StaircaseArgs {
  double vth = 1.0, tau = 2.0, xmin = 0.0, xmax = 3.0;
  std::size_t timesteps = 8, points = 1001;
  std::string out;
};

void cmd_staircase(const StaircaseArgs& a, Context& ctx) {
  if (!(std::isfinite(a.xmin) && std::isfinite(a.xmax) && a.xmin <= a.xmax))
    throw std::invalid_argument("staircase: need finite xmin <= xmax");
  if (a.points < 1) throw std::invalid_argument("staircase: points must be >= 1");
  const LifParams<double> p{a.vth, a.tau, 0.0};
  std::vector<double> grid(a.points);
  for (std::size_t i = 0; i < a.points; ++i)
    grid[i] = a.points == 1 ? a.xmin : a.xmin + (a.xmax - a.xmin) * static_cast<double>(i) / static_cast<double>(a.points - 1);
  const auto curve = staircase_curve(p, a.timesteps, grid);
  auto f = open_output(a.out);
  f << "x,f_r,pattern\n";
  for (const auto& pt : curve) f << csv_number(pt.x) << ',' << csv_number(pt.firing_rate) << ',' << pt.pattern.to_string() << '\n';
  close_output(f, a.out);
  ctx.finish({a.out});
}

// --- sweep -----------------------------------------------------------------

struct SweepArgs {
  std::string scheme = "lif", corpus, out;
  std::vector<std::size_t> t_list{1, 2, 4, 8, 16, 32, 64};
  std::uint64_t seed = 0;
  std::size_t repeats = 1;
  double vth = 1.0, tau = 2.0;
};

void cmd_sweep(const SweepArgs& a, Context& ctx) {
  SweepOptions opt;
  opt.t_list = a.t_list;
  opt.params.lif = {a.vth, a.tau, 0.0};
  opt.params.seed = a.seed;
  opt.repeats = a.repeats;
  const auto scheme = parse_scheme(a.scheme);
  ctx.inputs = digest_images(a.corpus);
  const auto result = sweep_timesteps(load_corpus(a.corpus), scheme, opt);
  auto f = open_output(a.out);
  write_sweep_csv(result, f);
  close_output(f, a.out);
  ctx.seed = a.seed;
  ctx.finish({a.out});
}

// --- add-noise / psnr ------------------------------------------------------

struct NoiseArgs {
  std::string in, out;
  double sigma = 25.0;
  std::uint64_t seed = 0;
};

void cmd_add_noise(const NoiseArgs& a, Context& ctx) {
  ctx.inputs = {digest_of(a.in)};
  const auto noisy = add_awgn(load_image(a.in), {a.sigma, a.seed});
  save_image(noisy, a.out);
  ctx.seed = a.seed;
  ctx.finish({a.out});
}

struct PsnrArgs {
  std::string ref, test;
  double peak = 255.0;
};

void cmd_psnr(const PsnrArgs& a, Context& ctx) {
  *ctx.out << csv_number(psnr(load_image(a.ref), load_image(a.test), a.peak)) << '\n';
}

// --- train -----------------------------------------------------------------

struct NetArgs {
  int depth = 5, channels = 32, kernel = 3;
  std::size_t timesteps = 7;
  double vth = 1.0, tau = 2.0;
  std::string coding = "lif", readout = "membrane-mean";

  NetworkConfig config() const {
    NetworkConfig c;
    c.depth = depth;
    c.channels = channels;
    c.kernel = kernel;
    c.t_count = timesteps;
    c.lif = {vth, tau, 0.0};
    c.coding = parse_input_coding(coding);
    c.readout = parse_readout(readout);
    c.validate();
    return c;
  }
};

struct TrainArgs {
  std::string config, data, out, log, val;
  std::uint64_t val_seed = 0;
  NetArgs net;
  double sigma = 25.0, lr = 1e-3, momentum = 0.9, lr_decay = 0.1, init_gain = 3.0, surrogate_width = 1.0;
  int epochs = 30, batch = 16, patch_size = 40, patch_stride = 10;
  std::uint64_t seed = 1;
  std::string optimizer = "adam", surrogate = "rectangular";
  std::vector<double> milestones{0.6, 0.85};

  TrainConfig train_config() const {
    TrainConfig t;
    t.sigma = sigma;
    t.lr = lr;
    t.epochs = epochs;
    t.batch = batch;
    t.seed = seed;
    t.patch_size = patch_size;
    t.patch_stride = patch_stride;
    t.optimizer = parse_optimizer(optimizer);
    t.momentum = momentum;
    t.lr_milestones = milestones;
    t.lr_decay = lr_decay;
    t.init_gain = init_gain;
    t.surrogate = {parse_surrogate_shape(surrogate), surrogate_width};
    t.validate();
    return t;
  }
  fs::path log_path() const {
    if (!log.empty()) return log;
    return fs::path(out).replace_extension("").string() + ".log.csv";
  }
};

void cmd_train(const TrainArgs& a, Context& ctx) {
  const auto net_cfg = a.net.config();
  const auto cfg = a.train_config();
  ctx.inputs = digest_images(a.data);
  TrainData data;
  data.patches = make_training_patches(load_corpus(a.data), cfg);
  if (!a.val.empty()) {
    ctx.inputs.push_back(digest_of(a.val));
    data.validation_clean = normalize_range(load_image(a.val), 0.0, 255.0);
    data.validation_noisy = quantize_8bit(add_awgn(*data.validation_clean, {cfg.sigma, a.val_seed}));
  }
  *ctx.err << "training on " << data.patches.size() << " patches\n";

  CheckpointMeta meta;
  for (const auto& [k, v] : effective_parameters(*ctx.sub)) meta[k] = v;
  meta["version"] = std::string(kVersion);
  const fs::path log_path = a.log_path();
  std::vector<EpochLog> log;
  auto on_epoch = [&](const EpochLog& e, const TrainNet& net) {
    log.push_back(e);
    *ctx.err << "epoch " << e.epoch << " loss " << csv_number(e.loss) << " val_psnr " << csv_number(e.val_psnr);
    for (double t : e.theta_layers) *ctx.err << ' ' << csv_number(t);
    *ctx.err << std::endl;
    meta["epochs_completed"] = std::to_string(e.epoch + 1);
    save_checkpoint(net, a.out, meta);
    auto f = open_output(log_path);
    write_train_log_csv(log, f);
    close_output(f, log_path);
  };
  const auto result = train(data, net_cfg, cfg, on_epoch);
  if (cfg.epochs == 0) {
    save_checkpoint(result.net, a.out, meta);
    auto f = open_output(log_path);
    write_train_log_csv(log, f);
    close_output(f, log_path);
  }
  ctx.seed = a.seed;
  ctx.finish({a.out, log_path});
}

// --- denoise / eval --------------------------------------------------------

struct DenoiseArgs {
  std::string checkpoint, in, out, residual;
  std::uint64_t seed = 0;
};

void cmd_denoise(const DenoiseArgs& a, Context& ctx) {
  ctx.inputs = {digest_of(a.checkpoint), digest_of(a.in)};
  const auto net = load_checkpoint<float>(a.checkpoint).net;
  DenoiseOptions opt;
  opt.input_seed = a.seed;
  const auto result = denoise_image(net, load_image(a.in), opt);
  save_image(result.denoised, a.out);
  std::vector<fs::path> outputs{a.out};
  if (!a.residual.empty()) {
    // Residuals are signed; store them around mid-gray.
    save_image(ImageGray(result.residual.pixels + 128.0, 0.0, 255.0), a.residual);
    outputs.emplace_back(a.residual);
  }
  ctx.seed = a.seed;
  ctx.finish(outputs);
}

struct EvalArgs {
  std::string checkpoint, corpus, out, save_dir;
  double sigma = 25.0;
  std::uint64_t seed = 0;
};

void cmd_eval(const EvalArgs& a, Context& ctx) {
  if (!(a.sigma >= 0.0)) throw std::invalid_argument("eval: sigma must be >= 0");
  ctx.inputs = {digest_of(a.checkpoint)};
  for (auto& d : digest_images(a.corpus)) ctx.inputs.push_back(std::move(d));
  const auto net = load_checkpoint<float>(a.checkpoint).net;
  const auto paths = list_images(a.corpus);
  if (paths.empty()) throw IoError("no .pgm or .png images in " + a.corpus);
  if (!a.save_dir.empty()) fs::create_directories(a.save_dir);

  auto f = open_output(a.out);
  f << "image,psnr_noisy,psnr_denoised\n";
  std::vector<fs::path> outputs{a.out};
  double sum_noisy = 0.0, sum_denoised = 0.0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto clean = normalize_range(load_image(paths[i]), 0.0, 255.0);
    const auto noisy = quantize_8bit(add_awgn(clean, {a.sigma, a.seed + i}));
    DenoiseOptions opt;
    opt.input_seed = a.seed + i;
    const auto denoised = quantize_8bit(denoise_image(net, noisy, opt).denoised);
    const double pn = psnr(clean, noisy), pd = psnr(clean, denoised);
    sum_noisy += pn;
    sum_denoised += pd;
    f << paths[i].filename().string() << ',' << csv_number(pn) << ',' << csv_number(pd) << '\n';
    if (!a.save_dir.empty()) {
      const auto stem = (fs::path(a.save_dir) / paths[i].stem()).string();
      save_image(noisy, stem + "_noisy.pgm");
      save_image(denoised, stem + "_denoised.pgm");
      outputs.emplace_back(stem + "_noisy.pgm");
      outputs.emplace_back(stem + "_denoised.pgm");
    }
  }
  const double n = static_cast<double>(paths.size());
  f << "mean," << csv_number(sum_noisy / n) << ',' << csv_number(sum_denoised / n) << '\n';
  close_output(f, a.out);
  ctx.seed = a.seed;
  ctx.finish(outputs);
}

// --- wiring ----------------------------------------------------------------

void add_net_options(CLI::App* sub, NetArgs& n) {
  sub->add_option("--depth", n.depth, "convolution layers");
  sub->add_option("--channels", n.channels, "feature maps per hidden layer");
  sub->add_option("--kernel", n.kernel, "odd kernel size");
  sub->add_option("--timesteps", n.timesteps, "simulation steps T");
  sub->add_option("--vth", n.vth, "firing threshold");
  sub->add_option("--tau", n.tau, "membrane time constant");
  sub->add_option("--coding", n.coding, "input coding")->check(CLI::IsMember({"lif", "rate"}));
  sub->add_option("--readout", n.readout, "residual readout")->check(CLI::IsMember({"membrane-mean"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spiking neural coding experiments"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  Context ctx;
  ctx.out = &out;
  ctx.err = &err;
  std::function<void()> action;
  std::string config_path;

  StaircaseArgs st;
  auto* s = app.add_subcommand("staircase", "firing rate of one LIF neuron over an input grid");
  s->add_option("--vth", st.vth, "firing threshold");
  s->add_option("--tau", st.tau, "membrane time constant");
  s->add_option("--timesteps", st.timesteps, "simulation steps T");
  s->add_option("--xmin", st.xmin, "first grid point");
  s->add_option("--xmax", st.xmax, "last grid point");
  s->add_option("--points", st.points, "grid size");
  s->add_option("--out", st.out, "CSV output")->required();
  s->callback([&] { action = [&] { cmd_staircase(st, ctx); }; });

  SweepArgs sw;
  s = app.add_subcommand("sweep", "reconstruction PSNR and activity over T for a corpus");
  s->add_option("--scheme", sw.scheme, "lif or rate")->check(CLI::IsMember({"lif", "rate"}));
  s->add_option("--corpus", sw.corpus, "image directory")->required();
  s->add_option("--t-list", sw.t_list, "comma-separated T values")->delimiter(',');
  s->add_option("--seed", sw.seed, "rate coding seed");
  s->add_option("--repeats", sw.repeats, "rate coding seeds averaged");
  s->add_option("--vth", sw.vth, "firing threshold");
  s->add_option("--tau", sw.tau, "membrane time constant");
  s->add_option("--out", sw.out, "CSV output")->required();
  s->callback([&] { action = [&] { cmd_sweep(sw, ctx); }; });

  NoiseArgs nz;
  s = app.add_subcommand("add-noise", "add white Gaussian noise to an image");
  s->add_option("--in", nz.in, "input image")->required();
  s->add_option("--sigma", nz.sigma, "noise standard deviation (0-255 scale)");
  s->add_option("--seed", nz.seed, "noise seed");
  s->add_option("--out", nz.out, "output image")->required();
  s->callback([&] { action = [&] { cmd_add_noise(nz, ctx); }; });

  PsnrArgs ps;
  s = app.add_subcommand("psnr", "PSNR of a test image against a reference");
  s->add_option("--ref", ps.ref, "reference image")->required();
  s->add_option("--test", ps.test, "test image")->required();
  s->add_option("--peak", ps.peak, "peak signal value");
  s->callback([&] { action = [&] { cmd_psnr(ps, ctx); }; });

  TrainArgs tr;
  s = app.add_subcommand("train", "train a spiking residual denoiser");
  s->add_option("--config", config_path, "key=value file; flags override it");
  s->add_option("--data", tr.data, "directory of clean training images");
  s->add_option("--out", tr.out, "checkpoint output");
  s->add_option("--log", tr.log, "training log CSV (default <out>.log.csv)");
  s->add_option("--val", tr.val, "clean held-out image for validation PSNR");
  s->add_option("--val-seed", tr.val_seed, "noise seed of the validation image");
  add_net_options(s, tr.net);
  s->add_option("--sigma", tr.sigma, "training noise level");
  s->add_option("--lr", tr.lr, "learning rate");
  s->add_option("--epochs", tr.epochs, "epochs");
  s->add_option("--batch", tr.batch, "patches per step");
  s->add_option("--seed", tr.seed, "seed for init, shuffling and noise");
  s->add_option("--patch-size", tr.patch_size, "training patch size");
  s->add_option("--patch-stride", tr.patch_stride, "training patch stride");
  s->add_option("--optimizer", tr.optimizer, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
  s->add_option("--momentum", tr.momentum, "SGD momentum or Adam beta1");
  s->add_option("--milestones", tr.milestones, "epoch fractions of lr decay")->delimiter(',');
  s->add_option("--lr-decay", tr.lr_decay, "lr factor per milestone");
  s->add_option("--init-gain", tr.init_gain, "spiking layer init gain");
  s->add_option("--surrogate", tr.surrogate, "surrogate shape")
      ->check(CLI::IsMember({"rectangular", "triangular", "fast-sigmoid"}));
  s->add_option("--surrogate-width", tr.surrogate_width, "surrogate width");
  auto* train_sub = s;
  s->callback([&] {
    action = [&] {
      if (!config_path.empty()) apply_config(*train_sub, read_config(config_path));
      if (tr.data.empty() || tr.out.empty()) throw std::invalid_argument("train: --data and --out are required");
      cmd_train(tr, ctx);
    };
  });

  DenoiseArgs dn;
  s = app.add_subcommand("denoise", "denoise one image with a trained checkpoint");
  s->add_option("--checkpoint", dn.checkpoint, "checkpoint file")->required();
  s->add_option("--in", dn.in, "noisy image")->required();
  s->add_option("--out", dn.out, "denoised image")->required();
  s->add_option("--residual", dn.residual, "optional residual image (offset by 128)");
  s->add_option("--seed", dn.seed, "input spike seed (rate coding)");
  s->callback([&] { action = [&] { cmd_denoise(dn, ctx); }; });

  EvalArgs ev;
  s = app.add_subcommand("eval", "noisy and denoised PSNR over a corpus of clean images");
  s->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  s->add_option("--corpus", ev.corpus, "directory of clean images")->required();
  s->add_option("--sigma", ev.sigma, "noise level");
  s->add_option("--seed", ev.seed, "noise seed of the first image");
  s->add_option("--out", ev.out, "CSV output")->required();
  s->add_option("--save-dir", ev.save_dir, "also write the noisy and denoised images here");
  s->callback([&] { action = [&] { cmd_eval(ev, ctx); }; });

  std::string manifest_in;
  std::optional<std::vector<std::string>> replay_args;
  s = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  s->add_option("--manifest", manifest_in, "manifest file")->required();
  s->callback([&] {
    action = [&] {
      const auto m = read_manifest(manifest_in);
      std::vector<std::string> again{m.subcommand};
      for (const auto& [k, v] : m.parameters) {
        if (v.empty()) continue;
        again.push_back("--" + k);
        again.push_back(v);
      }
      replay_args = std::move(again);
    };
  });

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kValidation;
  }
  for (auto* sub : app.get_subcommands())
    if (sub->parsed()) ctx.sub = sub;

  try {
    action();
    if (replay_args) return run(*replay_args, out, err);
    return kOk;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace spikecode::cli
