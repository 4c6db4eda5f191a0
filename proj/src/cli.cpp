#include "dublid/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <ostream>

#include "dublid/backprop.hpp"
#include "dublid/checkpoint.hpp"
#include "dublid/datagen.hpp"
#include "dublid/dataset.hpp"
#include "dublid/errors.hpp"
#include "dublid/metrics.hpp"
#include "dublid/network.hpp"
#include "dublid/tensor_io.hpp"
#include "dublid/trainer.hpp"

namespace fs = std::filesystem;

namespace dublid {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Advisory lock on <dir>/.dublid.lock held for the lifetime of the object.
class DirLock {
 public:
  explicit DirLock(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
    path_ = dir / ".dublid.lock";
    fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError(path_.string(), "cannot create lock file");
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw IoError(dir.string(), "output directory is in use by another dublid process");
    }
  }
  ~DirLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  DirLock(const DirLock&) = delete;
  DirLock& operator=(const DirLock&) = delete;

 private:
  fs::path path_;
  int fd_ = -1;
};

fs::path parent_or_cwd(const fs::path& file) {
  const fs::path p = file.parent_path();
  return p.empty() ? fs::path(".") : p;
}

void require_file(const fs::path& p) {
  if (!fs::is_regular_file(p)) throw IoError(p.string(), "no such file");
}

Image load_image_any(const fs::path& p) {
  require_file(p);
  return p.extension() == ".dblt" ? load_image_exact(p) : read_pnm(p);
}

void save_image_any(const fs::path& p, const Image& img) {
  if (p.extension() == ".dblt")
    save_image_exact(p, img);
  else
    write_pnm(p, img);
}

void require_odd(std::size_t v, const char* flag) {
  if (v == 0 || v % 2 == 0) throw UsageError(std::string(flag) + " must be a positive odd number");
}

void require_positive(double v, const char* flag) {
  if (!(v > 0.0)) throw UsageError(std::string(flag) + " must be positive");
}

std::string number(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

struct Options {
  std::uint64_t seed = 0;
  bool verbose = false;

  // synth-kernels
  std::size_t angles = 16, lengths = 16, size = 31;
  double min_len = 5.0, max_len = 20.0;
  std::string out;
  // synth-trajectories
  std::size_t count = 8;
  // blur
  std::string image, kernel, kernels_dir, data;
  double noise_std = 0.01;
  std::size_t scenes = 0, scene_size = 64, planes = 1;
  // train
  std::size_t layers = 10, channels = 16, epochs = 160, batch = 32, kernel_size = 31;
  std::size_t checkpoint_every = 0;
  double lr = 1e-3, kappa0 = 1e5;
  std::string log;
  bool resume = false;
  // deblur / eval
  std::string model, input, out_image, out_kernel, report;
  // gradcheck
  std::size_t gc_layers = 3, gc_channels = 4, gc_size = 32;
  double tol = 1e-4;
};

int synth_kernels(const Options& o, std::ostream& out) {
  require_odd(o.size, "--size");
  if (o.angles == 0 || o.lengths == 0) throw UsageError("--angles and --lengths must be positive");
  if (!(o.min_len >= 1.0) || !(o.max_len >= o.min_len))
    throw UsageError("need 1 <= --min-len <= --max-len");
  const auto ks = linear_kernels(o.angles, o.lengths, o.min_len, o.max_len, o.size);
  DirLock lock(o.out);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "linear_a%02zu_l%02zu.dblt", i / o.lengths, i % o.lengths);
    save_kernel(fs::path(o.out) / name, ks[i]);
  }
  out << "wrote " << ks.size() << " kernels to " << o.out << '\n';
  return kExitOk;
}

int synth_trajectories(const Options& o, std::ostream& out) {
  require_odd(o.size, "--size");
  if (o.count == 0) throw UsageError("--count must be positive");
  const auto ks = trajectory_kernels(o.count, o.size, o.seed);
  DirLock lock(o.out);
  for (std::size_t i = 0; i < ks.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "traj_%03zu_s%zu_r%zu.dblt", i / 32, (i / 8) % 4, i % 8);
    save_kernel(fs::path(o.out) / name, ks[i]);
  }
  out << "wrote " << ks.size() << " kernels to " << o.out << '\n';
  return kExitOk;
}

int blur(const Options& o, std::ostream& out) {
  if (!(o.noise_std >= 0.0)) throw UsageError("--noise-std must be non-negative");
  if (!o.data.empty()) {
    if (o.kernels_dir.empty() || o.scenes == 0)
      throw UsageError("dataset mode needs --kernels DIR and --scenes N");
    if (o.planes != 1 && o.planes != 3) throw UsageError("--planes must be 1 or 3");
    if (o.scene_size < 11) throw UsageError("--scene-size must be at least 11");
    const auto kernels = load_kernel_dir(o.kernels_dir);
    const Dataset ds =
        synthesize_dataset(kernels, o.scenes, o.scene_size, o.planes, o.noise_std, o.seed);
    DirLock lock(o.data);
    write_dataset(o.data, ds);
    out << "wrote " << ds.entries.size() << " samples to " << o.data << '\n';
    return kExitOk;
  }
  if (o.image.empty() || o.kernel.empty() || o.out.empty())
    throw UsageError("blur needs --image, --kernel and --out (or --data for a dataset)");
  const Image x = load_image_any(o.image);
  require_file(o.kernel);
  const BlurKernel k = load_kernel(o.kernel);
  const Sample s = synthesize(x, k, o.noise_std, o.seed);
  DirLock lock(parent_or_cwd(o.out));
  save_image_any(o.out, s.y);
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

int train(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.data.empty() || o.out.empty()) throw UsageError("train needs --data and --out");
  if (o.layers == 0 || o.channels == 0) throw UsageError("--layers and --channels must be positive");
  require_odd(o.kernel_size, "--kernel-size");
  TrainConfig cfg;
  cfg.epochs = o.epochs;
  cfg.lr0 = o.lr;
  cfg.batch_size = o.batch;
  cfg.kappa0 = o.kappa0;
  cfg.seed = o.seed;
  cfg.checkpoint_every = o.checkpoint_every;
  cfg.decay_every = std::min<std::size_t>(20, std::max<std::size_t>(o.epochs, 1));
  try {
    validate(cfg);
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }

  const Dataset ds = load_dataset(o.data);
  const fs::path model = o.out;
  fs::path state_path = model;
  state_path += ".state";
  fs::path log = o.log.empty() ? fs::path(model.string() + ".log.csv") : fs::path(o.log);
  DirLock lock(parent_or_cwd(model));

  TrainState state;
  if (o.resume && fs::exists(state_path)) {
    state = load_train_state(state_path);
    if (state.params.layers != o.layers || state.params.channels != o.channels)
      throw UsageError("--resume: saved state has a different architecture");
  } else {
    const std::size_t planes = ds.samples.front().y.plane_count();
    state.params = init_params(o.layers, o.channels, planes, o.kernel_size, o.kernel_size, o.seed);
    state.optim = OptimState::zeros_for(state.params);
  }
  FitOutputs fo{model, state_path, log, o.verbose ? &err : nullptr};
  const auto logs = fit(ds.samples, state, cfg, fo);
  if (!logs.empty())
    out << "trained " << logs.size() << " epoch(s); final mean loss "
        << number("%.6g", logs.back().mean.total) << '\n';
  else
    save_checkpoint(model, state.params);
  out << "wrote " << model.string() << '\n';
  return kExitOk;
}

int deblur(const Options& o, std::ostream& out) {
  if (o.model.empty() || o.input.empty() || o.out_image.empty() || o.out_kernel.empty())
    throw UsageError("deblur needs --model, --input, --out-image and --out-kernel");
  require_file(o.model);
  const NetworkParams p = load_checkpoint(o.model);
  const Image y = load_image_any(o.input);
  const ForwardResult fr = forward(y, p);
  DirLock lock(parent_or_cwd(o.out_image));
  save_image_any(o.out_image, fr.image);
  save_kernel(o.out_kernel, fr.kernel);
  out << "wrote " << o.out_image << " and " << o.out_kernel << '\n';
  return kExitOk;
}

int eval(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.model.empty() || o.data.empty() || o.report.empty())
    throw UsageError("eval needs --model, --data and --report");
  require_file(o.model);
  const NetworkParams p = load_checkpoint(o.model);
  const Dataset ds = load_dataset(o.data);
  EvalReport rep;
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const TrainSample& s = ds.samples[i];
    const ForwardResult fr = forward(s.y, p);
    rep.rows.push_back(evaluate_sample(ds.entries[i].sample_id, fr.image, fr.kernel, s.y, s.x, s.k));
    if (o.verbose) err << ds.entries[i].sample_id << " isnr " << rep.rows.back().isnr_db << '\n';
  }
  DirLock lock(parent_or_cwd(o.report));
  write_report_csv(o.report, rep);
  const EvalRow m = rep.mean();
  out << "samples " << rep.rows.size() << "  psnr " << number("%.3f", m.psnr_db) << " dB  isnr "
      << number("%.3f", m.isnr_db) << " dB  ssim " << number("%.4f", m.ssim) << "  kernel rmse "
      << number("%.4e", m.kernel_rmse) << '\n';
  return kExitOk;
}

int gradcheck(const Options& o, std::ostream& out) {
  if (o.gc_layers == 0 || o.gc_channels == 0) throw UsageError("--layers and --channels must be positive");
  if (o.gc_size < 9) throw UsageError("--size must be at least 9");
  if (o.planes != 1 && o.planes != 3) throw UsageError("--planes must be 1 or 3");
  require_positive(o.tol, "--tol");
  const auto start = std::chrono::steady_clock::now();
  const GradCheckInstance inst =
      make_gradcheck_instance(o.gc_layers, o.gc_channels, o.gc_size, o.planes, o.seed);
  const GradCheckReport rep = gradient_check(inst.params, inst.y, inst.x_true, inst.k_true);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  for (const auto& g : rep.groups)
    out << group_name(g.group) << ": max rel err " << number("%.3e", g.max_rel_error)
        << "  checked " << g.checked << "  skipped " << g.skipped << '\n';
  const bool ok = rep.passed(o.tol);
  out << (ok ? "PASS" : "FAIL") << "  tol " << number("%g", o.tol) << "  time "
      << number("%.1f", secs) << " s\n";
  return ok ? kExitOk : kExitNumerical;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blind deblurring with an unrolled half-quadratic-splitting network", "dublid"};
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_flag("--verbose", o.verbose, "Progress on stderr");
  // Allow global flags after the verb as well.
  auto global = [&](CLI::App* s) {
    s->add_option("--seed", o.seed, "Random seed");
    s->add_flag("--verbose", o.verbose, "Progress on stderr");
  };

  auto* sk = app.add_subcommand("synth-kernels", "Linear motion kernels");
  sk->add_option("--angles", o.angles)->capture_default_str();
  sk->add_option("--lengths", o.lengths)->capture_default_str();
  sk->add_option("--min-len", o.min_len)->capture_default_str();
  sk->add_option("--max-len", o.max_len)->capture_default_str();
  sk->add_option("--size", o.size)->capture_default_str();
  sk->add_option("--out", o.out, "Output directory")->required();
  global(sk);

  auto* st = app.add_subcommand("synth-trajectories", "Random-walk motion kernels");
  st->add_option("--count", o.count, "Base trajectories (x32 after augmentation)")->capture_default_str();
  st->add_option("--size", o.size)->capture_default_str();
  st->add_option("--out", o.out, "Output directory")->required();
  global(st);

  auto* bl = app.add_subcommand("blur", "Blur one image, or synthesize a dataset with --data");
  bl->add_option("--image", o.image);
  bl->add_option("--kernel", o.kernel);
  bl->add_option("--out", o.out, "Output image (.pgm/.ppm, or .dblt for exact values)");
  bl->add_option("--noise-std", o.noise_std)->capture_default_str();
  bl->add_option("--data", o.data, "Dataset directory to create");
  bl->add_option("--kernels", o.kernels_dir, "Kernel directory for dataset mode");
  bl->add_option("--scenes", o.scenes, "Number of synthetic scenes");
  bl->add_option("--scene-size", o.scene_size)->capture_default_str();
  bl->add_option("--planes", o.planes)->capture_default_str();
  global(bl);

  auto* tr = app.add_subcommand("train", "Train a model on a dataset directory");
  tr->add_option("--data", o.data)->required();
  tr->add_option("--layers", o.layers)->capture_default_str();
  tr->add_option("--channels", o.channels)->capture_default_str();
  tr->add_option("--epochs", o.epochs)->capture_default_str();
  tr->add_option("--lr", o.lr)->capture_default_str();
  tr->add_option("--batch", o.batch)->capture_default_str();
  tr->add_option("--kernel-size", o.kernel_size)->capture_default_str();
  tr->add_option("--kappa0", o.kappa0)->capture_default_str();
  tr->add_option("--checkpoint-every", o.checkpoint_every, "Epochs between checkpoints (0: end only)");
  tr->add_option("--log", o.log, "Training log CSV (default: <out>.log.csv)");
  tr->add_flag("--resume", o.resume, "Continue from <out>.state");
  tr->add_option("--out", o.out, "Model checkpoint")->required();
  global(tr);

  auto* db = app.add_subcommand("deblur", "Restore an image with a trained model");
  db->add_option("--model", o.model)->required();
  db->add_option("--input", o.input)->required();
  db->add_option("--out-image", o.out_image)->required();
  db->add_option("--out-kernel", o.out_kernel)->required();
  global(db);

  auto* ev = app.add_subcommand("eval", "Score a model on a dataset directory");
  ev->add_option("--model", o.model)->required();
  ev->add_option("--data", o.data)->required();
  ev->add_option("--report", o.report)->required();
  global(ev);

  auto* gc = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  gc->add_option("--layers", o.gc_layers)->capture_default_str();
  gc->add_option("--channels", o.gc_channels)->capture_default_str();
  gc->add_option("--size", o.gc_size)->capture_default_str();
  gc->add_option("--planes", o.planes)->capture_default_str();
  gc->add_option("--tol", o.tol)->capture_default_str();
  global(gc);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (sk->parsed()) return synth_kernels(o, out);
    if (st->parsed()) return synth_trajectories(o, out);
    if (bl->parsed()) return blur(o, out);
    if (tr->parsed()) return train(o, out, err);
    if (db->parsed()) return deblur(o, out);
    if (ev->parsed()) return eval(o, out, err);
    if (gc->parsed()) return gradcheck(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  }
  return kExitUsage;
}

}  // namespace dublid
