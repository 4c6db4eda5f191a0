#include "dublid/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <random>
#include <string>

#include "dublid/backprop.hpp"
#include "dublid/checkpoint.hpp"
#include "dublid/errors.hpp"
#include "dublid/seeding.hpp"
#include "dublid/tensor_io.hpp"

namespace dublid {

namespace {

constexpr double kFloor = 1e-8;

bool all_finite(const Learnables& v) {
  bool ok = true;
  for_each_scalar(v, [&](ParamGroup, double x) { ok = ok && std::isfinite(x); });
  return ok;
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void validate(const TrainConfig& cfg) {
  if (cfg.epochs == 0 || cfg.batch_size == 0 || cfg.decay_every == 0)
    throw InvalidArgument("train: epochs, batch size and decay interval must be positive");
  if (cfg.decay_every > cfg.epochs)
    throw InvalidArgument("train: decay interval exceeds the epoch budget");
  if (!(cfg.lr0 > 0.0) || !(cfg.decay_factor > 0.0) || !(cfg.kappa0 > 0.0) ||
      !(cfg.adam_eps > 0.0))
    throw InvalidArgument("train: learning rate, decay, kappa0 and Adam epsilon must be positive");
  if (!(cfg.adam_beta1 > 0.0 && cfg.adam_beta1 < 1.0) ||
      !(cfg.adam_beta2 > 0.0 && cfg.adam_beta2 < 1.0))
    throw InvalidArgument("train: Adam moment decays must lie in (0, 1)");
}

double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
  return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

OptimState OptimState::zeros_for(const NetworkParams& p) {
  OptimState s;
  s.m = p.values.zeros_like();
  s.v = p.values.zeros_like();
  return s;
}

NetworkParams init_params(std::size_t layers, std::size_t channels, std::size_t planes,
                          std::size_t kernel_h, std::size_t kernel_w, std::uint64_t seed) {
  NetworkParams p;
  p.layers = layers;
  p.channels = channels;
  p.planes = planes;
  p.kernel_h = kernel_h;
  p.kernel_w = kernel_w;
  std::mt19937_64 rng(seed);
  Learnables& v = p.values;
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = (l + 1 == layers) ? planes : channels;
    const double bound = std::sqrt(6.0 / (9.0 * static_cast<double>(in) + 9.0 * static_cast<double>(channels)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<std::vector<RealGrid>> bank(channels, std::vector<RealGrid>(in, RealGrid(3, 3)));
    for (auto& row : bank)
      for (auto& f : row)
        for (double& t : f.data) t = dist(rng);
    v.w.push_back(std::move(bank));
    v.b.emplace_back(channels, 0.02);
    v.zeta.emplace_back(channels, 1.0);
  }
  v.beta.assign(layers, 0.0);
  v.eta.assign(channels, 20.0);
  validate(p);
  return p;
}

void project_constraints(NetworkParams& p) {
  Learnables& v = p.values;
  for (auto& layer : v.b)
    for (double& b : layer) b = std::max(b, 0.0);
  for (auto& layer : v.zeta)
    for (double& z : layer) z = std::max(z, kFloor);
  for (double& b : v.beta) b = std::max(b, 0.0);
  for (double& e : v.eta) e = std::max(e, kFloor);
}

StepStats train_step(std::span<const TrainSample* const> batch, NetworkParams& params,
                     OptimState& opt, const TrainConfig& cfg, double lr) {
  if (batch.empty()) throw InvalidArgument("train: empty batch");
  if (!(lr > 0.0)) throw InvalidArgument("train: learning rate must be positive");
  const SupportMask support = params.k_support();
  Learnables grad = params.values.zeros_like();
  StepStats stats;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const TrainSample& sample = *batch[s];
    const ForwardResult fr = forward(sample.y, params);
    const LossEvaluation le =
        evaluate_loss(fr.image, fr.kernel_grid, sample.x, sample.k, support, cfg.kappa0);
    const GradientSet g = backward(fr.tape, params, le.seeds);
    if (!std::isfinite(le.terms.total()) || !all_finite(g))
      throw NumericalError("train: non-finite loss or gradient at batch position " +
                           std::to_string(s) + " (kernel term " + fmt(le.terms.kernel_term) +
                           ", image term " + fmt(le.terms.image_term) + ")");
    stats.total += le.terms.total();
    stats.kernel_term += le.terms.kernel_term;
    stats.image_term += le.terms.image_term;
    std::vector<double> flat;
    for_each_scalar(g, [&](ParamGroup, double x) { flat.push_back(x); });
    std::size_t k = 0;
    for_each_scalar(grad, [&](ParamGroup, double& acc) { acc += flat[k++]; });
  }
  const double n = static_cast<double>(batch.size());
  stats.total /= n;
  stats.kernel_term /= n;
  stats.image_term /= n;

  std::vector<double> g;
  for_each_scalar(grad, [&](ParamGroup, double x) { g.push_back(x / n); });
  std::vector<double*> m, v, theta;
  for_each_scalar(opt.m, [&](ParamGroup, double& x) { m.push_back(&x); });
  for_each_scalar(opt.v, [&](ParamGroup, double& x) { v.push_back(&x); });
  for_each_scalar(params.values, [&](ParamGroup, double& x) { theta.push_back(&x); });
  if (m.size() != g.size() || v.size() != g.size())
    throw InvalidArgument("train: optimizer state does not match parameters");

  opt.step += 1;
  const double t = static_cast<double>(opt.step);
  const double c1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double c2 = 1.0 - std::pow(cfg.adam_beta2, t);
  for (std::size_t k = 0; k < g.size(); ++k) {
    *m[k] = cfg.adam_beta1 * *m[k] + (1.0 - cfg.adam_beta1) * g[k];
    *v[k] = cfg.adam_beta2 * *v[k] + (1.0 - cfg.adam_beta2) * g[k] * g[k];
    const double mh = *m[k] / c1, vh = *v[k] / c2;
    *theta[k] -= lr * mh / (std::sqrt(vh) + cfg.adam_eps);
  }
  project_constraints(params);
  return stats;
}

void save_train_state(const std::filesystem::path& path, const TrainState& s) {
  NamedTensors t = to_named(s.params);
  append_learnables(t, "adam.m.", s.optim.m);
  append_learnables(t, "adam.v.", s.optim.v);
  t.emplace_back("adam.step", Tensor{{1}, {static_cast<double>(s.optim.step)}});
  t.emplace_back("next_epoch", Tensor{{1}, {static_cast<double>(s.next_epoch)}});
  save_named(path, t);
}

TrainState load_train_state(const std::filesystem::path& path) {
  const NamedTensors t = load_named(path);
  TrainState s;
  try {
    s.params = from_named(t);
    s.optim.m = read_learnables(t, "adam.m.", s.params.values);
    s.optim.v = read_learnables(t, "adam.v.", s.params.values);
    auto scalar = [&](const std::string& name) {
      for (const auto& [n, v] : t)
        if (n == name && v.values.size() == 1 && v.values[0] >= 0.0) return v.values[0];
      throw InvalidArgument("train state: missing " + name);
    };
    s.optim.step = static_cast<std::uint64_t>(scalar("adam.step"));
    s.next_epoch = static_cast<std::size_t>(scalar("next_epoch"));
  } catch (const InvalidArgument& e) {
    throw IoError(path.string(), e.what());
  }
  return s;
}

std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  std::mt19937_64 rng(derive_seed(seed, epoch));
  for (std::size_t i = count; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

std::vector<EpochLog> fit(const std::vector<TrainSample>& data, TrainState& state,
                          const TrainConfig& cfg, const FitOutputs& out) {
  validate(cfg);
  validate(state.params);
  if (data.empty()) throw InvalidArgument("train: empty dataset");

  std::ofstream log;
  if (!out.log_csv.empty()) {
    const bool fresh = state.next_epoch == 0 || !std::filesystem::exists(out.log_csv);
    log.open(out.log_csv, fresh ? std::ios::trunc : std::ios::app);
    if (!log) throw IoError(out.log_csv.string(), "cannot open training log");
    if (fresh) log << "epoch,lr,mean_total_loss,mean_kernel_term,mean_image_term\n";
  }

  auto save = [&] {
    if (!out.checkpoint.empty()) save_checkpoint(out.checkpoint, state.params);
    if (!out.state.empty()) save_train_state(out.state, state);
  };

  std::vector<EpochLog> logs;
  for (std::size_t e = state.next_epoch; e < cfg.epochs; ++e) {
    const double lr = learning_rate(cfg, e);
    const std::vector<std::size_t> order = epoch_order(data.size(), cfg.seed, e);
    EpochLog row{e, lr, {}};
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const TrainSample*> batch;
      for (std::size_t k = start; k < std::min(order.size(), start + cfg.batch_size); ++k)
        batch.push_back(&data[order[k]]);
      StepStats st;
      try {
        st = train_step(batch, state.params, state.optim, cfg, lr);
      } catch (const NumericalError&) {
        if (!out.state.empty()) {
          std::filesystem::path snap = out.state;
          snap += ".failed";
          save_train_state(snap, state);
        }
        throw;
      }
      const double w = static_cast<double>(batch.size());
      row.mean.total += st.total * w;
      row.mean.kernel_term += st.kernel_term * w;
      row.mean.image_term += st.image_term * w;
    }
    const double n = static_cast<double>(data.size());
    row.mean.total /= n;
    row.mean.kernel_term /= n;
    row.mean.image_term /= n;
    state.next_epoch = e + 1;
    logs.push_back(row);

    if (log) {
      log << e << ',' << fmt(lr) << ',' << fmt(row.mean.total) << ','
          << fmt(row.mean.kernel_term) << ',' << fmt(row.mean.image_term) << '\n';
      log.flush();
    }
    if (out.progress)
      *out.progress << "epoch " << e << " lr " << lr << " loss " << row.mean.total << '\n';
    const bool last = e + 1 == cfg.epochs;
    if (last || (cfg.checkpoint_every != 0 && (e + 1) % cfg.checkpoint_every == 0)) save();
  }
  return logs;
}

}  // namespace dublid
