#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "dublid/hqs.hpp"
#include "dublid/image.hpp"
#include "dublid/network.hpp"

namespace dublid {

struct TrainConfig {
  std::size_t epochs = 160;
  double lr0 = 1e-3;
  double decay_factor = 0.5;
  std::size_t decay_every = 20;
  std::size_t batch_size = 32;
  double kappa0 = 1e5;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t checkpoint_every = 0;  // 0: only at the end
};

void validate(const TrainConfig& cfg);

/// lr0 * decay_factor^floor(epoch / decay_every).
double learning_rate(const TrainConfig& cfg, std::size_t epoch);

struct OptimState {
  Learnables m;
  Learnables v;
  std::uint64_t step = 0;

  static OptimState zeros_for(const NetworkParams& p);
};

/// Glorot-uniform 3x3 banks; b = 0.02, zeta = 1, beta = 0, eta = 20.
NetworkParams init_params(std::size_t layers, std::size_t channels, std::size_t planes,
                          std::size_t kernel_h, std::size_t kernel_w, std::uint64_t seed);

/// Clamps b and beta at 0, floors zeta and eta at 1e-8.
void project_constraints(NetworkParams& p);

struct TrainSample {
  Image y;
  Image x;
  BlurKernel k;
};

struct StepStats {
  double total = 0.0;
  double kernel_term = 0.0;
  double image_term = 0.0;
};

/// One projected Adam step on the batch mean. Throws NumericalError (with the
/// offending sample index) if a loss or gradient is non-finite; the
/// parameters are left untouched in that case.
StepStats train_step(std::span<const TrainSample* const> batch, NetworkParams& params,
                     OptimState& opt, const TrainConfig& cfg, double lr);

/// Everything needed to continue training exactly where it stopped.
struct TrainState {
  NetworkParams params;
  OptimState optim;
  std::size_t next_epoch = 0;
};

void save_train_state(const std::filesystem::path& path, const TrainState& s);
TrainState load_train_state(const std::filesystem::path& path);

struct EpochLog {
  std::size_t epoch = 0;
  double lr = 0.0;
  StepStats mean;
};

struct FitOutputs {
  std::filesystem::path checkpoint;  // model; empty: none written
  std::filesystem::path state;       // resumable state; empty: none written
  std::filesystem::path log_csv;     // empty: no log
  std::ostream* progress = nullptr;
};

/// Trains from `state.next_epoch` up to cfg.epochs. Each epoch visits the
/// samples in a permutation seeded by (cfg.seed, epoch), so a resumed run
/// repeats an uninterrupted one exactly.
std::vector<EpochLog> fit(const std::vector<TrainSample>& data, TrainState& state,
                          const TrainConfig& cfg, const FitOutputs& out = {});

/// The per-epoch permutation used by fit.
std::vector<std::size_t> epoch_order(std::size_t count, std::uint64_t seed, std::size_t epoch);

}  // namespace dublid
