#pragma once
// Alternating discriminator / generator optimization, checkpoints and the
// training driver.

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hicmd/data.hpp"
#include "hicmd/losses.hpp"
#include "hicmd/optim.hpp"

namespace hicmd::train {

struct TrainState {
  RunConfig cfg;
  ParamStore<float> gen;  // encoders and decoder
  ParamStore<float> dis;  // both discriminators
  ParamStore<float> hfl;  // embedding, head, alpha
  optim::Adam adam_gen;
  optim::Adam adam_dis;
  optim::Sgd sgd_hfl;
  std::mt19937_64 rng;
  long iteration = 0;

  // Seeds the generator once from cfg.seed and initializes gen, dis, hfl in
  // that order. cfg.identities must be set.
  static TrainState create(const RunConfig& cfg);
};

// One discriminator step on detached fakes, then one step of the generation
// network and feature module on the overall objective. Throws naming the
// first non-finite loss component.
loss::LossReport train_step(TrainState& state, const PairBatch& batch);

// Forward-only evaluation of every loss component on a batch (no updates).
loss::LossReport evaluate_losses(TrainState& state, const PairBatch& batch);

void save_checkpoint(const std::string& path, const TrainState& state);
TrainState load_checkpoint(const std::string& path);

struct FitOptions {
  std::string out_dir;
  std::string resume;  // checkpoint to continue from
  std::function<void(long iteration, const loss::LossReport&)> on_step;
};

// Runs cfg.iterations steps on the train split. Writes losses.csv,
// checkpoint_<iter>.bin every cfg.checkpoint_every steps and at the end, and
// config_snapshot.txt. cfg.identities of 0 is filled from the dataset.
TrainState fit(RunConfig cfg, const data::Dataset& ds, const FitOptions& opt);

std::string checkpoint_name(long iteration);

}  // namespace hicmd::train
