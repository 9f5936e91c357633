#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <torch/optim/adam.h>
#include <torch/types.h>

#include "depthcod/checkpoint.hpp"
#include "depthcod/config.hpp"
#include "depthcod/data.hpp"
#include "depthcod/generator.hpp"
#include "depthcod/losses.hpp"

namespace depthcod {

enum class StepPhase { GeneratorUpdated, DiscriminatorUpdated };

struct LossRow {
  int epoch = 0;
  std::int64_t step = 0;
  losses::LossReport report;
};

/// Owns one model, its optimizers and the latent-sampling RNG.
///
/// The full variant follows the alternating scheme: generator forward, T latent
/// draws for confidence weights, generator update on the confidence-weighted
/// objective, then a discriminator update on detached predictions. All other
/// variants take a single deterministic step on unit-weighted losses.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);

  const TrainConfig& config() const noexcept { return config_; }
  CodModel& model() noexcept { return model_; }
  int epoch() const noexcept { return epoch_; }
  std::int64_t global_step() const noexcept { return step_; }
  torch::Generator& rng() noexcept { return rng_; }

  /// Dispatches to `train_step` (Full) or `reduced_step` (everything else).
  losses::LossReport step(const data::Batch& batch);
  losses::LossReport train_step(const data::Batch& batch);
  losses::LossReport reduced_step(const data::Batch& batch);

  /// Updates only the discriminator against detached predictions of the current generator.
  double discriminator_step(const data::Batch& batch);

  /// Called between the generator and discriminator updates and after the latter.
  void set_observer(std::function<void(StepPhase)> observer) { observer_ = std::move(observer); }

  /// Runs the next epoch over `manifest` (seeded shuffle, seeded flips). Stops early
  /// once `max_steps` is reached. Each finished step is passed to `on_row`.
  std::vector<LossRow> run_epoch(const data::DatasetManifest& manifest,
                                 const std::function<void(const LossRow&)>& on_row = {});

  bool reached_max_steps() const noexcept {
    return config_.max_steps > 0 && step_ >= config_.max_steps;
  }

  Checkpoint snapshot() const;
  void restore(const Checkpoint& checkpoint);

 private:
  void check_finite(const losses::LossReport& report) const;
  void notify(StepPhase phase) const {
    if (observer_) observer_(phase);
  }

  TrainConfig config_;
  CodModel model_;
  std::unique_ptr<torch::optim::Adam> gen_opt_;
  std::unique_ptr<torch::optim::Adam> dis_opt_;
  torch::Generator rng_;
  int epoch_ = 0;
  std::int64_t step_ = 0;
  std::function<void(StepPhase)> observer_;
};

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
  std::vector<LossRow> rows;  // rows produced by this call (not those restored from disk)
};

/// Full training run into `config.out_dir` (`ckpt/`, `losses.csv`, `config.txt`).
/// Fresh runs save `ckpt/epoch_000.ckpt` before the first epoch; every epoch refreshes
/// `ckpt/latest.ckpt`. With `resume`, training continues after the checkpoint's epoch.
TrainResult train(const TrainConfig& config,
                  const std::optional<std::filesystem::path>& resume = std::nullopt);

/// Header line of the loss-curve CSV.
std::string loss_csv_header();
/// One CSV row; absent components are empty fields.
std::string format_loss_row(const LossRow& row);

/// Rebuilds the model recorded in a checkpoint. `config_out` receives its configuration.
CodModel load_model(const std::filesystem::path& checkpoint, TrainConfig* config_out = nullptr);

}  // namespace depthcod
