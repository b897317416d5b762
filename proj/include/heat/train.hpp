#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "heat/graph_builder.hpp"
#include "heat/hetgraph.hpp"
#include "heat/model.hpp"
#include "heat/optim.hpp"

namespace heat {

struct TrainConfig {
  double learning_rate = 5e-5;
  double weight_decay = 1e-5;
  int max_epochs = 150;
  int batch_size = 2;
  int patience = 20;  // epochs without validation improvement before stopping
  double dropout = 0.2;
  int folds = 5;
  std::uint64_t seed = 0;
  bool decoupled_weight_decay = true;
  AugmentConfig augmentation;

  void validate() const;
  AdamConfig adam() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct Fold {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Shuffles 0..n-1 with `seed` and deals it into `folds` parts. Fold i uses
/// part i as test, part (i + 1) mod folds as validation, the rest as training.
std::vector<Fold> kfold_split(std::size_t n, int folds, std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = 0;
  double val_auc = 0;  // NaN when the validation set lacks a class
  double lr = 0;
  double seconds = 0;
};

enum class StopReason { kMaxEpochs, kEarlyStop, kDiverged };

struct TrainResult {
  Model best;                // parameters with the lowest validation loss
  int best_epoch = 0;        // 0 = the initial parameters
  double best_val_loss = 0;
  std::vector<EpochLog> log;
  StopReason stop = StopReason::kMaxEpochs;
  std::string message;
};

/// Minibatch Adam on `train_set` with per-graph augmentation, early stopping
/// on `val_set` (training loss when it is empty). All randomness derives
/// from cfg.seed, keyed by epoch and position, so results do not depend on
/// `jobs`. A non-finite loss stops training with kDiverged and the last
/// good parameters. With `deterministic`, seconds are logged as 0.
TrainResult train(std::span<const HeteroGraph> train_set, std::span<const HeteroGraph> val_set, Model init,
                  const TrainConfig& cfg, int jobs = 1, bool deterministic = true);

struct Metrics {
  double auc = 0;  // NaN when undefined
  double accuracy = 0;
  double macro_f1 = 0;
  double loss = 0;
  std::size_t count = 0;
};

/// Evaluation-mode metrics; binary AUC on p(class 1), one-vs-rest otherwise.
Metrics evaluate(const Model& model, std::span<const HeteroGraph> graphs);

struct CrossValidation {
  std::vector<Metrics> per_fold;
  std::vector<TrainResult> runs;
  Metrics mean;  // unweighted mean over folds (NaN-aware for AUC)
};

/// Trains a fresh model on every fold of kfold_split and scores its test part.
CrossValidation cross_validate(std::span<const HeteroGraph> data, const ModelConfig& model_cfg,
                               const TrainConfig& cfg, int jobs = 1);

/// Runs f(0..n-1) on up to `jobs` threads; f must only touch its own slot.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& f);

}  // namespace heat
