#pragma once

// Run configuration, provenance and on-disk artifacts of a training run.
//
// Checkpoint file:
//   {"version": 1, "provenance": {...}, "model": {ModelConfig}, "epoch": int,
//    "val_loss": float, "params": {"<name>": {"rows", "cols", "data": [...]}}}
// Parameter data is row-major. Doubles round-trip exactly.

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "heat/graph_builder.hpp"
#include "heat/model.hpp"
#include "heat/synth.hpp"
#include "heat/train.hpp"

namespace heat {

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kToolName = "heatwsi";

struct RunConfig {
  std::string command;
  std::map<std::string, std::string> paths;
  std::uint64_t seed = 0;
  bool deterministic = false;
  BuildConfig build;
  TrainConfig train;
  ModelConfig model;
  SyntheticSpec synth;
  int synth_graphs = 200;

  /// Copies the run seed into every component and the training dropout into
  /// the model, then validates all parts.
  RunConfig resolved() const;
};

nlohmann::ordered_json to_json(const AugmentConfig& c);
nlohmann::ordered_json to_json(const BuildConfig& c);
nlohmann::ordered_json to_json(const TrainConfig& c);
nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const SyntheticSpec& c);
nlohmann::ordered_json to_json(const RunConfig& c);

/// Overlay `j` onto `base`. Unknown keys and mistyped values throw ConfigError.
AugmentConfig augment_config_from_json(const nlohmann::json& j, AugmentConfig base = {});
BuildConfig build_config_from_json(const nlohmann::json& j, BuildConfig base = {});
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
SyntheticSpec synth_spec_from_json(const nlohmann::json& j, SyntheticSpec base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});

RunConfig load_run_config(const std::filesystem::path& path);

/// {"tool", "format_version", "seed", "config"}; embedded in every artifact.
nlohmann::ordered_json provenance(const RunConfig& cfg);

struct Checkpoint {
  Model model;
  int epoch = 0;
  double val_loss = 0;
  nlohmann::ordered_json provenance;
};

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(const std::string& text);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// CSV with header epoch,train_loss,val_loss,val_auc,lr,seconds, preceded by
/// a "# provenance: {...}" line when provenance is given.
std::string format_train_log(std::span<const EpochLog> log, const nlohmann::ordered_json& provenance = nullptr);
std::vector<EpochLog> parse_train_log(const std::string& text);

/// {"auc", "accuracy", "macro_f1", "loss", "count", "per_fold": [...], "provenance"}.
nlohmann::ordered_json metrics_to_json(const Metrics& mean, std::span<const Metrics> per_fold,
                                       const nlohmann::ordered_json& provenance = nullptr);

/// Shortest decimal that parses back to exactly `v` ("nan", "inf" otherwise).
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace heat
