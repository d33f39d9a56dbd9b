#pragma once

// Experiment configuration and its flat JSON form.
//
// Every RunConfig field maps to one top-level JSON key; unknown keys and
// wrongly typed values are rejected.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "rtrack/assigner.hpp"
#include "rtrack/loss.hpp"
#include "rtrack/model.hpp"
#include "rtrack/scenes.hpp"

namespace rtrack {

using Json = nlohmann::ordered_json;

struct RunConfig {
  std::uint64_t seed = 42;
  std::size_t epochs = 30;
  std::size_t scenes_per_epoch = 1000;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  double lr_drop_factor = 0.1;
  double lr_drop_fraction = 0.8;
  double weight_decay = 1e-4;
  double grad_clip = 10.0;  // global gradient norm cap; 0 disables
  AssignerConfig assigner{AssignStrategy::TopKIV, 16, true, Spread::Std, 0.5, 0.4};
  bool top_k_explicit = false;  // false: top_k follows the strategy default
  LossWeights loss;
  ModelConfig model;
  CorrSampleMode corr_mode = CorrSampleMode::Pos;
  bool truncate = true;
  /// When nonzero, scene ids cycle through this many scenes (overfitting runs).
  std::size_t scene_pool = 0;
  std::size_t eval_sequences = 64;
  std::size_t sequence_length = 32;
  bool record_wall_time = false;
  int threads = 0;  // 0: OpenMP default

  SceneConfig scene_config() const;
  /// Throws std::invalid_argument naming the offending key.
  void validate() const;
  /// Re-derives top_k from the strategy unless it was set explicitly.
  void resolve();
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Json to_json(const RunConfig& cfg);
/// Applies `j` on top of `base`. Throws ConfigError naming the key at fault.
RunConfig run_config_from_json(const Json& j, RunConfig base = {});
/// Parses JSON text; syntax errors report line and column.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

/// Learning rate in effect during 0-based `epoch`.
double learning_rate_at(const RunConfig& cfg, std::size_t epoch);
/// First 0-based epoch trained at the dropped rate: ceil(fraction * epochs).
std::size_t lr_drop_epoch(const RunConfig& cfg);

}  // namespace rtrack
