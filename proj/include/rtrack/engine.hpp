#pragma once

// Training loop: forward, label assignment, losses, AdamW.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtrack/config.hpp"
#include "rtrack/metrics.hpp"
#include "rtrack/model.hpp"
#include "rtrack/scenes.hpp"

namespace rtrack {

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEps = 1e-8;

struct OptimizerState {
  std::vector<Tensor> m, v;  // aligned with Parameters::entries()
  std::uint64_t step = 0;
};

OptimizerState init_optimizer(const Parameters& params);

/// One decoupled-weight-decay Adam update:
///   w <- w * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
void adamw_step(Parameters& params, std::span<const Tensor> grads, OptimizerState& state, double lr,
                double weight_decay);

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`
/// (0 disables). Returns the norm before clipping.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

struct SceneStats {
  double cls = 0, init = 0, refine = 0, corr = 0, total = 0;
  double train_iou = 0;  // refine box at the arg-max bin against GT
  double positives = 0;  // refine-stage positives
};

struct SceneGradients {
  SceneStats stats;
  std::vector<Tensor> grads;  // d total / d parameter, registration order
};

/// Loss and gradients for one scene. Throws std::runtime_error naming the
/// scene id when the loss is not finite.
SceneGradients scene_gradients(const Scene& scene, const Parameters& params, const RunConfig& cfg);

/// Batch-mean loss, gradient clipping, one AdamW step. Returns batch means.
SceneStats train_step(std::span<const Scene> batch, Parameters& params, OptimizerState& state, const RunConfig& cfg,
                      double lr);

struct MetricsRecord {
  std::size_t epoch = 0;  // 0-based
  double mean_train_iou = 0;
  double loss_cls = 0, loss_init = 0, loss_refine = 0, loss_corr = 0, loss_total = 0;
  double positives_per_scene = 0;
  double wall_time_s = 0;  // 0 unless record_wall_time is set
};

struct ExperimentResult {
  Parameters params;
  std::vector<MetricsRecord> records;
};

using EpochCallback = std::function<void(const MetricsRecord&)>;

/// Scene id for position `index` of `epoch`: epoch * scenes_per_epoch + index,
/// reduced modulo scene_pool when that is set.
std::uint64_t scene_id_for(const RunConfig& cfg, std::size_t epoch, std::size_t index);

/// Trains from fresh parameters. With `out_dir`, writes config.json,
/// metrics.csv, summary.json and checkpoint.json there.
ExperimentResult run_experiment(const RunConfig& cfg, const std::optional<std::filesystem::path>& out_dir = {},
                                const EpochCallback& on_epoch = {});

std::string metrics_csv(std::span<const MetricsRecord> records);
/// Number of epochs trained when mean_train_iou first reaches `iou`.
std::optional<std::size_t> epochs_to_reach(std::span<const MetricsRecord> records, double iou);

struct AblationVariant {
  std::string name;
  RunConfig cfg;
};

/// Known names: one2one, maxiou, cd, iv, each optionally suffixed "_lead".
AblationVariant make_variant(const RunConfig& base, const std::string& name);

struct AblationRow {
  std::string name;
  double final_train_iou = 0;
  double ao = 0;
  std::optional<std::size_t> epochs_to_iou_05;
};

/// Runs every variant (concurrently when threads allow), each writing into
/// out_dir/<name> exactly what a lone run would, then evaluates it.
std::vector<AblationRow> run_ablation(std::span<const AblationVariant> variants,
                                      const std::optional<std::filesystem::path>& out_dir = {});
std::string ablation_csv(std::span<const AblationRow> rows);

}  // namespace rtrack
