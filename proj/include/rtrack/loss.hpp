#pragma once

#include <span>
#include <string>
#include <vector>

#include "rtrack/assigner.hpp"
#include "rtrack/tape.hpp"

namespace rtrack {

struct LossWeights {
  double lambda_cls = 2.0;
  double lambda_det = 1.0;
  double lambda_corr = 0.5;
  double lambda_init = 1.0;
  double lambda_refine = 2.0;
  double alpha = 2.0;  // focal modulating power on the prediction
  double beta = 4.0;   // focal penalty-reduction power on the target
};

/// Classification targets over the bin grid.
struct TargetMap {
  std::vector<double> targets;  // 1 exactly on Positive bins, < 1 elsewhere
  std::vector<double> mask;     // 0 on Ignore bins, 1 otherwise
};

/// Cap for non-positive Gaussian targets so only Positive bins hit 1.
inline constexpr double kMaxNegativeTarget = 1.0 - 1e-4;
/// Added to the correlation denominator.
inline constexpr double kCorrEps = 1e-9;

enum class CorrSampleMode { Pos, PosNeg };
std::string to_string(CorrSampleMode m);
CorrSampleMode parse_corr_mode(const std::string& name);

/// Positive bins get 1; the rest a Gaussian of the distance to the GT center
/// with sigma = max(diagonal / 6, stride / 2).
TargetMap build_target_map(const AssignmentResult& assignment, const Box& gt);

/// Penalty-reduced focal loss over unmasked bins, normalized by max(1, #positive).
/// `scores` is [bins] and already passed through the sigmoid.
Value focal_loss(const Value& scores, const TargetMap& targets, const LossWeights& weights);

/// Mean of 1 - GIoU(pred, gt) over `positives`; `pred_boxes` is [bins,4].
Value stage_giou_loss(const Value& pred_boxes, const Box& gt, std::span<const std::size_t> positives);

/// Concordance-style agreement between two equally long [C] vectors:
///   2 * pearson(s,b) * std(s) * std(b) / (var(s) + var(b) + (mean(s) - mean(b))^2 + eps)
/// with population statistics throughout.
Value corr_rho(const Value& s, const Value& b);

/// 1 - rho over the sample set (Positive bins, or Positive and Negative bins).
/// With `truncate` the IoU side is detached so the loss only trains the scores.
/// Returns 0 when fewer than two bins are sampled.
Value corr_loss(const Value& scores, const Value& refine_ious, const AssignmentResult& assignment,
                CorrSampleMode mode, bool truncate);

struct LossComponents {
  Value cls, init, refine, corr;
};

struct LossBundle {
  Value cls, init, refine, corr, det, total;
};

LossBundle total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace rtrack
