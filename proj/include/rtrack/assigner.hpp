#pragma once

// Label assignment over the H*W feature-bin grid.
//
// Bins are indexed row-major (index = row * cols + col); every tie is broken
// toward the lower index. Labels are computed off-tape.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtrack/geometry.hpp"

namespace rtrack {

struct GridSpec {
  std::size_t rows = 16;
  std::size_t cols = 16;
  double stride = 4.0;

  std::size_t bins() const { return rows * cols; }
  /// Pixel center of bin `index`: ((col + 0.5) * stride, (row + 0.5) * stride).
  Point bin_center(std::size_t index) const;
};

enum class BinLabel { Negative, Positive, Ignore };

struct AssignmentResult {
  GridSpec grid;
  std::vector<BinLabel> labels;
  std::vector<std::size_t> positives;  // ascending bin index
  std::optional<double> threshold_used;
};

enum class AssignStrategy { OneToOneCenter, MaxIoU, TopKCD, TopKIV };
enum class Spread { Std, Var };

struct AssignerConfig {
  AssignStrategy strategy = AssignStrategy::OneToOneCenter;
  std::size_t top_k = 12;
  bool leading = true;
  Spread spread = Spread::Std;
  double iou_pos_thr = 0.5;
  double iou_neg_thr = 0.4;
};

/// Best-performing candidate counts: 12 for center distance, 16 for IoU value.
std::size_t default_top_k(AssignStrategy s);

std::string to_string(AssignStrategy s);
AssignStrategy parse_strategy(const std::string& name);
std::string to_string(Spread s);
Spread parse_spread(const std::string& name);
std::string to_string(BinLabel l);

/// Builds a result from a positive set; every other bin is Negative.
AssignmentResult make_assignment(const GridSpec& grid, std::vector<std::size_t> positives,
                                 std::optional<double> threshold = std::nullopt);

AssignmentResult assign_one_to_one_center(const GridSpec& grid, const Box& gt);
AssignmentResult assign_max_iou(const GridSpec& grid, std::span<const Box> pred_boxes, const Box& gt,
                                const AssignerConfig& cfg);
std::vector<std::size_t> select_candidates_cd(const GridSpec& grid, const Box& gt, std::size_t k);
std::vector<std::size_t> select_candidates_iv(std::span<const Box> pred_boxes, const Box& gt, std::size_t k);

struct ThresholdFilter {
  std::vector<std::size_t> positives;  // in candidate order
  double threshold = 0.0;
};

/// threshold = mean + spread(candidate IoUs); keeps IoU >= threshold plus the
/// first arg-max candidate.
ThresholdFilter dynamic_threshold_filter(std::span<const std::size_t> candidates,
                                         std::span<const double> candidate_ious, Spread spread);

AssignmentResult assign_one_to_many(std::span<const Box> pred_boxes_for_labeling, const Box& gt,
                                    const GridSpec& grid, const AssignerConfig& cfg);

/// Refine-stage labels for any strategy. With cfg.leading the init-stage
/// boxes drive the IoU-based decisions, otherwise the refine boxes do.
AssignmentResult leading_labels(std::span<const Box> init_boxes, std::span<const Box> refine_boxes, const Box& gt,
                                const GridSpec& grid, const AssignerConfig& cfg);

}  // namespace rtrack
