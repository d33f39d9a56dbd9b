#include "rtrack/assigner.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rtrack {

Point GridSpec::bin_center(std::size_t index) const {
  const std::size_t row = index / cols;
  const std::size_t col = index % cols;
  return {(static_cast<double>(col) + 0.5) * stride, (static_cast<double>(row) + 0.5) * stride};
}

std::size_t default_top_k(AssignStrategy s) { return s == AssignStrategy::TopKIV ? 16 : 12; }

std::string to_string(AssignStrategy s) {
  switch (s) {
    case AssignStrategy::OneToOneCenter: return "one2one";
    case AssignStrategy::MaxIoU: return "maxiou";
    case AssignStrategy::TopKCD: return "cd";
    case AssignStrategy::TopKIV: return "iv";
  }
  return "?";
}

AssignStrategy parse_strategy(const std::string& name) {
  if (name == "one2one") return AssignStrategy::OneToOneCenter;
  if (name == "maxiou") return AssignStrategy::MaxIoU;
  if (name == "cd") return AssignStrategy::TopKCD;
  if (name == "iv") return AssignStrategy::TopKIV;
  throw std::invalid_argument("unknown assigner '" + name + "' (expected one2one, maxiou, cd, iv)");
}

std::string to_string(Spread s) { return s == Spread::Std ? "std" : "var"; }

Spread parse_spread(const std::string& name) {
  if (name == "std") return Spread::Std;
  if (name == "var") return Spread::Var;
  throw std::invalid_argument("unknown spread '" + name + "' (expected std, var)");
}

std::string to_string(BinLabel l) {
  switch (l) {
    case BinLabel::Negative: return "neg";
    case BinLabel::Positive: return "pos";
    case BinLabel::Ignore: return "ignore";
  }
  return "?";
}

AssignmentResult make_assignment(const GridSpec& grid, std::vector<std::size_t> positives,
                                 std::optional<double> threshold) {
  AssignmentResult r{grid, std::vector<BinLabel>(grid.bins(), BinLabel::Negative), std::move(positives), threshold};
  std::sort(r.positives.begin(), r.positives.end());
  for (std::size_t b : r.positives) r.labels.at(b) = BinLabel::Positive;
  return r;
}

AssignmentResult assign_one_to_one_center(const GridSpec& grid, const Box& gt) {
  const Point c = gt.center();
  const double w = static_cast<double>(grid.cols) * grid.stride;
  const double h = static_cast<double>(grid.rows) * grid.stride;
  if (!(c.x >= 0.0 && c.x <= w && c.y >= 0.0 && c.y <= h)) {
    throw std::out_of_range("assign_one_to_one_center: GT center outside the grid extent");
  }
  return make_assignment(grid, select_candidates_cd(grid, gt, 1));
}

AssignmentResult assign_max_iou(const GridSpec& grid, std::span<const Box> pred_boxes, const Box& gt,
                                const AssignerConfig& cfg) {
  if (pred_boxes.size() != grid.bins()) throw std::invalid_argument("assign_max_iou: one box per bin required");
  AssignmentResult r{grid, std::vector<BinLabel>(grid.bins(), BinLabel::Negative), {}, std::nullopt};
  std::size_t best = 0;
  double best_iou = -1.0;
  for (std::size_t b = 0; b < pred_boxes.size(); ++b) {
    const double v = iou(pred_boxes[b], gt);
    if (v > best_iou) {
      best_iou = v;
      best = b;
    }
    if (v > cfg.iou_pos_thr) {
      r.labels[b] = BinLabel::Positive;
      r.positives.push_back(b);
    } else if (v >= cfg.iou_neg_thr) {
      r.labels[b] = BinLabel::Ignore;
    }
  }
  if (r.positives.empty()) {
    r.labels[best] = BinLabel::Positive;
    r.positives.push_back(best);
  }
  return r;
}

std::vector<std::size_t> select_candidates_cd(const GridSpec& grid, const Box& gt, std::size_t k) {
  if (k == 0 || k > grid.bins()) {
    throw std::invalid_argument("select_candidates_cd: k=" + std::to_string(k) + " for " +
                                std::to_string(grid.bins()) + " bins");
  }
  std::vector<double> dist(grid.bins());
  for (std::size_t b = 0; b < dist.size(); ++b) dist[b] = center_distance(grid.bin_center(b), gt);
  std::vector<std::size_t> order(grid.bins());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  order.resize(k);
  return order;
}

std::vector<std::size_t> select_candidates_iv(std::span<const Box> pred_boxes, const Box& gt, std::size_t k) {
  if (k == 0 || k > pred_boxes.size()) {
    throw std::invalid_argument("select_candidates_iv: k=" + std::to_string(k) + " for " +
                                std::to_string(pred_boxes.size()) + " bins");
  }
  std::vector<double> ious(pred_boxes.size());
  for (std::size_t b = 0; b < ious.size(); ++b) ious[b] = iou(pred_boxes[b], gt);
  std::vector<std::size_t> order(pred_boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return ious[a] > ious[b] || (ious[a] == ious[b] && a < b); });
  order.resize(k);
  return order;
}

ThresholdFilter dynamic_threshold_filter(std::span<const std::size_t> candidates,
                                         std::span<const double> candidate_ious, Spread spread) {
  if (candidates.empty() || candidates.size() != candidate_ious.size()) {
    throw std::invalid_argument("dynamic_threshold_filter: need one IoU per candidate");
  }
  const double n = static_cast<double>(candidate_ious.size());
  double mean = 0.0;
  for (double v : candidate_ious) mean += v;
  mean /= n;
  // One correction pass: equal IoUs give exactly that mean and zero spread.
  double resid = 0.0;
  for (double v : candidate_ious) resid += v - mean;
  mean += resid / n;
  double var = 0.0;
  for (double v : candidate_ious) var += (v - mean) * (v - mean);
  var /= n;
  ThresholdFilter out;
  out.threshold = mean + (spread == Spread::Std ? std::sqrt(var) : var);
  const std::size_t best = static_cast<std::size_t>(
      std::max_element(candidate_ious.begin(), candidate_ious.end()) - candidate_ious.begin());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidate_ious[i] >= out.threshold || i == best) out.positives.push_back(candidates[i]);
  }
  return out;
}

AssignmentResult assign_one_to_many(std::span<const Box> pred_boxes_for_labeling, const Box& gt,
                                    const GridSpec& grid, const AssignerConfig& cfg) {
  if (pred_boxes_for_labeling.size() != grid.bins()) {
    throw std::invalid_argument("assign_one_to_many: one box per bin required");
  }
  std::vector<std::size_t> candidates;
  switch (cfg.strategy) {
    case AssignStrategy::TopKCD: candidates = select_candidates_cd(grid, gt, cfg.top_k); break;
    case AssignStrategy::TopKIV: candidates = select_candidates_iv(pred_boxes_for_labeling, gt, cfg.top_k); break;
    default: throw std::invalid_argument("assign_one_to_many: strategy must be cd or iv");
  }
  std::vector<double> ious(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) ious[i] = iou(pred_boxes_for_labeling[candidates[i]], gt);
  ThresholdFilter f = dynamic_threshold_filter(candidates, ious, cfg.spread);
  return make_assignment(grid, std::move(f.positives), f.threshold);
}

AssignmentResult leading_labels(std::span<const Box> init_boxes, std::span<const Box> refine_boxes, const Box& gt,
                                const GridSpec& grid, const AssignerConfig& cfg) {
  const std::span<const Box> labeling = cfg.leading ? init_boxes : refine_boxes;
  switch (cfg.strategy) {
    case AssignStrategy::OneToOneCenter: return assign_one_to_one_center(grid, gt);
    case AssignStrategy::MaxIoU: return assign_max_iou(grid, labeling, gt, cfg);
    case AssignStrategy::TopKCD:
    case AssignStrategy::TopKIV: return assign_one_to_many(labeling, gt, grid, cfg);
  }
  throw std::logic_error("leading_labels: unhandled strategy");
}

}  // namespace rtrack
