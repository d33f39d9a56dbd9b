#include "rtrack/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtrack/geometry.hpp"

namespace rtrack {

std::string to_string(CorrSampleMode m) { return m == CorrSampleMode::Pos ? "pos" : "pos_neg"; }

CorrSampleMode parse_corr_mode(const std::string& name) {
  if (name == "pos") return CorrSampleMode::Pos;
  if (name == "pos_neg") return CorrSampleMode::PosNeg;
  throw std::invalid_argument("unknown correlation sample mode '" + name + "' (expected pos, pos_neg)");
}

TargetMap build_target_map(const AssignmentResult& assignment, const Box& gt) {
  const GridSpec& grid = assignment.grid;
  const Point c = gt.center();
  const double sigma = std::max(std::hypot(gt.width(), gt.height()) / 6.0, grid.stride / 2.0);
  TargetMap t{std::vector<double>(grid.bins()), std::vector<double>(grid.bins(), 1.0)};
  for (std::size_t b = 0; b < grid.bins(); ++b) {
    switch (assignment.labels[b]) {
      case BinLabel::Positive: t.targets[b] = 1.0; break;
      case BinLabel::Ignore: t.mask[b] = 0.0; [[fallthrough]];
      case BinLabel::Negative: {
        const Point p = grid.bin_center(b);
        const double d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
        t.targets[b] = std::min(std::exp(-d2 / (2.0 * sigma * sigma)), kMaxNegativeTarget);
        break;
      }
    }
  }
  return t;
}

Value focal_loss(const Value& scores, const TargetMap& targets, const LossWeights& weights) {
  const std::size_t n = targets.targets.size();
  if (scores.tensor().numel() != n || targets.mask.size() != n) {
    throw std::invalid_argument("focal_loss: scores " + shape_str(scores.shape()) + " vs " + std::to_string(n) +
                                " targets");
  }
  Tensor pos_w(Shape{n}), neg_w(Shape{n});
  double positives = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (targets.targets[i] == 1.0) {
      pos_w[i] = targets.mask[i];
      positives += targets.mask[i];
    } else {
      neg_w[i] = targets.mask[i] * std::pow(1.0 - targets.targets[i], weights.beta);
    }
  }
  Tape& tape = scores.tape();
  const Value p = reshape(scores, Shape{n});
  const Value pos_term = tape.constant(pos_w) * pow(1.0 - p, weights.alpha) * log(p);
  const Value neg_term = tape.constant(neg_w) * pow(p, weights.alpha) * log(1.0 - p);
  return -sum(pos_term + neg_term) / std::max(1.0, positives);
}

Value stage_giou_loss(const Value& pred_boxes, const Box& gt, std::span<const std::size_t> positives) {
  if (positives.empty()) throw std::invalid_argument("stage_giou_loss: empty positive set");
  const Box gts[] = {gt};
  const Value target = pred_boxes.tape().constant(ad::box_tensor(gts));
  return mean(1.0 - ad::giou(gather(pred_boxes, positives), target));
}

Value corr_rho(const Value& s, const Value& b) {
  if (s.tensor().numel() < 2 || s.shape() != b.shape()) {
    throw std::invalid_argument("corr_rho: need two equal [C] vectors with C >= 2");
  }
  const Value s_mean = mean(s);
  const Value b_mean = mean(b);
  const Value vs = s - s_mean;
  const Value vb = b - b_mean;
  const Value pearson = sum(vs * vb) / (sqrt(sum(square(vs))) * sqrt(sum(square(vb))));
  const Value var_s = mean(square(vs));
  const Value var_b = mean(square(vb));
  const Value numerator = 2.0 * pearson * sqrt(var_s) * sqrt(var_b);
  return numerator / (var_s + var_b + square(s_mean - b_mean) + kCorrEps);
}

Value corr_loss(const Value& scores, const Value& refine_ious, const AssignmentResult& assignment,
                CorrSampleMode mode, bool truncate) {
  std::vector<std::size_t> sample;
  for (std::size_t b = 0; b < assignment.labels.size(); ++b) {
    const BinLabel l = assignment.labels[b];
    if (l == BinLabel::Positive || (mode == CorrSampleMode::PosNeg && l == BinLabel::Negative)) sample.push_back(b);
  }
  if (sample.size() < 2) return scores.tape().constant(0.0);
  const Value ious = truncate ? detach(refine_ious) : refine_ious;
  return 1.0 - corr_rho(gather(scores, sample), gather(ious, sample));
}

LossBundle total_loss(const LossComponents& c, const LossWeights& w) {
  const Value det = w.lambda_init * c.init + w.lambda_refine * c.refine;
  const Value total = w.lambda_cls * c.cls + w.lambda_det * det + w.lambda_corr * c.corr;
  return {c.cls, c.init, c.refine, c.corr, det, total};
}

}  // namespace rtrack
