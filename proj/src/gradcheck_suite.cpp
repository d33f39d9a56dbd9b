#include "rtrack/gradcheck_suite.hpp"

#include "rtrack/assigner.hpp"
#include "rtrack/geometry.hpp"
#include "rtrack/loss.hpp"
#include "rtrack/model.hpp"
#include "rtrack/rng.hpp"

namespace rtrack {

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi) {
  Tensor t(std::move(shape));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Point sets scattered around a handful of bin centers.
Tensor random_points(Rng& rng, std::size_t sets, std::size_t n) {
  Tensor t(Shape{sets, n, 2});
  for (std::size_t s = 0; s < sets; ++s) {
    const double cx = rng.uniform(12.0, 20.0), cy = rng.uniform(12.0, 20.0);
    for (std::size_t i = 0; i < n; ++i) {
      t[(s * n + i) * 2] = cx + rng.uniform(-6.0, 6.0);
      t[(s * n + i) * 2 + 1] = cy + rng.uniform(-6.0, 6.0);
    }
  }
  return t;
}

const Box kGt{9.5, 11.25, 22.75, 19.5};

GradCheckCase focal_case() {
  Rng rng = Rng::keyed(7, rng_domain::kTest, 1);
  const GridSpec grid{4, 4, 8.0};
  AssignmentResult a = make_assignment(grid, {5, 6, 9});
  a.labels[10] = BinLabel::Ignore;
  const TargetMap targets = build_target_map(a, kGt);
  const Tensor logits = random_tensor(rng, Shape{grid.bins()}, -3.0, 3.0);
  const TapeFunction f = [&](Tape&, std::span<const Value> p) {
    return focal_loss(sigmoid(p[0]), targets, LossWeights{});
  };
  return {"focal_loss", grad_check(f, std::span(&logits, 1)), kLossGradTolerance};
}

GradCheckCase giou_case(Converter conv) {
  Rng rng = Rng::keyed(7, rng_domain::kTest, conv == Converter::MinMax ? 2 : 3);
  const std::vector<Tensor> params{random_points(rng, 6, 9), random_tensor(rng, Shape{2}, -0.3, 0.3)};
  const std::vector<std::size_t> positives{0, 2, 3, 5};
  const TapeFunction f = [&](Tape&, std::span<const Value> p) {
    const Value boxes = ad::convert(conv, p[0], conv == Converter::Moment ? exp(p[1]) : Value{});
    Value loss = stage_giou_loss(boxes, kGt, positives);
    // Keeps the multiplier leaf connected for the min-max converter.
    return conv == Converter::Moment ? loss : loss + 0.25 * sum(square(p[1]));
  };
  return {"stage_giou_" + to_string(conv), grad_check(f, params), kLossGradTolerance};
}

struct CorrInputs {
  AssignmentResult assignment;
  Tensor logits;
  Tensor points;
};

CorrInputs corr_inputs() {
  Rng rng = Rng::keyed(7, rng_domain::kTest, 4);
  const GridSpec grid{4, 4, 8.0};
  return {make_assignment(grid, {1, 2, 5, 6, 9, 10}), random_tensor(rng, Shape{grid.bins()}, -2.0, 2.0),
          random_points(rng, grid.bins(), 9)};
}

Value corr_from(std::span<const Value> p, const Value& points, const AssignmentResult& a, bool truncate) {
  Tape& tape = p[0].tape();
  const Value gt = tape.constant(ad::box_tensor(std::span(&kGt, 1)));
  return corr_loss(sigmoid(p[0]), ad::iou(ad::convert_minmax(points), gt), a, CorrSampleMode::Pos, truncate);
}

// The IoU side is a constant here; with truncation it receives no gradient.
GradCheckCase corr_truncated_case() {
  const CorrInputs in = corr_inputs();
  const TapeFunction f = [&](Tape& tape, std::span<const Value> p) {
    return corr_from(p, tape.constant(in.points), in.assignment, true);
  };
  return {"corr_loss_truncated_scores", grad_check(f, std::span(&in.logits, 1)), kLossGradTolerance};
}

GradCheckCase corr_full_case() {
  const CorrInputs in = corr_inputs();
  const std::vector<Tensor> params{in.logits, in.points};
  const TapeFunction f = [&](Tape&, std::span<const Value> p) { return corr_from(p, p[1], in.assignment, false); };
  return {"corr_loss_untruncated", grad_check(f, params), kLossGradTolerance};
}

Image test_image(std::size_t size, std::uint64_t id) {
  Rng rng = Rng::keyed(11, rng_domain::kTest, id);
  Image img(size, size);
  for (double& v : img.pixels) v = rng.uniform();
  return img;
}

GradCheckCase end_to_end_case(Converter conv) {
  ModelConfig cfg;
  cfg.search_size = 16;
  cfg.template_size = 8;
  cfg.stride = 4;
  cfg.feature_dim = 6;
  cfg.hidden_dim = 10;
  cfg.n_points = 9;
  cfg.converter = conv;
  Parameters params = init_parameters(cfg, 5);
  // Move the offsets away from the near-zero init so the point sets are spread out.
  for (const char* name : {"init.out.w", "refine.out.w"}) {
    for (double& v : params.at(name).data()) v *= 30.0;
  }
  params.at("moment.log_lambda") = Tensor::vector({0.1, -0.05});

  const Image templ = test_image(cfg.template_size, 20), search = test_image(cfg.search_size, 21);
  const Box gt{3.5, 4.25, 11.75, 12.5};
  const GridSpec grid = cfg.grid_spec();
  AssignerConfig acfg{AssignStrategy::TopKIV, 6, true, Spread::Std, 0.5, 0.4};

  std::vector<std::string> names;
  std::vector<Tensor> tensors;
  for (const auto& [n, t] : params.entries()) {
    names.push_back(n);
    tensors.push_back(t);
  }

  // Labels are fixed at the unperturbed parameters so the loss stays smooth.
  // The truncated correlation treats refine IoUs as constants; freezing them
  // at the same point gives the finite differences identical semantics.
  AssignmentResult init_assign = assign_one_to_one_center(grid, gt), refine_assign;
  Tensor frozen_ious;
  {
    Tape tape;
    const HeadOutput out = forward(templ, search, BoundParameters(tape, params, false), cfg);
    refine_assign = leading_labels(ad::boxes_from(out.init_boxes.tensor()), ad::boxes_from(out.refine_boxes.tensor()),
                                   gt, grid, acfg);
    frozen_ious = ad::iou(out.refine_boxes, tape.constant(ad::box_tensor(std::span(&gt, 1)))).tensor();
  }
  const TargetMap targets = build_target_map(refine_assign, gt);

  const TapeFunction f = [&](Tape& tape, std::span<const Value> p) {
    const BoundParameters bound(names, std::vector<Value>(p.begin(), p.end()));
    const HeadOutput out = forward(templ, search, bound, cfg);
    LossComponents c;
    c.cls = focal_loss(out.scores, targets, LossWeights{});
    c.init = stage_giou_loss(out.init_boxes, gt, init_assign.positives);
    c.refine = stage_giou_loss(out.refine_boxes, gt, refine_assign.positives);
    c.corr = corr_loss(out.scores, tape.constant(frozen_ious), refine_assign, CorrSampleMode::PosNeg, true);
    Value total = total_loss(c, LossWeights{}).total;
    if (conv == Converter::MinMax) total = total + 0.25 * sum(square(bound["moment.log_lambda"]));
    return total;
  };
  return {"end_to_end_4x4_" + to_string(conv), grad_check(f, tensors), kModelGradTolerance};
}

}  // namespace

std::vector<GradCheckCase> run_gradcheck_suite() {
  return {focal_case(),          giou_case(Converter::MinMax),       giou_case(Converter::Moment),
          corr_truncated_case(), corr_full_case(),                   end_to_end_case(Converter::MinMax),
          end_to_end_case(Converter::Moment)};
}

}  // namespace rtrack
