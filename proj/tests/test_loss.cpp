#include <doctest.h>

#include <cmath>

#include "rtrack/geometry.hpp"
#include "rtrack/loss.hpp"

using namespace rtrack;
using doctest::Approx;

TEST_CASE("Gaussian target map") {
  const GridSpec grid{4, 4, 4.0};
  const Box gt{4, 4, 12, 12};  // centered between bins 5, 6, 9, 10
  AssignmentResult a = make_assignment(grid, {5});
  a.labels[6] = BinLabel::Ignore;
  const TargetMap t = build_target_map(a, gt);
  CHECK(t.targets[5] == 1.0);
  CHECK(t.mask[6] == 0.0);
  CHECK(t.mask[0] == 1.0);
  CHECK(t.targets[10] < 1.0);
  CHECK(t.targets[0] < t.targets[10]);
  const double sigma = std::max(std::hypot(8.0, 8.0) / 6.0, 2.0);
  CHECK(t.targets[10] == Approx(std::exp(-8.0 / (2.0 * sigma * sigma))));

  // A Negative bin exactly at the GT center is capped below 1.
  const GridSpec g1{3, 3, 4.0};
  const TargetMap capped = build_target_map(make_assignment(g1, {0}), Box{4, 4, 8, 8});
  CHECK(capped.targets[4] == kMaxNegativeTarget);
}

TEST_CASE("focal loss hand value and invariances") {
  const GridSpec grid{1, 1, 4.0};
  Tape t;
  const TargetMap single = build_target_map(make_assignment(grid, {0}), Box{0, 0, 4, 4});
  const Value loss = focal_loss(t.constant(Tensor::vector({0.5})), single, LossWeights{});
  CHECK(loss.item() == Approx(0.25 * std::log(2.0)).epsilon(1e-12));
  CHECK(loss.item() == Approx(0.173287).epsilon(1e-6));

  const GridSpec g3{1, 3, 4.0};
  AssignmentResult a = make_assignment(g3, {0});
  const TargetMap base = build_target_map(a, Box{0, 0, 4, 4});
  a.labels[2] = BinLabel::Ignore;
  const TargetMap masked = build_target_map(a, Box{0, 0, 4, 4});
  const Value l1 = focal_loss(t.constant(Tensor::vector({0.7, 0.2, 0.3})), masked, LossWeights{});
  const Value l2 = focal_loss(t.constant(Tensor::vector({0.7, 0.2, 0.9})), masked, LossWeights{});
  CHECK(l1.item() == l2.item());
  CHECK(focal_loss(t.constant(Tensor::vector({0.7, 0.2, 0.9})), base, LossWeights{}).item() > l2.item());

  const double good = focal_loss(t.constant(Tensor::vector({1.0 - 1e-9})), single, LossWeights{}).item();
  CHECK(good < 1e-12);
}

TEST_CASE("stage GIoU loss") {
  Tape t;
  const Box gt{2, 2, 3, 3};
  const std::size_t pos[] = {0};
  const Value pred = t.constant(ad::box_tensor(std::vector<Box>{{0, 0, 1, 1}, {5, 5, 6, 6}}));
  CHECK(stage_giou_loss(pred, gt, pos).item() == Approx(16.0 / 9.0).epsilon(1e-12));
  const Value exact = t.constant(ad::box_tensor(std::vector<Box>{gt, gt}));
  const std::size_t both[] = {0, 1};
  CHECK(stage_giou_loss(exact, gt, both).item() == 0.0);
  CHECK_THROWS(stage_giou_loss(exact, gt, std::span<const std::size_t>{}));
}

TEST_CASE("correlation coefficient") {
  Tape t;
  auto rho = [&](std::initializer_list<double> s, std::initializer_list<double> b) {
    return corr_rho(t.constant(Tensor::vector(s)), t.constant(Tensor::vector(b))).item();
  };
  CHECK(rho({0.2, 0.8}, {0.3, 0.7}) == Approx(0.12 / 0.13).epsilon(1e-6));
  CHECK(rho({0.2, 0.8}, {0.7, 0.3}) == Approx(-0.12 / 0.13).epsilon(1e-6));
  CHECK(rho({0.1, 0.4, 0.35, 0.9}, {0.1, 0.4, 0.35, 0.9}) >= 1.0 - 1e-6);
}

TEST_CASE("correlation loss sampling and truncation") {
  const GridSpec grid{1, 4, 4.0};
  AssignmentResult a = make_assignment(grid, {0, 1});
  a.labels[3] = BinLabel::Ignore;
  Tape t;
  const Value s = t.leaf(Tensor::vector({0.2, 0.8, 0.5, 0.9}));
  const Value b = t.leaf(Tensor::vector({0.3, 0.7, 0.1, 0.2}));
  const Value l = corr_loss(s, b, a, CorrSampleMode::Pos, true);
  CHECK(l.item() == Approx(1.0 - 0.12 / 0.13).epsilon(1e-6));
  const GradientStore g = t.backward(l);
  const Tensor gb = g.get_or_zero(b);
  for (double v : gb.data()) CHECK(v == 0.0);
  CHECK(g.at(s)[0] != 0.0);
  CHECK(g.at(s)[2] == 0.0);

  const Value full = corr_loss(s, b, a, CorrSampleMode::Pos, false);
  const GradientStore gf = t.backward(full);
  CHECK(gf.at(b)[0] != 0.0);

  // pos_neg adds bin 2 but never the Ignore bin 3.
  const Value pn = corr_loss(s, b, a, CorrSampleMode::PosNeg, true);
  const Value manual = 1.0 - corr_rho(t.constant(Tensor::vector({0.2, 0.8, 0.5})), t.constant(Tensor::vector({0.3, 0.7, 0.1})));
  CHECK(pn.item() == Approx(manual.item()).epsilon(1e-12));

  const AssignmentResult one = make_assignment(grid, {2});
  CHECK(corr_loss(s, b, one, CorrSampleMode::Pos, true).item() == 0.0);
  const Value same = t.constant(Tensor::vector({0.2, 0.8, 0.5, 0.9}));
  CHECK(corr_loss(s, same, a, CorrSampleMode::Pos, true).item() == Approx(0.0).epsilon(1e-6));
}

TEST_CASE("total loss weighting") {
  Tape t;
  const LossWeights w;
  LossComponents c{t.constant(1.0), t.constant(1.0), t.constant(1.0), t.constant(0.0)};
  CHECK(total_loss(c, w).total.item() == 5.0);
  c.corr = t.constant(0.4);
  CHECK(total_loss(c, w).total.item() == Approx(5.2));
  LossWeights no_corr = w;
  no_corr.lambda_corr = 0.0;
  CHECK(total_loss(c, no_corr).total.item() == 5.0);
  const LossComponents zero{t.constant(0.0), t.constant(0.0), t.constant(0.0), t.constant(0.0)};
  CHECK(total_loss(zero, w).total.item() == 0.0);
}
