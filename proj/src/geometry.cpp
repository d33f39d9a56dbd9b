#include "rtrack/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rtrack {

bool Box::valid() const {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) && x1 <= x2 && y1 <= y2;
}

double iou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const Box& a, const Box& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  const double hull = (std::max(a.x2, b.x2) - std::min(a.x1, b.x1)) * (std::max(a.y2, b.y2) - std::min(a.y1, b.y1));
  const double base = uni > 0.0 ? inter / uni : 0.0;
  // The hull always covers the union; clamp so rounding cannot push giou above iou.
  return hull > 0.0 ? base - std::max(0.0, hull - uni) / hull : base;
}

double center_distance(Point bin_center, const Box& gt) {
  const Point c = gt.center();
  return std::hypot(bin_center.x - c.x, bin_center.y - c.y);
}

Box convert_minmax(std::span<const Point> points) {
  if (points.size() < 2) throw std::invalid_argument("convert_minmax: need at least 2 points");
  Box b{points[0].x, points[0].y, points[0].x, points[0].y};
  for (const Point& p : points.subspan(1)) {
    b.x1 = std::min(b.x1, p.x);
    b.y1 = std::min(b.y1, p.y);
    b.x2 = std::max(b.x2, p.x);
    b.y2 = std::max(b.y2, p.y);
  }
  return b;
}

Box convert_moment(std::span<const Point> points, MomentMultipliers m) {
  if (points.size() < 2) throw std::invalid_argument("convert_moment: need at least 2 points");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const Point& p : points) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0;
  for (const Point& p : points) {
    vx += (p.x - mx) * (p.x - mx);
    vy += (p.y - my) * (p.y - my);
  }
  const double sx = std::max(std::sqrt(vx / n), kSigmaFloor);
  const double sy = std::max(std::sqrt(vy / n), kSigmaFloor);
  return {mx - m.lambda_x * sx, my - m.lambda_y * sy, mx + m.lambda_x * sx, my + m.lambda_y * sy};
}

Box clamp_box(const Box& b, const Box& bounds) {
  return {std::clamp(b.x1, bounds.x1, bounds.x2), std::clamp(b.y1, bounds.y1, bounds.y2),
          std::clamp(b.x2, bounds.x1, bounds.x2), std::clamp(b.y2, bounds.y1, bounds.y2)};
}

namespace ad {

namespace {

struct Sides {
  Value x1, y1, x2, y2;
};

Sides sides(const Value& boxes) {
  const Shape& s = boxes.shape();
  if (s.size() != 2 || s[1] != 4) throw std::invalid_argument("box Value must be [K,4], got " + shape_str(s));
  return {slice(boxes, 1, 0, 1), slice(boxes, 1, 1, 2), slice(boxes, 1, 2, 3), slice(boxes, 1, 3, 4)};
}

struct Overlap {
  Value inter, uni;
};

Overlap overlap(const Sides& a, const Sides& b) {
  const Value iw = relu(minimum(a.x2, b.x2) - maximum(a.x1, b.x1));
  const Value ih = relu(minimum(a.y2, b.y2) - maximum(a.y1, b.y1));
  const Value inter = iw * ih;
  const Value area_a = (a.x2 - a.x1) * (a.y2 - a.y1);
  const Value area_b = (b.x2 - b.x1) * (b.y2 - b.y1);
  return {inter, area_a + area_b - inter};
}

Value flatten(const Value& col) { return reshape(col, Shape{col.shape()[0]}); }

}  // namespace

Value iou(const Value& a, const Value& b) {
  const Overlap o = overlap(sides(a), sides(b));
  return flatten(o.inter / o.uni);
}

Value giou(const Value& a, const Value& b) {
  const Sides sa = sides(a), sb = sides(b);
  const Overlap o = overlap(sa, sb);
  const Value hull = (maximum(sa.x2, sb.x2) - minimum(sa.x1, sb.x1)) * (maximum(sa.y2, sb.y2) - minimum(sa.y1, sb.y1));
  return flatten(o.inter / o.uni - (hull - o.uni) / hull);
}

Value convert_minmax(const Value& points) {
  const Value parts[] = {reduce(ReduceOp::Min, points, 1), reduce(ReduceOp::Max, points, 1)};
  return concat(parts, 1);
}

Value convert_moment(const Value& points, const Value& multipliers) {
  const Shape& s = points.shape();
  const Value mu = mean(points, 1);
  const Value dev = points - reshape(mu, Shape{s[0], 1, 2});
  const Value sigma = maximum(sqrt(mean(square(dev), 1)), points.tape().constant(kSigmaFloor));
  const Value half = sigma * multipliers;
  const Value parts[] = {mu - half, mu + half};
  return concat(parts, 1);
}

Value convert(Converter c, const Value& points, const Value& multipliers) {
  return c == Converter::MinMax ? convert_minmax(points) : convert_moment(points, multipliers);
}

Value clamp_box(const Value& boxes, const Box& bounds) {
  Tape& tape = boxes.tape();
  const Value lo = tape.constant(Tensor::vector({bounds.x1, bounds.y1, bounds.x1, bounds.y1}));
  const Value hi = tape.constant(Tensor::vector({bounds.x2, bounds.y2, bounds.x2, bounds.y2}));
  return maximum(minimum(boxes, hi), lo);
}

Tensor box_tensor(std::span<const Box> boxes) {
  Tensor t(Shape{boxes.size(), 4});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    t[4 * i] = boxes[i].x1;
    t[4 * i + 1] = boxes[i].y1;
    t[4 * i + 2] = boxes[i].x2;
    t[4 * i + 3] = boxes[i].y2;
  }
  return t;
}

std::vector<Box> boxes_from(const Tensor& t) {
  if (t.rank() != 2 || t.dim(1) != 4) throw std::invalid_argument("boxes_from: expected [K,4], got " + shape_str(t.shape()));
  std::vector<Box> out(t.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {t[4 * i], t[4 * i + 1], t[4 * i + 2], t[4 * i + 3]};
  return out;
}

}  // namespace ad

}  // namespace rtrack
