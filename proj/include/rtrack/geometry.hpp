#pragma once

// Axis-aligned boxes, point sets and the point-set -> pseudo-box converters.
// Every quantity exists twice: plain doubles for assigners and metrics, and
// tape Values for the losses.

#include <span>
#include <vector>

#include "rtrack/tape.hpp"

namespace rtrack {

struct Point {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Corner format (x1, y1, x2, y2) in pixels.
struct Box {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;

  double width() const { return x2 - x1; }
  double height() const { return y2 - y1; }
  double area() const { return width() * height(); }
  Point center() const { return {0.5 * (x1 + x2), 0.5 * (y1 + y2)}; }
  bool valid() const;

  friend bool operator==(const Box&, const Box&) = default;
};

using PointSet = std::vector<Point>;

/// Box half-extent scales of the moment converter.
struct MomentMultipliers {
  double lambda_x = 1.0;
  double lambda_y = 1.0;
};

enum class Converter { MinMax, Moment };

/// Population standard deviations below this are raised to it.
inline constexpr double kSigmaFloor = 1e-6;

double iou(const Box& a, const Box& b);
double giou(const Box& a, const Box& b);
double center_distance(Point bin_center, const Box& gt);
Box convert_minmax(std::span<const Point> points);
Box convert_moment(std::span<const Point> points, MomentMultipliers m);
Box clamp_box(const Box& b, const Box& bounds);

namespace ad {

/// Boxes are [K,4] Values; `b` may also be [1,4] and broadcasts. Results are [K].
Value iou(const Value& a, const Value& b);
Value giou(const Value& a, const Value& b);
/// points [B,n,2] -> boxes [B,4]
Value convert_minmax(const Value& points);
/// points [B,n,2], multipliers [2] (lambda_x, lambda_y) -> boxes [B,4]
Value convert_moment(const Value& points, const Value& multipliers);
Value convert(Converter c, const Value& points, const Value& multipliers);
Value clamp_box(const Value& boxes, const Box& bounds);

Tensor box_tensor(std::span<const Box> boxes);
std::vector<Box> boxes_from(const Tensor& t);

}  // namespace ad

}  // namespace rtrack
