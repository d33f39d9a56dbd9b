#pragma once

// Deterministic synthetic tracking data: one bright shape (ellipse or rotated
// rectangle) on a noisy background, with the tight pixel-support box as GT.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "rtrack/geometry.hpp"

namespace rtrack {

/// Grayscale image, row-major, values in [0, 1].
struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t w, std::size_t h, double fill = 0.0) : width(w), height(h), pixels(w * h, fill) {}
  double& at(std::size_t x, std::size_t y) { return pixels[y * width + x]; }
  double at(std::size_t x, std::size_t y) const { return pixels[y * width + x]; }
  friend bool operator==(const Image&, const Image&) = default;
};

struct SceneConfig {
  std::size_t search_size = 64;
  std::size_t template_size = 32;
  double min_half = 4.0;   // shape half-axis range, px
  double max_half = 12.0;
  double margin = 2.0;     // minimum GT distance from the image border
  std::size_t sequence_length = 32;
  double max_step = 3.0;   // per-axis center random-walk step, px
};

enum class ShapeKind { Ellipse, Rectangle };

struct ShapeParams {
  ShapeKind kind = ShapeKind::Ellipse;
  double cx = 0.0, cy = 0.0;
  double half_w = 0.0, half_h = 0.0;  // along the rotated axes
  double rotation = 0.0;              // radians in [0, pi)
  double intensity = 1.0;

  /// True when the pixel with center (px, py) lies inside the shape.
  bool contains(double px, double py) const;
  /// Axis-aligned half extents of the continuous shape.
  Point extent() const;
};

struct Scene {
  Image templ;
  Image search;
  Box gt;
  std::uint64_t scene_id = 0;
  ShapeParams shape;
};

struct Frame {
  Image image;
  Box gt;
};

struct Sequence {
  Image templ;
  std::vector<Frame> frames;
  std::uint64_t seq_id = 0;
};

/// Tight box of the shape's pixel support: (min col, min row, max col + 1, max row + 1).
/// Returns a zero box when no pixel is covered.
Box support_box(const ShapeParams& shape, std::size_t width, std::size_t height);

Scene generate_scene(std::uint64_t seed, std::uint64_t scene_id, const SceneConfig& cfg);
Sequence generate_sequence(std::uint64_t seed, std::uint64_t seq_id, const SceneConfig& cfg);

void write_pgm(const std::filesystem::path& path, const Image& img);
/// Writes search/template PGMs for `count` scenes plus scenes.json with their GT boxes.
void dump_scenes(const std::filesystem::path& dir, std::uint64_t seed, std::uint64_t first_id, std::size_t count,
                 const SceneConfig& cfg);

}  // namespace rtrack
