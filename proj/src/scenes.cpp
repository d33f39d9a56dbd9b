#include "rtrack/scenes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "rtrack/rng.hpp"

namespace rtrack {

namespace {

constexpr double kBackgroundMax = 0.3;
constexpr double kPixelNoise = 0.05;
constexpr double kMinGtArea = 36.0;
constexpr int kMaxDraws = 16;
// Consecutive GT centers never move further than this (2 * stride at stride 4).
constexpr double kMaxCenterJump = 8.0;

Image render(const ShapeParams& shape, std::size_t size, Rng& rng) {
  Image img(size, size);
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double bg = rng.uniform(0.0, kBackgroundMax);
      const double base = shape.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5) ? shape.intensity : bg;
      img.at(x, y) = std::clamp(base + kPixelNoise * rng.normal(), 0.0, 1.0);
    }
  }
  return img;
}

bool gt_ok(const Box& gt, const SceneConfig& cfg) {
  const double s = static_cast<double>(cfg.search_size);
  return gt.x1 >= cfg.margin && gt.y1 >= cfg.margin && gt.x2 <= s - cfg.margin && gt.y2 <= s - cfg.margin &&
         gt.area() >= kMinGtArea;
}

struct Range {
  double lo, hi;
  bool empty() const { return lo > hi; }
};

// Admissible centers keep the continuous shape one pixel inside the margin.
Range center_range(double extent, const SceneConfig& cfg) {
  const double pad = cfg.margin + extent + 1.0;
  return {pad, static_cast<double>(cfg.search_size) - pad};
}

double reflect(double v, double lo, double hi) {
  if (v < lo) v = 2.0 * lo - v;
  if (v > hi) v = 2.0 * hi - v;
  return std::clamp(v, lo, hi);
}

ShapeParams fallback_shape(const SceneConfig& cfg) {
  const double c = static_cast<double>(cfg.search_size) / 2.0;
  return {ShapeKind::Ellipse, c, c, 6.0, 6.0, 0.0, 0.8};
}

}  // namespace

bool ShapeParams::contains(double px, double py) const {
  const double dx = px - cx, dy = py - cy;
  const double c = std::cos(rotation), s = std::sin(rotation);
  const double u = c * dx + s * dy;
  const double v = -s * dx + c * dy;
  if (kind == ShapeKind::Ellipse) return (u / half_w) * (u / half_w) + (v / half_h) * (v / half_h) <= 1.0;
  return std::abs(u) <= half_w && std::abs(v) <= half_h;
}

Point ShapeParams::extent() const {
  const double c = std::abs(std::cos(rotation)), s = std::abs(std::sin(rotation));
  if (kind == ShapeKind::Ellipse) {
    return {std::hypot(half_w * c, half_h * s), std::hypot(half_w * s, half_h * c)};
  }
  return {half_w * c + half_h * s, half_w * s + half_h * c};
}

Box support_box(const ShapeParams& shape, std::size_t width, std::size_t height) {
  bool any = false;
  Box b{};
  for (std::size_t y = 0; y < height; ++y) {
    for (std::size_t x = 0; x < width; ++x) {
      if (!shape.contains(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5)) continue;
      const double fx = static_cast<double>(x), fy = static_cast<double>(y);
      if (!any) {
        b = {fx, fy, fx + 1.0, fy + 1.0};
        any = true;
      } else {
        b.x1 = std::min(b.x1, fx);
        b.y1 = std::min(b.y1, fy);
        b.x2 = std::max(b.x2, fx + 1.0);
        b.y2 = std::max(b.y2, fy + 1.0);
      }
    }
  }
  return b;
}

Scene generate_scene(std::uint64_t seed, std::uint64_t scene_id, const SceneConfig& cfg) {
  Rng rng = Rng::keyed(seed, rng_domain::kScene, scene_id);
  Scene scene;
  scene.scene_id = scene_id;
  bool placed = false;
  for (int attempt = 0; attempt < kMaxDraws && !placed; ++attempt) {
    ShapeParams sh;
    sh.kind = rng.below(2) == 0 ? ShapeKind::Ellipse : ShapeKind::Rectangle;
    sh.half_w = rng.uniform(cfg.min_half, cfg.max_half);
    sh.half_h = rng.uniform(cfg.min_half, cfg.max_half);
    sh.rotation = rng.uniform(0.0, std::numbers::pi);
    sh.intensity = rng.uniform(0.6, 1.0);
    const Point e = sh.extent();
    const Range rx = center_range(e.x, cfg), ry = center_range(e.y, cfg);
    const double ux = rng.uniform(), uy = rng.uniform();
    if (rx.empty() || ry.empty()) continue;
    sh.cx = rx.lo + (rx.hi - rx.lo) * ux;
    sh.cy = ry.lo + (ry.hi - ry.lo) * uy;
    const Box gt = support_box(sh, cfg.search_size, cfg.search_size);
    if (gt_ok(gt, cfg)) {
      scene.shape = sh;
      scene.gt = gt;
      placed = true;
    }
  }
  if (!placed) {
    scene.shape = fallback_shape(cfg);
    scene.gt = support_box(scene.shape, cfg.search_size, cfg.search_size);
  }
  scene.search = render(scene.shape, cfg.search_size, rng);
  ShapeParams centered = scene.shape;
  centered.cx = centered.cy = static_cast<double>(cfg.template_size) / 2.0;
  scene.templ = render(centered, cfg.template_size, rng);
  return scene;
}

Sequence generate_sequence(std::uint64_t seed, std::uint64_t seq_id, const SceneConfig& cfg) {
  if (cfg.sequence_length < 2) throw std::invalid_argument("generate_sequence: length must be >= 2");
  Scene first = generate_scene(seed, seq_id, cfg);
  Sequence seq;
  seq.seq_id = seq_id;
  seq.templ = std::move(first.templ);
  seq.frames.push_back({std::move(first.search), first.gt});

  Rng rng = Rng::keyed(seed, rng_domain::kSequence, seq_id);
  ShapeParams cur = first.shape;
  Box cur_gt = first.gt;
  for (std::size_t t = 1; t < cfg.sequence_length; ++t) {
    const double dx = rng.uniform(-cfg.max_step, cfg.max_step);
    const double dy = rng.uniform(-cfg.max_step, cfg.max_step);
    const double scale = rng.uniform(0.97, 1.03);
    const double spin = rng.uniform(-0.1, 0.1);

    ShapeParams next = cur;
    next.half_w = reflect(cur.half_w * scale, cfg.min_half, cfg.max_half);
    next.half_h = reflect(cur.half_h * scale, cfg.min_half, cfg.max_half);
    next.rotation = std::fmod(cur.rotation + spin + std::numbers::pi, std::numbers::pi);
    const Point e = next.extent();
    const Range rx = center_range(e.x, cfg), ry = center_range(e.y, cfg);
    Box gt{};
    bool moved = false;
    if (!rx.empty() && !ry.empty()) {
      next.cx = reflect(cur.cx + dx, rx.lo, rx.hi);
      next.cy = reflect(cur.cy + dy, ry.lo, ry.hi);
      gt = support_box(next, cfg.search_size, cfg.search_size);
      const Point a = gt.center(), b = cur_gt.center();
      moved = gt_ok(gt, cfg) && std::hypot(a.x - b.x, a.y - b.y) <= kMaxCenterJump;
    }
    if (!moved) {
      next = cur;
      gt = cur_gt;
    }
    seq.frames.push_back({render(next, cfg.search_size, rng), gt});
    cur = next;
    cur_gt = gt;
  }
  return seq;
}

void write_pgm(const std::filesystem::path& path, const Image& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  for (double v : img.pixels) out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
}

void dump_scenes(const std::filesystem::path& dir, std::uint64_t seed, std::uint64_t first_id, std::size_t count,
                 const SceneConfig& cfg) {
  std::filesystem::create_directories(dir);
  nlohmann::json sidecar = nlohmann::json::array();
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t id = first_id + i;
    const Scene s = generate_scene(seed, id, cfg);
    const std::string stem = "scene_" + std::to_string(id);
    write_pgm(dir / (stem + "_search.pgm"), s.search);
    write_pgm(dir / (stem + "_template.pgm"), s.templ);
    sidecar.push_back({{"scene_id", id},
                       {"search", stem + "_search.pgm"},
                       {"template", stem + "_template.pgm"},
                       {"gt", {s.gt.x1, s.gt.y1, s.gt.x2, s.gt.y2}},
                       {"shape", s.shape.kind == ShapeKind::Ellipse ? "ellipse" : "rectangle"},
                       {"rotation", s.shape.rotation}});
  }
  std::ofstream out(dir / "scenes.json");
  out << sidecar.dump(2) << '\n';
}

}  // namespace rtrack
