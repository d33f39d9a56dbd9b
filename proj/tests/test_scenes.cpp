#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "rtrack/scenes.hpp"

using namespace rtrack;

namespace {

// Exhaustive pixel scan of the rendered support.
Box scan_support(const ShapeParams& s, std::size_t size) {
  double x1 = 1e9, y1 = 1e9, x2 = -1e9, y2 = -1e9;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      if (!s.contains(x + 0.5, y + 0.5)) continue;
      x1 = std::min(x1, double(x));
      y1 = std::min(y1, double(y));
      x2 = std::max(x2, double(x) + 1.0);
      y2 = std::max(y2, double(y) + 1.0);
    }
  }
  return {x1, y1, x2, y2};
}

}  // namespace

TEST_CASE("scene generation is deterministic and well formed") {
  const SceneConfig cfg;
  const Scene a = generate_scene(42, 0, cfg), b = generate_scene(42, 0, cfg);
  CHECK(a.search == b.search);
  CHECK(a.templ == b.templ);
  CHECK(a.gt == b.gt);
  CHECK_FALSE(generate_scene(42, 1, cfg).search == a.search);

  for (std::uint64_t id = 0; id < 200; ++id) {
    const Scene s = generate_scene(7, id, cfg);
    CAPTURE(id);
    CHECK(s.gt == scan_support(s.shape, cfg.search_size));
    CHECK(s.gt.x1 >= cfg.margin);
    CHECK(s.gt.y2 <= cfg.search_size - cfg.margin);
    CHECK(s.gt.area() >= 36.0);
    CHECK(s.search.width == 64);
    CHECK(s.templ.width == 32);
    for (double v : s.search.pixels) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("the target is brighter than the background") {
  const Scene s = generate_scene(1, 3, SceneConfig{});
  double in = 0, out = 0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t y = 0; y < 64; ++y) {
    for (std::size_t x = 0; x < 64; ++x) {
      if (s.shape.contains(x + 0.5, y + 0.5)) {
        in += s.search.at(x, y);
        ++n_in;
      } else {
        out += s.search.at(x, y);
        ++n_out;
      }
    }
  }
  CHECK(in / n_in > out / n_out + 0.3);
}

TEST_CASE("sequences") {
  const SceneConfig cfg;
  const Sequence a = generate_sequence(5, 2, cfg), b = generate_sequence(5, 2, cfg);
  REQUIRE(a.frames.size() == cfg.sequence_length);
  CHECK(a.frames[0].gt == generate_scene(5, 2, cfg).gt);
  CHECK(a.templ == generate_scene(5, 2, cfg).templ);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    CHECK(a.frames[t].image == b.frames[t].image);
    CHECK(a.frames[t].gt == b.frames[t].gt);
  }
  for (std::uint64_t id = 0; id < 20; ++id) {
    const Sequence s = generate_sequence(9, id, cfg);
    for (std::size_t t = 1; t < s.frames.size(); ++t) {
      const Point p = s.frames[t - 1].gt.center(), q = s.frames[t].gt.center();
      CHECK(std::hypot(p.x - q.x, p.y - q.y) <= 8.0);
      CHECK(s.frames[t].gt.area() >= 36.0);
    }
  }
  SceneConfig one = cfg;
  one.sequence_length = 1;
  CHECK_THROWS(generate_sequence(1, 1, one));
}

TEST_CASE("scene dump") {
  const auto dir = std::filesystem::temp_directory_path() / "rtrack_dump_test";
  std::filesystem::remove_all(dir);
  dump_scenes(dir, 42, 0, 2, SceneConfig{});
  CHECK(std::filesystem::exists(dir / "scene_0_search.pgm"));
  CHECK(std::filesystem::exists(dir / "scene_1_template.pgm"));
  CHECK(std::filesystem::file_size(dir / "scene_0_search.pgm") == 64 * 64 + std::string("P5\n64 64\n255\n").size());
  std::ifstream j(dir / "scenes.json");
  std::string text((std::istreambuf_iterator<char>(j)), {});
  CHECK(text.find("\"gt\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}
