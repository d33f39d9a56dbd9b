#include <doctest.h>

#include <cmath>

#include "rtrack/metrics.hpp"

using namespace rtrack;

namespace {

SceneConfig short_scenes() {
  SceneConfig s;
  s.sequence_length = 6;
  return s;
}

// Tracker that returns GT shifted by a fixed offset.
class OffsetTracker : public Tracker {
 public:
  explicit OffsetTracker(double dx) : dx_(dx) {}
  Box track(const Sequence& seq, std::size_t t) override {
    Box b = seq.frames[t].gt;
    b.x1 += dx_;
    b.x2 += dx_;
    return b;
  }

 private:
  double dx_;
};

}  // namespace

TEST_CASE("frame summaries") {
  const std::vector<double> ious{1.0, 0.5, 0.0};
  CHECK(average_overlap(ious) == doctest::Approx(0.5));
  CHECK(success_rate(ious, 0.5) == doctest::Approx(2.0 / 3.0));
  CHECK(success_rate(ious, 0.75) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(average_overlap(std::vector<double>{}), std::invalid_argument);

  const std::vector<double> zero{0.0};
  CHECK(success_auc(zero) == doctest::Approx(1.0 / 21.0));
  const std::vector<double> half{0.5};
  CHECK(success_auc(half) == doctest::Approx(11.0 / 21.0));
  const std::vector<double> one{1.0};
  CHECK(success_auc(one) == doctest::Approx(1.0));

  const auto curve = success_curve(ious);
  REQUIRE(curve.size() == kSuccessGridPoints);
  CHECK(curve.front() == 1.0);
  for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
}

TEST_CASE("auc approximates the mean overlap") {
  std::vector<double> ious;
  for (int i = 0; i < 997; ++i) ious.push_back(std::fmod(i * 0.618033988749895, 1.0));
  // Fine-grid oracle of the area under the success curve equals the mean IoU.
  double fine = 0.0;
  for (int k = 0; k <= 2000; ++k) fine += success_rate(ious, k / 2000.0);
  fine /= 2001.0;
  CHECK(std::abs(fine - average_overlap(ious)) <= 1e-3);
  CHECK(std::abs(success_auc(ious) - average_overlap(ious)) <= 0.05);
}

TEST_CASE("oracle and offset trackers") {
  const SceneConfig cfg = short_scenes();
  const Sequence seq = generate_sequence(3, 1, cfg);
  OffsetTracker exact(0.0);
  const TrackResult r = track_sequence(exact, seq);
  REQUIRE(r.boxes.size() == seq.frames.size());
  CHECK(frame_ious(r, seq).size() == seq.frames.size() - 1);
  CHECK(average_overlap(r, seq) == 1.0);
  CHECK(success_auc(r, seq) == 1.0);
  CHECK(precision(r, seq, 5.0, false) == 1.0);

  // Four pixels off: inside 5 px, outside 3 px.
  OffsetTracker off(4.0);
  const TrackResult o = track_sequence(off, seq);
  CHECK(precision(o, seq, 5.0, false) == 1.0);
  CHECK(precision(o, seq, 4.0, false) == 1.0);  // boundary counts
  CHECK(precision(o, seq, 3.0, false) == 0.0);
  CHECK_THROWS(precision(o, seq, 0.0, false));
  for (double iou : frame_ious(o, seq)) CHECK(iou < 1.0);
  const double np = precision(o, seq, 0.2, true);
  std::size_t hits = 0;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) hits += 4.0 / seq.frames[t].gt.width() <= 0.2;
  CHECK(np == doctest::Approx(double(hits) / double(seq.frames.size() - 1)));
}

TEST_CASE("evaluate pools frames and is deterministic") {
  const SceneConfig cfg = short_scenes();
  const SequenceTracker oracle = [](const Sequence& s) {
    OffsetTracker t(0.0);
    return track_sequence(t, s);
  };
  const EvalReport r = evaluate(oracle, 3, 11, cfg);
  CHECK(r.frames == 15);
  CHECK(r.ao == 1.0);
  CHECK(r.sequences.size() == 3);
  CHECK(r.curve.size() == kSuccessGridPoints);

  // Constant tracker: every frame predicts the same box.
  const SequenceTracker constant = [](const Sequence& s) {
    TrackResult out;
    out.boxes.assign(s.frames.size(), Box{0, 0, 10, 10});
    return out;
  };
  const EvalReport a = evaluate(constant, 4, 5, cfg), b = evaluate(constant, 4, 5, cfg);
  CHECK(to_json(a).dump() == to_json(b).dump());
  double sum = 0.0;
  for (std::uint64_t id = 0; id < 4; ++id) {
    const Sequence s = generate_sequence(5 ^ kEvalSeedSalt, id, cfg);
    for (std::size_t t = 1; t < s.frames.size(); ++t) sum += iou(Box{0, 0, 10, 10}, s.frames[t].gt);
  }
  CHECK(a.ao == doctest::Approx(sum / 20.0).epsilon(1e-12));
  CHECK(success_curve_csv(a).rfind("threshold,success_rate\n", 0) == 0);
}

TEST_CASE("model evaluation is deterministic") {
  ModelConfig m;
  const Parameters p = init_parameters(m, 1);
  const EvalReport a = evaluate(p, m, 2, 4, 4), b = evaluate(p, m, 2, 4, 4);
  CHECK(to_json(a).dump() == to_json(b).dump());
  CHECK(a.frames == 6);
}
