#include "rtrack/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "rtrack/checkpoint.hpp"

namespace rtrack {

Box ModelTracker::track(const Sequence& seq, std::size_t t) {
  return predict(params_, cfg_, seq.templ, seq.frames.at(t).image);
}

TrackResult track_sequence(Tracker& tracker, const Sequence& seq) {
  TrackResult r;
  r.boxes.reserve(seq.frames.size());
  if (seq.frames.empty()) return r;
  r.boxes.push_back(seq.frames.front().gt);
  for (std::size_t t = 1; t < seq.frames.size(); ++t) r.boxes.push_back(tracker.track(seq, t));
  return r;
}

TrackResult track_sequence(const Parameters& params, const Sequence& seq, const ModelConfig& cfg) {
  ModelTracker tracker(params, cfg);
  return track_sequence(tracker, seq);
}

namespace {

void check_aligned(const TrackResult& result, const Sequence& seq) {
  if (result.boxes.size() != seq.frames.size()) {
    throw std::invalid_argument("track result has " + std::to_string(result.boxes.size()) + " boxes for " +
                                std::to_string(seq.frames.size()) + " frames");
  }
}

double threshold_at(std::size_t i) { return static_cast<double>(i) / static_cast<double>(kSuccessGridPoints - 1); }

struct FrameErrors {
  double pixel = 0.0;
  double normalized = 0.0;
};

std::vector<FrameErrors> center_errors(const TrackResult& result, const Sequence& seq) {
  check_aligned(result, seq);
  std::vector<FrameErrors> out;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) {
    const Box& gt = seq.frames[t].gt;
    const Point p = result.boxes[t].center(), g = gt.center();
    const double dx = p.x - g.x, dy = p.y - g.y;
    out.push_back({std::hypot(dx, dy), std::hypot(dx / gt.width(), dy / gt.height())});
  }
  return out;
}

double fraction_within(const std::vector<FrameErrors>& errs, double tau, bool normalized) {
  if (errs.empty()) return 0.0;
  std::size_t hit = 0;
  for (const FrameErrors& e : errs) hit += (normalized ? e.normalized : e.pixel) <= tau ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(errs.size());
}

}  // namespace

std::vector<double> frame_ious(const TrackResult& result, const Sequence& seq) {
  check_aligned(result, seq);
  std::vector<double> out;
  for (std::size_t t = 1; t < seq.frames.size(); ++t) out.push_back(iou(result.boxes[t], seq.frames[t].gt));
  return out;
}

double average_overlap(std::span<const double> ious) {
  if (ious.empty()) throw std::invalid_argument("average_overlap: no scored frames");
  double s = 0.0;
  for (double v : ious) s += v;
  return s / static_cast<double>(ious.size());
}

double success_rate(std::span<const double> ious, double thr) {
  if (ious.empty()) return 0.0;
  std::size_t hit = 0;
  for (double v : ious) hit += v >= thr ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(ious.size());
}

std::vector<double> success_curve(std::span<const double> ious) {
  std::vector<double> curve;
  for (std::size_t i = 0; i < kSuccessGridPoints; ++i) curve.push_back(success_rate(ious, threshold_at(i)));
  return curve;
}

double success_auc(std::span<const double> ious) {
  double s = 0.0;
  for (double v : success_curve(ious)) s += v;
  return s / static_cast<double>(kSuccessGridPoints);
}

double average_overlap(const TrackResult& result, const Sequence& seq) { return average_overlap(frame_ious(result, seq)); }

double success_rate(const TrackResult& result, const Sequence& seq, double thr) {
  return success_rate(frame_ious(result, seq), thr);
}

double success_auc(const TrackResult& result, const Sequence& seq) { return success_auc(frame_ious(result, seq)); }

double precision(const TrackResult& result, const Sequence& seq, double tau, bool normalized) {
  if (!(tau > 0.0)) throw std::invalid_argument("precision: tau must be positive");
  return fraction_within(center_errors(result, seq), tau, normalized);
}

EvalReport evaluate(const SequenceTracker& track, std::size_t n_sequences, std::uint64_t seed,
                    const SceneConfig& scenes) {
  if (n_sequences < 1) throw std::invalid_argument("evaluate: need at least one sequence");
  const std::uint64_t eval_seed = seed ^ kEvalSeedSalt;
  std::vector<std::vector<double>> ious(n_sequences);
  std::vector<std::vector<FrameErrors>> errors(n_sequences);
  std::vector<std::uint64_t> ids(n_sequences);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n_sequences; ++i) {
    const Sequence seq = generate_sequence(eval_seed, i, scenes);
    const TrackResult r = track(seq);
    ious[i] = frame_ious(r, seq);
    errors[i] = center_errors(r, seq);
    ids[i] = seq.seq_id;
  }

  EvalReport rep;
  std::vector<double> all_ious;
  std::vector<FrameErrors> all_errors;
  for (std::size_t i = 0; i < n_sequences; ++i) {
    SequenceReport s;
    s.seq_id = ids[i];
    s.ao = average_overlap(ious[i]);
    s.sr_050 = success_rate(ious[i], 0.5);
    s.sr_075 = success_rate(ious[i], 0.75);
    s.success_auc = success_auc(ious[i]);
    s.precision = fraction_within(errors[i], kPrecisionPixels, false);
    s.norm_precision = fraction_within(errors[i], kNormPrecisionThreshold, true);
    rep.sequences.push_back(s);
    all_ious.insert(all_ious.end(), ious[i].begin(), ious[i].end());
    all_errors.insert(all_errors.end(), errors[i].begin(), errors[i].end());
  }
  rep.frames = all_ious.size();
  rep.ao = average_overlap(all_ious);
  rep.sr_050 = success_rate(all_ious, 0.5);
  rep.sr_075 = success_rate(all_ious, 0.75);
  rep.curve = success_curve(all_ious);
  rep.success_auc = success_auc(all_ious);
  rep.precision = fraction_within(all_errors, kPrecisionPixels, false);
  rep.norm_precision = fraction_within(all_errors, kNormPrecisionThreshold, true);
  return rep;
}

EvalReport evaluate(const Parameters& params, const ModelConfig& model, std::size_t n_sequences, std::uint64_t seed,
                    std::size_t sequence_length) {
  SceneConfig scenes;
  scenes.search_size = model.search_size;
  scenes.template_size = model.template_size;
  scenes.sequence_length = sequence_length;
  return evaluate([&](const Sequence& seq) { return track_sequence(params, seq, model); }, n_sequences, seed, scenes);
}

Json to_json(const EvalReport& r) {
  Json per_seq = Json::array();
  for (const SequenceReport& s : r.sequences) {
    per_seq.push_back({{"seq_id", s.seq_id},
                       {"ao", s.ao},
                       {"sr_050", s.sr_050},
                       {"sr_075", s.sr_075},
                       {"success_auc", s.success_auc},
                       {"precision", s.precision},
                       {"norm_precision", s.norm_precision}});
  }
  return Json{{"ao", r.ao},
              {"sr_050", r.sr_050},
              {"sr_075", r.sr_075},
              {"success_auc", r.success_auc},
              {"precision", r.precision},
              {"norm_precision", r.norm_precision},
              {"precision_px", kPrecisionPixels},
              {"norm_precision_threshold", kNormPrecisionThreshold},
              {"frames", r.frames},
              {"sequences", std::move(per_seq)}};
}

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

std::string success_curve_csv(const EvalReport& r) {
  std::string out = "threshold,success_rate\n";
  for (std::size_t i = 0; i < r.curve.size(); ++i) {
    out += format_number(threshold_at(i)) + "," + format_number(r.curve[i]) + "\n";
  }
  return out;
}

void write_eval_outputs(const std::filesystem::path& dir, const EvalReport& report, const Json& config_echo) {
  std::filesystem::create_directories(dir);
  Json j = to_json(report);
  j["config"] = config_echo;
  write_json(dir / "eval_report.json", j);
  std::ofstream csv(dir / "success_curve.csv");
  if (!csv) throw std::runtime_error("cannot write " + (dir / "success_curve.csv").string());
  csv << success_curve_csv(report);
}

}  // namespace rtrack
