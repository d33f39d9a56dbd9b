#pragma once

// Tracking evaluation on synthetic sequences.
//
// Frame 0 of every sequence supplies the template and is never scored; all
// per-frame measures run over frames 1..N.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "rtrack/config.hpp"
#include "rtrack/geometry.hpp"
#include "rtrack/model.hpp"
#include "rtrack/scenes.hpp"

namespace rtrack {

/// Evaluation sequences live in a seed namespace disjoint from training.
inline constexpr std::uint64_t kEvalSeedSalt = 0xE7A1'5EED'0B5E'55EDULL;
inline constexpr double kPrecisionPixels = 5.0;
inline constexpr double kNormPrecisionThreshold = 0.2;
inline constexpr std::size_t kSuccessGridPoints = 21;

struct TrackResult {
  std::vector<Box> boxes;  // one per frame; frame 0 holds the given GT
};

/// Anything that predicts a box for frame `t` of a sequence.
class Tracker {
 public:
  virtual ~Tracker() = default;
  virtual Box track(const Sequence& seq, std::size_t t) = 0;
};

/// Full-frame search with the refine box at the highest-scoring bin.
class ModelTracker : public Tracker {
 public:
  ModelTracker(const Parameters& params, ModelConfig cfg) : params_(params), cfg_(std::move(cfg)) {}
  Box track(const Sequence& seq, std::size_t t) override;

 private:
  const Parameters& params_;
  ModelConfig cfg_;
};

TrackResult track_sequence(Tracker& tracker, const Sequence& seq);
TrackResult track_sequence(const Parameters& params, const Sequence& seq, const ModelConfig& cfg);

/// IoU of frames 1..N.
std::vector<double> frame_ious(const TrackResult& result, const Sequence& seq);

/// Mean IoU. Throws std::invalid_argument on an empty list.
double average_overlap(std::span<const double> ious);
/// Fraction of IoUs >= thr.
double success_rate(std::span<const double> ious, double thr);
/// Success rate at thresholds 0, 0.05, ..., 1.
std::vector<double> success_curve(std::span<const double> ious);
/// Mean of the 21-point success curve.
double success_auc(std::span<const double> ious);

double average_overlap(const TrackResult& result, const Sequence& seq);
double success_rate(const TrackResult& result, const Sequence& seq, double thr);
double success_auc(const TrackResult& result, const Sequence& seq);

/// Fraction of frames whose center error is <= tau. In normalized mode each
/// axis error is divided by the GT width/height first.
double precision(const TrackResult& result, const Sequence& seq, double tau, bool normalized);

struct SequenceReport {
  std::uint64_t seq_id = 0;
  double ao = 0, sr_050 = 0, sr_075 = 0, success_auc = 0, precision = 0, norm_precision = 0;
};

struct EvalReport {
  double ao = 0, sr_050 = 0, sr_075 = 0, success_auc = 0, precision = 0, norm_precision = 0;
  std::size_t frames = 0;
  std::vector<double> curve;  // kSuccessGridPoints entries
  std::vector<SequenceReport> sequences;
};

using SequenceTracker = std::function<TrackResult(const Sequence&)>;

/// Tracks `n_sequences` sequences drawn with seed ^ kEvalSeedSalt and pools
/// every scored frame.
EvalReport evaluate(const SequenceTracker& track, std::size_t n_sequences, std::uint64_t seed,
                    const SceneConfig& scenes);
EvalReport evaluate(const Parameters& params, const ModelConfig& model, std::size_t n_sequences, std::uint64_t seed,
                    std::size_t sequence_length = SceneConfig{}.sequence_length);

Json to_json(const EvalReport& report);
std::string success_curve_csv(const EvalReport& report);
/// eval_report.json and success_curve.csv.
void write_eval_outputs(const std::filesystem::path& dir, const EvalReport& report, const Json& config_echo);

/// printf("%.9g") in the C locale.
std::string format_number(double v);

}  // namespace rtrack
