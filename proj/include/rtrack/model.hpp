#pragma once

// Template/search fusion encoder stub and the two-stage point-set head.
//
// Per feature bin the head emits a foreground score, an init point set
// (bin center + stride * offsets) and a refine point set (init points +
// stride * residuals predicted from features sampled at the init points).
// Point sets become pseudo boxes through the configured converter.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "rtrack/assigner.hpp"
#include "rtrack/geometry.hpp"
#include "rtrack/scenes.hpp"
#include "rtrack/tape.hpp"

namespace rtrack {

struct ModelConfig {
  std::size_t search_size = 64;
  std::size_t template_size = 32;
  std::size_t stride = 4;
  std::size_t feature_dim = 32;
  std::size_t n_points = 9;
  std::size_t hidden_dim = 64;
  Converter converter = Converter::MinMax;

  std::size_t grid() const { return search_size / stride; }
  GridSpec grid_spec() const { return {grid(), grid(), static_cast<double>(stride)}; }
  Box image_bounds() const { return {0.0, 0.0, static_cast<double>(search_size), static_cast<double>(search_size)}; }
  /// Throws std::invalid_argument on inconsistent sizes.
  void validate() const;
};

std::string to_string(Converter c);
Converter parse_converter(const std::string& name);

/// Logits are clamped to +-kLogitClamp before the sigmoid.
inline constexpr double kLogitClamp = 15.0;
/// Output-layer scale of both regression heads at initialization.
inline constexpr double kOffsetInitScale = 0.01;

/// Named model tensors in registration order.
class Parameters {
 public:
  void add(std::string name, Tensor t);
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<std::pair<std::string, Tensor>>& entries() { return entries_; }
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  /// Total number of scalars.
  std::size_t count() const;

  friend bool operator==(const Parameters&, const Parameters&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

/// Fresh weights: uniform(+-sqrt(1/fan_in)) from the keyed stream, regression
/// output layers scaled by kOffsetInitScale, moment multipliers at 1.
Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed);

/// Parameters placed on a tape as leaves, looked up by name.
class BoundParameters {
 public:
  BoundParameters(Tape& tape, const Parameters& params, bool requires_grad);
  /// Wraps existing tape values, e.g. the leaves handed out by grad_check.
  BoundParameters(std::vector<std::string> names, std::vector<Value> values);
  const Value& operator[](const std::string& name) const;
  const std::vector<Value>& values() const { return values_; }

 private:
  std::vector<std::string> names_;
  std::vector<Value> values_;
};

struct FeatureGrid {
  Value features;  // [bins, F], bins row-major
  GridSpec grid;
};

struct HeadOutput {
  Value scores;         // [bins], post-sigmoid
  Value init_points;    // [bins, n, 2]
  Value refine_points;  // [bins, n, 2]
  Value init_boxes;     // [bins, 4], clamped to the image
  Value refine_boxes;   // [bins, 4]
  Value refine_residuals;  // [bins, n, 2], grid-cell units
};

/// Row b holds the stride*stride pixels of patch b, row-major within the patch.
Tensor extract_patches(const Image& img, std::size_t stride);

FeatureGrid encode(const Image& templ, const Image& search, const BoundParameters& p, const ModelConfig& cfg);
Value classify(const FeatureGrid& fg, const BoundParameters& p);

struct StageOutput {
  Value points;  // [bins, n, 2]
  Value boxes;   // [bins, 4]
};

StageOutput init_stage(const FeatureGrid& fg, const BoundParameters& p, const ModelConfig& cfg);
/// points [bins, n, 2] in pixels -> [bins, n * F]
Value sample_point_features(const FeatureGrid& fg, const Value& points);
StageOutput refine_stage(const FeatureGrid& fg, const Value& init_points, const BoundParameters& p,
                         const ModelConfig& cfg, Value* residuals = nullptr);
/// Boxes from point sets with the configured converter, clamped to the image.
Value points_to_boxes(const Value& points, const BoundParameters& p, const ModelConfig& cfg);

HeadOutput forward(const Image& templ, const Image& search, const BoundParameters& p, const ModelConfig& cfg);

/// Index of the first highest-scoring bin.
std::size_t best_bin(const HeadOutput& out);
/// Refine pseudo box at the highest-scoring bin.
Box predicted_box(const HeadOutput& out);

/// Forward pass without gradient tracking.
Box predict(const Parameters& params, const ModelConfig& cfg, const Image& templ, const Image& search);

}  // namespace rtrack
