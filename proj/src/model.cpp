#include "rtrack/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "rtrack/rng.hpp"

namespace rtrack {

void ModelConfig::validate() const {
  if (stride == 0 || search_size % stride != 0 || template_size % stride != 0) {
    throw std::invalid_argument("model: search_size and template_size must be multiples of stride");
  }
  if (search_size == 0 || template_size == 0) throw std::invalid_argument("model: image sizes must be positive");
  if (n_points < 2) throw std::invalid_argument("model: n_points must be >= 2");
  if (feature_dim == 0 || hidden_dim == 0) throw std::invalid_argument("model: feature_dim and hidden_dim must be positive");
}

std::string to_string(Converter c) { return c == Converter::MinMax ? "minmax" : "moment"; }

Converter parse_converter(const std::string& name) {
  if (name == "minmax") return Converter::MinMax;
  if (name == "moment") return Converter::Moment;
  throw std::invalid_argument("unknown converter '" + name + "' (expected minmax, moment)");
}

void Parameters::add(std::string name, Tensor t) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter " + name);
  entries_.emplace_back(std::move(name), std::move(t));
}

Tensor& Parameters::at(const std::string& name) {
  for (auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  throw std::out_of_range("no parameter named " + name);
}

const Tensor& Parameters::at(const std::string& name) const {
  return const_cast<Parameters*>(this)->at(name);
}

bool Parameters::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == name; });
}

std::size_t Parameters::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.second.numel();
  return n;
}

Parameters init_parameters(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::keyed(seed, rng_domain::kParams, 0);
  Parameters p;
  auto linear = [&](const std::string& prefix, std::size_t in, std::size_t out, double scale) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    Tensor w(Shape{in, out}), b(Shape{out});
    for (std::size_t i = 0; i < w.numel(); ++i) w[i] = scale * rng.uniform(-bound, bound);
    for (std::size_t i = 0; i < b.numel(); ++i) b[i] = scale * rng.uniform(-bound, bound);
    p.add(prefix + ".w", std::move(w));
    p.add(prefix + ".b", std::move(b));
  };
  const std::size_t patch = cfg.stride * cfg.stride;
  const std::size_t F = cfg.feature_dim, H = cfg.hidden_dim, n = cfg.n_points;
  linear("patch", patch, F, 1.0);
  linear("template", patch, F, 1.0);
  linear("cls.hidden", F, H, 1.0);
  linear("cls.out", H, 1, 1.0);
  linear("init.hidden", F, H, 1.0);
  linear("init.out", H, 2 * n, kOffsetInitScale);
  linear("refine.hidden", n * F, H, 1.0);
  linear("refine.out", H, 2 * n, kOffsetInitScale);
  p.add("moment.log_lambda", Tensor(Shape{2}, 0.0));
  return p;
}

BoundParameters::BoundParameters(Tape& tape, const Parameters& params, bool requires_grad) {
  for (const auto& [name, t] : params.entries()) {
    names_.push_back(name);
    values_.push_back(tape.leaf(t, requires_grad));
  }
}

BoundParameters::BoundParameters(std::vector<std::string> names, std::vector<Value> values)
    : names_(std::move(names)), values_(std::move(values)) {
  if (names_.size() != values_.size()) throw std::invalid_argument("BoundParameters: name/value count mismatch");
}

const Value& BoundParameters::operator[](const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return values_[i];
  }
  throw std::out_of_range("no bound parameter named " + name);
}

namespace {

Value linear(const Value& x, const BoundParameters& p, const std::string& prefix) {
  return matmul(x, p[prefix + ".w"]) + p[prefix + ".b"];
}

Value mlp(const Value& x, const BoundParameters& p, const std::string& head) {
  return linear(relu(linear(x, p, head + ".hidden")), p, head + ".out");
}

}  // namespace

Tensor extract_patches(const Image& img, std::size_t stride) {
  if (img.width % stride != 0 || img.height % stride != 0) {
    throw std::invalid_argument("extract_patches: image size not a multiple of the stride");
  }
  const std::size_t gw = img.width / stride, gh = img.height / stride;
  Tensor out(Shape{gw * gh, stride * stride});
  for (std::size_t r = 0; r < gh; ++r) {
    for (std::size_t c = 0; c < gw; ++c) {
      double* row = out.data().data() + (r * gw + c) * stride * stride;
      for (std::size_t y = 0; y < stride; ++y) {
        for (std::size_t x = 0; x < stride; ++x) row[y * stride + x] = img.at(c * stride + x, r * stride + y);
      }
    }
  }
  return out;
}

FeatureGrid encode(const Image& templ, const Image& search, const BoundParameters& p, const ModelConfig& cfg) {
  if (search.width != cfg.search_size || search.height != cfg.search_size) {
    throw std::invalid_argument("encode: search image is " + std::to_string(search.width) + "x" +
                                std::to_string(search.height) + ", expected " + std::to_string(cfg.search_size));
  }
  if (templ.width != cfg.template_size || templ.height != cfg.template_size) {
    throw std::invalid_argument("encode: template image is " + std::to_string(templ.width) + "x" +
                                std::to_string(templ.height) + ", expected " + std::to_string(cfg.template_size));
  }
  Tape& tape = p.values().front().tape();
  const Value patches = tape.constant(extract_patches(search, cfg.stride));
  const Tensor tpatches = extract_patches(templ, cfg.stride);
  Tensor pooled(Shape{1, tpatches.dim(1)});
  for (std::size_t b = 0; b < tpatches.dim(0); ++b) {
    for (std::size_t j = 0; j < tpatches.dim(1); ++j) pooled[j] += tpatches[b * tpatches.dim(1) + j];
  }
  for (std::size_t j = 0; j < pooled.numel(); ++j) pooled[j] /= static_cast<double>(tpatches.dim(0));

  const Value s = linear(patches, p, "patch");
  const Value t = linear(tape.constant(std::move(pooled)), p, "template");
  return {relu(s + s * t), cfg.grid_spec()};
}

Value classify(const FeatureGrid& fg, const BoundParameters& p) {
  const Value logits = mlp(fg.features, p, "cls");
  return sigmoid(clamp(reshape(logits, Shape{fg.grid.bins()}), -kLogitClamp, kLogitClamp));
}

Value points_to_boxes(const Value& points, const BoundParameters& p, const ModelConfig& cfg) {
  const Value multipliers = cfg.converter == Converter::Moment ? exp(p["moment.log_lambda"]) : Value{};
  return ad::clamp_box(ad::convert(cfg.converter, points, multipliers), cfg.image_bounds());
}

StageOutput init_stage(const FeatureGrid& fg, const BoundParameters& p, const ModelConfig& cfg) {
  const std::size_t bins = fg.grid.bins(), n = cfg.n_points;
  Tensor centers(Shape{bins, 1, 2});
  for (std::size_t b = 0; b < bins; ++b) {
    const Point c = fg.grid.bin_center(b);
    centers[2 * b] = c.x;
    centers[2 * b + 1] = c.y;
  }
  const Value offsets = reshape(mlp(fg.features, p, "init"), Shape{bins, n, 2});
  const Value points = fg.features.tape().constant(std::move(centers)) + fg.grid.stride * offsets;
  return {points, points_to_boxes(points, p, cfg)};
}

Value sample_point_features(const FeatureGrid& fg, const Value& points) {
  const Shape& s = points.shape();
  const std::size_t F = fg.features.shape()[1];
  const Value grid_coords = reshape(points, Shape{s[0] * s[1], 2}) / fg.grid.stride - 0.5;
  const Value fmap = reshape(fg.features, Shape{fg.grid.rows, fg.grid.cols, F});
  return reshape(bilinear_sample(fmap, grid_coords), Shape{s[0], s[1] * F});
}

StageOutput refine_stage(const FeatureGrid& fg, const Value& init_points, const BoundParameters& p,
                         const ModelConfig& cfg, Value* residuals) {
  const std::size_t bins = fg.grid.bins(), n = cfg.n_points;
  const Value delta = reshape(mlp(sample_point_features(fg, init_points), p, "refine"), Shape{bins, n, 2});
  if (residuals) *residuals = delta;
  const Value points = init_points + fg.grid.stride * delta;
  return {points, points_to_boxes(points, p, cfg)};
}

HeadOutput forward(const Image& templ, const Image& search, const BoundParameters& p, const ModelConfig& cfg) {
  const FeatureGrid fg = encode(templ, search, p, cfg);
  HeadOutput out;
  out.scores = classify(fg, p);
  const StageOutput init = init_stage(fg, p, cfg);
  const StageOutput refine = refine_stage(fg, init.points, p, cfg, &out.refine_residuals);
  out.init_points = init.points;
  out.init_boxes = init.boxes;
  out.refine_points = refine.points;
  out.refine_boxes = refine.boxes;
  return out;
}

std::size_t best_bin(const HeadOutput& out) {
  const auto s = out.scores.tensor().data();
  return static_cast<std::size_t>(std::max_element(s.begin(), s.end()) - s.begin());
}

Box predicted_box(const HeadOutput& out) {
  const Tensor& boxes = out.refine_boxes.tensor();
  const std::size_t b = best_bin(out);
  return {boxes[4 * b], boxes[4 * b + 1], boxes[4 * b + 2], boxes[4 * b + 3]};
}

Box predict(const Parameters& params, const ModelConfig& cfg, const Image& templ, const Image& search) {
  Tape tape;
  const BoundParameters bound(tape, params, false);
  return predicted_box(forward(templ, search, bound, cfg));
}

}  // namespace rtrack
