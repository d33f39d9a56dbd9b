#include "rtrack/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace rtrack {

SceneConfig RunConfig::scene_config() const {
  SceneConfig s;
  s.search_size = model.search_size;
  s.template_size = model.template_size;
  s.sequence_length = sequence_length;
  return s;
}

void RunConfig::resolve() {
  if (!top_k_explicit) assigner.top_k = default_top_k(assigner.strategy);
}

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ConfigError(key + ": " + why); };
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    fail("model", e.what());
  }
  if (epochs < 1) fail("epochs", "must be >= 1");
  if (batch_size < 1) fail("batch_size", "must be >= 1");
  if (batch_size > scenes_per_epoch) fail("batch_size", "must not exceed scenes_per_epoch");
  if (!(lr >= 0.0)) fail("lr", "must be non-negative");
  if (!(lr_drop_factor >= 0.0)) fail("lr_drop_factor", "must be non-negative");
  if (!(lr_drop_fraction >= 0.0 && lr_drop_fraction <= 1.0)) fail("lr_drop_fraction", "must lie in [0,1]");
  if (!(weight_decay >= 0.0)) fail("weight_decay", "must be non-negative");
  if (!(grad_clip >= 0.0)) fail("grad_clip", "must be non-negative");
  if (assigner.top_k < 1 || assigner.top_k > model.grid_spec().bins()) fail("top_k", "must lie in [1, bins]");
  if (!(0.0 <= assigner.iou_neg_thr && assigner.iou_neg_thr <= assigner.iou_pos_thr && assigner.iou_pos_thr <= 1.0)) {
    fail("iou_neg_thr", "thresholds must satisfy 0 <= neg <= pos <= 1");
  }
  const LossWeights& w = loss;
  for (auto [key, v] : {std::pair{"lambda_cls", w.lambda_cls}, {"lambda_det", w.lambda_det},
                        {"lambda_corr", w.lambda_corr}, {"lambda_init", w.lambda_init},
                        {"lambda_refine", w.lambda_refine}, {"focal_alpha", w.alpha}, {"focal_beta", w.beta}}) {
    if (!(v >= 0.0)) fail(key, "must be non-negative");
  }
  if (eval_sequences < 1) fail("eval_sequences", "must be >= 1");
  if (sequence_length < 2) fail("sequence_length", "must be >= 2");
  if (threads < 0) fail("threads", "must be >= 0");
}

Json to_json(const RunConfig& c) {
  return Json{
      {"seed", c.seed},
      {"epochs", c.epochs},
      {"scenes_per_epoch", c.scenes_per_epoch},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"lr_drop_factor", c.lr_drop_factor},
      {"lr_drop_fraction", c.lr_drop_fraction},
      {"weight_decay", c.weight_decay},
      {"grad_clip", c.grad_clip},
      {"assigner", to_string(c.assigner.strategy)},
      {"top_k", c.assigner.top_k},
      {"leading", c.assigner.leading},
      {"spread", to_string(c.assigner.spread)},
      {"iou_pos_thr", c.assigner.iou_pos_thr},
      {"iou_neg_thr", c.assigner.iou_neg_thr},
      {"lambda_cls", c.loss.lambda_cls},
      {"lambda_det", c.loss.lambda_det},
      {"lambda_corr", c.loss.lambda_corr},
      {"lambda_init", c.loss.lambda_init},
      {"lambda_refine", c.loss.lambda_refine},
      {"focal_alpha", c.loss.alpha},
      {"focal_beta", c.loss.beta},
      {"search_size", c.model.search_size},
      {"template_size", c.model.template_size},
      {"stride", c.model.stride},
      {"feature_dim", c.model.feature_dim},
      {"n_points", c.model.n_points},
      {"hidden_dim", c.model.hidden_dim},
      {"converter", to_string(c.model.converter)},
      {"corr_sample_mode", to_string(c.corr_mode)},
      {"truncate", c.truncate},
      {"scene_pool", c.scene_pool},
      {"eval_sequences", c.eval_sequences},
      {"sequence_length", c.sequence_length},
      {"record_wall_time", c.record_wall_time},
      {"threads", c.threads},
  };
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  using Setter = std::function<void(const Json&)>;
  auto count = [](std::size_t& dst) {
    return Setter([&dst](const Json& v) {
      if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
      dst = v.get<std::size_t>();
    });
  };
  auto real = [](double& dst) {
    return Setter([&dst](const Json& v) {
      if (!v.is_number()) throw ConfigError("expected a number");
      dst = v.get<double>();
    });
  };
  auto flag = [](bool& dst) {
    return Setter([&dst](const Json& v) {
      if (!v.is_boolean()) throw ConfigError("expected true or false");
      dst = v.get<bool>();
    });
  };
  auto text = [](auto parse) {
    return [parse](const Json& v) {
      if (!v.is_string()) throw ConfigError("expected a string");
      parse(v.get<std::string>());
    };
  };
  const std::map<std::string, Setter> setters{
      {"seed", [&](const Json& v) {
         if (!v.is_number_unsigned()) throw ConfigError("expected a non-negative integer");
         c.seed = v.get<std::uint64_t>();
       }},
      {"epochs", count(c.epochs)},
      {"scenes_per_epoch", count(c.scenes_per_epoch)},
      {"batch_size", count(c.batch_size)},
      {"lr", real(c.lr)},
      {"lr_drop_factor", real(c.lr_drop_factor)},
      {"lr_drop_fraction", real(c.lr_drop_fraction)},
      {"weight_decay", real(c.weight_decay)},
      {"grad_clip", real(c.grad_clip)},
      {"assigner", text([&](const std::string& s) { c.assigner.strategy = parse_strategy(s); })},
      {"top_k", [&](const Json& v) {
         count(c.assigner.top_k)(v);
         c.top_k_explicit = true;
       }},
      {"leading", flag(c.assigner.leading)},
      {"spread", text([&](const std::string& s) { c.assigner.spread = parse_spread(s); })},
      {"iou_pos_thr", real(c.assigner.iou_pos_thr)},
      {"iou_neg_thr", real(c.assigner.iou_neg_thr)},
      {"lambda_cls", real(c.loss.lambda_cls)},
      {"lambda_det", real(c.loss.lambda_det)},
      {"lambda_corr", real(c.loss.lambda_corr)},
      {"lambda_init", real(c.loss.lambda_init)},
      {"lambda_refine", real(c.loss.lambda_refine)},
      {"focal_alpha", real(c.loss.alpha)},
      {"focal_beta", real(c.loss.beta)},
      {"search_size", count(c.model.search_size)},
      {"template_size", count(c.model.template_size)},
      {"stride", count(c.model.stride)},
      {"feature_dim", count(c.model.feature_dim)},
      {"n_points", count(c.model.n_points)},
      {"hidden_dim", count(c.model.hidden_dim)},
      {"converter", text([&](const std::string& s) { c.model.converter = parse_converter(s); })},
      {"corr_sample_mode", text([&](const std::string& s) { c.corr_mode = parse_corr_mode(s); })},
      {"truncate", flag(c.truncate)},
      {"scene_pool", count(c.scene_pool)},
      {"eval_sequences", count(c.eval_sequences)},
      {"sequence_length", count(c.sequence_length)},
      {"record_wall_time", flag(c.record_wall_time)},
      {"threads", [&](const Json& v) {
         if (!v.is_number_integer()) throw ConfigError("expected an integer");
         c.threads = v.get<int>();
       }},
  };
  // Strategy first so an explicit top_k is checked against the right default.
  if (j.contains("assigner")) {
    try {
      setters.at("assigner")(j.at("assigner"));
    } catch (const std::exception& e) {
      throw ConfigError("assigner: " + std::string(e.what()));
    }
  }
  for (const auto& [key, value] : j.items()) {
    const auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError(key + ": unknown config key");
    try {
      it->second(value);
    } catch (const ConfigError& e) {
      throw ConfigError(key + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(key + ": " + e.what());
    }
  }
  c.resolve();
  c.validate();
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("malformed JSON at line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                      e.what());
  }
  return run_config_from_json(j);
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str());
}

std::size_t lr_drop_epoch(const RunConfig& cfg) {
  return static_cast<std::size_t>(std::ceil(cfg.lr_drop_fraction * static_cast<double>(cfg.epochs) - 1e-9));
}

double learning_rate_at(const RunConfig& cfg, std::size_t epoch) {
  return epoch >= lr_drop_epoch(cfg) ? cfg.lr * cfg.lr_drop_factor : cfg.lr;
}

}  // namespace rtrack
