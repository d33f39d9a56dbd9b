#include "rtrack/checkpoint.hpp"

#include <fstream>

namespace rtrack {

namespace {

constexpr const char* kFormat = "rtrack-checkpoint-1";

}  // namespace

Json checkpoint_json(const Parameters& params, const RunConfig& cfg) {
  Json tensors = Json::object();
  for (const auto& [name, t] : params.entries()) {
    tensors[name] = Json{{"shape", t.shape()}, {"data", t.values()}};
  }
  return Json{{"format", kFormat}, {"seed", cfg.seed}, {"config", to_json(cfg)}, {"parameters", std::move(tensors)}};
}

Checkpoint checkpoint_from_json(const Json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat) {
    throw std::runtime_error("checkpoint: missing or unknown format tag");
  }
  Checkpoint ck;
  ck.config = run_config_from_json(j.at("config"));
  for (const auto& [name, entry] : j.at("parameters").items()) {
    Shape shape = entry.at("shape").get<Shape>();
    std::vector<double> data = entry.at("data").get<std::vector<double>>();
    try {
      ck.params.add(name, Tensor(std::move(shape), std::move(data)));
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error("checkpoint: parameter " + name + ": " + e.what());
    }
  }
  const Parameters fresh = init_parameters(ck.config.model, 0);
  for (const auto& [name, t] : fresh.entries()) {
    if (!ck.params.contains(name) || ck.params.at(name).shape() != t.shape()) {
      throw std::runtime_error("checkpoint: parameter " + name + " missing or mis-shaped for the stored config");
    }
  }
  return ck;
}

void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Parameters& params, const RunConfig& cfg) {
  write_json(path, checkpoint_json(params, cfg));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace rtrack
