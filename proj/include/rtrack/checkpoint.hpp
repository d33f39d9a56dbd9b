#pragma once

#include <filesystem>

#include "rtrack/config.hpp"
#include "rtrack/model.hpp"

namespace rtrack {

struct Checkpoint {
  Parameters params;
  RunConfig config;
};

/// Parameters keyed by name as {shape, data}, plus the config echo and seed.
/// Doubles are written with round-trip precision, so loading is bit-exact.
Json checkpoint_json(const Parameters& params, const RunConfig& cfg);
Checkpoint checkpoint_from_json(const Json& j);

void save_checkpoint(const std::filesystem::path& path, const Parameters& params, const RunConfig& cfg);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Writes `j` with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);

}  // namespace rtrack
