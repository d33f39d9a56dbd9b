#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = rtrack::cli::parse_and_dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == rtrack::cli::kExitUsage);
  CHECK(run({"train", "--out", "x"}).code == rtrack::cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == rtrack::cli::kExitUsage);
  CHECK(run({"assign", "--assigner", "iv", "--scene-seed", "1", "--spread", "mad"}).code == rtrack::cli::kExitUsage);
}

TEST_CASE("malformed config reports its location") {
  const auto path = std::filesystem::temp_directory_path() / "rtrack_bad_config.json";
  std::ofstream(path) << "{\n  \"epochs\": 2,\n  \"lr\": oops\n}\n";
  const Run r = run({"train", "--config", path.string(), "--out", (path.parent_path() / "rtrack_bad_out").string()});
  CHECK(r.code == rtrack::cli::kExitRuntime);
  CHECK(r.err.find("line 3") != std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("assign output is reproducible") {
  const std::vector<std::string> args{"assign", "--assigner", "iv", "--scene-seed", "7", "--leading"};
  const Run a = run(args), b = run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  CHECK(a.out.find("\"labels\"") != std::string::npos);
  CHECK(run({"assign", "--assigner", "nearest", "--scene-seed", "7"}).code == rtrack::cli::kExitRuntime);
}

TEST_CASE("gradcheck command") {
  const Run r = run({"gradcheck"});
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
  CHECK(r.out.find("PASS end_to_end") != std::string::npos);
}
