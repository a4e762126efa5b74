#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

// Runs the CLI through the shell; returns its exit status.
int run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + FAS_CLI_PATH + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

std::string capture(const std::string& args) {
  const std::string cmd = std::string(FAS_CLI_PATH) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t n = std::fread(buf, 1, sizeof buf, pipe)) out.append(buf, n);
  ::pclose(pipe);
  return out;
}

}  // namespace

TEST_CASE("command line exit codes") {
  const auto dir = fas::testing::scratch_dir("cli");
  const std::string d = dir.string();

  CHECK(run("synth --count 6 --size 32 --seed 3 --out " + d + "/data") == 0);
  CHECK(fs::exists(dir / "data" / "manifest.jsonl"));
  CHECK(run("annotate --manifest " + d + "/data/manifest.jsonl --segmenter mock --out " + d +
            "/labels") == 0);

  fs::path map;
  for (const auto& e : fs::directory_iterator(dir / "labels"))
    if (e.path().extension() == ".fga1") map = e.path();
  REQUIRE(!map.empty());
  CHECK(run("preview --map " + map.string() + " --out " + d + "/preview.png") == 0);
  CHECK(fs::exists(dir / "preview.png"));

  // decide on the label map itself, with the matching landmarks.
  const auto id = map.stem().string();
  const auto lm = dir / "data" / "landmarks" / (id + ".json");
  REQUIRE(fs::exists(lm));
  const auto j = nlohmann::json::parse(
      capture("decide --pred " + map.string() + " --landmarks " + lm.string()));
  CHECK(j.contains("verdict"));
  CHECK(j.contains("score"));

  // Validation problems exit with 2.
  CHECK(run("synth --count 0 --out " + d + "/x") == 2);
  CHECK(run("synth") == 2);
  CHECK(run("no-such-command") == 2);
  CHECK(run("train --manifest " + d + "/missing.jsonl") == 2);
  CHECK(run("eval --checkpoint " + d + "/nothing --manifest " + d + "/data/manifest.jsonl") == 2);
  std::ofstream(dir / "junk.fga1") << "not a map";
  CHECK(run("preview --map " + d + "/junk.fga1 --out " + d + "/p.png") == 2);
  CHECK(run("augment --manifest " + d + "/data/manifest.jsonl --gamma 1.5") == 2);

  // An unreachable segmenter service is a runtime failure: 3.
  CHECK(run("annotate --manifest " + d + "/data/manifest.jsonl --segmenter service --out " + d +
                "/labels2",
            "FAS_SEGMENTER_URL=http://127.0.0.1:9") == 3);
  fs::remove_all(dir);
}
