#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(IDSEQ_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("exit codes for success, bad input and usage errors") {
  idseq::testing::TempDir dir;
  const auto d = dir.path().string();
  CHECK(run("--help") == 0);
  CHECK(run("synth --out " + d + "/s --identities 3 --frames 8 --dim 4") == 0);
  CHECK(run("synth --out " + d + "/s2 --identities 2") == 2);
  CHECK(run("synth --bogus-flag") == 2);
  CHECK(run("train --manifest " + d + "/missing.jsonl --out " + d + "/run") == 3);
  CHECK(run("report --input " + d + "/missing.json") == 3);
}

TEST_CASE("same seed gives byte-identical outputs") {
  idseq::testing::TempDir dir;
  const auto d = dir.path().string();
  for (const char* name : {"a", "b"}) {
    REQUIRE(run("synth --out " + d + "/" + name +
                " --identities 5 --frames 12 --dim 4 --seed 3") == 0);
  }
  CHECK(slurp(dir / "a/manifest.jsonl") == slurp(dir / "b/manifest.jsonl"));
  CHECK(slurp(dir / "a/embeddings/id00_real0.emb") ==
        slurp(dir / "b/embeddings/id00_real0.emb"));
}

TEST_CASE("prepare rejects identities shared across splits") {
  idseq::testing::TempDir dir;
  std::ofstream(dir / "records.jsonl")
      << R"({"video_id":"v1","identity_id":"A","label":"REAL","frames_path":"v1","split":"TRAIN"})"
      << "\n"
      << R"({"video_id":"v2","identity_id":"A","label":"REAL","frames_path":"v2","split":"TEST"})"
      << "\n";
  CHECK(run("prepare --records " + (dir / "records.jsonl").string() + " --out " +
            (dir / "m.jsonl").string()) != 0);
  CHECK_FALSE(std::filesystem::exists(dir / "m.jsonl"));
}

TEST_CASE("train accepts short windows and every embedding type; eval writes reports") {
  idseq::testing::TempDir dir;
  const auto d = dir.path().string();
  REQUIRE(run("synth --out " + d + "/data --identities 5 --frames 10 --dim 4") == 0);
  const std::string common = "train --manifest " + d + "/data/manifest.jsonl --epochs 1 " +
                             "--set detector.hidden_size=4 --set detector.head_hidden=4 ";
  CHECK(run(common + "--sequence-length 2 --out " + d + "/run2") == 0);
  for (const char* kind : {"tmp", "aux", "cat"}) {
    CHECK(run(common + "--sequence-length 4 --embedding-type " + kind + " --out " + d +
              "/run_" + kind) == 0);
  }
  CHECK(run(common + "--embedding-type sum --out " + d + "/bad") == 2);
  CHECK(run(common + "--set loss.margn=1 --out " + d + "/bad") == 2);
  for (const char* f : {"config.json", "metrics.jsonl", "best.ckpt", "last.ckpt", "run.json"}) {
    CHECK(std::filesystem::exists(dir / "run_tmp" / f));
  }
  CHECK(run("eval --checkpoint " + d + "/run_tmp/best.ckpt --manifest " + d +
            "/data/manifest.jsonl --split TEST --out " + d + "/r.json") == 0);
  CHECK(run("report --input " + d + "/r.json --format markdown --out " + d + "/r.md") == 0);
  CHECK(slurp(dir / "r.md").find("| Method |") != std::string::npos);
}
