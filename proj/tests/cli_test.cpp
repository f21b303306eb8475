#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli_fixture.hpp"

using namespace avsd::test;

TEST_CASE("gen-data is deterministic and round-trips") {
  CliFixture fx("gen");
  const auto a = fx.run({"--seed", "7", "--out", fx.path("a.jsonl"), "gen-data", "--count", "1000"});
  const auto b = fx.run({"--seed", "7", "--out", fx.path("b.jsonl"), "gen-data", "--count", "1000"});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(read_file(fx.path("a.jsonl")) == read_file(fx.path("b.jsonl")));
  CHECK(avsd::read_dataset(std::filesystem::path(fx.path("a.jsonl"))).size() == 1000);
  CHECK(a.out.find("\"instances\":1000") != std::string::npos);

  const auto c = fx.run({"--seed", "8", "gen-data", "--count", "5"});
  CHECK(c.code == 0);
  CHECK(c.out != fx.run({"--seed", "7", "gen-data", "--count", "5"}).out);
}

TEST_CASE("configuration errors exit with code 2") {
  CliFixture fx("errors");
  fx.write("bad.cfg", "task.modulus = 2\n");
  auto r = fx.run({"--config", fx.path("bad.cfg"), "gen-data"});
  CHECK(r.code == 2);
  CHECK(r.err.find("task.modulus") != std::string::npos);

  fx.write("opsd.cfg", "method = opsd\nviews = full, partial\n");
  r = fx.run({"--config", fx.path("opsd.cfg"), "train"});
  CHECK(r.code == 2);
  CHECK(r.err.find("views") != std::string::npos);

  CHECK(fx.run({"no-such-command"}).code == 2);
  CHECK(fx.run({"eval", "--data", "x"}).code == 2);  // missing --checkpoint
}

TEST_CASE("runtime errors exit with code 3") {
  CliFixture fx("runtime");
  auto r = fx.run({"--config", fx.tiny_config(), "train", "--resume", fx.path("missing.ckpt")});
  CHECK(r.code == 3);
  CHECK(r.err.find("not found") != std::string::npos);
  r = fx.run({"--out", "/nonexistent-dir/x.jsonl", "gen-data", "--count", "2"});
  CHECK(r.code == 3);
}

TEST_CASE("train, eval and analyses are deterministic") {
  CliFixture fx("pipeline");
  const auto cfg = fx.tiny_config();
  for (const char* tag : {"1", "2"}) {
    const std::string t(tag);
    REQUIRE(fx.run({"--config", cfg, "--out", fx.path("m" + t + ".ckpt"), "--quiet", "train", "--metrics",
                    fx.path("metrics" + t + ".jsonl")})
                .code == 0);
  }
  CHECK(payload_lines(read_file(fx.path("metrics1.jsonl"))) == payload_lines(read_file(fx.path("metrics2.jsonl"))));
  CHECK(read_file(fx.path("m1.ckpt")) == read_file(fx.path("m2.ckpt")));
  const auto lines = payload_lines(read_file(fx.path("metrics1.jsonl")));
  CHECK(lines.size() == 7);  // 6 steps and the final record
  CHECK(lines.back().find("\"type\":\"final\"") != std::string::npos);

  REQUIRE(fx.run({"--seed", "3", "--out", fx.path("data.jsonl"), "gen-data", "--count", "20"}).code == 0);
  for (const char* cmd : {"eval", "analyze-credit", "analyze-gate"}) {
    const std::vector<std::string> args{"--config", cfg, cmd, "--checkpoint", fx.path("m1.ckpt"), "--data",
                                        fx.path("data.jsonl")};
    const auto a = fx.run(args);
    const auto b = fx.run(args);
    CHECK_MESSAGE(a.code == 0, cmd, a.err);
    CHECK(a.out == b.out);
    CHECK_FALSE(a.out.empty());
  }

  // A dataset over a different vocabulary is rejected.
  fx.write("m11.cfg", "task.modulus = 11\n");
  REQUIRE(fx.run({"--config", fx.path("m11.cfg"), "--out", fx.path("d11.jsonl"), "gen-data", "--count", "3"}).code == 0);
  const auto bad = fx.run({"eval", "--checkpoint", fx.path("m1.ckpt"), "--data", fx.path("d11.jsonl")});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("vocabulary mismatch") != std::string::npos);
}

TEST_CASE("interrupted training resumes to the same result") {
  CliFixture fx("resume");
  fx.write("r.cfg", fx.tiny_config_text(50) + "train.checkpoint_every = 25\n");
  const auto cfg = fx.path("r.cfg");
  REQUIRE(fx.run({"--config", cfg, "--out", fx.path("full.ckpt"), "--quiet", "train", "--metrics",
                  fx.path("full.jsonl")})
              .code == 0);
  REQUIRE(fx.run({"--config", cfg, "--out", fx.path("part.ckpt"), "--quiet", "train", "--metrics",
                  fx.path("part.jsonl"), "--stop-after", "25"})
              .code == 0);
  CHECK(avsd::load_checkpoint(fx.path("part.ckpt")).step == 25);
  REQUIRE(fx.run({"--config", cfg, "--out", fx.path("part.ckpt"), "--quiet", "train", "--metrics",
                  fx.path("part.jsonl"), "--resume", fx.path("part.ckpt")})
              .code == 0);
  CHECK(read_file(fx.path("part.ckpt")) == read_file(fx.path("full.ckpt")));
  CHECK(payload_lines(read_file(fx.path("part.jsonl"))) == payload_lines(read_file(fx.path("full.jsonl"))));
}

TEST_CASE("pool command") {
  CliFixture fx("pool");
  fx.write("in.jsonl", worked_example_record() + "\nnot json\n");
  const std::vector<std::string> args{"--quiet", "pool", "--in", fx.path("in.jsonl")};
  const auto a = fx.run(args);
  const auto b = fx.run(args);
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
  const auto lines = payload_lines(a.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0].find("\"qstar\"") != std::string::npos);
  CHECK(lines[1].find("\"error\"") != std::string::npos);
}
