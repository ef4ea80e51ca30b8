#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <string>

#include "fcrseg/metrics.hpp"
#include "test_util.hpp"

namespace {

struct Run {
  int status = -1;
  std::string output;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(FCRSEG_CLI) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe)) r.output += buf;
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit with 2") {
  CHECK(run("").status != 0);
  CHECK(run("--help").status == 0);
  CHECK(run("no-such-command").status == 2);
  CHECK(run("eval --pred x").status == 2);
  CHECK(run("train --epochs zero").status == 2);
  CHECK(run("train --no_such_key 1").status == 2);
  CHECK(run("synth --out x --density 2").status == 2);
  CHECK(run("predict --model m --input i --out o --connectivity 6").status == 2);
}

TEST_CASE("runtime failures exit with 1") {
  testing_util::TempDir dir("cli_fail");
  const Run r = run("eval --pred " + (dir.path() / "none").string() + " --gt " + (dir.path() / "none").string());
  CHECK(r.status == 1);
  CHECK(contains(r.output, "error"));
  CHECK(run("color-check " + (dir.path() / "missing.png").string()).status == 1);
}

TEST_CASE("synth, self-evaluation, colour check and report") {
  testing_util::TempDir dir("cli");
  const std::string data = (dir.path() / "data").string();
  REQUIRE(run("synth --n 5 --size 64 --seed 2 --out " + data).status == 0);
  CHECK(std::filesystem::exists(dir.path() / "data" / "manifest.txt"));

  const std::string labels = (dir.path() / "data" / "labels").string();
  const std::string csv = (dir.path() / "self.csv").string();
  const Run e = run("eval --pred " + labels + " --gt " + labels + " --report " + csv);
  REQUIRE(e.status == 0);
  const fcrseg::EvalReport rep = fcrseg::read_report_csv(csv);
  CHECK(rep.per_image.size() == 5);
  CHECK(rep.means.aji == doctest::Approx(1.0));
  CHECK(rep.means.f1 == doctest::Approx(1.0));

  for (const auto& entry : std::filesystem::directory_iterator(labels)) {
    const Run c = run("color-check " + entry.path().string());
    CHECK(c.status == 0);
    CHECK(contains(c.output, "4-colorable yes"));
    CHECK(contains(c.output, "objects "));
  }
}

TEST_CASE("train, predict and report end to end") {
  testing_util::TempDir dir("cli_train");
  const std::string out = (dir.path() / "run").string();
  const Run t = run("train --synth-n 5 --input_height 32 --input_width 32 --base_filters 2 --depth 3 "
                    "--epochs 2 --eval_every 1 --out_dir " + out);
  REQUIRE_MESSAGE(t.status == 0, t.output);
  for (const char* f : {"config.txt", "train.log", "eval.log", "best.ckpt", "last.ckpt", "eval.csv"})
    CHECK_MESSAGE(std::filesystem::exists(dir.path() / "run" / f), f);

  const std::string data = (dir.path() / "data").string();
  REQUIRE(run("synth --n 2 --size 48 --out " + data).status == 0);
  const std::string pred = (dir.path() / "pred").string();
  const Run p = run("predict --overlay --model " + out + "/best.ckpt --input " + data + "/images --out " + pred);
  REQUIRE_MESSAGE(p.status == 0, p.output);
  int pngs = 0;
  for (const auto& entry : std::filesystem::directory_iterator(pred)) pngs += entry.path().extension() == ".png";
  CHECK(pngs == 4);
  CHECK(run("eval --pred " + pred + " --gt " + data + "/labels").status == 0);

  const Run r = run("report --eval " + out + "/eval.csv --model " + out + "/best.ckpt");
  REQUIRE(r.status == 0);
  CHECK(contains(r.output, "| Dice2 | AJI | F1-score | PQ | #Parameters |"));
}

}  // TEST_SUITE
