#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "test_util.hpp"

#ifndef UADRIVE_CLI_PATH
#define UADRIVE_CLI_PATH ""
#endif

namespace fs = std::filesystem;
using uadrive::testing::TempDir;

namespace {

int run_cli(const std::string& args, const fs::path& capture) {
  const std::string command = std::string("\"") + UADRIVE_CLI_PATH + "\" " + args + " >\"" +
                              capture.string() + "\" 2>&1";
  const int raw = std::system(command.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("CLI exit codes: usage, config, success and divergence") {
  if (std::string(UADRIVE_CLI_PATH).empty()) {
    MESSAGE("uadrive CLI not built; skipping");
    return;
  }
  TempDir dir("cli");
  const fs::path out = dir / "out.txt";

  CHECK(run_cli("train --scenario 5", out) == 1);
  CHECK(run_cli("frobnicate", out) == 1);
  CHECK(run_cli("train --scenario 1 --config " + (dir / "missing.cfg").string(), out) == 2);
  {
    std::ofstream bad(dir / "bad.cfg");
    bad << "gamma = 2\n";
  }
  CHECK(run_cli("train --scenario 1 --config " + (dir / "bad.cfg").string(), out) == 2);
  CHECK(run_cli("test --policy " + (dir / "none.ckpt").string() + " --case vevv", out) == 2);

  const fs::path run = dir / "run";
  REQUIRE(run_cli("train --scenario 3 --steps 10000 --quiet --out " + run.string(), out) == 0);
  CHECK(fs::exists(run / "best.ckpt"));
  CHECK(fs::exists(run / "manifest.json"));
  CHECK(slurp(run / "manifest.json").find("\"ok\"") != std::string::npos);

  const std::string policy = (run / "best.ckpt").string();
  CHECK(run_cli("test --policy " + policy + " --case xevv --episodes 1", out) == 1);
  CHECK(slurp(out).find("--allow-xevv") != std::string::npos);
  CHECK(run_cli("test --policy " + policy + " --case vevv --episodes 0", out) == 1);
  CHECK(run_cli("test --policy " + policy + " --case vevv --scenario4 --episodes 1 --out " +
                    (dir / "s4").string(),
                out) == 0);

  const fs::path tested = dir / "tested";
  REQUIRE(run_cli("test --policy " + policy + " --case mpc --episodes 2 --out " + tested.string(),
                  out) == 0);
  CHECK(fs::exists(tested / "metrics.csv"));
  CHECK(fs::exists(tested / "boxplot.csv"));
  fs::path log;
  for (const auto& e : fs::directory_iterator(tested / "logs"))
    if (e.path().extension() == ".jsonl") log = e.path();
  REQUIRE_FALSE(log.empty());
  CHECK(run_cli("replay --log " + log.string(), out) == 0);
  CHECK(run_cli("metrics --log " + log.string() + " --out " + (dir / "m.csv").string(), out) == 0);

  // Flip one logged reward; replay must report the divergence.
  std::string text = slurp(log);
  const auto pos = text.find("\"reward\":", text.find('\n'));
  REQUIRE(pos != std::string::npos);
  const auto digit = text.find_first_of("0123456789", pos);
  text[digit] = text[digit] == '9' ? '8' : static_cast<char>(text[digit] + 1);
  const fs::path tampered = dir / "tampered.jsonl";
  {
    std::ofstream o(tampered);
    o << text;
  }
  fs::copy_file(log.string() + ".obs", tampered.string() + ".obs");
  CHECK(run_cli("replay --log " + tampered.string(), out) == 4);
  CHECK(slurp(out).find("diverged at step") != std::string::npos);
}
