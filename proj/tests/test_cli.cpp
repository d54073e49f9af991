#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#ifndef M2PO_CLI_PATH
#error "M2PO_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

RunResult run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path();
  const fs::path out = dir / ("m2po_cli_out_" + std::to_string(counter));
  const fs::path err = dir / ("m2po_cli_err_" + std::to_string(counter));
  ++counter;
  const std::string cmd = env + (env.empty() ? "" : " ") + M2PO_CLI_PATH + " " +
                          args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult res;
  res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  res.out = slurp(out);
  res.err = slurp(err);
  fs::remove(out);
  fs::remove(err);
  return res;
}

struct Workspace {
  fs::path dir;
  Workspace() {
    dir = fs::temp_directory_path() /
          ("m2po_cli_ws_" + std::to_string(::getpid()) + "_" +
           std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(dir);
  }
  ~Workspace() { fs::remove_all(dir); }

  std::string path(const std::string& name) const {
    return (dir / name).string();
  }

  std::string write_config(const nlohmann::json& j) {
    const std::string p = path("config.json");
    std::ofstream f(p);
    f << j.dump(2) << "\n";
    return p;
  }
};

nlohmann::json small_config() {
  return nlohmann::json{
      {"seed", 7},
      {"gen", {{"n_sources", 10}, {"k", 16}}},
      {"train", {{"epochs", 1}, {"batch_size", 4}, {"heldout_fraction", 0.2}}},
  };
}

}  // namespace

TEST_CASE("gen writes the configured number of pools and candidates") {
  Workspace ws;
  const std::string cfg = ws.write_config(small_config());
  const auto res =
      run("gen --config " + cfg + " --out " + ws.path("corpus.jsonl"));
  CAPTURE(res.err);
  REQUIRE(res.exit_code == 0);
  CHECK(res.out.find("wrote 10 pools, 160 candidates") != std::string::npos);
  CHECK(fs::exists(ws.path("corpus.jsonl")));
  CHECK(fs::exists(ws.path("corpus.jsonl") + ".src_vocab.txt"));
  CHECK(fs::exists(ws.path("corpus.jsonl") + ".tgt_vocab.txt"));

  std::ifstream f(ws.path("corpus.jsonl"));
  std::string line;
  int lines = 0;
  while (std::getline(f, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    CHECK(j["candidates"].size() == 16);
    ++lines;
  }
  CHECK(lines == 10);
}

TEST_CASE("gen output is byte-identical across runs") {
  Workspace ws;
  const std::string cfg = ws.write_config(small_config());
  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("a.jsonl")).exit_code == 0);
  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("b.jsonl")).exit_code == 0);
  CHECK(slurp(ws.path("a.jsonl")) == slurp(ws.path("b.jsonl")));
}

TEST_CASE("seed precedence: --seed beats M2PO_SEED beats the default") {
  Workspace ws;
  nlohmann::json j = small_config();
  j.erase("seed");  // let the environment decide
  const std::string cfg = ws.write_config(j);

  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("d.jsonl")).exit_code == 0);
  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("e.jsonl"),
              "M2PO_SEED=123").exit_code == 0);
  REQUIRE(run("gen --config " + cfg + " --seed 123 --out " + ws.path("f.jsonl"),
              "M2PO_SEED=777").exit_code == 0);
  CHECK(slurp(ws.path("d.jsonl")) != slurp(ws.path("e.jsonl")));
  CHECK(slurp(ws.path("e.jsonl")) == slurp(ws.path("f.jsonl")));
}

TEST_CASE("invalid severity mix fails validation with exit code 1") {
  Workspace ws;
  nlohmann::json j = small_config();
  j["gen"]["severity_mix"] = {{"none", 0.9},
                              {"partial_hallucination", 0.9},
                              {"full_hallucination", 0.0},
                              {"partial_omission", 0.0},
                              {"full_omission", 0.0}};
  const std::string cfg = ws.write_config(j);
  const auto res =
      run("gen --config " + cfg + " --out " + ws.path("corpus.jsonl"));
  CHECK(res.exit_code == 1);
  CHECK(res.err.find("severity_mix") != std::string::npos);
}

TEST_CASE("score is idempotent and honors lambda_f overrides") {
  Workspace ws;
  const std::string cfg = ws.write_config(small_config());
  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("corpus.jsonl"))
              .exit_code == 0);
  REQUIRE(run("score --config " + cfg + " --corpus " + ws.path("corpus.jsonl") +
              " --out " + ws.path("scored.jsonl")).exit_code == 0);
  REQUIRE(run("score --config " + cfg + " --corpus " + ws.path("scored.jsonl") +
              " --out " + ws.path("rescored.jsonl")).exit_code == 0);
  CHECK(slurp(ws.path("scored.jsonl")) == slurp(ws.path("rescored.jsonl")));

  REQUIRE(run("score --config " + cfg + " --set reward/lambda_f=0 --corpus " +
              ws.path("corpus.jsonl") + " --out " + ws.path("nofaith.jsonl"))
              .exit_code == 0);
  std::ifstream f(ws.path("nofaith.jsonl"));
  std::string line;
  while (std::getline(f, line)) {
    nlohmann::json j = nlohmann::json::parse(line);
    for (const auto& card : j["scorecards"])
      CHECK(card["r_s"].get<double>() == card["r_qe"].get<double>());
  }
}

TEST_CASE("train, eval and analyze complete the pipeline") {
  Workspace ws;
  const std::string cfg = ws.write_config(small_config());
  REQUIRE(run("gen --config " + cfg + " --out " + ws.path("corpus.jsonl"))
              .exit_code == 0);
  REQUIRE(run("score --config " + cfg + " --corpus " + ws.path("corpus.jsonl") +
              " --out " + ws.path("scored.jsonl")).exit_code == 0);

  const auto tr = run("train --config " + cfg + " --corpus " +
                      ws.path("scored.jsonl") + " --out-dir " + ws.path("run"));
  CAPTURE(tr.err);
  REQUIRE(tr.exit_code == 0);
  CHECK(tr.out.find("final heldout") != std::string::npos);
  CHECK(fs::exists(ws.path("run/checkpoint.json")));
  CHECK(fs::exists(ws.path("run/metrics.jsonl")));
  CHECK(fs::exists(ws.path("run/summary.json")));
  CHECK(fs::exists(ws.path("run/pairs.jsonl")));

  const auto ev = run("eval --config " + cfg + " --checkpoint " +
                      ws.path("run/checkpoint.json") + " --corpus " +
                      ws.path("corpus.jsonl") + " --out " + ws.path("eval.json"));
  CAPTURE(ev.err);
  REQUIRE(ev.exit_code == 0);
  const auto j = nlohmann::json::parse(ev.out);
  CHECK(j.contains("mean_coverage"));
  CHECK(j.contains("exact_match"));
  CHECK(nlohmann::json::parse(slurp(ws.path("eval.json"))) == j);

  const auto an = run("analyze --config " + cfg + " --corpus " +
                      ws.path("corpus.jsonl") + " --out-dir " + ws.path("rep"));
  CAPTURE(an.err);
  REQUIRE(an.exit_code == 0);
  CHECK(fs::exists(ws.path("rep/report.json")));
  CHECK(fs::exists(ws.path("rep/report.txt")));
  const std::string csv = slurp(ws.path("rep/scatter.csv"));
  CHECK(csv.rfind("source_id,candidate,hallucination,omission,coverage,qe\n",
                  0) == 0);
}

TEST_CASE("exit codes distinguish usage, validation and runtime failures") {
  Workspace ws;
  // usage error: unknown subcommand
  CHECK(run("frobnicate").exit_code == 1);
  // usage error: missing required option
  CHECK(run("gen").exit_code == 1);
  // runtime error: config file does not exist
  const auto missing =
      run("gen --config " + ws.path("nope.json") + " --out " + ws.path("x"));
  CHECK(missing.exit_code == 2);
  // validation error: bad override value
  const std::string cfg = ws.write_config(small_config());
  CHECK(run("gen --config " + cfg + " --set train/epochs=0 --out " +
            ws.path("x.jsonl")).exit_code == 1);
  // runtime error: missing checkpoint
  CHECK(run("eval --config " + cfg + " --checkpoint " + ws.path("no.ckpt") +
            " --corpus " + ws.path("no.jsonl")).exit_code == 2);
}
