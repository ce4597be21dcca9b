#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"

using namespace supermart;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("supermart_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run_cli(const std::string& args) {
  const int status = std::system((std::string(SUPERMART_CLI) + " " + args + " 2>/dev/null >/dev/null").c_str());
  return WEXITSTATUS(status);
}

json deterministic_model() {
  return json::parse(R"({"types": 2, "Q": [[-1, 1], [1, -1]], "beta": [1, 1], "alpha": [0, 0],
    "kernels": [{"kind": "stable", "gamma": 0, "alpha": 1.5}, {"kind": "stable", "gamma": 0, "alpha": 1.5}]})");
}

}  // namespace

TEST_CASE("deterministic scenario is consistent everywhere") {
  const auto dir = scratch("det");
  json config = {{"model", deterministic_model()}, {"seed", 1},
                 {"sim", {{"dt", 0.01}, {"horizon", 4}, {"paths", 20}}},
                 {"output", (dir / "out").string()}};
  std::ostringstream log;
  const int code = run_scenario(config, {}, log);
  INFO(log.str());
  REQUIRE(code == kExitOk);
  for (const char* f : {"model.json", "eigen.json", "criteria.json", "paths.csv", "functionals.csv",
                        "rates.json", "summary.json"})
    CHECK(fs::exists(dir / "out" / f));
  const auto summary = read_json_file((dir / "out" / "summary.json").string());
  CHECK(summary["meta"]["tool"] == "supermart");
  for (const auto& c : summary["data"]["clauses"]) {
    INFO(c.dump());
    CHECK(c["verdict"] == "consistent");
  }
  std::ifstream paths(dir / "out" / "paths.csv");
  std::string first;
  std::getline(paths, first);
  CHECK(first.rfind("# supermart", 0) == 0);
}

TEST_CASE("scenario exit codes") {
  const auto dir = scratch("codes");
  std::ostringstream log;
  json missing = {{"model", deterministic_model()}, {"seed", 1}, {"output", dir.string()}};
  missing["model"].erase("kernels");
  CHECK(run_scenario(missing, {}, log) == kExitSchema);
  CHECK(log.str().find("/model/kernels") != std::string::npos);

  json no_seed = {{"model", deterministic_model()}, {"output", dir.string()}};
  CHECK(run_scenario(no_seed, {}, log) == kExitSchema);

  json bad = {{"model", deterministic_model()}, {"seed", 1}, {"output", dir.string()}};
  bad["model"]["Q"][0][0] = -0.5;
  log.str("");
  const int code = run_scenario(bad, {}, log);
  INFO(log.str());
  CHECK(code == kExitModel);
}

TEST_CASE("command line front end") {
  const auto dir = scratch("front");
  const auto model = (dir / "model.json").string();
  write_text_file(model, json::parse(R"({"types": 1, "Q": [[0]], "beta": [1], "alpha": [0.5],
    "kernels": [{"kind": "stable", "gamma": 1, "alpha": 1.5}]})").dump());
  CHECK(run_cli("eigen --model " + model + " --out " + (dir / "eigen.json").string()) == 0);
  const auto eig = read_json_file((dir / "eigen.json").string());
  CHECK(eig["lambda"].get<double>() == Catch::Approx(1.0));
  CHECK(eig["gap"] == "inf");

  CHECK(run_cli("criteria --model " + model + " --p 1.2 --p 1.8 --gamma 1 --F 1 --out " +
                (dir / "criteria.json").string()) == 0);
  const auto crit = read_json_file((dir / "criteria.json").string());
  CHECK(crit["p"].size() == 2);
  CHECK(crit["p"][1]["p_moment"] == "inf");

  const auto sim = (dir / "sim").string();
  CHECK(run_cli("simulate csbp --model " + model + " --seed 3 --paths 50 --dt 0.01 --horizon 2 --out " + sim) == 0);
  CHECK(fs::exists(fs::path(sim) / "paths.csv"));
  CHECK(run_cli("functionals " + sim + "/paths.csv --jumps " + sim + "/jumps.csv --model " + model +
                " --out " + (dir / "f.csv").string()) == 0);
  std::ifstream f(dir / "f.csv");
  std::string header;
  std::getline(f, header);
  CHECK(header == "path_id,kind,t,value");
  CHECK(run_cli("rates " + sim + "/paths.csv " + (dir / "criteria.json").string() + " --out " +
                (dir / "rates").string()) == 0);
  CHECK(read_json_file((dir / "rates" / "rates.json").string())["fits"].size() == 2);

  CHECK(run_cli("simulate csbp --model " + model + " --paths 5 --out " + sim) == kExitSchema);
  CHECK(run_cli("eigen --model " + (dir / "nothing.json").string()) == kExitSchema);
  CHECK(run_cli("verify transform") == 0);
  CHECK(run_cli("verify nonsense") == kExitSchema);
}
