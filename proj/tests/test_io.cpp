#include <sstream>

#include "support.hpp"

using namespace supermart;
using namespace supermart::test;

namespace {

json stable_model_json() {
  return json::parse(R"({
    "types": 2,
    "Q": [[-1, 1], [2, -2]],
    "beta": [1.0, 0.5],
    "alpha": [0.5, 0.0],
    "kernels": [{"kind": "stable", "gamma": 1.0, "alpha": 1.5},
                {"kind": "atoms", "atoms": [[0.5, 2.0], [3.0, 0.1]]}]
  })");
}

std::string pointer_of(const json& j) {
  try {
    model_from_json(j);
  } catch (const SchemaError& e) {
    return e.pointer();
  }
  return "none";
}

}  // namespace

TEST_CASE("model JSON round trip") {
  const Model m = model_from_json(stable_model_json());
  CHECK(m.dim() == 2);
  CHECK(m.motion.q(1, 0) == 2.0);
  CHECK(std::get<AtomList>(m.mech.kernels[1]).atoms[1].mass == 3.0);
  CHECK(model_to_json(m) == stable_model_json());
}

TEST_CASE("schema errors carry a JSON pointer") {
  auto j = stable_model_json();
  j.erase("kernels");
  CHECK(pointer_of(j) == "/kernels");
  j = stable_model_json();
  j["Q"][0] = json::array({1});
  CHECK(pointer_of(j) == "/Q/0");
  j = stable_model_json();
  j["kernels"][1]["kind"] = "cauchy";
  CHECK(pointer_of(j) == "/kernels/1/kind");
  j = stable_model_json();
  j["kernels"][0].erase("gamma");
  CHECK(pointer_of(j) == "/kernels/0/gamma");
  try {
    model_from_json(json::parse(R"({"types": 1})"));
  } catch (const SchemaError& e) {
    CHECK(std::string(e.what()).find("at /Q") != std::string::npos);
  }
}

TEST_CASE("Galton-Watson model JSON") {
  const auto j = json::parse(R"({"kind": "gw", "pmf": [0.25, 0, 0.75]})");
  CHECK(is_gw_json(j));
  CHECK(gw_from_json(j).mean() == 1.5);
  CHECK_FALSE(is_gw_json(stable_model_json()));
  const auto p = gw_from_json(json::parse(R"({"kind": "gw_powerlaw", "alpha": 1.3})"));
  CHECK(p.kind == GWModel::Kind::power_law);
  CHECK(gw_to_json(p)["alpha"] == 1.3);
}

TEST_CASE("extended reals") {
  CHECK(extended(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(extended(std::nan("")).is_null());
  CHECK(std::isinf(extended_from_json("inf")));
  CHECK(std::isnan(extended_from_json(nullptr)));
  CHECK(extended_from_json(2.5) == 2.5);
}

TEST_CASE("paths CSV round trip is exact") {
  const Model m = model_from_json(stable_model_json());
  const auto eig = principal_eigentriple(m);
  SimConfig cfg;
  cfg.dt = 1e-2;
  cfg.horizon = 1.0;
  cfg.paths = 3;
  cfg.master_seed = 1;
  cfg.log_jumps = true;
  cfg.record_stride = 10;
  const auto paths = simulate_csbp(m, eig, cfg);
  std::stringstream ss, js;
  write_paths_csv(ss, paths, meta_line(0xabc, 1));
  write_jumps_csv(js, paths, meta_line(0xabc, 1));
  CHECK(ss.str().rfind("# supermart 0.1.0 config_hash=0000000000000abc seed=1\npath_id,t,mass_1,mass_2,M\n", 0) == 0);
  auto back = read_paths_csv(ss);
  read_jumps_csv(js, back);
  REQUIRE(back.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(back[k].times == paths[k].times);
    CHECK(back[k].masses == paths[k].masses);
    CHECK(back[k].M == paths[k].M);
    REQUIRE(back[k].jumps.size() == paths[k].jumps.size());
    for (std::size_t j = 0; j < back[k].jumps.size(); ++j) {
      CHECK(back[k].jumps[j].type == paths[k].jumps[j].type);
      CHECK(back[k].jumps[j].size == paths[k].jumps[j].size);
    }
  }
}

TEST_CASE("eigen JSON layout") {
  const Model m = model_from_json(stable_model_json());
  const auto j = eigen_to_json(m, principal_eigentriple(m));
  for (const char* key : {"lambda", "phi", "nu", "gap", "c_curve"}) CHECK(j.contains(key));
  CHECK(j["c_curve"].size() == 100);
  CHECK(j["c_curve"][0].size() == 2);
}

TEST_CASE("hash and number formatting") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
