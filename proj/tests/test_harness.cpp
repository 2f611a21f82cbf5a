#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "latgas/harness.hpp"

using namespace latgas;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "latgas_unit" / name;
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json tasep_config() {
  return json::parse(R"({
    "model": {"type": "exclusion", "capacity": 1, "kernel": "tasep"},
    "domain": {"normal": [1], "a": 0, "b": 1},
    "boundary": {"lambda_a": 0.9, "lambda_b": 0.2},
    "initial": {"type": "step", "left": 0.9, "right": 0.2},
    "N": [40],
    "replicas": 2,
    "times": [0.1, 0.2],
    "cell_width": 0.1,
    "pde": {"dx": 0.01},
    "phases": {"resolution": 20, "expected": 3},
    "seed": 99
  })");
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(tasep_config());
  CHECK(cfg.lambda_a == 0.9);
  CHECK(cfg.N == std::vector<int>{40});
  CHECK(cfg.initial.kind == InitialSpec::Kind::Step);
  CHECK(cfg.initial.at == 0.5);
  CHECK(cfg.seed == 99);
  CHECK(initial_field(cfg)(Eigen::VectorXd::Constant(1, 0.25)) == 0.9);
  CHECK(config_flux(cfg)(0.5) == doctest::Approx(0.25));

  SUBCASE("model presets") {
    CHECK(parse_model(json::parse(R"({"type": "zero_range", "kernel": "tasep", "g": [0, 1]})")).capacity() == kUnbounded);
    const auto ot = parse_model(json::parse(R"({"type": "overtaking", "dim": 2, "weights": [[1], [], [0.5], [0.5]]})"));
    CHECK(ot.is_overtaking());
    CHECK(ot.dim() == 2);
    const auto k = parse_model(json::parse(R"({"type": "exclusion", "capacity": 3,
        "kernel": [{"z": [1], "p": 0.75}, {"z": [-1], "p": 0.25}]})"));
    CHECK(k.misanthrope().kernel.drift()(0) == doctest::Approx(0.5));
  }
  SUBCASE("perturbed domain") {
    std::string shape;
    double width = 0.0;
    const auto d = parse_domain(json::parse(R"({"normal": [1, 0], "a": 0, "b": 1, "shape": "notched",
        "a_outer": -0.25, "width": 2})"), &shape, &width);
    CHECK(shape == "notched");
    CHECK(width == 2.0);
    CHECK(d.a_outer == -0.25);
  }
  SUBCASE("errors") {
    auto bad = tasep_config();
    bad["boundary"]["lambda_a"] = 1.4;
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tasep_config();
    bad["model"]["type"] = "mystery";
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tasep_config();
    bad["model"].erase("type");
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tasep_config();
    bad["coupling"] = {{"c", 0.5}};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    bad = tasep_config();
    bad["phases"]["flux"] = {{"type", "csv"}, {"file", "missing.csv"}};
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
    CHECK_THROWS_AS(load_config(scratch("none") / "absent.json"), ConfigError);

    const fs::path dir = scratch("garbled");
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << "{ not json";
    CHECK_THROWS_AS(load_config(dir / "cfg.json"), ConfigError);
  }
  SUBCASE("shipped configs load") {
    for (const auto& entry : fs::directory_iterator(LATGAS_CONFIG_DIR))
      if (entry.path().extension() == ".json") CHECK_NOTHROW(load_config(entry.path()));
  }
}

TEST_CASE("config hash") {
  auto j = tasep_config();
  const auto base = config_hash(parse_config(j));
  j["workers"] = 8;
  j["output_dir"] = "elsewhere";
  CHECK(config_hash(parse_config(j)) == base);
  j["seed"] = 100;
  CHECK(config_hash(parse_config(j)) != base);
  auto cfg = parse_config(tasep_config());
  cfg.seed = 100;
  CHECK(config_hash(cfg) != base);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 2.5e-17, -7.0}) CHECK(std::stod(fmt(v)) == v);
  CHECK(fmt(42LL) == "42");
}

TEST_CASE("reports") {
  const auto cfg = parse_config(tasep_config());
  SUBCASE("emit creates the directory and names files by hash") {
    const fs::path out = scratch("emit") / "nested";
    Report r;
    r.command = "demo";
    r.summary["x"] = 1;
    r.tables.push_back({"t", {"a", "b"}, {{"1", "2"}}});
    const auto files = emit_report(r, cfg, out);
    REQUIRE(files.size() == 2);
    CHECK(fs::exists(out));
    CHECK(slurp(files[0]) == "a,b\n1,2\n");
    const auto summary = json::parse(slurp(files[1]));
    CHECK(summary["command"] == "demo");
    CHECK(summary["passed"] == true);
    CHECK(files[1].filename().string().find(summary["config_hash"].get<std::string>()) != std::string::npos);
  }
  SUBCASE("validate") {
    CHECK(run_validate(cfg).passed);
    auto j = tasep_config();
    j["model"] = json::parse(R"({"type": "table", "capacity": 2, "kernel": "tasep",
        "rates": [[0, 0, 0], [1, 2, 0], [2, 3, 0]]})");
    CHECK_FALSE(run_validate(parse_config(j)).passed);
  }
  SUBCASE("phase diagram export is readable by the classifier") {
    const auto rep = run_phases(cfg);
    CHECK(rep.passed);
    const auto files = emit_report(rep, cfg, scratch("phases"));
    std::ifstream in(files[0]);
    const auto back = read_phase_csv(in);
    CHECK(back.phase_count == 3);
  }
  SUBCASE("solve") {
    const auto rep = run_solve(cfg);
    CHECK(rep.passed);
    CHECK(rep.summary["mass_balance_error"].get<double>() < 1e-12);
  }
  SUBCASE("reruns are byte-identical") {
    auto j = tasep_config();
    j["workers"] = 2;
    const auto c2 = parse_config(j);
    const auto a = emit_report(run_simulate(c2), c2, scratch("rerun_a"));
    const auto b = emit_report(run_simulate(cfg), cfg, scratch("rerun_b"));
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
      CHECK(a[k].filename() == b[k].filename());
      CHECK(slurp(a[k]) == slurp(b[k]));
    }
  }
  SUBCASE("hydrodynamic rows") {
    const auto rows = hydrodynamic_rows(cfg);
    CHECK(rows.size() == 2);
    for (const auto& row : rows) {
      CHECK(row.N == 40);
      CHECK(row.distance >= 0.0);
      CHECK(row.distance < 0.5);
    }
  }
}
