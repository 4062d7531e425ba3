#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "dcpf/config.hpp"
#include "dcpf/errors.hpp"
#include "dcpf/io.hpp"
#include "dcpf/nn.hpp"
#include "test_util.hpp"

using namespace dcpf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_CASE("grid json: shipped assets load and validate") {
  Grid g14 = load_grid(dcpf::test::repo_root() / "grids" / "ieee14.json");
  CHECK(g14.name == "ieee14");
  Grid g36 = load_grid(dcpf::test::repo_root() / "grids" / "synth36.json");
  CHECK(g36.n_substations == 36);
  CHECK(g36.n_lines() == 58);
  CHECK(g36.n_generators() == 22);
  CHECK(g36.n_loads() == 37);
}

TEST_CASE("grid json: malformed documents are rejected with clear errors") {
  json base = read_json_file(dcpf::test::repo_root() / "grids" / "ieee14.json");

  json bad = base;
  bad["lines"][0]["x"] = 0.0;
  CHECK_THROWS_AS(grid_from_json(bad), DataError);

  bad = base;
  bad["generators"][0]["sub"] = 99;
  CHECK_THROWS_AS(grid_from_json(bad), DataError);

  bad = base;
  bad["lines"][0]["to"] = bad["lines"][0]["from"];
  CHECK_THROWS_AS(grid_from_json(bad), DataError);

  bad = base;
  bad.erase("slack");
  CHECK_THROWS_AS(grid_from_json(bad), DataError);

  // disconnected base graph: two substations, no lines at all
  json island = {{"name", "x"},       {"substations", 2},
                 {"slack", 0},        {"lines", json::array()},
                 {"generators", {{{"id", "g"}, {"sub", 0}, {"p_nominal", 1.0}}}},
                 {"loads", {{{"id", "d"}, {"sub", 1}, {"p_nominal", 1.0}}}}};
  CHECK_THROWS_AS(grid_from_json(island), DataError);
}

TEST_CASE("f64 files round-trip exactly and reject short reads") {
  auto dir = dcpf::test::temp_dir("f64");
  std::vector<double> values = {0.1, -1e300, 5e-324, 0.0, 3.141592653589793};
  write_f64_file(dir / "a.f64", values);
  CHECK(read_f64_file(dir / "a.f64", values.size()) == values);
  CHECK_THROWS_AS(read_f64_file(dir / "a.f64", values.size() + 1), DataError);
}

TEST_CASE("dataset save/load round-trips every array exactly") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 25;
  sc.seed = 55;
  sc.disconnection_rule = DisconnectionRule::ExactlyTwo;
  Dataset ds = generate_dataset(g, Split::Ood, sc, ExecPolicy::Serial);
  ds.manifest.grid_name = g.name;

  auto dir = dcpf::test::temp_dir("dataset");
  save_dataset(dir, ds);
  Dataset back = load_dataset(dir);

  CHECK(back.split == Split::Ood);
  CHECK(back.manifest.grid_name == "ieee14");
  CHECK(back.manifest.config.seed == 55);
  CHECK(back.manifest.config.disconnection_rule == DisconnectionRule::ExactlyTwo);
  REQUIRE(back.size() == ds.size());
  for (int i = 0; i < ds.size(); ++i) {
    CHECK(back.samples[i].tau == ds.samples[i].tau);
    CHECK(back.samples[i].inj.p_prod == ds.samples[i].inj.p_prod);
    CHECK(back.samples[i].inj.p_load == ds.samples[i].inj.p_load);
    CHECK(back.samples[i].theta_bus_slots == ds.samples[i].theta_bus_slots);
    CHECK(back.samples[i].theta_or == ds.samples[i].theta_or);
    CHECK(back.samples[i].theta_ex == ds.samples[i].theta_ex);
    CHECK(back.samples[i].flows.p_or == ds.samples[i].flows.p_or);
    CHECK(back.samples[i].flows.p_ex == ds.samples[i].flows.p_ex);
  }
}

TEST_CASE("dataset rewrite is byte-identical (manifest and arrays)") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 30;
  sc.seed = 91;
  Dataset ds = generate_dataset(g, Split::Train, sc);

  auto dir_a = dcpf::test::temp_dir("bytes_a");
  auto dir_b = dcpf::test::temp_dir("bytes_b");
  save_dataset(dir_a, ds);
  Dataset regen = generate_dataset(g, Split::Train, sc);  // fresh generation
  save_dataset(dir_b, regen);

  for (const auto& entry : fs::directory_iterator(dir_a)) {
    const auto name = entry.path().filename();
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  }
}

TEST_CASE("checkpoint save/load restores parameters, stats, and config") {
  Grid g = dcpf::test::four_bus_grid();
  ScenarioConfig sc;
  sc.n_samples = 30;
  sc.seed = 5;
  Dataset train = generate_dataset(g, Split::Train, sc, ExecPolicy::Serial);
  sc.seed = 6;
  Dataset val = generate_dataset(g, Split::Val, sc, ExecPolicy::Serial);

  TrainConfig cfg;
  cfg.model_kind = ModelKind::Pimp;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.epochs = 2;
  cfg.pimp_layers = 7;
  cfg.seed = 42;
  TrainResult tr = train_model(g, train, val, cfg);

  auto dir = dcpf::test::temp_dir("ckpt");
  save_checkpoint(dir, tr.checkpoint);
  Checkpoint back = load_checkpoint(dir);

  CHECK(back.grid_name == g.name);
  CHECK(back.config.model_kind == ModelKind::Pimp);
  CHECK(back.config.pimp_layers == 7);
  CHECK(back.config.seed == 42);
  CHECK(back.norm.mean == tr.checkpoint.norm.mean);
  CHECK(back.norm.stdev == tr.checkpoint.norm.stdev);
  REQUIRE(back.params.layers.size() == tr.checkpoint.params.layers.size());
  for (size_t l = 0; l < back.params.layers.size(); ++l) {
    CHECK(back.params.layers[l].w == tr.checkpoint.params.layers[l].w);
    CHECK(back.params.layers[l].b == tr.checkpoint.params.layers[l].b);
  }

  // loaded checkpoint predicts identically
  PredictionSet a = predict_dataset(tr.checkpoint, g, val, ExecPolicy::Serial);
  PredictionSet b = predict_dataset(back, g, val, ExecPolicy::Serial);
  CHECK(a.theta_line == b.theta_line);
}

TEST_CASE("run config: defaults materialize and overrides stick") {
  RunConfig def = RunConfig::defaults();
  CHECK(def.scenario.at(Split::Train).n_samples == 10000);
  CHECK(def.scenario.at(Split::Val).n_samples == 1000);
  CHECK(def.scenario.at(Split::Test).disconnection_rule == DisconnectionRule::ExactlyOne);
  CHECK(def.scenario.at(Split::Ood).disconnection_rule == DisconnectionRule::ExactlyTwo);
  CHECK(def.train.at(ModelKind::Mlp).lambda_physics == 0.0);
  CHECK(def.train.at(ModelKind::Pimp).pimp_layers == 50);
  CHECK(def.train.at(ModelKind::Pimp).hidden_layers == 4);
  CHECK(def.train.at(ModelKind::Pimp).hidden_width == 256);

  json j = to_json(def);
  RunConfig round = run_config_from_json(j);
  CHECK(to_json(round) == j);  // defaults are fully materialized

  json partial = {{"grid", "grids/synth36.json"},
                  {"scenario", {{"train", {{"n_samples", 123}}}}},
                  {"train", {{"pimp", {{"pimp_layers", 25}}}}}};
  RunConfig c = run_config_from_json(partial);
  CHECK(c.grid_path == "grids/synth36.json");
  CHECK(c.scenario.at(Split::Train).n_samples == 123);
  CHECK(c.scenario.at(Split::Train).p_unchanged == 0.3);  // untouched default
  CHECK(c.train.at(ModelKind::Pimp).pimp_layers == 25);

  json bad = {{"train", {{"pimp", {{"model_kind", "mlp"}}}}}};
  CHECK_THROWS_AS(run_config_from_json(bad), ConfigError);
}

TEST_CASE("report json carries undefined markers instead of NaN") {
  MetricReport r;
  r.mae = 0.5;
  r.mape90 = std::nullopt;
  json j = to_json(r);
  CHECK(j.at("mape90") == "undefined");
  CHECK(j.dump().find("nan") == std::string::npos);
}
