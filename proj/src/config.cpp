#include "dcpf/config.hpp"

#include "dcpf/errors.hpp"

namespace dcpf {

RunConfig RunConfig::defaults() {
  RunConfig c;

  ScenarioConfig base;
  base.p_unchanged = 0.3;
  base.max_reconfigured_substations = 2;
  base.load_scale_lo = 0.8;
  base.load_scale_hi = 1.2;

  // desk-scale counts; seeds differ per split (val shares the train
  // distribution but not the stream)
  ScenarioConfig train_sc = base;
  train_sc.n_samples = 10000;
  train_sc.seed = 1001;
  train_sc.disconnection_rule = DisconnectionRule::AtMostOne;
  ScenarioConfig val_sc = base;
  val_sc.n_samples = 1000;
  val_sc.seed = 1002;
  val_sc.disconnection_rule = DisconnectionRule::AtMostOne;
  ScenarioConfig test_sc = base;
  test_sc.n_samples = 1000;
  test_sc.seed = 1003;
  test_sc.disconnection_rule = DisconnectionRule::ExactlyOne;
  ScenarioConfig ood_sc = base;
  ood_sc.n_samples = 1000;
  ood_sc.seed = 1004;
  ood_sc.disconnection_rule = DisconnectionRule::ExactlyTwo;

  c.scenario = {{Split::Train, train_sc},
                {Split::Val, val_sc},
                {Split::Test, test_sc},
                {Split::Ood, ood_sc}};

  TrainConfig mlp;
  mlp.model_kind = ModelKind::Mlp;
  mlp.lambda_physics = 0.0;  // no physics term in the plain regression
  TrainConfig mlp_reg;
  mlp_reg.model_kind = ModelKind::MlpReg;
  mlp_reg.lambda_physics = 1.0;
  TrainConfig pimp;
  pimp.model_kind = ModelKind::Pimp;
  pimp.lambda_physics = 1.0;
  pimp.pimp_layers = 50;

  c.train = {{ModelKind::Mlp, mlp}, {ModelKind::MlpReg, mlp_reg}, {ModelKind::Pimp, pimp}};
  return c;
}

json to_json(const BenchConfig& c) {
  return json{{"n_runs", c.n_runs},
              {"seeds", c.seeds},
              {"timing_repeats", c.timing_repeats},
              {"train_sizes", c.train_sizes},
              {"thresholds", to_json(c.thresholds)}};
}

BenchConfig bench_config_from_json(const json& j, const BenchConfig& defaults) {
  BenchConfig c = defaults;
  if (j.contains("n_runs")) c.n_runs = j.at("n_runs").get<int>();
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("timing_repeats")) c.timing_repeats = j.at("timing_repeats").get<int>();
  if (j.contains("train_sizes")) c.train_sizes = j.at("train_sizes").get<std::vector<int>>();
  if (j.contains("thresholds"))
    c.thresholds = thresholds_from_json(j.at("thresholds"), c.thresholds);
  if (c.n_runs < 1 || c.timing_repeats < 1)
    throw ConfigError("bench config: counts must be >= 1");
  while (static_cast<int>(c.seeds.size()) < c.n_runs)
    c.seeds.push_back(c.seeds.empty() ? 1 : c.seeds.back() + 1);
  return c;
}

json to_json(const RunConfig& c) {
  json scenario;
  for (const auto& [split, sc] : c.scenario) scenario[to_string(split)] = to_json(sc);
  json train;
  for (const auto& [kind, tc] : c.train) train[to_string(kind)] = to_json(tc);
  return json{{"grid", c.grid_path},
              {"output_dir", c.output_dir},
              {"deterministic", c.deterministic},
              {"scenario", scenario},
              {"train", train},
              {"mp", to_json(c.mp)},
              {"bench", to_json(c.bench)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c = RunConfig::defaults();
  if (j.contains("grid")) c.grid_path = j.at("grid").get<std::string>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  if (j.contains("deterministic")) c.deterministic = j.at("deterministic").get<bool>();
  if (j.contains("scenario"))
    for (auto& [split, sc] : c.scenario)
      if (j.at("scenario").contains(to_string(split)))
        sc = scenario_config_from_json(j.at("scenario").at(to_string(split)), sc);
  if (j.contains("train"))
    for (auto& [kind, tc] : c.train)
      if (j.at("train").contains(to_string(kind))) {
        tc = train_config_from_json(j.at("train").at(to_string(kind)), tc);
        if (tc.model_kind != kind)
          throw ConfigError("train." + to_string(kind) + ": model_kind must stay " +
                            to_string(kind));
      }
  if (j.contains("mp")) c.mp = mp_config_from_json(j.at("mp"), c.mp);
  if (j.contains("bench")) c.bench = bench_config_from_json(j.at("bench"), c.bench);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw ConfigError("config file '" + path.string() + "' does not exist");
  return run_config_from_json(read_json_file(path));
}

}  // namespace dcpf
