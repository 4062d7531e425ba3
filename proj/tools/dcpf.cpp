// dcpf — DC power-flow surrogate lab command line.
//
// Subcommands: generate, train, evaluate, benchmark, solve, report.
// Every output directory receives the fully resolved config that produced it.

#include <cstdio>
#include <iostream>

#include <CLI11.hpp>

#include "dcpf/benchmark.hpp"
#include "dcpf/config.hpp"
#include "dcpf/errors.hpp"
#include "dcpf/io.hpp"

namespace fs = std::filesystem;
using namespace dcpf;

namespace {

constexpr int kExitGeneric = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct CommonArgs {
  std::string config_path;
  std::string grid_path;
  std::string out_dir;
  bool deterministic = false;
};

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg =
      args.config_path.empty() ? RunConfig::defaults() : load_run_config(args.config_path);
  if (!args.grid_path.empty()) cfg.grid_path = args.grid_path;
  if (!args.out_dir.empty()) cfg.output_dir = args.out_dir;
  if (args.deterministic) cfg.deterministic = true;
  if (!fs::exists(cfg.grid_path))
    throw ConfigError("grid file '" + cfg.grid_path + "' does not exist");
  return cfg;
}

void persist_config(const RunConfig& cfg, const fs::path& dir) {
  fs::create_directories(dir);
  write_json_file(dir / "resolved_config.json", to_json(cfg));
}

Dataset load_split(const fs::path& data_dir, Split split, const Grid& grid) {
  const fs::path dir = data_dir / to_string(split);
  if (!fs::exists(dir / "manifest.json"))
    throw DataError("dataset split '" + dir.string() +
                    "' not found; run `dcpf generate` first");
  Dataset ds = load_dataset(dir);
  if (ds.manifest.grid_name != grid.name)
    throw DataError("dataset '" + dir.string() + "' was generated for grid '" +
                    ds.manifest.grid_name + "', not '" + grid.name + "'");
  return ds;
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t comma = csv.find(',', pos);
    if (comma == std::string::npos) comma = csv.size();
    seeds.push_back(std::stoull(csv.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

int cmd_generate(const RunConfig& cfg) {
  const Grid grid = load_grid(cfg.grid_path);
  const fs::path out = fs::path(cfg.output_dir) / "data" / grid.name;
  persist_config(cfg, out);
  for (Split split : {Split::Train, Split::Val, Split::Test, Split::Ood}) {
    const ScenarioConfig& sc = cfg.scenario.at(split);
    Dataset ds = generate_dataset(grid, split, sc, cfg.policy());
    save_dataset(out / to_string(split), ds);
    std::printf("wrote %s: %d samples (rule %s, seed %llu)\n",
                (out / to_string(split)).c_str(), ds.size(),
                to_string(sc.disconnection_rule).c_str(),
                static_cast<unsigned long long>(sc.seed));
  }
  return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& model, const std::string& seeds_csv,
              const std::string& data_dir_arg) {
  const Grid grid = load_grid(cfg.grid_path);
  const fs::path data_dir = data_dir_arg.empty()
                                ? fs::path(cfg.output_dir) / "data" / grid.name
                                : fs::path(data_dir_arg);
  const Dataset train_ds = load_split(data_dir, Split::Train, grid);
  const Dataset val_ds = load_split(data_dir, Split::Val, grid);

  const ModelKind kind = model_kind_from_string(model);
  TrainConfig tc = cfg.train.at(kind);
  if (cfg.deterministic) tc.threads = 1;

  const std::vector<std::uint64_t> seeds =
      seeds_csv.empty() ? std::vector<std::uint64_t>{tc.seed} : parse_seeds(seeds_csv);

  const fs::path out = fs::path(cfg.output_dir) / "runs" / grid.name / model;
  persist_config(cfg, out);
  for (std::uint64_t seed : seeds) {
    TrainConfig run_cfg = tc;
    run_cfg.seed = seed;
    TrainResult res = train_model(grid, train_ds, val_ds, run_cfg);
    const fs::path ckpt_dir = out / ("seed" + std::to_string(seed));
    save_checkpoint(ckpt_dir, res.checkpoint);
    write_train_report_csv(ckpt_dir / "train_report.csv", res.report);
    std::printf("trained %s seed %llu: best epoch %d, val loss %.3e, %.1fs -> %s\n",
                model.c_str(), static_cast<unsigned long long>(seed), res.report.best_epoch,
                res.report.val_loss[res.report.best_epoch], res.report.wall_seconds,
                ckpt_dir.c_str());
  }
  return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::string& model,
                 const std::string& checkpoint, const std::string& split_name,
                 int layers_override, const std::string& data_dir_arg) {
  const Grid grid = load_grid(cfg.grid_path);
  const fs::path data_dir = data_dir_arg.empty()
                                ? fs::path(cfg.output_dir) / "data" / grid.name
                                : fs::path(data_dir_arg);
  const Split split = split_from_string(split_name);
  const Dataset ds = load_split(data_dir, split, grid);
  EvalData eval = make_eval_data(grid, ds, cfg.policy());

  PredictionSet pred;
  std::string label;
  if (!checkpoint.empty()) {
    Checkpoint ckpt = load_checkpoint(checkpoint);
    pred = predict_dataset(ckpt, grid, ds, cfg.policy(), layers_override);
    label = to_string(ckpt.config.model_kind);
  } else if (model == "mp_opt") {
    MpConfig mp = cfg.mp;
    if (layers_override >= 0) mp.n_layers = layers_override;
    MpOptStats stats;
    pred = predict_mp_opt(eval, mp, cfg.policy(), &stats);
    label = "mp_opt";
    if (stats.n_not_converged > 0)
      std::fprintf(stderr, "warning: %d/%d samples did not reach tol %.1e in %d layers\n",
                   stats.n_not_converged, ds.size(), mp.tol, mp.n_layers);
    std::printf("mp_opt median convergence layer: %.0f\n", stats.median_layers);
  } else {
    throw ConfigError("evaluate needs either --checkpoint or --model mp_opt");
  }

  MetricReport ml = ml_metrics(pred, eval);
  PhysicsReport ph = physics_report(pred, eval, cfg.bench.thresholds);

  const fs::path out = fs::path(cfg.output_dir) / "eval" / grid.name /
                       (label + "_" + to_string(split));
  persist_config(cfg, out);
  write_json_file(out / "ml_metrics.json", to_json(ml));
  write_json_file(out / "physics.json", to_json(ph));
  std::printf("%s on %s: MAE %.3e, P5 violation %.2f%% -> %s\n", label.c_str(),
              to_string(split).c_str(), ml.mae, 100.0 * ph.p5_violation, out.c_str());
  return 0;
}

int cmd_benchmark(const RunConfig& cfg, const std::string& train_sizes_csv,
                  const std::string& data_dir_arg, int n_runs_override) {
  const Grid grid = load_grid(cfg.grid_path);
  const fs::path data_dir = data_dir_arg.empty()
                                ? fs::path(cfg.output_dir) / "data" / grid.name
                                : fs::path(data_dir_arg);
  const Dataset train_ds = load_split(data_dir, Split::Train, grid);
  const Dataset val_ds = load_split(data_dir, Split::Val, grid);
  const Dataset test_ds = load_split(data_dir, Split::Test, grid);
  const Dataset ood_ds = load_split(data_dir, Split::Ood, grid);

  BenchConfig bench = cfg.bench;
  if (n_runs_override > 0) {
    bench.n_runs = n_runs_override;
    while (static_cast<int>(bench.seeds.size()) < bench.n_runs)
      bench.seeds.push_back(bench.seeds.back() + 1);
  }
  if (!train_sizes_csv.empty()) {
    bench.train_sizes.clear();
    for (std::uint64_t v : parse_seeds(train_sizes_csv))
      bench.train_sizes.push_back(static_cast<int>(v));
  }

  std::map<ModelKind, TrainConfig> train_cfgs = cfg.train;
  if (cfg.deterministic)
    for (auto& [kind, tc] : train_cfgs) tc.threads = 1;

  BenchmarkInputs in{&grid, &train_ds, &val_ds, &test_ds, &ood_ds};
  const fs::path out = fs::path(cfg.output_dir) / "bench" / grid.name;
  persist_config(cfg, out);

  BenchmarkTable table = run_benchmark(in, train_cfgs, cfg.mp, bench, cfg.policy(), &out);
  table.resolved_config = to_json(cfg);
  write_json_file(out / "benchmark.json", to_json(table));
  write_text_file(out / "benchmark.md", render_markdown(table));

  if (!bench.train_sizes.empty()) {
    std::vector<std::uint64_t> seeds(bench.seeds.begin(),
                                     bench.seeds.begin() + bench.n_runs);
    for (const auto& [kind, tc] : train_cfgs) {
      std::vector<SweepCell> cells =
          train_size_sweep(in, kind, tc, bench.train_sizes, seeds, cfg.policy());
      write_sweep_csv(out / ("sweep_" + to_string(kind) + ".csv"), cells);
    }
  }
  std::printf("benchmark written to %s\n", (out / "benchmark.md").c_str());
  std::cout << render_markdown(table);
  return 0;
}

int cmd_solve(const RunConfig& cfg, int layers_override, double omega, bool as_json) {
  const Grid grid = load_grid(cfg.grid_path);
  const TopologyVector tau = TopologyVector::default_for(grid);
  Injection inj;
  for (const auto& g : grid.generators) inj.p_prod.push_back(g.p_nominal);
  for (const auto& d : grid.loads) inj.p_load.push_back(d.p_nominal);
  // nominal productions rescaled to match nominal load exactly
  double total_load = 0.0, total_cap = 0.0;
  for (double v : inj.p_load) total_load += v;
  for (double v : inj.p_prod) total_cap += v;
  for (double& v : inj.p_prod) v *= total_load / total_cap;

  SampleContext ctx = make_context(grid, tau, inj);
  PhasorSolution direct = solve_dc(ctx.Y, ctx.p, ctx.bg.slack_bus);

  MpConfig mp = cfg.mp;
  if (layers_override >= 0) mp.n_layers = layers_override;
  if (omega > 0.0) mp.omega = omega;
  MpSolveResult iter = mp_opt_solve(ctx.Y, ctx.p, ctx.bg.slack_bus, mp);

  double max_dtheta = 0.0;
  for (int b = 0; b < ctx.bg.n_buses; ++b)
    max_dtheta = std::max(max_dtheta, std::abs(direct.theta[b] - iter.theta[b]));
  const double direct_resid =
      max_nonslack_residual(lc_residual(direct.theta, ctx.p, ctx.Y), ctx.bg.slack_bus);

  if (as_json) {
    json j{{"grid", grid.name},
           {"buses", ctx.bg.n_buses},
           {"direct", {{"theta", direct.theta}, {"max_residual", direct_resid}}},
           {"mp_opt",
            {{"theta", iter.theta},
             {"layers_run", iter.layers_run},
             {"converged", iter.converged},
             {"max_residual", iter.final_residual}}},
           {"max_theta_difference", max_dtheta}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("grid %s: %d buses, slack bus %d\n", grid.name.c_str(), ctx.bg.n_buses,
                ctx.bg.slack_bus);
    std::printf("%-6s %14s %14s\n", "bus", "theta_direct", "theta_mp");
    for (int b = 0; b < ctx.bg.n_buses; ++b)
      std::printf("%-6d %14.8f %14.8f\n", b, direct.theta[b], iter.theta[b]);
    std::printf("direct solve residual: %.3e\n", direct_resid);
    std::printf("mp_opt: %d layers, residual %.3e%s\n", iter.layers_run, iter.final_residual,
                iter.converged ? "" : "  [not converged]");
    if (!iter.converged)
      std::printf("warning: raise --layers or tol; result kept for inspection\n");
    std::printf("max |theta_direct - theta_mp| = %.3e\n", max_dtheta);
  }
  return 0;
}

int cmd_report(const std::string& in_path, const std::string& out_path) {
  const json j = read_json_file(in_path);
  BenchmarkTable t;
  t.grid = j.at("grid").get<std::string>();
  for (const auto& rj : j.at("rows")) {
    ModelRow row;
    row.model = rj.at("model").get<std::string>();
    auto cell = [&](const char* name) {
      CellStats s;
      s.mean = rj.at(name).at("mean").get<double>();
      s.stdev = rj.at(name).at("std").get<double>();
      return s;
    };
    row.mae_test = cell("mae_test");
    row.mape90_test = cell("mape90_test");
    row.mae_ood = cell("mae_ood");
    row.mape90_ood = cell("mape90_ood");
    row.p5_test = cell("p5_test");
    row.p5_ood = cell("p5_ood");
    row.speedup_ratio = cell("speedup");
    row.n_failed = rj.at("n_failed").get<int>();
    t.rows.push_back(std::move(row));
  }
  const std::string md = render_markdown(t);
  if (out_path.empty())
    std::cout << md;
  else
    write_text_file(out_path, md);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DC power-flow surrogate lab"};
  app.require_subcommand(1);

  CommonArgs common;
  app.add_option("--config", common.config_path, "run config JSON");
  app.add_option("--grid", common.grid_path, "grid JSON file");
  app.add_option("--out", common.out_dir, "output directory");
  app.add_flag("--deterministic", common.deterministic,
               "force single-threaded execution everywhere");

  auto* gen = app.add_subcommand("generate", "generate the four dataset splits");
  std::int64_t gen_seed = -1;
  gen->add_option("--seed", gen_seed, "base seed (splits use seed, seed+1, seed+2, seed+3)");

  auto* train = app.add_subcommand("train", "train a model, one checkpoint per seed");
  std::string train_model_name = "mlp";
  std::string train_seeds, train_data;
  train->add_option("--model", train_model_name, "mlp | mlp_reg | pimp")->required();
  train->add_option("--seeds", train_seeds, "comma-separated seed list");
  train->add_option("--data", train_data, "dataset directory (default <out>/data/<grid>)");

  auto* eval = app.add_subcommand("evaluate", "evaluate a checkpoint or mp_opt on a split");
  std::string eval_model, eval_ckpt, eval_split = "test", eval_data;
  int eval_layers = -1;
  eval->add_option("--model", eval_model, "mp_opt (for the training-free solver)");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint directory");
  eval->add_option("--split", eval_split, "train | val | test | ood");
  eval->add_option("--layers", eval_layers, "MP layer budget override");
  eval->add_option("--data", eval_data, "dataset directory");

  auto* bench = app.add_subcommand("benchmark", "full four-model benchmark");
  std::string bench_sizes, bench_data;
  int bench_runs = -1;
  bench->add_option("--train-sizes", bench_sizes, "comma-separated low-data sweep sizes");
  bench->add_option("--runs", bench_runs, "number of runs (seeds) per model");
  bench->add_option("--data", bench_data, "dataset directory");

  auto* solve = app.add_subcommand("solve", "direct vs message-passing solve, side by side");
  int solve_layers = -1;
  double solve_omega = -1.0;
  bool solve_json = false;
  solve->add_option("--layers", solve_layers, "MP layer budget");
  solve->add_option("--omega", solve_omega, "MP damping in (0, 1]");
  solve->add_flag("--json", solve_json, "machine-readable output");

  auto* report = app.add_subcommand("report", "re-render benchmark.json as markdown");
  std::string report_in, report_out;
  report->add_option("--in", report_in, "benchmark.json path")->required();
  report->add_option("--out", report_out, "markdown output path (stdout if omitted)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (report->parsed()) return cmd_report(report_in, report_out);

    RunConfig cfg = resolve_config(common);
    if (gen->parsed()) {
      if (gen_seed >= 0) {
        std::uint64_t s = static_cast<std::uint64_t>(gen_seed);
        cfg.scenario.at(Split::Train).seed = s;
        cfg.scenario.at(Split::Val).seed = s + 1;
        cfg.scenario.at(Split::Test).seed = s + 2;
        cfg.scenario.at(Split::Ood).seed = s + 3;
      }
      return cmd_generate(cfg);
    }
    if (train->parsed()) return cmd_train(cfg, train_model_name, train_seeds, train_data);
    if (eval->parsed())
      return cmd_evaluate(cfg, eval_model, eval_ckpt, eval_split, eval_layers, eval_data);
    if (bench->parsed()) return cmd_benchmark(cfg, bench_sizes, bench_data, bench_runs);
    if (solve->parsed()) return cmd_solve(cfg, solve_layers, solve_omega, solve_json);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const IslandedGrid& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const SingularSystem& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const RetriesExhausted& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const NonFiniteLoss& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitGeneric;
  }
  return kExitGeneric;
}
