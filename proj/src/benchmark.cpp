#include "dcpf/benchmark.hpp"

#include <cmath>
#include <cstdio>

#include "dcpf/errors.hpp"

namespace dcpf {

namespace fs = std::filesystem;

namespace {

CellStats stats_over(const std::vector<double>& values) {
  CellStats s;
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double acc = 0.0;
    for (double v : values) acc += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(acc / static_cast<double>(values.size() - 1));
  }
  return s;
}

void fill_row_stats(ModelRow& row) {
  std::vector<double> mae_t, m90_t, mae_o, m90_o, p5_t, p5_o, sp;
  for (const auto& r : row.runs) {
    if (!r.error.empty()) {
      ++row.n_failed;
      continue;
    }
    mae_t.push_back(r.mae_test);
    mae_o.push_back(r.mae_ood);
    if (r.mape90_test) m90_t.push_back(*r.mape90_test);
    if (r.mape90_ood) m90_o.push_back(*r.mape90_ood);
    p5_t.push_back(r.p5_test);
    p5_o.push_back(r.p5_ood);
    sp.push_back(r.speedup_ratio);
  }
  row.mae_test = stats_over(mae_t);
  row.mape90_test = stats_over(m90_t);
  row.mae_ood = stats_over(mae_o);
  row.mape90_ood = stats_over(m90_o);
  row.p5_test = stats_over(p5_t);
  row.p5_ood = stats_over(p5_o);
  row.speedup_ratio = stats_over(sp);
}

Dataset truncate_dataset(const Dataset& ds, int n) {
  Dataset out;
  out.split = ds.split;
  out.manifest = ds.manifest;
  out.manifest.config.n_samples = n;
  out.samples.assign(ds.samples.begin(), ds.samples.begin() + n);
  return out;
}

}  // namespace

BenchmarkTable run_benchmark(const BenchmarkInputs& in,
                             const std::map<ModelKind, TrainConfig>& train_cfgs,
                             const MpConfig& mp, const BenchConfig& bench,
                             ExecPolicy policy, const fs::path* out_dir) {
  BenchmarkTable table;
  table.grid = in.grid->name;

  EvalData eval_test = make_eval_data(*in.grid, *in.test_ds, policy);
  EvalData eval_ood = make_eval_data(*in.grid, *in.ood_ds, policy);

  if (out_dir) fs::create_directories(*out_dir / "curves");

  // --- MP Opt: deterministic, no training --------------------------------
  {
    ModelRow row;
    row.model = "mp_opt";
    MpOptStats st_test, st_ood;
    PredictionSet pt = predict_mp_opt(eval_test, mp, policy, &st_test);
    PredictionSet po = predict_mp_opt(eval_ood, mp, policy, &st_ood);
    MetricReport mt = ml_metrics(pt, eval_test);
    MetricReport mo = ml_metrics(po, eval_ood);
    PhysicsReport ft = physics_report(pt, eval_test, bench.thresholds);
    PhysicsReport fo = physics_report(po, eval_ood, bench.thresholds);
    for (int r = 0; r < bench.n_runs; ++r) {
      RunRecord rec;
      rec.seed = bench.seeds[r];
      rec.mae_test = mt.mae;
      rec.mape90_test = mt.mape90;
      rec.mae_ood = mo.mae;
      rec.mape90_ood = mo.mape90;
      rec.p5_test = ft.p5_violation;
      rec.p5_ood = fo.p5_violation;
      ModelRef ref;
      ref.type = ModelRef::Type::MpOpt;
      ref.mp = mp;
      rec.speedup_ratio = speedup(ref, *in.grid, *in.test_ds, bench.timing_repeats).ratio;
      row.runs.push_back(std::move(rec));
    }
    fill_row_stats(row);
    table.rows.push_back(std::move(row));

    if (out_dir) {
      // representative per-sample trajectory for the convergence figure
      MpConfig tracked = mp;
      tracked.track_trajectory = true;
      const SampleContext& ctx = eval_test.ctx[0];
      MpSolveResult res = mp_opt_solve(ctx.Y, ctx.p, ctx.bg.slack_bus, tracked);
      write_trajectory_csv(*out_dir / "curves" / "mp_opt_trajectory.csv", res.trajectory);
    }
  }

  // --- learned models -----------------------------------------------------
  const Checkpoint* first_pimp = nullptr;
  std::vector<Checkpoint> kept;
  kept.reserve(static_cast<size_t>(bench.n_runs) * train_cfgs.size());

  for (const auto& [kind, base_cfg] : train_cfgs) {
    ModelRow row;
    row.model = to_string(kind);
    for (int r = 0; r < bench.n_runs; ++r) {
      RunRecord rec;
      rec.seed = bench.seeds[r];
      try {
        TrainConfig cfg = base_cfg;
        cfg.seed = bench.seeds[r];
        TrainResult tr = train_model(*in.grid, *in.train_ds, *in.val_ds, cfg);
        rec.report = tr.report;
        rec.train_seconds = tr.report.wall_seconds;

        PredictionSet pt = predict_dataset(tr.checkpoint, *in.grid, *in.test_ds, policy);
        PredictionSet po = predict_dataset(tr.checkpoint, *in.grid, *in.ood_ds, policy);
        MetricReport mt = ml_metrics(pt, eval_test);
        MetricReport mo = ml_metrics(po, eval_ood);
        PhysicsReport ft = physics_report(pt, eval_test, bench.thresholds);
        PhysicsReport fo = physics_report(po, eval_ood, bench.thresholds);
        rec.mae_test = mt.mae;
        rec.mape90_test = mt.mape90;
        rec.mae_ood = mo.mae;
        rec.mape90_ood = mo.mape90;
        rec.p5_test = ft.p5_violation;
        rec.p5_ood = fo.p5_violation;

        ModelRef ref;
        ref.type = ModelRef::Type::Network;
        ref.ckpt = &tr.checkpoint;
        rec.speedup_ratio = speedup(ref, *in.grid, *in.test_ds, bench.timing_repeats).ratio;

        if (out_dir) {
          const fs::path ckpt_dir =
              *out_dir / "checkpoints" / (row.model + "_seed" + std::to_string(rec.seed));
          save_checkpoint(ckpt_dir, tr.checkpoint);
          write_train_report_csv(*out_dir / "curves" /
                                     (row.model + "_seed" + std::to_string(rec.seed) +
                                      "_loss.csv"),
                                 tr.report);
        }
        kept.push_back(std::move(tr.checkpoint));
        if (kind == ModelKind::Pimp && !first_pimp) first_pimp = &kept.back();
      } catch (const std::exception& e) {
        rec.error = e.what();
      }
      row.runs.push_back(std::move(rec));
    }
    fill_row_stats(row);
    table.rows.push_back(std::move(row));
  }

  if (out_dir && first_pimp) {
    // equal-depth comparison: flat MP chain vs the trained warm start
    const int depth = first_pimp->config.pimp_layers;
    std::vector<double> flat =
        mean_residual_curve_flat(eval_test, depth, mp.omega, policy);
    std::vector<double> warm =
        mean_residual_curve_warm(eval_test, *first_pimp, depth, mp.omega, policy);
    write_comparison_csv(*out_dir / "curves" / "pimp_vs_mp_opt.csv", flat, warm);
  }
  return table;
}

std::vector<SweepCell> train_size_sweep(const BenchmarkInputs& in, ModelKind kind,
                                        const TrainConfig& base,
                                        const std::vector<int>& sizes,
                                        const std::vector<std::uint64_t>& seeds,
                                        ExecPolicy policy) {
  std::vector<SweepCell> cells;
  EvalData eval_test = make_eval_data(*in.grid, *in.test_ds, policy);
  for (int size : sizes) {
    if (size < 1 || size > in.train_ds->size())
      throw ConfigError("train size " + std::to_string(size) + " exceeds the dataset");
    Dataset sub = truncate_dataset(*in.train_ds, size);
    for (std::uint64_t seed : seeds) {
      SweepCell cell;
      cell.model = to_string(kind);
      cell.train_size = size;
      cell.seed = seed;
      try {
        TrainConfig cfg = base;
        cfg.seed = seed;
        TrainResult tr = train_model(*in.grid, sub, *in.val_ds, cfg);
        PredictionSet pt = predict_dataset(tr.checkpoint, *in.grid, *in.test_ds, policy);
        cell.mae_test = ml_metrics(pt, eval_test).mae;
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

namespace {

json to_json(const CellStats& s) { return json{{"mean", s.mean}, {"std", s.stdev}}; }

json run_to_json(const RunRecord& r) {
  json j{{"seed", r.seed}};
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["mae_test"] = r.mae_test;
  j["mae_ood"] = r.mae_ood;
  j["mape90_test"] = r.mape90_test ? json(*r.mape90_test) : json("undefined");
  j["mape90_ood"] = r.mape90_ood ? json(*r.mape90_ood) : json("undefined");
  j["p5_test"] = r.p5_test;
  j["p5_ood"] = r.p5_ood;
  j["speedup"] = r.speedup_ratio;
  j["train_seconds"] = r.train_seconds;
  return j;
}

}  // namespace

json to_json(const BenchmarkTable& t) {
  json rows = json::array();
  for (const auto& row : t.rows) {
    json runs = json::array();
    for (const auto& r : row.runs) runs.push_back(run_to_json(r));
    rows.push_back({{"model", row.model},
                    {"mae_test", to_json(row.mae_test)},
                    {"mape90_test", to_json(row.mape90_test)},
                    {"mae_ood", to_json(row.mae_ood)},
                    {"mape90_ood", to_json(row.mape90_ood)},
                    {"p5_test", to_json(row.p5_test)},
                    {"p5_ood", to_json(row.p5_ood)},
                    {"speedup", to_json(row.speedup_ratio)},
                    {"n_failed", row.n_failed},
                    {"runs", runs}});
  }
  return json{{"grid", t.grid}, {"rows", rows}, {"config", t.resolved_config}};
}

namespace {

std::string fmt_pm(const CellStats& s, bool percent) {
  char buf[64];
  if (percent)
    std::snprintf(buf, sizeof(buf), "%.1f%% ± %.1f%%", 100.0 * s.mean, 100.0 * s.stdev);
  else
    std::snprintf(buf, sizeof(buf), "%.2e ± %.1e", s.mean, s.stdev);
  return buf;
}

}  // namespace

std::string render_markdown(const BenchmarkTable& t) {
  std::string md = "# Benchmark — grid `" + t.grid + "`\n\n";
  md +=
      "| Model | MAE (test) | MAPE90 (test) | Speed-up | MAE (OOD) | MAPE90 (OOD) "
      "| P5 test | P5 OOD |\n";
  md += "|---|---|---|---|---|---|---|---|\n";
  for (const auto& row : t.rows) {
    char sp[32];
    std::snprintf(sp, sizeof(sp), "%.2f", row.speedup_ratio.mean);
    md += "| " + row.model + " | " + fmt_pm(row.mae_test, false) + " | " +
          fmt_pm(row.mape90_test, false) + " | " + sp + " | " + fmt_pm(row.mae_ood, false) +
          " | " + fmt_pm(row.mape90_ood, false) + " | " + fmt_pm(row.p5_test, true) + " | " +
          fmt_pm(row.p5_ood, true) + " |";
    if (row.n_failed > 0) md += " (" + std::to_string(row.n_failed) + " runs failed)";
    md += "\n";
  }
  md +=
      "\nP5 is the local-conservation violation proportion; speed-up is the "
      "median wall-time ratio against the direct DC solve on this machine.\n";
  return md;
}

void write_sweep_csv(const fs::path& path, const std::vector<SweepCell>& cells) {
  std::string csv = "model,train_size,seed,test_mae,error\n";
  for (const auto& c : cells) {
    char line[256];
    std::snprintf(line, sizeof(line), "%s,%d,%llu,%.17g,%s\n", c.model.c_str(), c.train_size,
                  static_cast<unsigned long long>(c.seed), c.mae_test, c.error.c_str());
    csv += line;
  }
  write_text_file(path, csv);
}

void write_trajectory_csv(const fs::path& path, const MpTrajectory& traj) {
  std::string csv = "layer,max_residual,mean_residual,log10_max,log10_mean\n";
  for (size_t k = 0; k < traj.max_residual.size(); ++k) {
    char line[256];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", k + 1,
                  traj.max_residual[k], traj.mean_residual[k],
                  std::log10(traj.max_residual[k]), std::log10(traj.mean_residual[k]));
    csv += line;
  }
  write_text_file(path, csv);
}

void write_comparison_csv(const fs::path& path, const std::vector<double>& flat_curve,
                          const std::vector<double>& warm_curve) {
  if (flat_curve.size() != warm_curve.size())
    throw DimensionMismatch("comparison curves must share the iteration grid");
  std::string csv = "layer,mp_opt_mean_residual,pimp_mean_residual,log10_mp_opt,log10_pimp\n";
  for (size_t k = 0; k < flat_curve.size(); ++k) {
    char line[256];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", k, flat_curve[k],
                  warm_curve[k], std::log10(flat_curve[k]), std::log10(warm_curve[k]));
    csv += line;
  }
  write_text_file(path, csv);
}

}  // namespace dcpf
