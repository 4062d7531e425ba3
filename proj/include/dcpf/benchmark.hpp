#pragma once

#include <optional>

#include "dcpf/config.hpp"
#include "dcpf/metrics.hpp"

namespace dcpf {

struct RunRecord {
  std::uint64_t seed = 0;
  double mae_test = 0.0, mae_ood = 0.0;
  std::optional<double> mape90_test, mape90_ood;
  double p5_test = 0.0, p5_ood = 0.0;
  double speedup_ratio = 0.0;
  double train_seconds = 0.0;
  std::string error;  // non-empty marks a failed run; metric fields are unset
  TrainReport report;
};

struct CellStats {
  double mean = 0.0;
  double stdev = 0.0;  // sample std over successful runs, 0 for a single run
};

struct ModelRow {
  std::string model;  // mlp | mlp_reg | mp_opt | pimp
  std::vector<RunRecord> runs;
  CellStats mae_test, mape90_test, mae_ood, mape90_ood, p5_test, p5_ood, speedup_ratio;
  int n_failed = 0;
};

struct BenchmarkTable {
  std::string grid;
  std::vector<ModelRow> rows;
  json resolved_config;
};

struct BenchmarkInputs {
  const Grid* grid = nullptr;
  const Dataset* train_ds = nullptr;
  const Dataset* val_ds = nullptr;
  const Dataset* test_ds = nullptr;
  const Dataset* ood_ds = nullptr;
};

// The full four-model pipeline: trains each learned model n_runs times,
// evaluates MP Opt deterministically per run, measures speed-ups, and (when
// out_dir is given) writes checkpoints, per-run training curves, the MP
// residual trajectory, and the equal-depth warm-vs-flat comparison curve.
BenchmarkTable run_benchmark(const BenchmarkInputs& in,
                             const std::map<ModelKind, TrainConfig>& train_cfgs,
                             const MpConfig& mp, const BenchConfig& bench,
                             ExecPolicy policy,
                             const std::filesystem::path* out_dir = nullptr);

struct SweepCell {
  std::string model;
  int train_size = 0;
  std::uint64_t seed = 0;
  double mae_test = 0.0;
  std::string error;
};

// MAE-vs-train-size sweep; train_ds is truncated to each size (deterministic
// prefix, so smaller sets are nested in larger ones).
std::vector<SweepCell> train_size_sweep(const BenchmarkInputs& in, ModelKind kind,
                                        const TrainConfig& base,
                                        const std::vector<int>& sizes,
                                        const std::vector<std::uint64_t>& seeds,
                                        ExecPolicy policy);

json to_json(const BenchmarkTable& t);
std::string render_markdown(const BenchmarkTable& t);
void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepCell>& cells);

// CSV exports used by the benchmark and acceptance tooling
void write_trajectory_csv(const std::filesystem::path& path, const MpTrajectory& traj);
void write_comparison_csv(const std::filesystem::path& path,
                          const std::vector<double>& flat_curve,
                          const std::vector<double>& warm_curve);

}  // namespace dcpf
