#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dcpf/nn.hpp"

namespace dcpf {

// Per-sample contexts for a dataset, built once and reused by every metric.
struct EvalData {
  const Grid* grid = nullptr;
  const Dataset* ds = nullptr;
  std::vector<SampleContext> ctx;
};

EvalData make_eval_data(const Grid& grid, const Dataset& ds,
                        ExecPolicy policy = ExecPolicy::Parallel);

double mae(std::span<const double> y_true, std::span<const double> y_pred);

// MAPE over the top-decile |y_true| entries (nearest-rank threshold at the
// 90th percentile). Zero targets are excluded from the selection; an empty
// selection reports as nullopt rather than NaN.
std::optional<double> mape90(std::span<const double> y_true, std::span<const double> y_pred);

struct MetricReport {
  double mae = 0.0;                    // over all line-extremity theta entries
  std::optional<double> mape90;
  double mae_theta_or = 0.0;           // per-variable breakdown
  double mae_theta_ex = 0.0;
};

// ML-accuracy metrics in the common line-extremity theta space.
MetricReport ml_metrics(const PredictionSet& pred, const EvalData& eval);

struct PhysicsThresholds {
  double tau_lc = 1e-2;    // |LC residual| above this counts as a P5 violation
  double tau_loss = 1e-6;  // numeric-zero guard for P1
  double tau_null = 1e-6;  // numeric-zero guard for P2
  double p3_lo = 0.005;    // AC-motivated loss-ratio range; not attainable in DC
  double p3_hi = 0.04;
};

struct PhysicsReport {
  double p1 = 0.0;  // fraction of connected (sample, line) pairs with negative losses
  double p2 = 0.0;  // fraction of disconnected pairs with non-null flow
  double p3 = 0.0;  // fraction of samples with loss ratio inside [p3_lo, p3_hi]
  std::optional<double> p4;  // global-conservation MAPE; undefined when all excluded
  long long p4_excluded = 0;
  double p5_violation = 0.0;        // fraction of (sample, non-slack bus) pairs over tau_lc
  std::optional<double> p5_mape;    // residual MAPE against |p_i|
  long long p5_pairs = 0;
  long long disconnected_pairs = 0;
  PhysicsThresholds thresholds;
};

PhysicsReport physics_report(const PredictionSet& pred, const EvalData& eval,
                             const PhysicsThresholds& thresholds);

// MP Opt run over a dataset, packaged like any other model's predictions.
struct MpOptStats {
  std::vector<int> layers_run;
  std::vector<char> converged;
  double median_layers = 0.0;
  int n_not_converged = 0;
};

PredictionSet predict_mp_opt(const EvalData& eval, const MpConfig& config,
                             ExecPolicy policy = ExecPolicy::Parallel,
                             MpOptStats* stats = nullptr);

// Ground truth repackaged as predictions (oracle rows of the metric tests).
PredictionSet oracle_predictions(const EvalData& eval);

// Timed model for speed-up measurements.
struct ModelRef {
  enum class Type { DcSolver, MpOpt, Network };
  Type type = Type::DcSolver;
  const Checkpoint* ckpt = nullptr;  // Network
  MpConfig mp;                       // MpOpt
};

struct SpeedupResult {
  double ratio = 0.0;                  // median solver time / median model time
  std::vector<double> solver_seconds;  // one entry per repeat
  std::vector<double> model_seconds;
};

// Wall-clock comparison, single-stream on both sides, dataset I/O excluded.
// The solver side solves every sample independently; the model side runs
// batched inference.
SpeedupResult speedup(const ModelRef& model, const Grid& grid, const Dataset& ds,
                      int repeats);

// Mean non-slack |LC residual| per layer (index 0 = before any update),
// averaged over samples, at fixed depth. Flat starts from zeros; warm starts
// from the checkpoint's network output.
std::vector<double> mean_residual_curve_flat(const EvalData& eval, int layers, double omega,
                                             ExecPolicy policy = ExecPolicy::Parallel);
std::vector<double> mean_residual_curve_warm(const EvalData& eval, const Checkpoint& ckpt,
                                             int layers, double omega,
                                             ExecPolicy policy = ExecPolicy::Parallel);

}  // namespace dcpf
