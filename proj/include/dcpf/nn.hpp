#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcpf/mp.hpp"
#include "dcpf/parallel.hpp"
#include "dcpf/scenario.hpp"

namespace dcpf {

enum class ModelKind { Mlp, MlpReg, Pimp };

std::string to_string(ModelKind k);
ModelKind model_kind_from_string(const std::string& s);

enum class Activation { Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;  // out
};

struct MlpParams {
  std::vector<DenseLayer> layers;  // hidden layers use `activation`, output is linear
  Activation activation = Activation::Relu;
  int input_dim = 0;
  int output_dim = 0;

  size_t n_parameters() const;
};

// Input standardization fitted on the training set and stored in checkpoints.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> stdev;  // zero-variance slots are kept at 1

  void apply(std::span<double> x) const;
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 128;
  double initial_lr = 1e-3;
  int plateau_patience = 10;
  double plateau_factor = 0.5;
  double min_lr = 1e-6;
  double lambda_physics = 1.0;
  std::uint64_t seed = 0;
  ModelKind model_kind = ModelKind::Mlp;
  int pimp_layers = 50;      // MP depth for Pimp (forward and adjoint)
  double mp_omega = 1.0;
  bool pimp_intermediate_lc = false;  // add LC terms at every layer, not just the last
  int hidden_layers = 4;
  int hidden_width = 256;
  Activation activation = Activation::Relu;
  int threads = 1;  // 1 = single-threaded (default); 0 = hardware

  void validate() const;
};

struct TrainReport {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::vector<double> data_loss;     // training data-loss component per epoch
  std::vector<double> physics_loss;  // training physics-loss component per epoch
  std::vector<double> lr_trace;
  double wall_seconds = 0.0;
  int best_epoch = -1;
};

// Dataset converted to matrices: standardized features plus kind-specific
// targets. Bus-level kinds carry per-sample contexts for the physics terms.
struct PreparedData {
  ModelKind kind = ModelKind::Mlp;
  int n = 0;
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> X;      // n x in_dim
  std::vector<double> T;      // n x out_dim
  std::vector<char> mask;     // n x out_dim for bus kinds (energized slots); empty for Mlp
  std::vector<SampleContext> ctx;  // bus kinds only
  Normalization norm;
};

// stats == nullptr fits normalization on this dataset (training use);
// otherwise the given stats are applied (validation / inference use).
PreparedData prepare_data(const Grid& grid, const Dataset& ds, ModelKind kind,
                          const Normalization* stats = nullptr,
                          ExecPolicy policy = ExecPolicy::Parallel);

// Scaled uniform fan-in init, seeded and platform-stable.
MlpParams init_params(int input_dim, int hidden_layers, int hidden_width, int output_dim,
                      Activation activation, std::uint64_t seed);

std::vector<double> nn_forward(const MlpParams& params, std::span<const double> x);
// out must hold n x output_dim
void nn_forward_batch(const MlpParams& params, const double* X, int n, double* out,
                      int threads);

struct LossParts {
  double total = 0.0;
  double data = 0.0;
  double physics = 0.0;
};

struct GradResult {
  std::vector<DenseLayer> grads;  // same shapes as params
  LossParts loss;
};

// Exact reverse-mode gradient of the model-kind loss over one batch.
// Throws NonFiniteLoss when the loss stops being finite.
GradResult nn_grad(const MlpParams& params, const PreparedData& data,
                   std::span<const int> batch, const TrainConfig& config);

// Loss only (validation); same definitions as nn_grad.
LossParts nn_loss(const MlpParams& params, const PreparedData& data,
                  std::span<const int> batch, const TrainConfig& config);

struct Checkpoint {
  MlpParams params;
  Normalization norm;
  TrainConfig config;
  std::string grid_name;
};

struct TrainResult {
  Checkpoint checkpoint;
  TrainReport report;
};

// Adam + reduce-lr-on-plateau over the validation loss; returns the
// best-validation parameters.
TrainResult train_model(const Grid& grid, const Dataset& train_ds, const Dataset& val_ds,
                        const TrainConfig& config);

// Predictions for a whole dataset, in both output spaces. theta_line rows are
// [theta_or | theta_ex]; flows are status-gated.
struct PredictionSet {
  int n = 0;
  std::vector<double> theta_line;   // n x 2L
  std::vector<double> theta_slots;  // n x 2K; empty for Mlp
  std::vector<double> p_or;         // n x L
  std::vector<double> p_ex;         // n x L
};

PredictionSet predict_dataset(const Checkpoint& ckpt, const Grid& grid, const Dataset& ds,
                              ExecPolicy policy = ExecPolicy::Parallel,
                              int pimp_layers_override = -1);

// Single-sample prediction (debugging / spot checks).
struct SinglePrediction {
  std::vector<double> theta_line;
  std::vector<double> theta_slots;
};
SinglePrediction predict_sample(const Checkpoint& ckpt, const Grid& grid, const Sample& s,
                                int pimp_layers_override = -1);

}  // namespace dcpf
