#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dcpf/errors.hpp"
#include "dcpf/metrics.hpp"
#include "dcpf/nn.hpp"
#include "test_util.hpp"

using namespace dcpf;

namespace {

Dataset toy_dataset(const Grid& g, int n, std::uint64_t seed,
                    DisconnectionRule rule = DisconnectionRule::AtMostOne) {
  ScenarioConfig sc;
  sc.n_samples = n;
  sc.seed = seed;
  sc.disconnection_rule = rule;
  sc.p_unchanged = 0.5;
  sc.max_reconfigured_substations = 1;
  Split split = rule == DisconnectionRule::AtMostOne ? Split::Train : Split::Test;
  return generate_dataset(g, split, sc, ExecPolicy::Serial);
}

std::vector<int> all_indices(int n) {
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

// full-parameter central finite difference against the reverse-mode gradient
double fd_relative_error(MlpParams params, const PreparedData& data,
                         const TrainConfig& cfg, std::span<const int> batch,
                         double h = 1e-5) {
  GradResult g = nn_grad(params, data, batch, cfg);

  double num = 0.0, den_ad = 0.0, den_fd = 0.0;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto check = [&](std::vector<double>& w, const std::vector<double>& gw) {
      for (size_t i = 0; i < w.size(); ++i) {
        const double keep = w[i];
        w[i] = keep + h;
        const double lp = nn_loss(params, data, batch, cfg).total;
        w[i] = keep - h;
        const double lm = nn_loss(params, data, batch, cfg).total;
        w[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        num += (fd - gw[i]) * (fd - gw[i]);
        den_ad += gw[i] * gw[i];
        den_fd += fd * fd;
      }
    };
    check(params.layers[l].w, g.grads[l].w);
    check(params.layers[l].b, g.grads[l].b);
  }
  const double den = std::sqrt(std::max(den_ad, den_fd));
  return den > 0.0 ? std::sqrt(num) / den : 0.0;
}

TrainConfig toy_config(ModelKind kind, Activation act = Activation::Tanh) {
  TrainConfig cfg;
  cfg.model_kind = kind;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 8;
  cfg.activation = act;
  cfg.lambda_physics = kind == ModelKind::Mlp ? 0.0 : 1.0;
  cfg.pimp_layers = 5;
  cfg.batch_size = 8;
  return cfg;
}

}  // namespace

TEST_CASE("nn_forward: identity layer and pure-bias nets") {
  MlpParams p;
  p.activation = Activation::Relu;
  p.input_dim = 3;
  p.output_dim = 3;
  DenseLayer l;
  l.in = 3;
  l.out = 3;
  l.w = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  l.b = {0, 0, 0};
  p.layers = {l};
  std::vector<double> x = {0.5, -2.0, 3.25};
  CHECK(nn_forward(p, x) == x);

  l.w.assign(9, 0.0);
  l.b = {1.5, -0.25, 0.0};
  p.layers = {l};
  CHECK(nn_forward(p, x) == l.b);
}

TEST_CASE("nn_forward: fixed params and input replay identically") {
  MlpParams p = init_params(5, 2, 7, 3, Activation::Tanh, 123);
  std::vector<double> x = {0.1, -0.2, 0.33, 1.5, -0.9};
  std::vector<double> y1 = nn_forward(p, x);
  std::vector<double> y2 = nn_forward(p, x);
  MlpParams p2 = init_params(5, 2, 7, 3, Activation::Tanh, 123);
  std::vector<double> y3 = nn_forward(p2, x);
  CHECK(y1 == y2);
  CHECK(y1 == y3);
}

TEST_CASE("gradients match finite differences for every model kind (tanh)") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 8, 61);

  for (ModelKind kind : {ModelKind::Mlp, ModelKind::MlpReg, ModelKind::Pimp}) {
    CAPTURE(to_string(kind));
    TrainConfig cfg = toy_config(kind);
    PreparedData data = prepare_data(g, ds, kind, nullptr, ExecPolicy::Serial);
    std::vector<int> batch = all_indices(data.n);
    for (std::uint64_t seed : {1ull, 2ull, 3ull, 4ull, 5ull}) {
      MlpParams params = init_params(data.in_dim, cfg.hidden_layers, cfg.hidden_width,
                                     data.out_dim, cfg.activation, seed);
      CHECK(fd_relative_error(params, data, cfg, batch) < 1e-4);
    }
  }
}

TEST_CASE("gradients match finite differences with relu too") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 8, 62);
  TrainConfig cfg = toy_config(ModelKind::MlpReg, Activation::Relu);
  PreparedData data = prepare_data(g, ds, ModelKind::MlpReg, nullptr, ExecPolicy::Serial);
  std::vector<int> batch = all_indices(data.n);
  MlpParams params = init_params(data.in_dim, cfg.hidden_layers, cfg.hidden_width,
                                 data.out_dim, cfg.activation, 9);
  CHECK(fd_relative_error(params, data, cfg, batch) < 1e-4);
}

TEST_CASE("pimp gradient stays exact with intermediate LC terms and damping") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 6, 63);
  TrainConfig cfg = toy_config(ModelKind::Pimp);
  cfg.pimp_intermediate_lc = true;
  cfg.mp_omega = 0.8;
  cfg.pimp_layers = 4;
  PreparedData data = prepare_data(g, ds, ModelKind::Pimp, nullptr, ExecPolicy::Serial);
  std::vector<int> batch = all_indices(data.n);
  MlpParams params = init_params(data.in_dim, cfg.hidden_layers, cfg.hidden_width,
                                 data.out_dim, cfg.activation, 17);
  CHECK(fd_relative_error(params, data, cfg, batch) < 1e-4);
}

TEST_CASE("lambda = 0 removes the physics term from loss and gradient") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 6, 64);
  TrainConfig cfg = toy_config(ModelKind::MlpReg);
  cfg.lambda_physics = 0.0;
  PreparedData data = prepare_data(g, ds, ModelKind::MlpReg, nullptr, ExecPolicy::Serial);
  std::vector<int> batch = all_indices(data.n);
  MlpParams params = init_params(data.in_dim, cfg.hidden_layers, cfg.hidden_width,
                                 data.out_dim, cfg.activation, 5);

  GradResult g0 = nn_grad(params, data, batch, cfg);
  CHECK(g0.loss.total == g0.loss.data);
  // the FD oracle now sees the pure data loss
  CHECK(fd_relative_error(params, data, cfg, batch) < 1e-4);

  TrainConfig cfg1 = cfg;
  cfg1.lambda_physics = 1.0;
  GradResult g1 = nn_grad(params, data, batch, cfg1);
  CHECK(g1.loss.data == g0.loss.data);
  bool any_different = false;
  for (size_t l = 0; l < g0.grads.size(); ++l)
    for (size_t i = 0; i < g0.grads[l].w.size(); ++i)
      any_different |= g0.grads[l].w[i] != g1.grads[l].w[i];
  CHECK(any_different);
}

TEST_CASE("oracle outputs give vanishing MlpReg loss") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 1, 65);
  TrainConfig cfg = toy_config(ModelKind::MlpReg);
  PreparedData data = prepare_data(g, ds, ModelKind::MlpReg, nullptr, ExecPolicy::Serial);

  // constant net: zero weights, bias = the sample's ground-truth slots
  MlpParams p;
  p.activation = Activation::Relu;
  p.input_dim = data.in_dim;
  p.output_dim = data.out_dim;
  DenseLayer hidden;
  hidden.in = data.in_dim;
  hidden.out = 4;
  hidden.w.assign(static_cast<size_t>(4) * data.in_dim, 0.0);
  hidden.b.assign(4, 0.0);
  DenseLayer out;
  out.in = 4;
  out.out = data.out_dim;
  out.w.assign(static_cast<size_t>(data.out_dim) * 4, 0.0);
  out.b = ds.samples[0].theta_bus_slots;
  p.layers = {hidden, out};

  std::vector<int> batch = {0};
  LossParts loss = nn_loss(p, data, batch, cfg);
  CHECK(loss.data == 0.0);
  CHECK(loss.physics < 1e-16);
  CHECK(loss.total < 1e-16);
}

TEST_CASE("pimp at depth 0 is exactly the pinned MlpReg objective") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 5, 66);
  TrainConfig cfg = toy_config(ModelKind::Pimp);
  cfg.pimp_layers = 0;
  PreparedData data = prepare_data(g, ds, ModelKind::Pimp, nullptr, ExecPolicy::Serial);
  std::vector<int> batch = all_indices(data.n);
  MlpParams params = init_params(data.in_dim, cfg.hidden_layers, cfg.hidden_width,
                                 data.out_dim, cfg.activation, 31);
  LossParts got = nn_loss(params, data, batch, cfg);

  // recompute by hand: data MSE + lambda * mean E^2 at the slack-pinned output
  std::vector<double> X = data.X;
  double sse = 0.0, sq = 0.0;
  long long n_data = 0, n_phys = 0;
  for (int i = 0; i < data.n; ++i) {
    std::vector<double> x(X.begin() + static_cast<size_t>(i) * data.in_dim,
                          X.begin() + static_cast<size_t>(i + 1) * data.in_dim);
    std::vector<double> y = nn_forward(params, x);
    const SampleContext& ctx = data.ctx[i];
    std::vector<double> theta(ctx.bg.n_buses);
    for (int b = 0; b < ctx.bg.n_buses; ++b) theta[b] = y[ctx.bg.bus_slot[b]];
    theta[ctx.bg.slack_bus] = 0.0;
    for (int b = 0; b < ctx.bg.n_buses; ++b) {
      const double d =
          theta[b] - data.T[static_cast<size_t>(i) * data.out_dim + ctx.bg.bus_slot[b]];
      sse += d * d;
      ++n_data;
    }
    std::vector<double> e = lc_residual(theta, ctx.p, ctx.Y);
    for (int b = 0; b < ctx.bg.n_buses; ++b)
      if (b != ctx.bg.slack_bus) {
        sq += e[b] * e[b];
        ++n_phys;
      }
  }
  const double want_data = sse / n_data;
  const double want_phys = sq / n_phys;
  CHECK(got.data == doctest::Approx(want_data).epsilon(1e-12));
  CHECK(got.physics == doctest::Approx(want_phys).epsilon(1e-12));
  CHECK(got.total ==
        doctest::Approx(want_data + cfg.lambda_physics * want_phys).epsilon(1e-12));
}

TEST_CASE("loss decomposition holds at every reported epoch") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset train = toy_dataset(g, 60, 67);
  Dataset val = toy_dataset(g, 20, 68);
  TrainConfig cfg = toy_config(ModelKind::MlpReg);
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.seed = 2;
  TrainResult res = train_model(g, train, val, cfg);
  for (size_t e = 0; e < res.report.train_loss.size(); ++e)
    CHECK(std::abs(res.report.train_loss[e] -
                   (res.report.data_loss[e] + cfg.lambda_physics * res.report.physics_loss[e])) <
          1e-12);
}

TEST_CASE("training beats the mean predictor and replays bit-identically") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset train = toy_dataset(g, 300, 70);
  Dataset val = toy_dataset(g, 80, 71);
  TrainConfig cfg = toy_config(ModelKind::Mlp);
  cfg.hidden_width = 16;
  cfg.epochs = 40;
  cfg.batch_size = 32;
  cfg.initial_lr = 3e-3;
  cfg.plateau_patience = 5;
  cfg.seed = 7;

  TrainResult a = train_model(g, train, val, cfg);

  // variance of the validation targets = MSE of the best constant predictor
  PreparedData vdata = prepare_data(g, val, ModelKind::Mlp, nullptr, ExecPolicy::Serial);
  double mean = 0.0;
  for (double t : vdata.T) mean += t;
  mean /= static_cast<double>(vdata.T.size());
  double var = 0.0;
  for (double t : vdata.T) var += (t - mean) * (t - mean);
  var /= static_cast<double>(vdata.T.size());
  CHECK(a.report.val_loss[a.report.best_epoch] < var);

  TrainResult b = train_model(g, train, val, cfg);
  CHECK(a.report.train_loss == b.report.train_loss);
  CHECK(a.report.val_loss == b.report.val_loss);
  for (size_t l = 0; l < a.checkpoint.params.layers.size(); ++l)
    CHECK(a.checkpoint.params.layers[l].w == b.checkpoint.params.layers[l].w);
}

TEST_CASE("parallel training reproduces the single-threaded run bit-for-bit") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset train = toy_dataset(g, 64, 72);
  Dataset val = toy_dataset(g, 16, 73);
  TrainConfig cfg = toy_config(ModelKind::Pimp);
  cfg.epochs = 3;
  cfg.batch_size = 16;
  cfg.seed = 3;

  cfg.threads = 1;
  TrainResult serial = train_model(g, train, val, cfg);
  cfg.threads = 0;  // hardware
  TrainResult parallel = train_model(g, train, val, cfg);

  CHECK(serial.report.train_loss == parallel.report.train_loss);
  for (size_t l = 0; l < serial.checkpoint.params.layers.size(); ++l) {
    CHECK(serial.checkpoint.params.layers[l].w == parallel.checkpoint.params.layers[l].w);
    CHECK(serial.checkpoint.params.layers[l].b == parallel.checkpoint.params.layers[l].b);
  }
}

TEST_CASE("diverging training reports NonFiniteLoss") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset train = toy_dataset(g, 32, 74);
  Dataset val = toy_dataset(g, 8, 75);
  TrainConfig cfg = toy_config(ModelKind::Mlp, Activation::Relu);
  cfg.epochs = 50;
  cfg.initial_lr = 1e80;
  cfg.min_lr = 1e80;
  cfg.seed = 1;
  CHECK_THROWS_AS(train_model(g, train, val, cfg), NonFiniteLoss);
}

TEST_CASE("output dimensions: 2L for Mlp, 2K slots for bus models (ieee14)") {
  Grid g = dcpf::test::load_ieee14();
  Dataset ds = toy_dataset(g, 4, 76);
  PreparedData line = prepare_data(g, ds, ModelKind::Mlp, nullptr, ExecPolicy::Serial);
  PreparedData bus = prepare_data(g, ds, ModelKind::Pimp, nullptr, ExecPolicy::Serial);
  CHECK(line.out_dim == 40);
  CHECK(bus.out_dim == 28);
  CHECK(line.in_dim == 94);
}

TEST_CASE("pimp prediction with a deep chain lands on the exact solve") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 10, 77);
  Checkpoint ckpt;
  ckpt.grid_name = g.name;
  ckpt.config = toy_config(ModelKind::Pimp);
  ckpt.config.pimp_layers = 500;
  PreparedData data = prepare_data(g, ds, ModelKind::Pimp, nullptr, ExecPolicy::Serial);
  ckpt.norm = data.norm;
  ckpt.params = init_params(data.in_dim, 2, 8, data.out_dim, Activation::Tanh, 99);

  PredictionSet pred = predict_dataset(ckpt, g, ds, ExecPolicy::Serial);
  for (int i = 0; i < ds.size(); ++i)
    for (int s = 0; s < data.out_dim; ++s)
      CHECK(std::abs(pred.theta_slots[static_cast<size_t>(i) * data.out_dim + s] -
                     ds.samples[i].theta_bus_slots[s]) < 1e-6);
}

TEST_CASE("batch prediction equals sample-by-sample prediction") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 12, 78);
  Dataset train = toy_dataset(g, 40, 79);
  TrainConfig cfg = toy_config(ModelKind::MlpReg);
  cfg.epochs = 3;
  TrainResult tr = train_model(g, train, ds, cfg);

  PredictionSet batch = predict_dataset(tr.checkpoint, g, ds, ExecPolicy::Parallel);
  const int L = g.n_lines();
  for (int i = 0; i < ds.size(); ++i) {
    SinglePrediction one = predict_sample(tr.checkpoint, g, ds.samples[i]);
    for (int k = 0; k < 2 * L; ++k)
      CHECK(one.theta_line[k] == batch.theta_line[static_cast<size_t>(i) * 2 * L + k]);
  }
}

TEST_CASE("checkpoint/grid mismatch is rejected") {
  Grid g = dcpf::test::four_bus_grid();
  Dataset ds = toy_dataset(g, 4, 80);
  Checkpoint ckpt;
  ckpt.grid_name = "some_other_grid";
  ckpt.config = toy_config(ModelKind::Mlp);
  PreparedData data = prepare_data(g, ds, ModelKind::Mlp, nullptr, ExecPolicy::Serial);
  ckpt.norm = data.norm;
  ckpt.params = init_params(data.in_dim, 2, 8, data.out_dim, Activation::Tanh, 1);
  CHECK_THROWS_AS(predict_dataset(ckpt, g, ds), DimensionMismatch);
}

TEST_CASE("mlp_reg physics loss settles below its early-training level") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 600;
  sc.seed = 501;
  Dataset train = generate_dataset(g, Split::Train, sc);
  sc.n_samples = 150;
  sc.seed = 502;
  Dataset val = generate_dataset(g, Split::Val, sc);

  TrainConfig cfg;
  cfg.model_kind = ModelKind::MlpReg;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 32;
  cfg.epochs = 25;
  cfg.batch_size = 64;
  cfg.lambda_physics = 1.0;
  cfg.seed = 4;
  cfg.threads = 0;
  TrainResult res = train_model(g, train, val, cfg);
  CHECK(res.report.physics_loss.back() < res.report.physics_loss.front());
}
