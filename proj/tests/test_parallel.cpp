// Serial reference vs OpenMP kernels: every batch kernel must produce the
// same bytes under both policies.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcpf/metrics.hpp"
#include "dcpf/nn.hpp"
#include "dcpf/scenario.hpp"
#include "test_util.hpp"

using namespace dcpf;

TEST_CASE("dataset generation: serial and parallel agree bit-for-bit") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 400;
  sc.seed = 1234;
  Dataset serial = generate_dataset(g, Split::Train, sc, ExecPolicy::Serial);
  Dataset parallel = generate_dataset(g, Split::Train, sc, ExecPolicy::Parallel);
  REQUIRE(serial.size() == parallel.size());
  for (int i = 0; i < serial.size(); ++i) {
    CHECK(serial.samples[i].tau == parallel.samples[i].tau);
    CHECK(serial.samples[i].theta_bus_slots == parallel.samples[i].theta_bus_slots);
    CHECK(serial.samples[i].theta_or == parallel.samples[i].theta_or);
    CHECK(serial.samples[i].flows.p_or == parallel.samples[i].flows.p_or);
    CHECK(serial.samples[i].inj.p_prod == parallel.samples[i].inj.p_prod);
  }
}

TEST_CASE("batch MP solves: serial and parallel agree bit-for-bit") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 100;
  sc.seed = 77;
  sc.disconnection_rule = DisconnectionRule::ExactlyOne;
  Dataset ds = generate_dataset(g, Split::Test, sc);
  EvalData eval_s = make_eval_data(g, ds, ExecPolicy::Serial);
  EvalData eval_p = make_eval_data(g, ds, ExecPolicy::Parallel);

  MpConfig mp;
  mp.n_layers = 300;
  mp.tol = 1e-6;
  MpOptStats st_s, st_p;
  PredictionSet a = predict_mp_opt(eval_s, mp, ExecPolicy::Serial, &st_s);
  PredictionSet b = predict_mp_opt(eval_p, mp, ExecPolicy::Parallel, &st_p);
  CHECK(a.theta_line == b.theta_line);
  CHECK(a.theta_slots == b.theta_slots);
  CHECK(a.p_or == b.p_or);
  CHECK(st_s.layers_run == st_p.layers_run);
}

TEST_CASE("batch network inference: serial and parallel agree bit-for-bit") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 120;
  sc.seed = 88;
  Dataset ds = generate_dataset(g, Split::Train, sc);

  PreparedData data = prepare_data(g, ds, ModelKind::Pimp, nullptr, ExecPolicy::Serial);
  Checkpoint ckpt;
  ckpt.grid_name = g.name;
  ckpt.config.model_kind = ModelKind::Pimp;
  ckpt.config.pimp_layers = 20;
  ckpt.norm = data.norm;
  ckpt.params = init_params(data.in_dim, 3, 32, data.out_dim, Activation::Relu, 5);

  PredictionSet a = predict_dataset(ckpt, g, ds, ExecPolicy::Serial);
  PredictionSet b = predict_dataset(ckpt, g, ds, ExecPolicy::Parallel);
  CHECK(a.theta_line == b.theta_line);
  CHECK(a.theta_slots == b.theta_slots);
  CHECK(a.p_or == b.p_or);
  CHECK(a.p_ex == b.p_ex);
}

TEST_CASE("prepare_data: serial and parallel agree bit-for-bit") {
  Grid g = dcpf::test::load_ieee14();
  ScenarioConfig sc;
  sc.n_samples = 150;
  sc.seed = 99;
  Dataset ds = generate_dataset(g, Split::Train, sc);
  PreparedData s = prepare_data(g, ds, ModelKind::MlpReg, nullptr, ExecPolicy::Serial);
  PreparedData p = prepare_data(g, ds, ModelKind::MlpReg, nullptr, ExecPolicy::Parallel);
  CHECK(s.X == p.X);
  CHECK(s.T == p.T);
  CHECK(s.mask == p.mask);
  CHECK(s.norm.mean == p.norm.mean);
  CHECK(s.norm.stdev == p.norm.stdev);
}
