// Wall-clock comparison of the OpenMP batch kernels against their serial
// reference implementations. Not a correctness test (test_parallel asserts
// bit-equality); this just shows what the parallel paths buy on this machine.
//
//   ./dcpf_kernel_bench [grid.json]

#include <chrono>
#include <cstdio>
#include <numeric>

#include "dcpf/io.hpp"
#include "dcpf/metrics.hpp"

using namespace dcpf;

namespace {

template <typename Fn>
double best_of(int repeats, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel) {
  std::printf("%-28s %10.3f ms %10.3f ms %8.2fx\n", name, 1e3 * serial, 1e3 * parallel,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const char* grid_path = argc > 1 ? argv[1] : "grids/ieee14.json";
  Grid grid = load_grid(grid_path);
  std::printf("grid %s, %d hardware threads\n\n", grid.name.c_str(), hardware_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "openmp", "speedup");

  ScenarioConfig sc;
  sc.n_samples = 2000;
  sc.seed = 7;

  row("generate_dataset (2000)",
      best_of(3, [&] { generate_dataset(grid, Split::Train, sc, ExecPolicy::Serial); }),
      best_of(3, [&] { generate_dataset(grid, Split::Train, sc, ExecPolicy::Parallel); }));

  Dataset ds = generate_dataset(grid, Split::Train, sc);
  row("make_eval_data (2000)",
      best_of(3, [&] { make_eval_data(grid, ds, ExecPolicy::Serial); }),
      best_of(3, [&] { make_eval_data(grid, ds, ExecPolicy::Parallel); }));

  EvalData eval = make_eval_data(grid, ds);
  MpConfig mp;
  mp.n_layers = 500;
  mp.tol = 1e-6;
  row("batch mp_opt solves (2000)",
      best_of(3, [&] { predict_mp_opt(eval, mp, ExecPolicy::Serial); }),
      best_of(3, [&] { predict_mp_opt(eval, mp, ExecPolicy::Parallel); }));

  PreparedData data = prepare_data(grid, ds, ModelKind::Pimp, nullptr, ExecPolicy::Parallel);
  TrainConfig tc;
  tc.model_kind = ModelKind::Pimp;
  tc.pimp_layers = 50;
  MlpParams params =
      init_params(data.in_dim, 4, 256, data.out_dim, Activation::Relu, 1);

  std::vector<double> out(static_cast<size_t>(data.n) * data.out_dim);
  row("nn_forward_batch (2000x256)",
      best_of(3, [&] { nn_forward_batch(params, data.X.data(), data.n, out.data(), 1); }),
      best_of(3, [&] { nn_forward_batch(params, data.X.data(), data.n, out.data(), 0); }));

  std::vector<int> batch(512);
  std::iota(batch.begin(), batch.end(), 0);
  row("nn_grad pimp (batch 512)", best_of(3,
                                          [&] {
                                            TrainConfig c = tc;
                                            c.threads = 1;
                                            nn_grad(params, data, batch, c);
                                          }),
      best_of(3, [&] {
        TrainConfig c = tc;
        c.threads = 0;
        nn_grad(params, data, batch, c);
      }));

  return 0;
}
