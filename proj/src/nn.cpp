#include "dcpf/nn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>

#include "dcpf/errors.hpp"
#include "dcpf/rng.hpp"

namespace dcpf {

std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Mlp: return "mlp";
    case ModelKind::MlpReg: return "mlp_reg";
    case ModelKind::Pimp: return "pimp";
  }
  return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
  if (s == "mlp") return ModelKind::Mlp;
  if (s == "mlp_reg") return ModelKind::MlpReg;
  if (s == "pimp") return ModelKind::Pimp;
  throw ConfigError("unknown model kind '" + s + "'");
}

std::string to_string(Activation a) {
  return a == Activation::Relu ? "relu" : "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw ConfigError("unknown activation '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(plateau_factor > 0.0) || !(plateau_factor < 1.0))
    throw ConfigError("train: plateau_factor must lie in (0, 1)");
  if (lambda_physics < 0.0) throw ConfigError("train: lambda_physics must be >= 0");
  if (pimp_layers < 0) throw ConfigError("train: pimp_layers must be >= 0");
  if (!(mp_omega > 0.0) || mp_omega > 1.0)
    throw ConfigError("train: mp_omega must lie in (0, 1]");
  if (hidden_layers < 1 || hidden_width < 1)
    throw ConfigError("train: hidden architecture invalid");
}

size_t MlpParams::n_parameters() const {
  size_t n = 0;
  for (const auto& l : layers) n += l.w.size() + l.b.size();
  return n;
}

void Normalization::apply(std::span<double> x) const {
  for (size_t i = 0; i < x.size(); ++i) x[i] = (x[i] - mean[i]) / stdev[i];
}

MlpParams init_params(int input_dim, int hidden_layers, int hidden_width, int output_dim,
                      Activation activation, std::uint64_t seed) {
  MlpParams p;
  p.activation = activation;
  p.input_dim = input_dim;
  p.output_dim = output_dim;
  Rng rng(seed ^ 0x5eedf00dULL);
  int in = input_dim;
  for (int l = 0; l <= hidden_layers; ++l) {
    const int out = (l == hidden_layers) ? output_dim : hidden_width;
    DenseLayer layer;
    layer.in = in;
    layer.out = out;
    layer.w.resize(static_cast<size_t>(out) * in);
    layer.b.resize(out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : layer.w) v = rng.uniform(-bound, bound);
    for (auto& v : layer.b) v = rng.uniform(-bound, bound);
    p.layers.push_back(std::move(layer));
    in = out;
  }
  return p;
}

namespace {

void affine_forward(const DenseLayer& L, const double* in, int n, double* out, int threads) {
  parallel_for_threads(n, threads, [&](int r) {
    const double* x = in + static_cast<size_t>(r) * L.in;
    double* y = out + static_cast<size_t>(r) * L.out;
    for (int o = 0; o < L.out; ++o) {
      const double* wrow = L.w.data() + static_cast<size_t>(o) * L.in;
      double acc = L.b[o];
      for (int i = 0; i < L.in; ++i) acc += wrow[i] * x[i];
      y[o] = acc;
    }
  });
}

void apply_activation(Activation a, double* x, size_t n) {
  if (a == Activation::Relu) {
    for (size_t i = 0; i < n; ++i) x[i] = x[i] > 0.0 ? x[i] : 0.0;
  } else {
    for (size_t i = 0; i < n; ++i) x[i] = std::tanh(x[i]);
  }
}

// delta <- delta * act'(post) elementwise, using post-activation values
void activation_backward(Activation a, const double* post, double* delta, size_t n) {
  if (a == Activation::Relu) {
    for (size_t i = 0; i < n; ++i)
      if (!(post[i] > 0.0)) delta[i] = 0.0;
  } else {
    for (size_t i = 0; i < n; ++i) delta[i] *= 1.0 - post[i] * post[i];
  }
}

// delta_in[r][i] = sum_o delta_out[r][o] * w[o][i]
void backprop_delta(const DenseLayer& L, const double* delta_out, int n, double* delta_in,
                    int threads) {
  parallel_for_threads(n, threads, [&](int r) {
    const double* d = delta_out + static_cast<size_t>(r) * L.out;
    double* di = delta_in + static_cast<size_t>(r) * L.in;
    std::memset(di, 0, sizeof(double) * L.in);
    for (int o = 0; o < L.out; ++o) {
      const double* wrow = L.w.data() + static_cast<size_t>(o) * L.in;
      const double dv = d[o];
      if (dv == 0.0) continue;
      for (int i = 0; i < L.in; ++i) di[i] += dv * wrow[i];
    }
  });
}

// gw[o][i] = sum_r delta[r][o] * in[r][i]; gb[o] = sum_r delta[r][o].
// Parallel over output rows, inner sum in fixed batch order: results do not
// depend on the thread count.
void accumulate_grads(const DenseLayer& L, const double* in, const double* delta_out, int n,
                      DenseLayer& g, int threads) {
  parallel_for_threads(L.out, threads, [&](int o) {
    double* gw = g.w.data() + static_cast<size_t>(o) * L.in;
    double gb = 0.0;
    for (int r = 0; r < n; ++r) {
      const double dv = delta_out[static_cast<size_t>(r) * L.out + o];
      gb += dv;
      if (dv == 0.0) continue;
      const double* x = in + static_cast<size_t>(r) * L.in;
      for (int i = 0; i < L.in; ++i) gw[i] += dv * x[i];
    }
    g.b[o] = gb;
  });
}

std::vector<DenseLayer> zero_grads(const MlpParams& p) {
  std::vector<DenseLayer> g;
  g.reserve(p.layers.size());
  for (const auto& l : p.layers) {
    DenseLayer z;
    z.in = l.in;
    z.out = l.out;
    z.w.assign(l.w.size(), 0.0);
    z.b.assign(l.b.size(), 0.0);
    g.push_back(std::move(z));
  }
  return g;
}

// Forward pass over a gathered batch, keeping post-activation values per layer.
// acts[0] is the input; acts.back() the linear output.
void forward_with_acts(const MlpParams& p, const std::vector<double>& xb, int nb,
                       std::vector<std::vector<double>>& acts, int threads) {
  acts.resize(p.layers.size() + 1);
  acts[0] = xb;
  for (size_t l = 0; l < p.layers.size(); ++l) {
    const auto& L = p.layers[l];
    acts[l + 1].resize(static_cast<size_t>(nb) * L.out);
    affine_forward(L, acts[l].data(), nb, acts[l + 1].data(), threads);
    if (l + 1 < p.layers.size())
      apply_activation(p.activation, acts[l + 1].data(), acts[l + 1].size());
  }
}

// physics-term cotangent at one layer state: -(2 lambda / scale) * Y (E . ns)
void add_physics_cotangent(const SampleContext& ctx, std::span<const double> theta,
                           double coeff, std::vector<double>& g,
                           double* sq_residual_sum) {
  std::vector<double> e = lc_residual(theta, ctx.p, ctx.Y);
  e[ctx.bg.slack_bus] = 0.0;
  if (sq_residual_sum) {
    double s = 0.0;
    for (double v : e) s += v * v;
    *sq_residual_sum += s;
  }
  if (coeff == 0.0) return;
  std::vector<double> ye(ctx.Y.dim);
  ctx.Y.multiply(e, ye);
  for (int i = 0; i < ctx.Y.dim; ++i) g[i] -= coeff * ye[i];
}

struct BatchDenoms {
  double data = 0.0;
  double phys = 0.0;
};

BatchDenoms batch_denoms(const PreparedData& data, std::span<const int> batch) {
  BatchDenoms d;
  if (data.kind == ModelKind::Mlp) {
    d.data = static_cast<double>(batch.size()) * data.out_dim;
    d.phys = 1.0;
    return d;
  }
  for (int r : batch) {
    const int nb = data.ctx[r].bg.n_buses;
    d.data += nb;
    d.phys += nb - 1;  // non-slack buses
  }
  return d;
}

// Per-kind output loss and (optionally) the cotangent at the network output.
// Shared by nn_grad and nn_loss so the definitions cannot drift apart.
LossParts output_loss_and_delta(const MlpParams& params, const PreparedData& data,
                                std::span<const int> batch, const TrainConfig& cfg,
                                const std::vector<double>& yout, double* delta,
                                int threads) {
  const int nb = static_cast<int>(batch.size());
  const int od = data.out_dim;
  const BatchDenoms denom = batch_denoms(data, batch);
  (void)params;

  std::vector<double> row_data(nb, 0.0);
  std::vector<double> row_phys(nb, 0.0);

  if (data.kind == ModelKind::Mlp) {
    parallel_for_threads(nb, threads, [&](int r) {
      const double* y = yout.data() + static_cast<size_t>(r) * od;
      const double* t = data.T.data() + static_cast<size_t>(batch[r]) * od;
      double* d = delta ? delta + static_cast<size_t>(r) * od : nullptr;
      double sse = 0.0;
      for (int o = 0; o < od; ++o) {
        const double diff = y[o] - t[o];
        sse += diff * diff;
        if (d) d[o] = 2.0 * diff / denom.data;
      }
      row_data[r] = sse;
    });
  } else {
    const bool pimp = data.kind == ModelKind::Pimp;
    const double lambda = cfg.lambda_physics;
    parallel_for_threads(nb, threads, [&](int r) {
      const int s = batch[r];
      const SampleContext& ctx = data.ctx[s];
      const int B = ctx.bg.n_buses;
      const double* y = yout.data() + static_cast<size_t>(r) * od;
      const double* t = data.T.data() + static_cast<size_t>(s) * od;
      double* d = delta ? delta + static_cast<size_t>(r) * od : nullptr;
      if (d) std::memset(d, 0, sizeof(double) * od);

      // compact bus-space view of the prediction
      std::vector<double> theta(B);
      for (int b = 0; b < B; ++b) theta[b] = y[ctx.bg.bus_slot[b]];

      if (!pimp) {
        double sse = 0.0;
        std::vector<double> gtheta(B, 0.0);
        for (int b = 0; b < B; ++b) {
          const double diff = theta[b] - t[ctx.bg.bus_slot[b]];
          sse += diff * diff;
          gtheta[b] = 2.0 * diff / denom.data;
        }
        row_data[r] = sse;
        const double coeff = (delta && lambda > 0.0) ? 2.0 * lambda / denom.phys : 0.0;
        add_physics_cotangent(ctx, theta, coeff, gtheta, &row_phys[r]);
        if (d)
          for (int b = 0; b < B; ++b) d[ctx.bg.bus_slot[b]] = gtheta[b];
        return;
      }

      // Pimp: pin slack, run the MP chain, differentiate through it
      const int K = cfg.pimp_layers;
      const bool keep = cfg.pimp_intermediate_lc;
      MpForwardCache cache;
      std::vector<double> theta_k =
          mp_forward(theta, ctx.p, ctx.Y, cfg.mp_omega, K, ctx.bg.slack_bus, &cache, keep);

      double sse = 0.0;
      std::vector<double> g(B, 0.0);
      for (int b = 0; b < B; ++b) {
        const double diff = theta_k[b] - t[ctx.bg.bus_slot[b]];
        sse += diff * diff;
        g[b] = 2.0 * diff / denom.data;
      }
      row_data[r] = sse;

      const int terms = (keep && K >= 1) ? K : 1;
      const double coeff = 2.0 * lambda / (terms * denom.phys);
      double sq = 0.0;
      add_physics_cotangent(ctx, theta_k, delta ? coeff : 0.0, g, &sq);
      row_phys[r] += sq / terms;

      if (d == nullptr) {
        if (keep && K >= 1) {
          // intermediate LC terms contribute to the reported loss as well
          for (int k = 1; k < K; ++k) {
            double sqk = 0.0;
            add_physics_cotangent(ctx, cache.states[k], 0.0, g, &sqk);
            row_phys[r] += sqk / terms;
          }
        }
        return;
      }

      // reverse sweep to theta_0
      for (int k = K; k >= 1; --k) {
        g = phasor_update_adjoint(g, ctx.Y, cfg.mp_omega, ctx.bg.slack_bus);
        if (keep && k - 1 >= 1) {
          double sqk = 0.0;
          add_physics_cotangent(ctx, cache.states[k - 1], coeff, g, &sqk);
          row_phys[r] += sqk / terms;
        }
      }
      g[ctx.bg.slack_bus] = 0.0;  // the input pinning blocks this component
      for (int b = 0; b < B; ++b) d[ctx.bg.bus_slot[b]] = g[b];
    });
  }

  LossParts loss;
  for (int r = 0; r < nb; ++r) {
    loss.data += row_data[r];
    loss.physics += row_phys[r];
  }
  loss.data /= denom.data;
  loss.physics /= denom.phys;
  loss.total = loss.data + cfg.lambda_physics * loss.physics;
  if (!std::isfinite(loss.total))
    throw NonFiniteLoss("loss became non-finite (" + to_string(data.kind) + ")");
  return loss;
}

std::vector<double> gather_rows(const std::vector<double>& X, int dim,
                                std::span<const int> batch) {
  std::vector<double> out(batch.size() * static_cast<size_t>(dim));
  for (size_t r = 0; r < batch.size(); ++r)
    std::memcpy(out.data() + r * dim, X.data() + static_cast<size_t>(batch[r]) * dim,
                sizeof(double) * dim);
  return out;
}

}  // namespace

std::vector<double> nn_forward(const MlpParams& params, std::span<const double> x) {
  if (static_cast<int>(x.size()) != params.input_dim)
    throw DimensionMismatch("nn_forward: input dimension mismatch");
  std::vector<double> out(params.output_dim);
  std::vector<double> buf(x.begin(), x.end());
  nn_forward_batch(params, buf.data(), 1, out.data(), 1);
  return out;
}

void nn_forward_batch(const MlpParams& params, const double* X, int n, double* out,
                      int threads) {
  std::vector<double> cur(X, X + static_cast<size_t>(n) * params.input_dim);
  std::vector<double> next;
  for (size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    const bool last = l + 1 == params.layers.size();
    double* dst = last ? out : (next.resize(static_cast<size_t>(n) * L.out), next.data());
    affine_forward(L, cur.data(), n, dst, threads);
    if (!last) {
      apply_activation(params.activation, dst, static_cast<size_t>(n) * L.out);
      cur.swap(next);
    }
  }
}

GradResult nn_grad(const MlpParams& params, const PreparedData& data,
                   std::span<const int> batch, const TrainConfig& config) {
  if (batch.empty()) throw DataError("nn_grad: empty batch");
  const int nb = static_cast<int>(batch.size());
  const int threads = config.threads;

  std::vector<double> xb = gather_rows(data.X, data.in_dim, batch);
  std::vector<std::vector<double>> acts;
  forward_with_acts(params, xb, nb, acts, threads);

  GradResult res;
  res.grads = zero_grads(params);

  std::vector<double> delta(static_cast<size_t>(nb) * data.out_dim);
  res.loss = output_loss_and_delta(params, data, batch, config, acts.back(), delta.data(),
                                   threads);

  for (int l = static_cast<int>(params.layers.size()) - 1; l >= 0; --l) {
    const auto& L = params.layers[l];
    accumulate_grads(L, acts[l].data(), delta.data(), nb, res.grads[l], threads);
    if (l > 0) {
      std::vector<double> prev(static_cast<size_t>(nb) * L.in);
      backprop_delta(L, delta.data(), nb, prev.data(), threads);
      activation_backward(params.activation, acts[l].data(), prev.data(), prev.size());
      delta.swap(prev);
    }
  }
  return res;
}

LossParts nn_loss(const MlpParams& params, const PreparedData& data,
                  std::span<const int> batch, const TrainConfig& config) {
  if (batch.empty()) throw DataError("nn_loss: empty batch");
  const int nb = static_cast<int>(batch.size());
  std::vector<double> xb = gather_rows(data.X, data.in_dim, batch);
  std::vector<double> yout(static_cast<size_t>(nb) * data.out_dim);
  nn_forward_batch(params, xb.data(), nb, yout.data(), config.threads);
  return output_loss_and_delta(params, data, batch, config, yout, nullptr, config.threads);
}

PreparedData prepare_data(const Grid& grid, const Dataset& ds, ModelKind kind,
                          const Normalization* stats, ExecPolicy policy) {
  PreparedData d;
  d.kind = kind;
  d.n = ds.size();
  d.in_dim = feature_length(grid);
  d.out_dim = kind == ModelKind::Mlp ? 2 * grid.n_lines() : grid.n_slots();
  d.X.resize(static_cast<size_t>(d.n) * d.in_dim);
  d.T.resize(static_cast<size_t>(d.n) * d.out_dim);

  const bool bus_kind = kind != ModelKind::Mlp;
  if (bus_kind) {
    d.mask.assign(static_cast<size_t>(d.n) * d.out_dim, 0);
    d.ctx.resize(d.n);
  }

  const int L = grid.n_lines();
  parallel_for(d.n, policy, [&](int i) {
    const Sample& s = ds.samples[i];
    std::vector<double> x = encode_features(grid, s.tau, s.inj);
    std::memcpy(d.X.data() + static_cast<size_t>(i) * d.in_dim, x.data(),
                sizeof(double) * d.in_dim);
    double* t = d.T.data() + static_cast<size_t>(i) * d.out_dim;
    if (kind == ModelKind::Mlp) {
      std::memcpy(t, s.theta_or.data(), sizeof(double) * L);
      std::memcpy(t + L, s.theta_ex.data(), sizeof(double) * L);
    } else {
      std::memcpy(t, s.theta_bus_slots.data(), sizeof(double) * d.out_dim);
      d.ctx[i] = make_context(grid, s.tau, s.inj);
      char* m = d.mask.data() + static_cast<size_t>(i) * d.out_dim;
      for (int b = 0; b < d.ctx[i].bg.n_buses; ++b) m[d.ctx[i].bg.bus_slot[b]] = 1;
    }
  });

  if (stats) {
    d.norm = *stats;
  } else {
    d.norm.mean.assign(d.in_dim, 0.0);
    d.norm.stdev.assign(d.in_dim, 0.0);
    for (int i = 0; i < d.n; ++i)
      for (int j = 0; j < d.in_dim; ++j) d.norm.mean[j] += d.X[static_cast<size_t>(i) * d.in_dim + j];
    for (int j = 0; j < d.in_dim; ++j) d.norm.mean[j] /= d.n;
    for (int i = 0; i < d.n; ++i)
      for (int j = 0; j < d.in_dim; ++j) {
        const double c = d.X[static_cast<size_t>(i) * d.in_dim + j] - d.norm.mean[j];
        d.norm.stdev[j] += c * c;
      }
    for (int j = 0; j < d.in_dim; ++j) {
      d.norm.stdev[j] = std::sqrt(d.norm.stdev[j] / d.n);
      if (d.norm.stdev[j] < 1e-12) d.norm.stdev[j] = 1.0;  // constant feature slots
    }
  }
  parallel_for(d.n, policy, [&](int i) {
    d.norm.apply(std::span<double>(d.X.data() + static_cast<size_t>(i) * d.in_dim, d.in_dim));
  });
  return d;
}

namespace {

struct AdamState {
  std::vector<DenseLayer> m, v;
  long long t = 0;
};

void adam_step(MlpParams& params, const std::vector<DenseLayer>& grads, AdamState& st,
               double lr) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++st.t;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(st.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(st.t));
  for (size_t l = 0; l < params.layers.size(); ++l) {
    auto upd = [&](std::vector<double>& w, const std::vector<double>& g,
                   std::vector<double>& m, std::vector<double>& v) {
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
      }
    };
    upd(params.layers[l].w, grads[l].w, st.m[l].w, st.v[l].w);
    upd(params.layers[l].b, grads[l].b, st.m[l].b, st.v[l].b);
  }
}

}  // namespace

TrainResult train_model(const Grid& grid, const Dataset& train_ds, const Dataset& val_ds,
                        const TrainConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  const ExecPolicy policy =
      config.threads == 1 ? ExecPolicy::Serial : ExecPolicy::Parallel;

  PreparedData train = prepare_data(grid, train_ds, config.model_kind, nullptr, policy);
  PreparedData val = prepare_data(grid, val_ds, config.model_kind, &train.norm, policy);

  MlpParams params = init_params(train.in_dim, config.hidden_layers, config.hidden_width,
                                 train.out_dim, config.activation, config.seed);
  AdamState adam;
  adam.m = zero_grads(params);
  adam.v = zero_grads(params);

  std::vector<int> order(train.n);
  for (int i = 0; i < train.n; ++i) order[i] = i;
  std::vector<int> val_idx(val.n);
  for (int i = 0; i < val.n; ++i) val_idx[i] = i;

  Rng shuffle_rng(config.seed ^ 0x9e3779b9ULL);
  double lr = config.initial_lr;
  double best_val = std::numeric_limits<double>::infinity();
  MlpParams best_params = params;
  int wait = 0;

  TrainResult result;
  TrainReport& report = result.report;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the run's own stream keeps epochs reproducible
    for (int i = train.n - 1; i > 0; --i) {
      const int j = static_cast<int>(shuffle_rng.uniform_int(i + 1));
      std::swap(order[i], order[j]);
    }
    double ep_total = 0.0, ep_data = 0.0, ep_phys = 0.0;
    for (int start = 0; start < train.n; start += config.batch_size) {
      const int nb = std::min(config.batch_size, train.n - start);
      std::span<const int> batch(order.data() + start, static_cast<size_t>(nb));
      GradResult g = nn_grad(params, train, batch, config);
      adam_step(params, g.grads, adam, lr);
      ep_total += g.loss.total * nb;
      ep_data += g.loss.data * nb;
      ep_phys += g.loss.physics * nb;
    }
    report.train_loss.push_back(ep_total / train.n);
    report.data_loss.push_back(ep_data / train.n);
    report.physics_loss.push_back(ep_phys / train.n);
    report.lr_trace.push_back(lr);

    const double vloss = nn_loss(params, val, val_idx, config).total;
    report.val_loss.push_back(vloss);
    if (vloss < best_val) {
      best_val = vloss;
      best_params = params;
      report.best_epoch = epoch;
      wait = 0;
    } else if (++wait >= config.plateau_patience) {
      lr = std::max(lr * config.plateau_factor, config.min_lr);
      wait = 0;
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.checkpoint.params = std::move(best_params);
  result.checkpoint.norm = train.norm;
  result.checkpoint.config = config;
  result.checkpoint.grid_name = grid.name;
  return result;
}

namespace {

void line_theta_from_slots(const Grid& grid, const SampleContext& ctx,
                           std::span<const double> slots, double* theta_or,
                           double* theta_ex) {
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (ctx.bg.line_bus_or[l] < 0) {
      theta_or[l] = 0.0;
      theta_ex[l] = 0.0;
      continue;
    }
    theta_or[l] = slots[ctx.bg.bus_slot[ctx.bg.line_bus_or[l]]];
    theta_ex[l] = slots[ctx.bg.bus_slot[ctx.bg.line_bus_ex[l]]];
  }
}

void flows_from_line_theta(const Grid& grid, const TopologyVector& tau,
                           const double* theta_or, const double* theta_ex, double* p_or,
                           double* p_ex) {
  for (int l = 0; l < grid.n_lines(); ++l) {
    if (tau.line_status[l] == LineStatus::Disconnected) {
      p_or[l] = 0.0;
      p_ex[l] = 0.0;
      continue;
    }
    const double b = 1.0 / grid.lines[l].x;
    const double f = b * (theta_or[l] - theta_ex[l]);
    p_or[l] = f;
    p_ex[l] = -f;
  }
}

}  // namespace

PredictionSet predict_dataset(const Checkpoint& ckpt, const Grid& grid, const Dataset& ds,
                              ExecPolicy policy, int pimp_layers_override) {
  if (ckpt.grid_name != grid.name)
    throw DimensionMismatch("checkpoint was trained for grid '" + ckpt.grid_name +
                            "', not '" + grid.name + "'");
  if (ckpt.params.input_dim != feature_length(grid))
    throw DimensionMismatch("checkpoint input dim does not match grid encoding");

  const int n = ds.size();
  const int L = grid.n_lines();
  const ModelKind kind = ckpt.config.model_kind;
  const int out_dim = ckpt.params.output_dim;
  const int expected = kind == ModelKind::Mlp ? 2 * L : grid.n_slots();
  if (out_dim != expected)
    throw DimensionMismatch("checkpoint output dim does not match grid encoding");

  // encode + standardize
  std::vector<double> X(static_cast<size_t>(n) * ckpt.params.input_dim);
  parallel_for(n, policy, [&](int i) {
    std::vector<double> x = encode_features(grid, ds.samples[i].tau, ds.samples[i].inj);
    ckpt.norm.apply(x);
    std::memcpy(X.data() + static_cast<size_t>(i) * x.size(), x.data(),
                sizeof(double) * x.size());
  });

  std::vector<double> raw(static_cast<size_t>(n) * out_dim);
  nn_forward_batch(ckpt.params, X.data(), n, raw.data(),
                   policy == ExecPolicy::Serial ? 1 : 0);

  PredictionSet pred;
  pred.n = n;
  pred.theta_line.resize(static_cast<size_t>(n) * 2 * L);
  pred.p_or.resize(static_cast<size_t>(n) * L);
  pred.p_ex.resize(static_cast<size_t>(n) * L);
  if (kind != ModelKind::Mlp) pred.theta_slots.resize(static_cast<size_t>(n) * grid.n_slots());

  const int pimp_k = pimp_layers_override >= 0 ? pimp_layers_override : ckpt.config.pimp_layers;

  parallel_for(n, policy, [&](int i) {
    const Sample& s = ds.samples[i];
    double* tl = pred.theta_line.data() + static_cast<size_t>(i) * 2 * L;
    if (kind == ModelKind::Mlp) {
      std::memcpy(tl, raw.data() + static_cast<size_t>(i) * out_dim,
                  sizeof(double) * 2 * L);
    } else {
      SampleContext ctx = make_context(grid, s.tau, s.inj);
      std::span<double> slots(pred.theta_slots.data() + static_cast<size_t>(i) * out_dim,
                              out_dim);
      const double* y = raw.data() + static_cast<size_t>(i) * out_dim;
      if (kind == ModelKind::MlpReg) {
        std::copy(y, y + out_dim, slots.begin());
      } else {
        std::vector<double> theta0(ctx.bg.n_buses);
        for (int b = 0; b < ctx.bg.n_buses; ++b) theta0[b] = y[ctx.bg.bus_slot[b]];
        std::vector<double> theta_k = mp_forward(theta0, ctx.p, ctx.Y, ckpt.config.mp_omega,
                                                 pimp_k, ctx.bg.slack_bus);
        std::fill(slots.begin(), slots.end(), 0.0);
        for (int b = 0; b < ctx.bg.n_buses; ++b) slots[ctx.bg.bus_slot[b]] = theta_k[b];
      }
      line_theta_from_slots(grid, ctx, slots, tl, tl + L);
    }
    flows_from_line_theta(grid, s.tau, tl, tl + L,
                          pred.p_or.data() + static_cast<size_t>(i) * L,
                          pred.p_ex.data() + static_cast<size_t>(i) * L);
  });
  return pred;
}

SinglePrediction predict_sample(const Checkpoint& ckpt, const Grid& grid, const Sample& s,
                                int pimp_layers_override) {
  Dataset one;
  one.split = Split::Test;
  one.samples.push_back(s);
  PredictionSet p = predict_dataset(ckpt, grid, one, ExecPolicy::Serial, pimp_layers_override);
  SinglePrediction out;
  out.theta_line = std::move(p.theta_line);
  out.theta_slots = std::move(p.theta_slots);
  return out;
}

}  // namespace dcpf
