#include "dcpf/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "dcpf/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "dataset files are little-endian; byte swapping is not implemented");

namespace dcpf {

namespace fs = std::filesystem;

void write_f64_file(const fs::path& path, std::span<const double> values) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(double)));
  if (!out) throw DataError("short write to '" + path.string() + "'");
}

std::vector<double> read_f64_file(const fs::path& path, size_t expected_count) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::vector<double> values(expected_count);
  in.read(reinterpret_cast<char*>(values.data()),
          static_cast<std::streamsize>(expected_count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(expected_count * sizeof(double)))
    throw DataError("'" + path.string() + "' is shorter than the manifest says");
  return values;
}

void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError("'" + path.string() + "': " + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

Grid grid_from_json(const json& j) {
  Grid g;
  try {
    g.name = j.at("name").get<std::string>();
    g.n_substations = j.at("substations").get<int>();
    g.slack_substation = j.at("slack").get<int>();
    for (const auto& lj : j.at("lines")) {
      Line ln;
      ln.id = lj.at("id").get<std::string>();
      ln.sub_or = lj.at("from").get<int>();
      ln.sub_ex = lj.at("to").get<int>();
      ln.x = lj.at("x").get<double>();
      g.lines.push_back(std::move(ln));
    }
    for (const auto& gj : j.at("generators")) {
      g.generators.push_back(
          {gj.at("id").get<std::string>(), gj.at("sub").get<int>(),
           gj.at("p_nominal").get<double>()});
    }
    for (const auto& dj : j.at("loads")) {
      g.loads.push_back({dj.at("id").get<std::string>(), dj.at("sub").get<int>(),
                         dj.at("p_nominal").get<double>()});
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("grid json: ") + e.what());
  }
  g.validate();
  return g;
}

Grid load_grid(const fs::path& path) { return grid_from_json(read_json_file(path)); }

json to_json(const ScenarioConfig& c) {
  return json{{"n_samples", c.n_samples},
              {"p_unchanged", c.p_unchanged},
              {"max_reconfigured_substations", c.max_reconfigured_substations},
              {"disconnection_rule", to_string(c.disconnection_rule)},
              {"load_scale", {c.load_scale_lo, c.load_scale_hi}},
              {"seed", c.seed}};
}

ScenarioConfig scenario_config_from_json(const json& j, const ScenarioConfig& defaults) {
  ScenarioConfig c = defaults;
  if (j.contains("n_samples")) c.n_samples = j.at("n_samples").get<int>();
  if (j.contains("p_unchanged")) c.p_unchanged = j.at("p_unchanged").get<double>();
  if (j.contains("max_reconfigured_substations"))
    c.max_reconfigured_substations = j.at("max_reconfigured_substations").get<int>();
  if (j.contains("disconnection_rule"))
    c.disconnection_rule = rule_from_string(j.at("disconnection_rule").get<std::string>());
  if (j.contains("load_scale")) {
    c.load_scale_lo = j.at("load_scale").at(0).get<double>();
    c.load_scale_hi = j.at("load_scale").at(1).get<double>();
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

json to_json(const MpConfig& c) {
  return json{{"n_layers", c.n_layers},
              {"omega", c.omega},
              {"tol", c.tol},
              {"track_trajectory", c.track_trajectory}};
}

MpConfig mp_config_from_json(const json& j, const MpConfig& defaults) {
  MpConfig c = defaults;
  if (j.contains("n_layers")) c.n_layers = j.at("n_layers").get<int>();
  if (j.contains("omega")) c.omega = j.at("omega").get<double>();
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("track_trajectory"))
    c.track_trajectory = j.at("track_trajectory").get<bool>();
  if (c.n_layers < 1 || !(c.omega > 0.0) || c.omega > 1.0 || !(c.tol > 0.0))
    throw ConfigError("mp config: invalid values");
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"initial_lr", c.initial_lr},
              {"plateau_patience", c.plateau_patience},
              {"plateau_factor", c.plateau_factor},
              {"min_lr", c.min_lr},
              {"lambda_physics", c.lambda_physics},
              {"seed", c.seed},
              {"model_kind", to_string(c.model_kind)},
              {"pimp_layers", c.pimp_layers},
              {"mp_omega", c.mp_omega},
              {"pimp_intermediate_lc", c.pimp_intermediate_lc},
              {"hidden_layers", c.hidden_layers},
              {"hidden_width", c.hidden_width},
              {"activation", to_string(c.activation)},
              {"threads", c.threads}};
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults) {
  TrainConfig c = defaults;
  if (j.contains("epochs")) c.epochs = j.at("epochs").get<int>();
  if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<int>();
  if (j.contains("initial_lr")) c.initial_lr = j.at("initial_lr").get<double>();
  if (j.contains("plateau_patience")) c.plateau_patience = j.at("plateau_patience").get<int>();
  if (j.contains("plateau_factor")) c.plateau_factor = j.at("plateau_factor").get<double>();
  if (j.contains("min_lr")) c.min_lr = j.at("min_lr").get<double>();
  if (j.contains("lambda_physics")) c.lambda_physics = j.at("lambda_physics").get<double>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("model_kind"))
    c.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
  if (j.contains("pimp_layers")) c.pimp_layers = j.at("pimp_layers").get<int>();
  if (j.contains("mp_omega")) c.mp_omega = j.at("mp_omega").get<double>();
  if (j.contains("pimp_intermediate_lc"))
    c.pimp_intermediate_lc = j.at("pimp_intermediate_lc").get<bool>();
  if (j.contains("hidden_layers")) c.hidden_layers = j.at("hidden_layers").get<int>();
  if (j.contains("hidden_width")) c.hidden_width = j.at("hidden_width").get<int>();
  if (j.contains("activation"))
    c.activation = activation_from_string(j.at("activation").get<std::string>());
  if (j.contains("threads")) c.threads = j.at("threads").get<int>();
  c.validate();
  return c;
}

json to_json(const PhysicsThresholds& t) {
  return json{{"tau_lc", t.tau_lc},
              {"tau_loss", t.tau_loss},
              {"tau_null", t.tau_null},
              {"p3_range", {t.p3_lo, t.p3_hi}}};
}

PhysicsThresholds thresholds_from_json(const json& j, const PhysicsThresholds& defaults) {
  PhysicsThresholds t = defaults;
  if (j.contains("tau_lc")) t.tau_lc = j.at("tau_lc").get<double>();
  if (j.contains("tau_loss")) t.tau_loss = j.at("tau_loss").get<double>();
  if (j.contains("tau_null")) t.tau_null = j.at("tau_null").get<double>();
  if (j.contains("p3_range")) {
    t.p3_lo = j.at("p3_range").at(0).get<double>();
    t.p3_hi = j.at("p3_range").at(1).get<double>();
  }
  return t;
}

namespace {

struct ArraySpec {
  std::string name;
  std::vector<size_t> shape;
};

size_t shape_count(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t s : shape) n *= s;
  return n;
}

}  // namespace

void save_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  const int n = ds.size();
  if (n == 0) throw DataError("refusing to save an empty dataset");
  const size_t G = ds.samples[0].inj.p_prod.size();
  const size_t D = ds.samples[0].inj.p_load.size();
  const size_t E = ds.samples[0].tau.element_bus.size();
  const size_t L = ds.samples[0].tau.line_status.size();
  const size_t S = ds.samples[0].theta_bus_slots.size();

  auto dump = [&](const std::string& name, size_t width, auto&& get) {
    std::vector<double> buf(static_cast<size_t>(n) * width);
    for (int i = 0; i < n; ++i) get(ds.samples[i], buf.data() + static_cast<size_t>(i) * width);
    write_f64_file(dir / (name + ".f64"), buf);
  };

  dump("p_prod", G, [&](const Sample& s, double* row) {
    std::memcpy(row, s.inj.p_prod.data(), G * sizeof(double));
  });
  dump("p_load", D, [&](const Sample& s, double* row) {
    std::memcpy(row, s.inj.p_load.data(), D * sizeof(double));
  });
  dump("element_bus", E, [&](const Sample& s, double* row) {
    for (size_t e = 0; e < E; ++e) row[e] = s.tau.element_bus[e] == Busbar::Two ? 1.0 : 0.0;
  });
  dump("line_status", L, [&](const Sample& s, double* row) {
    for (size_t l = 0; l < L; ++l)
      row[l] = s.tau.line_status[l] == LineStatus::Connected ? 1.0 : 0.0;
  });
  dump("theta_bus", S, [&](const Sample& s, double* row) {
    std::memcpy(row, s.theta_bus_slots.data(), S * sizeof(double));
  });
  dump("theta_or", L, [&](const Sample& s, double* row) {
    std::memcpy(row, s.theta_or.data(), L * sizeof(double));
  });
  dump("theta_ex", L, [&](const Sample& s, double* row) {
    std::memcpy(row, s.theta_ex.data(), L * sizeof(double));
  });
  dump("p_or", L, [&](const Sample& s, double* row) {
    std::memcpy(row, s.flows.p_or.data(), L * sizeof(double));
  });
  dump("p_ex", L, [&](const Sample& s, double* row) {
    std::memcpy(row, s.flows.p_ex.data(), L * sizeof(double));
  });

  const size_t un = static_cast<size_t>(n);
  json arrays = json::array();
  auto arr = [&](const std::string& name, size_t width) {
    arrays.push_back(
        {{"name", name}, {"shape", {un, width}}, {"dtype", "f64le"}, {"file", name + ".f64"}});
  };
  arr("p_prod", G);
  arr("p_load", D);
  arr("element_bus", E);
  arr("line_status", L);
  arr("theta_bus", S);
  arr("theta_or", L);
  arr("theta_ex", L);
  arr("p_or", L);
  arr("p_ex", L);

  json manifest{{"format", "dcpf-dataset-v1"},
                {"grid", ds.manifest.grid_name},
                {"split", to_string(ds.split)},
                {"seed", ds.manifest.config.seed},
                {"generator_version", ds.manifest.generator_version},
                {"config", to_json(ds.manifest.config)},
                {"n_samples", n},
                {"arrays", arrays}};
  write_json_file(dir / "manifest.json", manifest);
}

Dataset load_dataset(const fs::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("format", "") != "dcpf-dataset-v1")
    throw DataError("'" + dir.string() + "' is not a dataset directory");

  Dataset ds;
  ds.split = split_from_string(manifest.at("split").get<std::string>());
  ds.manifest.grid_name = manifest.at("grid").get<std::string>();
  ds.manifest.split = ds.split;
  ds.manifest.generator_version = manifest.at("generator_version").get<std::string>();
  ds.manifest.config = scenario_config_from_json(manifest.at("config"), ScenarioConfig{});

  const int n = manifest.at("n_samples").get<int>();
  std::map<std::string, std::pair<std::vector<size_t>, std::vector<double>>> arrays;
  for (const auto& aj : manifest.at("arrays")) {
    std::vector<size_t> shape = aj.at("shape").get<std::vector<size_t>>();
    if (aj.at("dtype").get<std::string>() != "f64le")
      throw DataError("unsupported dtype in dataset manifest");
    arrays[aj.at("name").get<std::string>()] = {
        shape, read_f64_file(dir / aj.at("file").get<std::string>(), shape_count(shape))};
  }
  auto need = [&](const std::string& name) -> const auto& {
    auto it = arrays.find(name);
    if (it == arrays.end()) throw DataError("dataset is missing array '" + name + "'");
    return it->second;
  };

  const auto& [sh_pp, p_prod] = need("p_prod");
  const auto& [sh_pl, p_load] = need("p_load");
  const auto& [sh_eb, element_bus] = need("element_bus");
  const auto& [sh_ls, line_status] = need("line_status");
  const auto& [sh_tb, theta_bus] = need("theta_bus");
  const auto& [sh_to, theta_or] = need("theta_or");
  const auto& [sh_te, theta_ex] = need("theta_ex");
  const auto& [sh_po, p_or] = need("p_or");
  const auto& [sh_pe, p_ex] = need("p_ex");

  const size_t G = sh_pp[1], D = sh_pl[1], E = sh_eb[1], L = sh_ls[1], S = sh_tb[1];
  ds.samples.resize(n);
  for (int i = 0; i < n; ++i) {
    Sample& s = ds.samples[i];
    const size_t u = static_cast<size_t>(i);
    s.inj.p_prod.assign(p_prod.begin() + u * G, p_prod.begin() + (u + 1) * G);
    s.inj.p_load.assign(p_load.begin() + u * D, p_load.begin() + (u + 1) * D);
    s.tau.element_bus.resize(E);
    for (size_t e = 0; e < E; ++e)
      s.tau.element_bus[e] = element_bus[u * E + e] > 0.5 ? Busbar::Two : Busbar::One;
    s.tau.line_status.resize(L);
    for (size_t l = 0; l < L; ++l)
      s.tau.line_status[l] =
          line_status[u * L + l] > 0.5 ? LineStatus::Connected : LineStatus::Disconnected;
    s.theta_bus_slots.assign(theta_bus.begin() + u * S, theta_bus.begin() + (u + 1) * S);
    s.theta_or.assign(theta_or.begin() + u * L, theta_or.begin() + (u + 1) * L);
    s.theta_ex.assign(theta_ex.begin() + u * L, theta_ex.begin() + (u + 1) * L);
    s.flows.p_or.assign(p_or.begin() + u * L, p_or.begin() + (u + 1) * L);
    s.flows.p_ex.assign(p_ex.begin() + u * L, p_ex.begin() + (u + 1) * L);
  }
  return ds;
}

void save_checkpoint(const fs::path& dir, const Checkpoint& ckpt) {
  fs::create_directories(dir);
  json layers = json::array();
  for (size_t l = 0; l < ckpt.params.layers.size(); ++l) {
    const auto& L = ckpt.params.layers[l];
    const std::string wname = "w" + std::to_string(l) + ".f64";
    const std::string bname = "b" + std::to_string(l) + ".f64";
    write_f64_file(dir / wname, L.w);
    write_f64_file(dir / bname, L.b);
    layers.push_back({{"in", L.in},
                      {"out", L.out},
                      {"weights", wname},
                      {"bias", bname}});
  }
  write_f64_file(dir / "norm_mean.f64", ckpt.norm.mean);
  write_f64_file(dir / "norm_std.f64", ckpt.norm.stdev);
  json manifest{{"format", "dcpf-checkpoint-v1"},
                {"grid", ckpt.grid_name},
                {"model_kind", to_string(ckpt.config.model_kind)},
                {"activation", to_string(ckpt.params.activation)},
                {"input_dim", ckpt.params.input_dim},
                {"output_dim", ckpt.params.output_dim},
                {"layers", layers},
                {"normalization", {{"mean", "norm_mean.f64"}, {"std", "norm_std.f64"}}},
                {"config", to_json(ckpt.config)}};
  write_json_file(dir / "manifest.json", manifest);
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const json manifest = read_json_file(dir / "manifest.json");
  if (manifest.value("format", "") != "dcpf-checkpoint-v1")
    throw DataError("'" + dir.string() + "' is not a checkpoint directory");
  Checkpoint ckpt;
  ckpt.grid_name = manifest.at("grid").get<std::string>();
  ckpt.config = train_config_from_json(manifest.at("config"), TrainConfig{});
  ckpt.params.activation =
      activation_from_string(manifest.at("activation").get<std::string>());
  ckpt.params.input_dim = manifest.at("input_dim").get<int>();
  ckpt.params.output_dim = manifest.at("output_dim").get<int>();
  for (const auto& lj : manifest.at("layers")) {
    DenseLayer L;
    L.in = lj.at("in").get<int>();
    L.out = lj.at("out").get<int>();
    L.w = read_f64_file(dir / lj.at("weights").get<std::string>(),
                        static_cast<size_t>(L.in) * L.out);
    L.b = read_f64_file(dir / lj.at("bias").get<std::string>(), L.out);
    ckpt.params.layers.push_back(std::move(L));
  }
  const size_t in_dim = static_cast<size_t>(ckpt.params.input_dim);
  ckpt.norm.mean = read_f64_file(
      dir / manifest.at("normalization").at("mean").get<std::string>(), in_dim);
  ckpt.norm.stdev = read_f64_file(
      dir / manifest.at("normalization").at("std").get<std::string>(), in_dim);
  return ckpt;
}

void write_train_report_csv(const fs::path& path, const TrainReport& report) {
  std::string csv = "epoch,train_loss,val_loss,data_loss,physics_loss,lr\n";
  for (size_t e = 0; e < report.train_loss.size(); ++e) {
    char line[256];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", e,
                  report.train_loss[e], report.val_loss[e], report.data_loss[e],
                  report.physics_loss[e], report.lr_trace[e]);
    csv += line;
  }
  write_text_file(path, csv);
}

json to_json(const MetricReport& r) {
  json j{{"mae", r.mae},
         {"mae_theta_or", r.mae_theta_or},
         {"mae_theta_ex", r.mae_theta_ex}};
  if (r.mape90)
    j["mape90"] = *r.mape90;
  else
    j["mape90"] = "undefined";
  return j;
}

json to_json(const PhysicsReport& r) {
  json j{{"p1_negative_losses", r.p1},
         {"p2_disconnected_flow", r.p2},
         {"p2_disconnected_pairs", r.disconnected_pairs},
         {"p3_loss_ratio_in_range", r.p3},
         {"p3_note", "DC losses are exactly zero; the range is not attainable"},
         {"p4_excluded_samples", r.p4_excluded},
         {"p5_violation", r.p5_violation},
         {"p5_pairs", r.p5_pairs},
         {"thresholds", to_json(r.thresholds)}};
  j["p4_mape"] = r.p4 ? json(*r.p4) : json("undefined");
  j["p5_residual_mape"] = r.p5_mape ? json(*r.p5_mape) : json("undefined");
  return j;
}

}  // namespace dcpf
