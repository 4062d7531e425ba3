#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dcpf/metrics.hpp"
#include "dcpf/nn.hpp"
#include "dcpf/scenario.hpp"

namespace dcpf {

using json = nlohmann::json;

// --- primitive file helpers -------------------------------------------------

// Raw little-endian float64, row-major. The on-disk dataset/checkpoint format.
void write_f64_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_file(const std::filesystem::path& path, size_t expected_count);

void write_text_file(const std::filesystem::path& path, const std::string& text);
json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const json& j);

// --- grid files ---------------------------------------------------------------

// Schema: {name, substations, slack, lines: [{id, from, to, x}],
//          generators: [{id, sub, p_nominal}], loads: [{id, sub, p_nominal}]}
Grid grid_from_json(const json& j);
Grid load_grid(const std::filesystem::path& path);

// --- config json --------------------------------------------------------------

json to_json(const ScenarioConfig& c);
ScenarioConfig scenario_config_from_json(const json& j, const ScenarioConfig& defaults);

json to_json(const MpConfig& c);
MpConfig mp_config_from_json(const json& j, const MpConfig& defaults);

json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults);

json to_json(const PhysicsThresholds& t);
PhysicsThresholds thresholds_from_json(const json& j, const PhysicsThresholds& defaults);

// --- datasets -------------------------------------------------------------------

// Directory layout: manifest.json + one .f64 file per array
// (p_prod, p_load, element_bus, line_status, theta_bus, theta_or, theta_ex,
//  p_or, p_ex). Shapes live in the manifest.
void save_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& dir);

// --- checkpoints ------------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

void write_train_report_csv(const std::filesystem::path& path, const TrainReport& report);

// reports
json to_json(const MetricReport& r);
json to_json(const PhysicsReport& r);

}  // namespace dcpf
