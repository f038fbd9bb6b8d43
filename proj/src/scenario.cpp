#include "pta/scenario.hpp"

#include <filesystem>
#include <fstream>
#include <functional>

#include <json.hpp>

#include "pta/errors.hpp"

namespace pta {
namespace {

using nlohmann::json;

const char* noise_level_name(NoiseLevel level) {
    switch (level) {
        case NoiseLevel::Off: return "off";
        case NoiseLevel::Low: return "low";
        case NoiseLevel::High: return "high";
    }
    return "off";
}

NoiseLevel noise_level_from(const std::string& name) {
    if (name == "off") return NoiseLevel::Off;
    if (name == "low") return NoiseLevel::Low;
    if (name == "high") return NoiseLevel::High;
    throw SchemaError("unknown phase_noise level '" + name + "'");
}

const char* phase_model_name(PhaseModel m) {
    return m == PhaseModel::Iid ? "iid" : "quasi_static";
}

PhaseModel phase_model_from(const std::string& name) {
    if (name == "quasi_static") return PhaseModel::QuasiStatic;
    if (name == "iid") return PhaseModel::Iid;
    throw SchemaError("unknown phase model '" + name + "'");
}

const char* mask_name(SpatialMask mask) {
    return mask == SpatialMask::EdgeToCorner ? "edge_to_corner" : "none";
}

SpatialMask mask_from(const std::string& name) {
    if (name == "none") return SpatialMask::None;
    if (name == "edge_to_corner") return SpatialMask::EdgeToCorner;
    throw SchemaError("unknown spatial mask '" + name + "'");
}

const char* schedule_name(TemperatureSchedule s) {
    switch (s) {
        case TemperatureSchedule::Constant: return "constant";
        case TemperatureSchedule::Linear: return "linear";
        case TemperatureSchedule::Cosine: return "cosine";
    }
    return "constant";
}

TemperatureSchedule schedule_from(const std::string& name) {
    if (name == "constant") return TemperatureSchedule::Constant;
    if (name == "linear") return TemperatureSchedule::Linear;
    if (name == "cosine") return TemperatureSchedule::Cosine;
    throw SchemaError("unknown temperature schedule '" + name + "'");
}

const char* profile_name(TemperatureProfile p) {
    return p == TemperatureProfile::CornerHotspot ? "corner_hotspot" : "uniform";
}

TemperatureProfile profile_from(const std::string& name) {
    if (name == "uniform") return TemperatureProfile::Uniform;
    if (name == "corner_hotspot") return TemperatureProfile::CornerHotspot;
    throw SchemaError("unknown temperature profile '" + name + "'");
}

const char* selection_name(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::ImportanceSampling: return "importance_sampling";
        case SelectionMethod::TopK: return "top_k";
        case SelectionMethod::Random: return "random";
    }
    return "importance_sampling";
}

SelectionMethod selection_from(const std::string& name) {
    if (name == "importance_sampling") return SelectionMethod::ImportanceSampling;
    if (name == "top_k") return SelectionMethod::TopK;
    if (name == "random") return SelectionMethod::Random;
    throw SchemaError("unknown selection method '" + name + "'");
}

const char* cost_method_name(CostMethod m) {
    switch (m) {
        case CostMethod::MAE: return "mae";
        case CostMethod::FirstOrder: return "first_order";
        case CostMethod::SecondOrder: return "second_order";
    }
    return "mae";
}

CostMethod cost_method_from(const std::string& name) {
    if (name == "mae") return CostMethod::MAE;
    if (name == "first_order") return CostMethod::FirstOrder;
    if (name == "second_order") return CostMethod::SecondOrder;
    throw SchemaError("unknown remap cost method '" + name + "'");
}

json to_json(const ScenarioConfig& cfg) {
    json j;
    j["format"] = "ptasim-scenario-v1";
    j["name"] = cfg.name;
    j["seed"] = cfg.seed;
    j["t_max"] = cfg.t_max;
    j["accelerator"] = {{"tiles", cfg.tiles},
                        {"cores_per_tile", cfg.cores_per_tile},
                        {"core_size", cfg.core_size}};
    j["phase_noise"] = {{"level", noise_level_name(cfg.phase_noise)},
                        {"model", phase_model_name(cfg.phase_model)},
                        {"mask", mask_name(cfg.mask)},
                        {"mask_decay_length", cfg.mask_decay_length},
                        {"damping", cfg.damping}};
    j["temperature"] = {{"schedule", schedule_name(cfg.temp_schedule)},
                        {"profile", profile_name(cfg.temp_profile)},
                        {"constant_offset", cfg.constant_offset}};
    j["crosstalk"] = {{"enabled", cfg.crosstalk},
                      {"spacing_h_um", cfg.spacing_h},
                      {"spacing_v_um", cfg.spacing_v},
                      {"k1", cfg.coupling_k1}};
    j["calibration"] = {{"selection_fraction", cfg.calibration.selection_fraction},
                        {"max_iterations", cfg.calibration.max_iterations},
                        {"probe_shots", cfg.calibration.probe_shots},
                        {"learning_rate", cfg.calibration.learning_rate},
                        {"stop_mae", cfg.calibration.stop_mae},
                        {"divergence_factor", cfg.calibration.divergence_factor},
                        {"selection", selection_name(cfg.selection)}};
    j["remap"] = {{"enabled", cfg.remap.enabled},
                  {"method", cost_method_name(cfg.remap.method)},
                  {"probe_shots", cfg.remap.probe_shots}};
    j["controller"] = {{"temp_threshold_K", cfg.controller.temp_threshold},
                       {"nmae_threshold", cfg.controller.nmae_threshold},
                       {"cooling_time", cfg.controller.cooling_time},
                       {"monitor_period", cfg.controller.monitor_period},
                       {"probe_fraction", cfg.controller.probe_fraction}};
    j["remediation"] = cfg.remediation;
    j["periodic_remap"] = cfg.periodic_remap;
    j["fixture"] = cfg.fixture_path;
    j["evaluation"] = {{"cadence", cfg.eval_cadence}, {"batch", cfg.eval_batch}};
    return j;
}

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_enum(const json& j, const char* key, const std::function<void(const std::string&)>& set) {
    if (j.contains(key)) set(j.at(key).get<std::string>());
}

ScenarioConfig from_json(const json& j) {
    ScenarioConfig cfg;
    if (j.at("format").get<std::string>() != "ptasim-scenario-v1")
        throw SchemaError("unsupported scenario format tag");
    read_if(j, "name", cfg.name);
    read_if(j, "seed", cfg.seed);
    read_if(j, "t_max", cfg.t_max);
    if (j.contains("accelerator")) {
        const json& a = j.at("accelerator");
        read_if(a, "tiles", cfg.tiles);
        read_if(a, "cores_per_tile", cfg.cores_per_tile);
        read_if(a, "core_size", cfg.core_size);
    }
    if (j.contains("phase_noise")) {
        const json& p = j.at("phase_noise");
        read_enum(p, "level", [&](const std::string& s) { cfg.phase_noise = noise_level_from(s); });
        read_enum(p, "model", [&](const std::string& s) { cfg.phase_model = phase_model_from(s); });
        read_enum(p, "mask", [&](const std::string& s) { cfg.mask = mask_from(s); });
        read_if(p, "mask_decay_length", cfg.mask_decay_length);
        read_if(p, "damping", cfg.damping);
    }
    if (j.contains("temperature")) {
        const json& t = j.at("temperature");
        read_enum(t, "schedule",
                  [&](const std::string& s) { cfg.temp_schedule = schedule_from(s); });
        read_enum(t, "profile", [&](const std::string& s) { cfg.temp_profile = profile_from(s); });
        read_if(t, "constant_offset", cfg.constant_offset);
    }
    if (j.contains("crosstalk")) {
        const json& x = j.at("crosstalk");
        read_if(x, "enabled", cfg.crosstalk);
        read_if(x, "spacing_h_um", cfg.spacing_h);
        read_if(x, "spacing_v_um", cfg.spacing_v);
        read_if(x, "k1", cfg.coupling_k1);
    }
    if (j.contains("calibration")) {
        const json& c = j.at("calibration");
        read_if(c, "selection_fraction", cfg.calibration.selection_fraction);
        read_if(c, "max_iterations", cfg.calibration.max_iterations);
        read_if(c, "probe_shots", cfg.calibration.probe_shots);
        read_if(c, "learning_rate", cfg.calibration.learning_rate);
        read_if(c, "stop_mae", cfg.calibration.stop_mae);
        read_if(c, "divergence_factor", cfg.calibration.divergence_factor);
        read_enum(c, "selection",
                  [&](const std::string& s) { cfg.selection = selection_from(s); });
    }
    if (j.contains("remap")) {
        const json& r = j.at("remap");
        read_if(r, "enabled", cfg.remap.enabled);
        read_enum(r, "method", [&](const std::string& s) { cfg.remap.method = cost_method_from(s); });
        read_if(r, "probe_shots", cfg.remap.probe_shots);
    }
    if (j.contains("controller")) {
        const json& c = j.at("controller");
        read_if(c, "temp_threshold_K", cfg.controller.temp_threshold);
        read_if(c, "nmae_threshold", cfg.controller.nmae_threshold);
        read_if(c, "cooling_time", cfg.controller.cooling_time);
        read_if(c, "monitor_period", cfg.controller.monitor_period);
        read_if(c, "probe_fraction", cfg.controller.probe_fraction);
    }
    read_if(j, "remediation", cfg.remediation);
    read_if(j, "periodic_remap", cfg.periodic_remap);
    read_if(j, "fixture", cfg.fixture_path);
    if (j.contains("evaluation")) {
        const json& e = j.at("evaluation");
        read_if(e, "cadence", cfg.eval_cadence);
        read_if(e, "batch", cfg.eval_batch);
    }
    return cfg;
}

} // namespace

void ScenarioConfig::validate(bool check_fixture) const {
    if (t_max == 0) throw ConfigError("scenario needs at least one timestep");
    if (tiles == 0 || cores_per_tile == 0 || core_size == 0)
        throw ConfigError("accelerator dimensions must be positive");
    if (mask_decay_length <= 0.0) throw ConfigError("mask_decay_length must be positive");
    if (damping < 0.0 || damping >= 1.0) throw ConfigError("damping must lie in [0, 1)");
    if (spacing_h <= 0.0 || spacing_v <= 0.0 || coupling_k1 < 0.0)
        throw ConfigError("crosstalk geometry must be positive with k1 >= 0");
    calibration.validate();
    controller.validate();
    if (remap.probe_shots < 1) throw ConfigError("remap probe_shots must be >= 1");
    if (eval_cadence == 0) throw ConfigError("evaluation cadence must be >= 1");
    if (eval_batch == 0) throw ConfigError("evaluation batch must be >= 1");
    if (fixture_path.empty()) throw ConfigError("scenario must name a model fixture");
    if (check_fixture && !std::filesystem::exists(fixture_path))
        throw ConfigError("fixture '" + fixture_path + "' does not exist");
}

ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("scenario '" + path + "' is not valid JSON: " + e.what());
    }
    try {
        return from_json(j);
    } catch (const json::exception& e) {
        throw SchemaError("scenario '" + path + "' is missing or mistypes a field: " + e.what());
    }
}

void save_scenario(const ScenarioConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << to_json(cfg).dump(2) << '\n';
    if (!out) throw IoError("failed writing scenario to '" + path + "'");
}

std::string canonical_json(const ScenarioConfig& cfg) {
    // nlohmann keeps object keys sorted, so dump() is already canonical.
    return to_json(cfg).dump();
}

std::uint64_t config_hash(const ScenarioConfig& cfg) {
    const std::string text = canonical_json(cfg);
    std::uint64_t h = 14695981039346656037ULL;  // FNV-1a 64
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

PhaseNoiseConfig phase_noise_config(const ScenarioConfig& cfg) {
    PhaseNoiseConfig pn;
    pn.schedule = (cfg.phase_noise == NoiseLevel::High) ? SigmaSchedule::high_noise()
                                                        : SigmaSchedule::low_noise();
    pn.mask = cfg.mask;
    pn.mask_decay_length = cfg.mask_decay_length;
    pn.damping = cfg.damping;
    pn.t_max = cfg.t_max;
    return pn;
}

TemperatureField temperature_field(const ScenarioConfig& cfg) {
    TemperatureField field;
    field.schedule = cfg.temp_schedule;
    field.profile = cfg.temp_profile;
    field.t_max = cfg.t_max;
    field.constant_offset = cfg.constant_offset;
    return field;
}

CrosstalkMatrix crosstalk_matrix(const ScenarioConfig& cfg) {
    if (!cfg.crosstalk) return no_crosstalk(cfg.core_size);
    return build_crosstalk_matrix(cfg.core_size, cfg.spacing_h, cfg.spacing_v, cfg.coupling_k1);
}

AcceleratorConfig accelerator_config(const ScenarioConfig& cfg) {
    return AcceleratorConfig::make(cfg.tiles, cfg.cores_per_tile, cfg.core_size);
}

} // namespace pta
