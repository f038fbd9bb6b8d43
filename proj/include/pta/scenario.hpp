#pragma once

#include <cstdint>
#include <string>

#include "pta/calibration.hpp"
#include "pta/controller.hpp"
#include "pta/variation.hpp"

namespace pta {

// How hard the drifting per-device phase noise is driven.
enum class NoiseLevel { Off, Low, High };

// How the sampled phase error attaches to the device.
//   QuasiStatic: one frozen unit-variance pattern per device, scaled by the
//     drifting sigma field. The error persists between inferences, so probing
//     sees the same distortion later inferences suffer and calibration can
//     cancel it.
//   Iid: a fresh draw per realization (probe shots and inferences each see
//     independent errors). Calibration then only fixes the mean; kept as an
//     ablation of the persistence assumption.
enum class PhaseModel { QuasiStatic, Iid };

// Everything one benchmark run depends on. The canonical JSON form of this
// struct (stable key order, defaults filled in) is what the config hash
// covers, so two files spelling the same run hash identically.
struct ScenarioConfig {
    std::string name = "scenario";
    std::uint64_t seed = 0;
    std::uint64_t t_max = 20000;

    std::size_t tiles = 4;
    std::size_t cores_per_tile = 4;
    std::size_t core_size = 8;

    // drifting phase noise
    NoiseLevel phase_noise = NoiseLevel::Off;
    PhaseModel phase_model = PhaseModel::QuasiStatic;
    SpatialMask mask = SpatialMask::EdgeToCorner;
    double mask_decay_length = 16.0;
    double damping = 0.9;

    // temperature drift
    TemperatureSchedule temp_schedule = TemperatureSchedule::Constant;
    TemperatureProfile temp_profile = TemperatureProfile::Uniform;
    double constant_offset = 0.0;  // K, Constant schedule only

    // thermal crosstalk within each core
    bool crosstalk = false;
    double spacing_h = 60.0;
    double spacing_v = 200.0;
    double coupling_k1 = 0.1;

    // self-correction stack
    CalibrationConfig calibration;
    SelectionMethod selection = SelectionMethod::ImportanceSampling;
    RemapPolicy remap;
    ControllerConfig controller;
    bool remediation = true;           // false: drift uncorrected (baseline runs)
    std::uint64_t periodic_remap = 0;  // >0: remap every N steps instead of the controller

    // harness
    std::string fixture_path;
    std::uint64_t eval_cadence = 100;  // steps between accuracy measurements
    std::size_t eval_batch = 256;      // capped at the fixture's evaluation size

    // Parameter sanity plus the cross-field constraints; `check_fixture`
    // additionally requires fixture_path to point at an existing file.
    void validate(bool check_fixture = true) const;
};

ScenarioConfig load_scenario(const std::string& path);  // IoError / SchemaError
void save_scenario(const ScenarioConfig& cfg, const std::string& path);

// Stable, fully explicit JSON rendering (alphabetical keys, defaults filled).
std::string canonical_json(const ScenarioConfig& cfg);

// FNV-1a 64 over the canonical JSON; changes when any field changes.
std::uint64_t config_hash(const ScenarioConfig& cfg);

// Runtime objects the simulator drives, derived from the config.
PhaseNoiseConfig phase_noise_config(const ScenarioConfig& cfg);
TemperatureField temperature_field(const ScenarioConfig& cfg);
CrosstalkMatrix crosstalk_matrix(const ScenarioConfig& cfg);  // identity when disabled
AcceleratorConfig accelerator_config(const ScenarioConfig& cfg);

} // namespace pta
