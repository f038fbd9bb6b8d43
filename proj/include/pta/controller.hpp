#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "pta/calibration.hpp"
#include "pta/remapping.hpp"

namespace pta {

struct ControllerConfig {
    double temp_threshold = 0.01;       // K of mean-temperature drift since last remediation
    double nmae_threshold = 0.05;       // aggregate probed NMAE that forces remediation
    std::uint64_t cooling_time = 200;   // tau: min inferences between remediations
    std::uint64_t monitor_period = 50;  // inferences between health checks
    double probe_fraction = 0.1;        // fraction of chunks the NMAE probe reads

    void validate() const;
};

enum class ControllerOutcome {
    Cooldown,            // within tau of the last remediation; nothing checked
    TemperatureTrigger,  // mean temperature drifted past temp_threshold
    ProbeClean,          // NMAE probe ran and came back under threshold
    ProbeTrigger,        // NMAE probe exceeded threshold
};

// Remediate on either trigger, otherwise no action.
inline bool remediation_due(ControllerOutcome o) {
    return o == ControllerOutcome::TemperatureTrigger || o == ControllerOutcome::ProbeTrigger;
}

const char* to_string(ControllerOutcome outcome);

struct DecisionRecord {
    std::uint64_t step = 0;
    ControllerOutcome outcome = ControllerOutcome::Cooldown;
    double probed_nmae = 0.0;  // meaningful only when the probe ran
    bool probed = false;
};

struct ControllerState {
    double T_prev = 300.0;               // mean chip temperature at last remediation
    std::uint64_t last_remediation = 0;  // step index
    std::vector<DecisionRecord> log;
};

struct ObserveResult {
    ControllerOutcome outcome = ControllerOutcome::Cooldown;
    double mean_temp = 0.0;
    double probed_nmae = 0.0;
    bool probed = false;
};

// One health check. Escalation: cooldown gate, then the free temperature
// test, then the paid NMAE probe. probe_nmae is invoked at most once and only
// when the temperature test passes; it must charge its own probe cycles.
ObserveResult observe(ControllerState& state, const ControllerConfig& cfg,
                      const std::vector<double>& temps, std::uint64_t t,
                      const std::function<double()>& probe_nmae);

// One weight mapping under management plus the loss geometry the remediation
// methods need. grads may be null when the cost method is MAE.
struct ManagedLayer {
    WeightMapping* mapping = nullptr;
    const SalienceTable* salience = nullptr;
    const GradientTable* grads = nullptr;
};

struct RemapPolicy {
    bool enabled = true;
    CostMethod method = CostMethod::MAE;
    int probe_shots = 1;  // m for cost-matrix probing
};

struct RemediationReport {
    std::vector<RemapReport> remaps;                // one per chunk over all layers
    std::vector<CalibrationReport> calibrations;    // one per layer
    std::uint64_t remap_cycles = 0;
    std::uint64_t calibration_cycles = 0;
    std::uint64_t total_cycles = 0;
};

// Full remediation: remap every chunk of every layer (when enabled), then
// sparse-calibrate each layer. Updates T_prev and last_remediation.
RemediationReport remediate(std::vector<ManagedLayer>& layers, const AcceleratorConfig& cfg,
                            const NoiseInputs& noise, const CalibrationConfig& ccfg,
                            const RemapPolicy& rpolicy, SelectionMethod selection,
                            std::uint64_t seed, std::uint64_t event, ControllerState& state,
                            std::uint64_t t, double mean_temp, CycleLedger& ledger,
                            ExecMode mode = ExecMode::Serial);

// Worst-case overhead fraction when every cooldown window ends in a
// remediation: cost_per_remediation / tau.
double overhead_bound(std::uint64_t tau, double cost_per_remediation);

} // namespace pta
