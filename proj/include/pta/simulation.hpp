#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pta/model.hpp"
#include "pta/scenario.hpp"

namespace pta {

// A model fixture programmed onto the chip: one weight mapping per dense
// layer plus the chunk-resolution salience/gradient views remediation needs.
struct AcceleratorModel {
    ModelFixture fixture;  // owned copy; biases/activations stay digital
    AcceleratorConfig accel;
    std::vector<WeightMapping> mappings;
    std::vector<SalienceTable> salience;
    std::vector<GradientTable> gradients;
    std::vector<Matrix> ideal;  // assembled per-layer targets for NMAE probes
};

AcceleratorModel program_model(const ModelFixture& fixture, const AcceleratorConfig& accel);

struct BatchResult {
    Matrix logits;  // n x classes
    double accuracy = 0.0;
};

// Dense layers run as accelerator MVMs with a fresh noise realization per
// input per layer; biases and activations are applied digitally. Charges
// batch_size * sum-over-layers(cycles_per_mvm) inference cycles.
BatchResult forward_on_accelerator(const AcceleratorModel& model, const Dataset& batch,
                                   const NoiseInputs& noise, std::uint64_t t,
                                   CycleLedger& ledger, ExecMode mode = ExecMode::Serial);

struct TracePoint {
    std::uint64_t step = 0;
    double accuracy = 0.0;
    double nmae = 0.0;  // simulator-side diagnostic, mean over layers
    double mean_temp_K = 300.0;
    CycleLedger ledger;    // cumulative snapshot
    std::string decision;  // controller outcomes since the previous point, ';'-joined
};

struct TraceDecision {
    std::uint64_t step = 0;
    std::string outcome;  // cooldown / temp_trigger / probe_clean / probe_trigger / periodic_remap
    double probed_nmae = 0.0;
    bool probed = false;
};

struct TraceRemap {
    std::uint64_t step = 0;
    std::uint64_t event = 0;
    std::size_t layer = 0;
    std::size_t chunk = 0;
    std::vector<std::size_t> assignment;
    double direct_cost = 0.0;
    double solved_cost = 0.0;
    std::uint64_t cycles = 0;
};

struct RunTrace {
    std::string scenario;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    double clean_accuracy = 0.0;
    std::vector<TracePoint> points;
    std::vector<TraceDecision> decisions;
    std::vector<TraceRemap> remaps;

    CycleLedger final_ledger() const;
    // (probe + calibration + remap) / inference of the final snapshot
    double overhead() const { return final_ledger().overhead_ratio(); }
};

bool operator==(const TracePoint& a, const TracePoint& b);
bool operator==(const TraceDecision& a, const TraceDecision& b);
bool operator==(const TraceRemap& a, const TraceRemap& b);
bool operator==(const RunTrace& a, const RunTrace& b);

// Walk t = 0..t_max: advance the noise state, run the controller at its
// monitor period (or the fixed-period remap when configured), and measure
// accuracy on the evaluation batch at the configured cadence. Deterministic
// per (config, seed) in both execution modes.
RunTrace run_scenario(const ScenarioConfig& cfg, ExecMode mode = ExecMode::Serial);

enum class TraceFormat { Csv, Json };

void emit_trace(const RunTrace& trace, const std::string& path, TraceFormat format);
RunTrace load_trace_json(const std::string& path);

} // namespace pta
