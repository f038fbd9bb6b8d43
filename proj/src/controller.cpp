#include "pta/controller.hpp"

#include <cmath>

namespace pta {

void ControllerConfig::validate() const {
    if (!(temp_threshold > 0.0)) throw ConfigError("controller: temp_threshold must be > 0");
    if (!(nmae_threshold > 0.0)) throw ConfigError("controller: nmae_threshold must be > 0");
    if (cooling_time == 0) throw ConfigError("controller: cooling_time must be > 0");
    if (monitor_period == 0) throw ConfigError("controller: monitor_period must be > 0");
    if (cooling_time < monitor_period)
        throw ConfigError("controller: cooling_time must be >= monitor_period");
    if (!(probe_fraction > 0.0 && probe_fraction <= 1.0))
        throw ConfigError("controller: probe_fraction must lie in (0, 1]");
}

const char* to_string(ControllerOutcome outcome) {
    switch (outcome) {
        case ControllerOutcome::Cooldown: return "cooldown";
        case ControllerOutcome::TemperatureTrigger: return "temp_trigger";
        case ControllerOutcome::ProbeClean: return "probe_clean";
        case ControllerOutcome::ProbeTrigger: return "probe_trigger";
    }
    return "unknown";
}

ObserveResult observe(ControllerState& state, const ControllerConfig& cfg,
                      const std::vector<double>& temps, std::uint64_t t,
                      const std::function<double()>& probe_nmae) {
    cfg.validate();
    if (temps.empty()) throw ConfigError("controller: need at least one temperature reading");
    if (t < state.last_remediation)
        throw ConfigError("controller: observation step precedes the last remediation");

    ObserveResult res;
    double sum = 0.0;
    for (double T : temps) sum += T;
    res.mean_temp = sum / static_cast<double>(temps.size());

    if (t - state.last_remediation < cfg.cooling_time) {
        res.outcome = ControllerOutcome::Cooldown;
    } else if (std::abs(res.mean_temp - state.T_prev) > cfg.temp_threshold) {
        // Cheap test fires; the paid probe is never consulted.
        res.outcome = ControllerOutcome::TemperatureTrigger;
    } else {
        res.probed = true;
        res.probed_nmae = probe_nmae();
        res.outcome = res.probed_nmae > cfg.nmae_threshold ? ControllerOutcome::ProbeTrigger
                                                           : ControllerOutcome::ProbeClean;
    }
    state.log.push_back(DecisionRecord{t, res.outcome, res.probed_nmae, res.probed});
    return res;
}

RemediationReport remediate(std::vector<ManagedLayer>& layers, const AcceleratorConfig& cfg,
                            const NoiseInputs& noise, const CalibrationConfig& ccfg,
                            const RemapPolicy& rpolicy, SelectionMethod selection,
                            std::uint64_t seed, std::uint64_t event, ControllerState& state,
                            std::uint64_t t, double mean_temp, CycleLedger& ledger,
                            ExecMode mode) {
    RemediationReport rep;
    const std::uint64_t remap_before = ledger.remap_cycles;
    const std::uint64_t calib_before = ledger.calibration_cycles;

    // Remap first so calibration converges against the post-remap layout.
    if (rpolicy.enabled) {
        for (std::size_t li = 0; li < layers.size(); ++li) {
            WeightMapping& mapping = *layers[li].mapping;
            for (std::size_t c = 0; c < mapping.chunk_count(); ++c) {
                // Distinct event keys per layer keep probe draws independent.
                rep.remaps.push_back(remap_chunk(mapping, c, cfg, noise, rpolicy.method,
                                                 layers[li].grads, rpolicy.probe_shots, seed,
                                                 event * layers.size() + li, ledger, mode));
            }
        }
    }
    for (std::size_t li = 0; li < layers.size(); ++li) {
        const SalienceTable empty;
        const SalienceTable* sal = layers[li].salience;
        rep.calibrations.push_back(calibrate_selected(
            *layers[li].mapping, cfg, noise, ccfg, selection, sal != nullptr ? *sal : empty,
            seed, event * layers.size() + li, ledger, mode));
    }

    rep.remap_cycles = ledger.remap_cycles - remap_before;
    rep.calibration_cycles = ledger.calibration_cycles - calib_before;
    rep.total_cycles = rep.remap_cycles + rep.calibration_cycles;
    state.T_prev = mean_temp;
    state.last_remediation = t;
    return rep;
}

double overhead_bound(std::uint64_t tau, double cost_per_remediation) {
    if (tau == 0) throw ConfigError("overhead_bound: tau must be > 0");
    if (!(cost_per_remediation >= 0.0))
        throw ConfigError("overhead_bound: remediation cost must be >= 0");
    return cost_per_remediation / static_cast<double>(tau);
}

} // namespace pta
