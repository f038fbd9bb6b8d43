#include "pta/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>

#include <json.hpp>

#include "pta/errors.hpp"
#include "pta/rng.hpp"

namespace pta {
namespace {

using nlohmann::json;

// One input through every layer: accelerator MVM, then digital bias and
// activation. Sample i at step t draws with root (seed, Trial, t, 1 + i);
// layer index keys the realization so successive layers see fresh noise.
void forward_one(const AcceleratorModel& model, const NoiseInputs& base, std::uint64_t t,
                 std::size_t i, const double* input, Matrix& logits) {
    std::vector<double> x(input, input + model.fixture.layers.front().weight.cols());
    const std::uint64_t root = substream(base.seed, StreamTag::Trial, t, 1 + i).next_u64();
    for (std::size_t l = 0; l < model.mappings.size(); ++l) {
        NoiseInputs ni = base;
        ni.step = t;
        ni.draw = DrawKey{root, l, 0};
        const std::vector<Matrix> blocks =
            noisy_weights(model.mappings[l], model.accel, ni, ExecMode::Serial);
        std::vector<double> y = apply_realized(model.mappings[l], blocks, x);
        const DenseLayer& layer = model.fixture.layers[l];
        for (std::size_t r = 0; r < y.size(); ++r) y[r] += layer.bias[r];
        if (layer.activation == Activation::Relu)
            for (double& v : y)
                if (v < 0.0) v = 0.0;
        x = std::move(y);
    }
    for (std::size_t c = 0; c < logits.cols(); ++c) logits(i, c) = x[c];
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

json trace_to_json(const RunTrace& trace) {
    json j;
    j["format"] = "ptasim-trace-v1";
    j["manifest"] = {{"scenario", trace.scenario},
                     {"seed", trace.seed},
                     {"config_hash", trace.config_hash},
                     {"clean_accuracy", trace.clean_accuracy}};
    j["points"] = json::array();
    for (const TracePoint& p : trace.points) {
        j["points"].push_back({{"step", p.step},
                               {"accuracy", p.accuracy},
                               {"nmae", p.nmae},
                               {"mean_temp_K", p.mean_temp_K},
                               {"inference_cycles", p.ledger.inference_cycles},
                               {"probe_cycles", p.ledger.probe_cycles},
                               {"calibration_cycles", p.ledger.calibration_cycles},
                               {"remap_cycles", p.ledger.remap_cycles},
                               {"decision", p.decision}});
    }
    j["decisions"] = json::array();
    for (const TraceDecision& d : trace.decisions)
        j["decisions"].push_back({{"step", d.step},
                                  {"outcome", d.outcome},
                                  {"probed_nmae", d.probed_nmae},
                                  {"probed", d.probed}});
    j["remaps"] = json::array();
    for (const TraceRemap& r : trace.remaps)
        j["remaps"].push_back({{"step", r.step},
                               {"event", r.event},
                               {"layer", r.layer},
                               {"chunk", r.chunk},
                               {"assignment", r.assignment},
                               {"direct_cost", r.direct_cost},
                               {"solved_cost", r.solved_cost},
                               {"cycles", r.cycles}});
    return j;
}

} // namespace

AcceleratorModel program_model(const ModelFixture& fixture, const AcceleratorConfig& accel) {
    fixture.validate();
    AcceleratorModel model;
    model.fixture = fixture;
    model.accel = accel;
    for (std::size_t l = 0; l < fixture.layers.size(); ++l) {
        model.mappings.push_back(map_matrix(fixture.layers[l].weight, accel));
        model.salience.push_back(layer_salience(fixture, l, model.mappings[l]));
        model.gradients.push_back(layer_gradients(fixture, l, model.mappings[l]));
        model.ideal.push_back(assemble_ideal(model.mappings[l]));
    }
    return model;
}

BatchResult forward_on_accelerator(const AcceleratorModel& model, const Dataset& batch,
                                   const NoiseInputs& noise, std::uint64_t t,
                                   CycleLedger& ledger, ExecMode mode) {
    if (model.mappings.empty()) throw ConfigError("forward_on_accelerator: model not programmed");
    if (batch.inputs.cols() != model.fixture.layers.front().weight.cols())
        throw DimensionMismatch("forward_on_accelerator: batch width does not match the model");
    if (batch.labels.size() != batch.inputs.rows())
        throw DimensionMismatch("forward_on_accelerator: label count does not match the batch");

    const std::size_t n = batch.inputs.rows();
    BatchResult result;
    result.logits = Matrix(n, model.fixture.layers.back().weight.rows());

    const long long count = static_cast<long long>(n);
    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < count; ++i)
            forward_one(model, noise, t, static_cast<std::size_t>(i),
                        batch.inputs.data() + static_cast<std::size_t>(i) * batch.inputs.cols(),
                        result.logits);
    } else {
        for (long long i = 0; i < count; ++i)
            forward_one(model, noise, t, static_cast<std::size_t>(i),
                        batch.inputs.data() + static_cast<std::size_t>(i) * batch.inputs.cols(),
                        result.logits);
    }

    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < result.logits.cols(); ++c)
            if (result.logits(i, c) > result.logits(i, best)) best = c;
        if (static_cast<int>(best) == batch.labels[i]) ++hits;
    }
    result.accuracy = static_cast<double>(hits) / static_cast<double>(n);

    std::uint64_t per_input = 0;
    for (const WeightMapping& m : model.mappings) per_input += m.cycles_per_mvm;
    ledger.inference_cycles += static_cast<std::uint64_t>(n) * per_input;
    return result;
}

CycleLedger RunTrace::final_ledger() const {
    return points.empty() ? CycleLedger{} : points.back().ledger;
}

bool operator==(const TracePoint& a, const TracePoint& b) {
    return a.step == b.step && a.accuracy == b.accuracy && a.nmae == b.nmae &&
           a.mean_temp_K == b.mean_temp_K &&
           a.ledger.inference_cycles == b.ledger.inference_cycles &&
           a.ledger.probe_cycles == b.ledger.probe_cycles &&
           a.ledger.calibration_cycles == b.ledger.calibration_cycles &&
           a.ledger.remap_cycles == b.ledger.remap_cycles && a.decision == b.decision;
}

bool operator==(const TraceDecision& a, const TraceDecision& b) {
    return a.step == b.step && a.outcome == b.outcome && a.probed_nmae == b.probed_nmae &&
           a.probed == b.probed;
}

bool operator==(const TraceRemap& a, const TraceRemap& b) {
    return a.step == b.step && a.event == b.event && a.layer == b.layer && a.chunk == b.chunk &&
           a.assignment == b.assignment && a.direct_cost == b.direct_cost &&
           a.solved_cost == b.solved_cost && a.cycles == b.cycles;
}

bool operator==(const RunTrace& a, const RunTrace& b) {
    return a.scenario == b.scenario && a.seed == b.seed && a.config_hash == b.config_hash &&
           a.clean_accuracy == b.clean_accuracy && a.points == b.points &&
           a.decisions == b.decisions && a.remaps == b.remaps;
}

RunTrace run_scenario(const ScenarioConfig& cfg, ExecMode mode) {
    cfg.validate();
    const std::size_t R = cfg.tiles, C = cfg.cores_per_tile, k = cfg.core_size;
    const AcceleratorConfig accel = accelerator_config(cfg);
    AcceleratorModel model = program_model(load_fixture(cfg.fixture_path), accel);
    const std::size_t L = model.mappings.size();

    PhaseNoiseState noise_state = PhaseNoiseState::zero(R * k, C * k, phase_noise_config(cfg));
    TemperatureField field = temperature_field(cfg);
    CrosstalkMatrix gamma = crosstalk_matrix(cfg);

    NoiseInputs base;
    base.phase_noise = &noise_state;
    base.temperature = &field;
    base.crosstalk = &gamma;
    base.seed = cfg.seed;

    // Quasi-static model: the device carries one frozen unit-variance pattern
    // scaled by the drifting sigma field, refreshed whenever the state steps;
    // probes and inferences then see the same error. Iid swaps this for fresh
    // keyed draws per realization.
    const bool quasi_static = cfg.phase_model == PhaseModel::QuasiStatic;
    Matrix pv_field;
    if (quasi_static) {
        pv_field = sample_phase_noise(noise_state, cfg.seed, DrawKey{0, 0, 0}, mode);
        base.phase_noise = nullptr;
        base.phase_offset = &pv_field;
    }

    RunTrace trace;
    trace.scenario = cfg.name;
    trace.seed = cfg.seed;
    trace.config_hash = config_hash(cfg);
    trace.clean_accuracy = model.fixture.clean_accuracy;

    // Evaluation batch: leading slice of the fixture's held-out set.
    Dataset batch;
    const std::size_t n_eval = std::min(cfg.eval_batch, model.fixture.evaluation.inputs.rows());
    batch.inputs = Matrix(n_eval, model.fixture.evaluation.inputs.cols());
    for (std::size_t i = 0; i < n_eval; ++i)
        for (std::size_t d = 0; d < batch.inputs.cols(); ++d)
            batch.inputs(i, d) = model.fixture.evaluation.inputs(i, d);
    batch.labels.assign(model.fixture.evaluation.labels.begin(),
                        model.fixture.evaluation.labels.begin() + static_cast<long>(n_eval));

    CycleLedger ledger;
    ControllerState ctl;
    ctl.T_prev = mean_temperature(field, 0, R, C);

    std::vector<ManagedLayer> managed(L);
    for (std::size_t l = 0; l < L; ++l)
        managed[l] = ManagedLayer{&model.mappings[l], &model.salience[l], &model.gradients[l]};

    // Deployment-time pass: every chunk is calibrated once before the run's
    // in-situ accounting starts (the ledger measures runtime overhead only).
    {
        CycleLedger factory;
        CalibrationConfig full = cfg.calibration;
        full.selection_fraction = 1.0;
        NoiseInputs ni = base;
        ni.step = 0;
        for (std::size_t l = 0; l < L; ++l)
            calibrate_selected(model.mappings[l], accel, ni, full, cfg.selection,
                               model.salience[l], cfg.seed, l, factory, mode);
    }

    // Fixed probe subset: ceil(probe_fraction * total chunks) (layer, chunk)
    // pairs, drawn once per run.
    std::vector<std::pair<std::size_t, std::size_t>> subset;
    {
        std::vector<std::pair<std::size_t, std::size_t>> all;
        for (std::size_t l = 0; l < L; ++l)
            for (std::size_t ck = 0; ck < model.mappings[l].chunk_count(); ++ck)
                all.emplace_back(l, ck);
        std::size_t want = static_cast<std::size_t>(
            std::ceil(cfg.controller.probe_fraction * static_cast<double>(all.size()) - 1e-9));
        want = std::min(std::max<std::size_t>(want, 1), all.size());
        Rng rng = substream(cfg.seed, StreamTag::ProbeSubset, 0);
        for (std::size_t i = 0; i < want; ++i) {
            const std::size_t j = i + rng.next_u64() % (all.size() - i);
            std::swap(all[i], all[j]);
        }
        subset.assign(all.begin(), all.begin() + static_cast<long>(want));
        std::sort(subset.begin(), subset.end());
    }

    auto probe_subset_nmae = [&](std::uint64_t t) {
        const std::uint64_t root = substream(cfg.seed, StreamTag::ProbeSubset, 1, t).next_u64();
        double num = 0.0, den = 0.0;
        for (std::size_t j = 0; j < subset.size(); ++j) {
            const std::size_t l = subset[j].first, ck = subset[j].second;
            NoiseInputs ni = base;
            ni.step = t;
            ni.draw = DrawKey{root, j, 0};
            const Matrix probed = probe_expected_weights(model.mappings[l], ck, accel, ni, 1,
                                                         CycleBucket::Probe, ledger, mode);
            const WeightMapping& mp = model.mappings[l];
            const ChunkMapping& chunk = mp.chunks[ck];
            const std::size_t r0 = (ck / mp.block_cols) * mp.tiles * mp.core_size;
            const std::size_t c0 = (ck % mp.block_cols) * mp.cores_per_tile * mp.core_size;
            const Matrix& ideal = model.ideal[l];
            for (std::size_t r = 0; r < chunk.valid_rows; ++r)
                for (std::size_t c = 0; c < chunk.valid_cols; ++c) {
                    num += std::abs(probed(r, c) - ideal(r0 + r, c0 + c));
                    den += std::abs(ideal(r0 + r, c0 + c));
                }
        }
        return den > 0.0 ? num / den : 0.0;
    };

    auto diagnostic_nmae = [&](std::uint64_t t) {
        const std::uint64_t root = substream(cfg.seed, StreamTag::Trial, t, 0).next_u64();
        double acc = 0.0;
        for (std::size_t l = 0; l < L; ++l) {
            NoiseInputs ni = base;
            ni.step = t;
            ni.draw = DrawKey{root, l, 0};
            const std::vector<Matrix> blocks = noisy_weights(model.mappings[l], accel, ni, mode);
            acc += nmae(assemble(model.mappings[l], blocks), model.ideal[l]);
        }
        return acc / static_cast<double>(L);
    };

    const bool noise_on = cfg.phase_noise != NoiseLevel::Off;
    std::uint64_t event_counter = 0;
    std::vector<std::string> pending;

    for (std::uint64_t t = 0; t <= cfg.t_max; ++t) {
        if (t > 0 && noise_on) {
            step_noise_state(noise_state, cfg.seed, mode);
            if (quasi_static)
                pv_field = sample_phase_noise(noise_state, cfg.seed, DrawKey{0, 0, 0}, mode);
        }
        const double mean_temp = mean_temperature(field, t, R, C);

        if (cfg.periodic_remap > 0) {
            if (t > 0 && t % cfg.periodic_remap == 0) {
                ++event_counter;
                NoiseInputs ni = base;
                ni.step = t;
                for (std::size_t l = 0; l < L; ++l) {
                    const GradientTable* grads =
                        cfg.remap.method == CostMethod::MAE ? nullptr : &model.gradients[l];
                    for (std::size_t ck = 0; ck < model.mappings[l].chunk_count(); ++ck) {
                        RemapReport rep = remap_chunk(model.mappings[l], ck, accel, ni,
                                                      cfg.remap.method, grads,
                                                      cfg.remap.probe_shots, cfg.seed,
                                                      event_counter * L + l, ledger, mode);
                        trace.remaps.push_back({t, event_counter, l, rep.chunk_index,
                                                std::move(rep.assignment), rep.direct_cost,
                                                rep.solved_cost, rep.cycles});
                    }
                }
                trace.decisions.push_back({t, "periodic_remap", 0.0, false});
                pending.push_back("periodic_remap");
            }
        } else if (cfg.remediation && t > 0 && t % cfg.controller.monitor_period == 0) {
            std::vector<double> temps;
            temps.reserve(R * C);
            for (std::size_t p = 0; p < R; ++p)
                for (std::size_t v = 0; v < C; ++v)
                    temps.push_back(temperature_at(field, t, p, v));
            ObserveResult res =
                observe(ctl, cfg.controller, temps, t, [&] { return probe_subset_nmae(t); });
            trace.decisions.push_back({t, to_string(res.outcome), res.probed_nmae, res.probed});
            pending.emplace_back(to_string(res.outcome));
            if (remediation_due(res.outcome)) {
                ++event_counter;
                NoiseInputs ni = base;
                ni.step = t;
                RemediationReport rep =
                    remediate(managed, accel, ni, cfg.calibration, cfg.remap, cfg.selection,
                              cfg.seed, event_counter, ctl, t, mean_temp, ledger, mode);
                std::size_t idx = 0;
                for (std::size_t l = 0; l < L && idx < rep.remaps.size(); ++l)
                    for (std::size_t ck = 0; ck < model.mappings[l].chunk_count(); ++ck) {
                        RemapReport& rr = rep.remaps[idx++];
                        trace.remaps.push_back({t, event_counter, l, rr.chunk_index,
                                                std::move(rr.assignment), rr.direct_cost,
                                                rr.solved_cost, rr.cycles});
                    }
            }
        }

        if (t % cfg.eval_cadence == 0 || t == cfg.t_max) {
            NoiseInputs ni = base;
            ni.step = t;
            BatchResult res = forward_on_accelerator(model, batch, ni, t, ledger, mode);
            TracePoint row;
            row.step = t;
            row.accuracy = res.accuracy;
            row.nmae = diagnostic_nmae(t);
            row.mean_temp_K = mean_temp;
            row.ledger = ledger;
            for (std::size_t i = 0; i < pending.size(); ++i) {
                if (i) row.decision += ';';
                row.decision += pending[i];
            }
            pending.clear();
            trace.points.push_back(std::move(row));
        }
    }
    return trace;
}

void emit_trace(const RunTrace& trace, const std::string& path, TraceFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (format == TraceFormat::Csv) {
        out << "step,accuracy,nmae,mean_temp_K,inference_cycles,probe_cycles,"
               "calibration_cycles,remap_cycles,decision\n";
        for (const TracePoint& p : trace.points)
            out << p.step << ',' << format_double(p.accuracy) << ',' << format_double(p.nmae)
                << ',' << format_double(p.mean_temp_K) << ',' << p.ledger.inference_cycles << ','
                << p.ledger.probe_cycles << ',' << p.ledger.calibration_cycles << ','
                << p.ledger.remap_cycles << ',' << p.decision << '\n';
    } else {
        out << trace_to_json(trace).dump(2) << '\n';
    }
    if (!out) throw IoError("failed writing trace to '" + path + "'");
}

RunTrace load_trace_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open trace '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw SchemaError("trace '" + path + "' is not valid JSON: " + e.what());
    }
    RunTrace trace;
    try {
        if (j.at("format").get<std::string>() != "ptasim-trace-v1")
            throw SchemaError("trace '" + path + "' has an unsupported format tag");
        const json& m = j.at("manifest");
        trace.scenario = m.at("scenario").get<std::string>();
        trace.seed = m.at("seed").get<std::uint64_t>();
        trace.config_hash = m.at("config_hash").get<std::uint64_t>();
        trace.clean_accuracy = m.at("clean_accuracy").get<double>();
        for (const json& jp : j.at("points")) {
            TracePoint p;
            p.step = jp.at("step").get<std::uint64_t>();
            p.accuracy = jp.at("accuracy").get<double>();
            p.nmae = jp.at("nmae").get<double>();
            p.mean_temp_K = jp.at("mean_temp_K").get<double>();
            p.ledger.inference_cycles = jp.at("inference_cycles").get<std::uint64_t>();
            p.ledger.probe_cycles = jp.at("probe_cycles").get<std::uint64_t>();
            p.ledger.calibration_cycles = jp.at("calibration_cycles").get<std::uint64_t>();
            p.ledger.remap_cycles = jp.at("remap_cycles").get<std::uint64_t>();
            p.decision = jp.at("decision").get<std::string>();
            trace.points.push_back(std::move(p));
        }
        for (const json& jd : j.at("decisions")) {
            TraceDecision d;
            d.step = jd.at("step").get<std::uint64_t>();
            d.outcome = jd.at("outcome").get<std::string>();
            d.probed_nmae = jd.at("probed_nmae").get<double>();
            d.probed = jd.at("probed").get<bool>();
            trace.decisions.push_back(std::move(d));
        }
        for (const json& jr : j.at("remaps")) {
            TraceRemap r;
            r.step = jr.at("step").get<std::uint64_t>();
            r.event = jr.at("event").get<std::uint64_t>();
            r.layer = jr.at("layer").get<std::size_t>();
            r.chunk = jr.at("chunk").get<std::size_t>();
            r.assignment = jr.at("assignment").get<std::vector<std::size_t>>();
            r.direct_cost = jr.at("direct_cost").get<double>();
            r.solved_cost = jr.at("solved_cost").get<double>();
            r.cycles = jr.at("cycles").get<std::uint64_t>();
            trace.remaps.push_back(std::move(r));
        }
    } catch (const json::exception& e) {
        throw SchemaError("trace '" + path + "' is missing or mistypes a field: " + e.what());
    }
    return trace;
}

} // namespace pta
