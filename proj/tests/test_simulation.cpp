#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "pta/errors.hpp"
#include "pta/simulation.hpp"

using namespace pta;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

// One fixture trained once and shared; written to disk for scenario runs.
const std::string& fixture_file() {
    static TempFile tmp("simulation_fixture_tmp.json");
    static bool made = [] {
        save_fixture(train_fixture(TrainOptions{}, 1), tmp.path);
        return true;
    }();
    (void)made;
    return tmp.path;
}

ScenarioConfig quiet_scenario() {
    ScenarioConfig cfg;
    cfg.name = "quiet";
    cfg.seed = 5;
    cfg.t_max = 200;
    cfg.fixture_path = fixture_file();
    cfg.eval_cadence = 50;
    cfg.eval_batch = 256;  // the fixture's full held-out set
    cfg.controller.cooling_time = 50;
    cfg.controller.monitor_period = 25;
    return cfg;
}

ScenarioConfig stressed_scenario() {
    ScenarioConfig cfg = quiet_scenario();
    cfg.name = "stressed";
    cfg.t_max = 400;
    cfg.phase_noise = NoiseLevel::High;
    cfg.temp_schedule = TemperatureSchedule::Linear;
    cfg.crosstalk = true;
    cfg.controller.cooling_time = 100;
    cfg.controller.monitor_period = 50;
    cfg.calibration.max_iterations = 200;
    cfg.calibration.selection_fraction = 1.0;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("noiseless accelerator forward matches the software model") {
    ModelFixture f = load_fixture(fixture_file());
    AcceleratorModel model = program_model(f, AcceleratorConfig::make(4, 4, 8));

    Dataset batch;
    batch.inputs = Matrix(32, f.evaluation.inputs.cols());
    for (std::size_t i = 0; i < 32; ++i)
        for (std::size_t d = 0; d < batch.inputs.cols(); ++d)
            batch.inputs(i, d) = f.evaluation.inputs(i, d);
    batch.labels.assign(f.evaluation.labels.begin(), f.evaluation.labels.begin() + 32);

    NoiseInputs clean;  // no temperature, noise, or crosstalk
    CycleLedger led;
    BatchResult hw = forward_on_accelerator(model, batch, clean, 0, led);

    for (std::size_t i = 0; i < batch.inputs.rows(); ++i) {
        std::vector<double> x(batch.inputs.cols());
        for (std::size_t d = 0; d < x.size(); ++d) x[d] = batch.inputs(i, d);
        const std::vector<double> sw = forward_software(f.layers, x);
        REQUIRE(hw.logits.cols() == sw.size());
        for (std::size_t j = 0; j < sw.size(); ++j)
            CHECK(hw.logits(i, j) == doctest::Approx(sw[j]).epsilon(1e-6));
    }
    CHECK(hw.accuracy == accuracy_software(f.layers, batch));

    // 32x16 and 2x32 layers both fit one 32x32 chunk: 1 cycle per layer each.
    CHECK(led.inference_cycles == 32 * 2);
    CHECK(led.calibration_cycles == 0);
    CHECK(led.probe_cycles == 0);
    CHECK(led.remap_cycles == 0);
}

TEST_CASE("programming checks the fixture against the accelerator shape") {
    ModelFixture f = load_fixture(fixture_file());
    CHECK_NOTHROW((void)program_model(f, AcceleratorConfig::make(4, 4, 8)));
    // Different grid: salience tables were cut for 4/4/8 and no longer line up.
    CHECK_THROWS_AS((void)program_model(f, AcceleratorConfig::make(2, 2, 8)), ShapeMismatch);
}

TEST_CASE("a quiet run holds clean accuracy and spends nothing on remediation") {
    RunTrace tr = run_scenario(quiet_scenario());
    REQUIRE(tr.points.size() == 5);  // t = 0, 50, 100, 150, 200
    CHECK(tr.points.front().step == 0);
    CHECK(tr.points.back().step == 200);
    for (const TracePoint& p : tr.points) {
        CHECK(p.accuracy == tr.clean_accuracy);  // noise-free chip = software model
        CHECK(p.nmae < 1e-9);  // encoder roundtrip error only
        CHECK(p.mean_temp_K == 300.0);
        CHECK(p.ledger.calibration_cycles == 0);
        CHECK(p.ledger.remap_cycles == 0);
    }
    // Monitors at 75, 100, 125, ... after the t=50 cooldown probe the health
    // metric; none of them trigger.
    for (const TraceDecision& d : tr.decisions) {
        CHECK((d.outcome == "cooldown" || d.outcome == "probe_clean"));
        if (d.probed) CHECK(d.probed_nmae < 1e-9);
    }
    CHECK(tr.remaps.empty());
    CHECK(tr.clean_accuracy == load_fixture(fixture_file()).clean_accuracy);
}

TEST_CASE("ledger snapshots grow monotonically and match the final ledger") {
    RunTrace tr = run_scenario(stressed_scenario());
    const TracePoint* prev = nullptr;
    for (const TracePoint& p : tr.points) {
        if (prev != nullptr) {
            CHECK(p.ledger.inference_cycles >= prev->ledger.inference_cycles);
            CHECK(p.ledger.probe_cycles >= prev->ledger.probe_cycles);
            CHECK(p.ledger.calibration_cycles >= prev->ledger.calibration_cycles);
            CHECK(p.ledger.remap_cycles >= prev->ledger.remap_cycles);
        }
        prev = &p;
    }
    CHECK(tr.final_ledger().inference_cycles == tr.points.back().ledger.inference_cycles);
    // Stressed run must actually remediate.
    CHECK(tr.final_ledger().calibration_cycles > 0);
    CHECK(tr.final_ledger().remap_cycles > 0);
    CHECK_FALSE(tr.remaps.empty());
}

TEST_CASE("serial and parallel runs produce bit-identical traces") {
    ScenarioConfig cfg = stressed_scenario();
    RunTrace serial = run_scenario(cfg, ExecMode::Serial);
    RunTrace parallel = run_scenario(cfg, ExecMode::Parallel);
    CHECK(serial == parallel);
    // And the run is reproducible at all.
    RunTrace again = run_scenario(cfg, ExecMode::Serial);
    CHECK(serial == again);
}

TEST_CASE("remediation outperforms drifting uncorrected") {
    ScenarioConfig cfg = stressed_scenario();
    cfg.t_max = 300;
    RunTrace on = run_scenario(cfg);
    ScenarioConfig off_cfg = cfg;
    off_cfg.remediation = false;
    RunTrace off = run_scenario(off_cfg);
    CHECK(on.points.back().nmae < off.points.back().nmae);
    CHECK(on.points.back().accuracy >= off.points.back().accuracy);
    // Without remediation nothing may be charged beyond inference.
    CHECK(off.final_ledger().probe_cycles == 0);
    CHECK(off.final_ledger().calibration_cycles == 0);
    CHECK(off.final_ledger().remap_cycles == 0);
    CHECK(off.decisions.empty());
}

TEST_CASE("fixed-period remapping replaces the controller when configured") {
    ScenarioConfig cfg = stressed_scenario();
    cfg.t_max = 300;
    cfg.periodic_remap = 100;
    RunTrace tr = run_scenario(cfg);
    // Remap-only events at t = 100, 200, 300; no calibration, no probes.
    CHECK(tr.final_ledger().remap_cycles > 0);
    CHECK(tr.final_ledger().calibration_cycles == 0);
    CHECK(tr.final_ledger().probe_cycles == 0);
    std::size_t remap_events = 0;
    for (const TraceDecision& d : tr.decisions) {
        CHECK(d.outcome == "periodic_remap");
        ++remap_events;
    }
    CHECK(remap_events == 3);
    CHECK(tr.remaps.size() == 3 * 2);  // two single-chunk layers per event
}

TEST_CASE("iid phase draws defeat correction that quasi-static drift allows") {
    // Same stress, two readings of the phase error. Quasi-static drift is
    // visible to probes and hence correctable; fresh per-realization draws
    // leave variance no calibration removes, so the corrected run ends with
    // a visibly higher weight error.
    ScenarioConfig qs = stressed_scenario();
    RunTrace tr_qs = run_scenario(qs);
    ScenarioConfig iid = qs;
    iid.phase_model = PhaseModel::Iid;
    RunTrace tr_iid = run_scenario(iid);
    CHECK(tr_qs.points.back().nmae * 1.5 < tr_iid.points.back().nmae);
}

TEST_CASE("trace CSV carries the documented columns and row count") {
    RunTrace tr = run_scenario(quiet_scenario());
    TempFile tmp("trace_csv_tmp.csv");
    emit_trace(tr, tmp.path, TraceFormat::Csv);
    std::ifstream in(tmp.path);
    std::string header;
    REQUIRE(std::getline(in, header));
    CHECK(header ==
          "step,accuracy,nmae,mean_temp_K,inference_cycles,probe_cycles,calibration_cycles,"
          "remap_cycles,decision");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == tr.points.size());
}

TEST_CASE("an empty trace emits a header-only CSV") {
    TempFile tmp("trace_empty_tmp.csv");
    emit_trace(RunTrace{}, tmp.path, TraceFormat::Csv);
    std::ifstream in(tmp.path);
    std::string header, rest;
    REQUIRE(std::getline(in, header));
    CHECK(header.rfind("step,", 0) == 0);
    CHECK_FALSE(std::getline(in, rest));
}

TEST_CASE("trace JSON roundtrip is lossless") {
    RunTrace tr = run_scenario(stressed_scenario());
    TempFile tmp("trace_json_tmp.json");
    emit_trace(tr, tmp.path, TraceFormat::Json);
    RunTrace back = load_trace_json(tmp.path);
    CHECK(back == tr);
    // Re-emitting the loaded trace reproduces the file byte for byte.
    TempFile tmp2("trace_json2_tmp.json");
    emit_trace(back, tmp2.path, TraceFormat::Json);
    CHECK(read_file(tmp.path) == read_file(tmp2.path));
}

TEST_CASE("trace loader rejects wrong files") {
    CHECK_THROWS_AS((void)load_trace_json("no_such_trace.json"), IoError);
    TempFile tmp("trace_wrongtag_tmp.json");
    {
        std::ofstream out(tmp.path);
        out << R"({"format": "ptasim-fixture-v1"})";
    }
    CHECK_THROWS_AS((void)load_trace_json(tmp.path), SchemaError);
}

TEST_CASE("run_scenario validates its configuration up front") {
    ScenarioConfig cfg = quiet_scenario();
    cfg.fixture_path = "no_such_fixture.json";
    CHECK_THROWS_AS((void)run_scenario(cfg), ConfigError);
    ScenarioConfig zero = quiet_scenario();
    zero.t_max = 0;
    CHECK_THROWS_AS((void)run_scenario(zero), ConfigError);
}
