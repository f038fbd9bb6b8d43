#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>
#include <vector>

#include "pta/errors.hpp"
#include "pta/scenario.hpp"

using namespace pta;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

ScenarioConfig sample_config() {
    ScenarioConfig cfg;
    cfg.name = "sample";
    cfg.seed = 17;
    cfg.t_max = 5000;
    cfg.tiles = 3;
    cfg.cores_per_tile = 5;
    cfg.core_size = 4;
    cfg.phase_noise = NoiseLevel::High;
    cfg.phase_model = PhaseModel::Iid;
    cfg.mask = SpatialMask::None;
    cfg.mask_decay_length = 8.0;
    cfg.damping = 0.75;
    cfg.temp_schedule = TemperatureSchedule::Cosine;
    cfg.temp_profile = TemperatureProfile::CornerHotspot;
    cfg.constant_offset = 0.25;
    cfg.crosstalk = true;
    cfg.spacing_h = 55.0;
    cfg.spacing_v = 180.0;
    cfg.coupling_k1 = 0.12;
    cfg.calibration.selection_fraction = 0.4;
    cfg.calibration.max_iterations = 77;
    cfg.calibration.probe_shots = 3;
    cfg.calibration.learning_rate = 1e-3;
    cfg.calibration.stop_mae = 0.002;
    cfg.calibration.divergence_factor = 8.0;
    cfg.selection = SelectionMethod::TopK;
    cfg.remap.enabled = false;
    cfg.remap.method = CostMethod::SecondOrder;
    cfg.remap.probe_shots = 2;
    cfg.controller.temp_threshold = 0.02;
    cfg.controller.nmae_threshold = 0.06;
    cfg.controller.cooling_time = 333;
    cfg.controller.monitor_period = 41;
    cfg.controller.probe_fraction = 0.5;
    cfg.remediation = false;
    cfg.periodic_remap = 250;
    cfg.fixture_path = "some/fixture.json";
    cfg.eval_cadence = 77;
    cfg.eval_batch = 64;
    return cfg;
}

bool same_config(const ScenarioConfig& a, const ScenarioConfig& b) {
    return canonical_json(a) == canonical_json(b);
}

} // namespace

TEST_CASE("scenario JSON roundtrip preserves every field") {
    ScenarioConfig cfg = sample_config();
    TempFile tmp("scenario_roundtrip_tmp.json");
    save_scenario(cfg, tmp.path);
    ScenarioConfig back = load_scenario(tmp.path);
    CHECK(same_config(cfg, back));
    CHECK(config_hash(cfg) == config_hash(back));
    CHECK(back.name == "sample");
    CHECK(back.phase_model == PhaseModel::Iid);
    CHECK(back.selection == SelectionMethod::TopK);
    CHECK(back.remap.method == CostMethod::SecondOrder);
    CHECK(back.periodic_remap == 250);
    CHECK(back.calibration.max_iterations == 77);
}

TEST_CASE("a minimal scenario file fills in the documented defaults") {
    TempFile tmp("scenario_minimal_tmp.json");
    {
        std::ofstream out(tmp.path);
        out << R"({"format": "ptasim-scenario-v1", "fixture": "f.json"})";
    }
    ScenarioConfig cfg = load_scenario(tmp.path);
    ScenarioConfig defaults;
    defaults.fixture_path = "f.json";
    CHECK(same_config(cfg, defaults));
    CHECK(cfg.t_max == 20000);
    CHECK(cfg.tiles == 4);
    CHECK(cfg.cores_per_tile == 4);
    CHECK(cfg.core_size == 8);
    CHECK(cfg.phase_noise == NoiseLevel::Off);
    CHECK(cfg.phase_model == PhaseModel::QuasiStatic);
    CHECK(cfg.remediation);
    CHECK(cfg.periodic_remap == 0);
    CHECK(cfg.eval_cadence == 100);
}

TEST_CASE("scenario loader rejects bad files with typed errors") {
    CHECK_THROWS_AS((void)load_scenario("no_such_scenario.json"), IoError);

    TempFile garbage("scenario_garbage_tmp.json");
    {
        std::ofstream out(garbage.path);
        out << "not json {";
    }
    CHECK_THROWS_AS((void)load_scenario(garbage.path), SchemaError);

    TempFile untagged("scenario_untagged_tmp.json");
    {
        std::ofstream out(untagged.path);
        out << R"({"fixture": "f.json"})";
    }
    CHECK_THROWS_AS((void)load_scenario(untagged.path), SchemaError);

    TempFile wrong_tag("scenario_wrongtag_tmp.json");
    {
        std::ofstream out(wrong_tag.path);
        out << R"({"format": "ptasim-scenario-v2", "fixture": "f.json"})";
    }
    CHECK_THROWS_AS((void)load_scenario(wrong_tag.path), SchemaError);

    for (const char* body : {
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "phase_noise": {"level": "extreme"}})",
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "phase_noise": {"model": "fresh"}})",
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "temperature": {"schedule": "spiky"}})",
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "calibration": {"selection": "best"}})",
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "remap": {"method": "third_order"}})",
             R"({"format": "ptasim-scenario-v1", "fixture": "f.json",
                 "t_max": "soon"})",
         }) {
        TempFile bad("scenario_badenum_tmp.json");
        {
            std::ofstream out(bad.path);
            out << body;
        }
        CHECK_THROWS_AS((void)load_scenario(bad.path), SchemaError);
    }
}

TEST_CASE("scenario validation flags out-of-range parameters") {
    ScenarioConfig ok;
    ok.fixture_path = "missing_fixture.json";
    CHECK_NOTHROW(ok.validate(false));
    CHECK_THROWS_AS(ok.validate(true), ConfigError);  // fixture must exist when checked

    auto expect_bad = [](void (*mutate)(ScenarioConfig&)) {
        ScenarioConfig cfg;
        cfg.fixture_path = "f.json";
        mutate(cfg);
        CHECK_THROWS_AS(cfg.validate(false), ConfigError);
    };
    expect_bad([](ScenarioConfig& c) { c.t_max = 0; });
    expect_bad([](ScenarioConfig& c) { c.tiles = 0; });
    expect_bad([](ScenarioConfig& c) { c.core_size = 0; });
    expect_bad([](ScenarioConfig& c) { c.mask_decay_length = 0.0; });
    expect_bad([](ScenarioConfig& c) { c.damping = 1.0; });
    expect_bad([](ScenarioConfig& c) { c.spacing_h = 0.0; });
    expect_bad([](ScenarioConfig& c) { c.coupling_k1 = -0.1; });
    expect_bad([](ScenarioConfig& c) { c.calibration.selection_fraction = 1.5; });
    expect_bad([](ScenarioConfig& c) { c.controller.probe_fraction = 0.0; });
    expect_bad([](ScenarioConfig& c) { c.remap.probe_shots = 0; });
    expect_bad([](ScenarioConfig& c) { c.eval_cadence = 0; });
    expect_bad([](ScenarioConfig& c) { c.eval_batch = 0; });
    expect_bad([](ScenarioConfig& c) { c.fixture_path.clear(); });
}

TEST_CASE("config hash covers every field") {
    const std::uint64_t base = config_hash(ScenarioConfig{});
    std::vector<void (*)(ScenarioConfig&)> mutations = {
        [](ScenarioConfig& c) { c.name = "other"; },
        [](ScenarioConfig& c) { c.seed = 1; },
        [](ScenarioConfig& c) { c.t_max = 9999; },
        [](ScenarioConfig& c) { c.tiles = 2; },
        [](ScenarioConfig& c) { c.cores_per_tile = 2; },
        [](ScenarioConfig& c) { c.core_size = 4; },
        [](ScenarioConfig& c) { c.phase_noise = NoiseLevel::High; },
        [](ScenarioConfig& c) { c.phase_model = PhaseModel::Iid; },
        [](ScenarioConfig& c) { c.mask = SpatialMask::None; },
        [](ScenarioConfig& c) { c.mask_decay_length = 4.0; },
        [](ScenarioConfig& c) { c.damping = 0.5; },
        [](ScenarioConfig& c) { c.temp_schedule = TemperatureSchedule::Linear; },
        [](ScenarioConfig& c) { c.temp_profile = TemperatureProfile::CornerHotspot; },
        [](ScenarioConfig& c) { c.constant_offset = 0.1; },
        [](ScenarioConfig& c) { c.crosstalk = true; },
        [](ScenarioConfig& c) { c.spacing_h = 50.0; },
        [](ScenarioConfig& c) { c.spacing_v = 100.0; },
        [](ScenarioConfig& c) { c.coupling_k1 = 0.2; },
        [](ScenarioConfig& c) { c.calibration.selection_fraction = 0.9; },
        [](ScenarioConfig& c) { c.calibration.max_iterations = 5; },
        [](ScenarioConfig& c) { c.calibration.probe_shots = 2; },
        [](ScenarioConfig& c) { c.calibration.learning_rate = 1e-4; },
        [](ScenarioConfig& c) { c.calibration.stop_mae = 0.01; },
        [](ScenarioConfig& c) { c.calibration.divergence_factor = 3.0; },
        [](ScenarioConfig& c) { c.selection = SelectionMethod::Random; },
        [](ScenarioConfig& c) { c.remap.enabled = false; },
        [](ScenarioConfig& c) { c.remap.method = CostMethod::FirstOrder; },
        [](ScenarioConfig& c) { c.remap.probe_shots = 4; },
        [](ScenarioConfig& c) { c.controller.temp_threshold = 0.5; },
        [](ScenarioConfig& c) { c.controller.nmae_threshold = 0.2; },
        [](ScenarioConfig& c) { c.controller.cooling_time = 77; },
        [](ScenarioConfig& c) { c.controller.monitor_period = 7; },
        [](ScenarioConfig& c) { c.controller.probe_fraction = 0.9; },
        [](ScenarioConfig& c) { c.remediation = false; },
        [](ScenarioConfig& c) { c.periodic_remap = 10; },
        [](ScenarioConfig& c) { c.fixture_path = "f.json"; },
        [](ScenarioConfig& c) { c.eval_cadence = 5; },
        [](ScenarioConfig& c) { c.eval_batch = 1; },
    };
    std::set<std::uint64_t> seen{base};
    for (auto& mutate : mutations) {
        ScenarioConfig cfg;
        mutate(cfg);
        const std::uint64_t h = config_hash(cfg);
        CHECK(h != base);
        seen.insert(h);
    }
    // All distinct single-field mutations land on distinct hashes.
    CHECK(seen.size() == mutations.size() + 1);
}

TEST_CASE("runtime builders mirror the scenario fields") {
    ScenarioConfig cfg = sample_config();

    PhaseNoiseConfig pn = phase_noise_config(cfg);
    CHECK(pn.schedule.mu_slope == SigmaSchedule::high_noise().mu_slope);
    CHECK(pn.schedule.sigma_slope == SigmaSchedule::high_noise().sigma_slope);
    CHECK(pn.schedule.sigma_offset == SigmaSchedule::high_noise().sigma_offset);
    CHECK(pn.mask == SpatialMask::None);
    CHECK(pn.mask_decay_length == 8.0);
    CHECK(pn.damping == 0.75);
    CHECK(pn.t_max == 5000);

    cfg.phase_noise = NoiseLevel::Low;
    CHECK(phase_noise_config(cfg).schedule.mu_slope == SigmaSchedule::low_noise().mu_slope);

    TemperatureField field = temperature_field(cfg);
    CHECK(field.schedule == TemperatureSchedule::Cosine);
    CHECK(field.profile == TemperatureProfile::CornerHotspot);
    CHECK(field.t_max == 5000);
    CHECK(field.constant_offset == 0.25);

    CrosstalkMatrix gamma = crosstalk_matrix(cfg);
    CHECK_FALSE(gamma.identity());
    CHECK(gamma.core_size == 4);
    CHECK(gamma.gamma.rows() == 16);
    cfg.crosstalk = false;
    CHECK(crosstalk_matrix(cfg).identity());

    AcceleratorConfig accel = accelerator_config(cfg);
    CHECK(accel.tiles == 3);
    CHECK(accel.cores_per_tile == 5);
    CHECK(accel.core_size == 4);
}
