// Times the serial reference kernels against the OpenMP ones and checks the
// two stay bit-identical on the same inputs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>

#include "pta/accelerator.hpp"
#include "pta/scenario.hpp"
#include "pta/simulation.hpp"
#include "pta/variation.hpp"

using namespace pta;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_per_call(const char* name, int reps, bool& identical,
                        const std::function<void(ExecMode)>& call) {
    // Warm up once per mode, then time.
    call(ExecMode::Serial);
    call(ExecMode::Parallel);
    double best_serial = 1e300, best_parallel = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = Clock::now();
        call(ExecMode::Serial);
        best_serial = std::min(best_serial,
                               std::chrono::duration<double>(Clock::now() - t0).count());
        t0 = Clock::now();
        call(ExecMode::Parallel);
        best_parallel = std::min(best_parallel,
                                 std::chrono::duration<double>(Clock::now() - t0).count());
    }
    std::printf("%-24s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name,
                best_serial * 1e3, best_parallel * 1e3, best_serial / best_parallel,
                identical ? "identical" : "MISMATCH");
    return best_serial / best_parallel;
}

} // namespace

int main(int argc, char** argv) {
    int reps = 5;
    std::size_t tiles = 8, cores = 8, k = 8;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--tiles") == 0 && i + 1 < argc) tiles = std::atoi(argv[++i]);
    }
    cores = tiles;
    std::printf("grid %zux%zux%zu, best of %d\n", tiles, cores, k, reps);
    bool all_identical = true;

    // Kernel 1: noisy weight realization across a large mapping.
    {
        AcceleratorConfig cfg = AcceleratorConfig::make(tiles, cores, k);
        Matrix w(tiles * k * 4, cores * k * 4);
        Rng rng = substream(1, StreamTag::Trial, 1);
        for (std::size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-1.0, 1.0);
        WeightMapping m = map_matrix(w, cfg);

        PhaseNoiseConfig ncfg;
        ncfg.schedule = SigmaSchedule::high_noise();
        ncfg.t_max = 100;
        PhaseNoiseState state = PhaseNoiseState::zero(tiles * k, cores * k, ncfg);
        for (int t = 0; t < 50; ++t) step_noise_state(state, 7);
        CrosstalkMatrix gamma = build_crosstalk_matrix(k, 60.0, 200.0, 0.1);
        NoiseInputs noise;
        noise.phase_noise = &state;
        noise.crosstalk = &gamma;
        noise.seed = 7;
        noise.draw = DrawKey{1, 2, 3};

        std::vector<Matrix> ser = noisy_weights(m, cfg, noise, ExecMode::Serial);
        std::vector<Matrix> par = noisy_weights(m, cfg, noise, ExecMode::Parallel);
        bool identical = ser.size() == par.size();
        for (std::size_t b = 0; identical && b < ser.size(); ++b) identical = ser[b] == par[b];
        all_identical = all_identical && identical;
        seconds_per_call("noisy_weights", reps, identical, [&](ExecMode mode) {
            (void)noisy_weights(m, cfg, noise, mode);
        });
    }

    // Kernel 2: noise-state stepping on a big device grid.
    {
        PhaseNoiseConfig ncfg;
        ncfg.schedule = SigmaSchedule::high_noise();
        ncfg.t_max = 1000;
        PhaseNoiseState a = PhaseNoiseState::zero(512, 512, ncfg);
        PhaseNoiseState b = a;
        for (int t = 0; t < 20; ++t) {
            step_noise_state(a, 9, ExecMode::Serial);
            step_noise_state(b, 9, ExecMode::Parallel);
        }
        bool identical = a.sigma == b.sigma;
        all_identical = all_identical && identical;
        PhaseNoiseState bench = a;
        seconds_per_call("step_noise_state", reps, identical, [&](ExecMode mode) {
            PhaseNoiseState s = bench;
            for (int t = 0; t < 10; ++t) step_noise_state(s, 9, mode);
        });
    }

    // Kernel 3: a full stressed scenario end to end.
    {
        ScenarioConfig cfg;
        cfg.name = "bench";
        cfg.seed = 1;
        cfg.t_max = 500;
        cfg.phase_noise = NoiseLevel::High;
        cfg.temp_schedule = TemperatureSchedule::Linear;
        cfg.crosstalk = true;
        cfg.calibration.max_iterations = 200;
        cfg.calibration.selection_fraction = 1.0;
        cfg.controller.cooling_time = 125;
        cfg.controller.monitor_period = 25;
        cfg.eval_cadence = 100;
        cfg.fixture_path = "bench_fixture_tmp.json";
        save_fixture(train_fixture(TrainOptions{}, 1), cfg.fixture_path);

        RunTrace ser = run_scenario(cfg, ExecMode::Serial);
        RunTrace par = run_scenario(cfg, ExecMode::Parallel);
        bool identical = ser == par;
        all_identical = all_identical && identical;
        seconds_per_call("run_scenario", reps, identical, [&](ExecMode mode) {
            (void)run_scenario(cfg, mode);
        });
        std::remove(cfg.fixture_path.c_str());
    }

    if (!all_identical) {
        std::fprintf(stderr, "serial and parallel kernels disagree\n");
        return 1;
    }
    return 0;
}
