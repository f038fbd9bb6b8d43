#include <doctest.h>

#include <cmath>
#include <numeric>

#include "pta/accelerator.hpp"
#include "pta/remapping.hpp"
#include "pta/rng.hpp"

using namespace pta;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0,
                     double hi = 1.0) {
    Matrix m(rows, cols);
    Rng rng = substream(seed, StreamTag::Trial, rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(lo, hi);
    return m;
}

std::vector<double> dense_mvm(const Matrix& w, const std::vector<double>& x) {
    std::vector<double> y(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c) y[r] += w(r, c) * x[c];
    return y;
}

} // namespace

TEST_CASE("cycle ledger totals and overhead ratio") {
    CycleLedger led;
    CHECK(led.total() == 0);
    CHECK(led.overhead_ratio() == 0.0);
    led.inference_cycles = 10000;
    led.probe_cycles = 300;
    led.calibration_cycles = 150;
    led.remap_cycles = 50;
    CHECK(led.total() == 10500);
    CHECK(led.overhead_ratio() == doctest::Approx(0.05).epsilon(1e-15));
}

TEST_CASE("matrix partitioning and padding bookkeeping") {
    AcceleratorConfig cfg = AcceleratorConfig::make(4, 4, 8);
    CHECK(cfg.block_height() == 32);
    CHECK(cfg.block_width() == 32);

    Matrix w = random_matrix(100, 70, 11);
    WeightMapping m = map_matrix(w, cfg);
    CHECK(m.block_rows == 4);
    CHECK(m.block_cols == 3);
    CHECK(m.cycles_per_mvm == 12);
    CHECK(m.chunk_count() == 12);
    CHECK(m.chunk_at(0, 0).valid_rows == 32);
    CHECK(m.chunk_at(3, 0).valid_rows == 4);
    CHECK(m.chunk_at(0, 2).valid_cols == 6);
    CHECK(m.encode_clips == 0);

    // Identity tile assignment at map time.
    for (const ChunkMapping& chunk : m.chunks)
        for (std::size_t u = 0; u < 4; ++u) CHECK(chunk.tile_of[u] == u);

    // Padding regions carry exact zeros in the ideal blocks.
    const ChunkMapping& edge = m.chunk_at(3, 2);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t v = 0; v < 4; ++v) {
            const CoreBlock& core = edge.cores[u * 4 + v];
            for (std::size_t i = 0; i < 8; ++i)
                for (std::size_t j = 0; j < 8; ++j) {
                    const std::size_t gr = 96 + u * 8 + i, gc = 64 + v * 8 + j;
                    if (gr >= 100 || gc >= 70) CHECK(core.ideal(i, j) == 0.0);
                }
        }

    CHECK(assemble_ideal(m) == w);
    CHECK_THROWS_AS((void)map_matrix(Matrix{}, cfg), ShapeMismatch);
}

TEST_CASE("noiseless realization reproduces the mapped weights") {
    AcceleratorConfig cfg = AcceleratorConfig::make(2, 2, 4);
    Matrix w = random_matrix(13, 9, 3, -2.0, 2.0);
    WeightMapping m = map_matrix(w, cfg);

    NoiseInputs clean;  // everything disabled
    std::vector<Matrix> blocks = noisy_weights(m, cfg, clean);
    Matrix got = assemble(m, blocks);
    for (std::size_t r = 0; r < w.rows(); ++r)
        for (std::size_t c = 0; c < w.cols(); ++c)
            CHECK(std::abs(got(r, c) - w(r, c)) <= 1e-9 * std::max(1.0, std::abs(w(r, c))));
}

TEST_CASE("noiseless accelerator product matches dense linear algebra") {
    AcceleratorConfig cfg = AcceleratorConfig::make(3, 2, 4);
    Matrix w = random_matrix(25, 17, 9);
    WeightMapping m = map_matrix(w, cfg);
    std::vector<double> x(17);
    Rng rng = substream(21, StreamTag::Trial, 17);
    for (double& v : x) v = rng.uniform(-1.0, 1.0);

    CycleLedger led;
    NoiseInputs clean;
    std::vector<double> y = mvm(m, cfg, x, clean, led);
    std::vector<double> want = dense_mvm(w, x);
    REQUIRE(y.size() == want.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        CHECK(y[i] == doctest::Approx(want[i]).epsilon(1e-9));
    CHECK(led.inference_cycles == m.cycles_per_mvm);
    CHECK(led.total() == m.cycles_per_mvm);

    std::vector<double> bad(16, 0.0);
    CHECK_THROWS_AS((void)mvm(m, cfg, bad, clean, led), DimensionMismatch);
}

TEST_CASE("tile permutation leaves noiseless results unchanged") {
    AcceleratorConfig cfg = AcceleratorConfig::make(4, 2, 4);
    Matrix w = random_matrix(16, 8, 5);
    WeightMapping m = map_matrix(w, cfg);
    NoiseInputs clean;
    Matrix before = assemble(m, noisy_weights(m, cfg, clean));

    m.chunks[0].tile_of = {2, 0, 3, 1};
    Matrix after = assemble(m, noisy_weights(m, cfg, clean));
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(after.data()[i] == doctest::Approx(before.data()[i]).epsilon(1e-12));

    // With a spatially varying temperature the permutation does matter.
    TemperatureField f;
    f.schedule = TemperatureSchedule::Linear;
    f.profile = TemperatureProfile::CornerHotspot;
    f.t_max = 100;
    NoiseInputs hot;
    hot.temperature = &f;
    hot.step = 100;
    Matrix permuted = assemble(m, noisy_weights(m, cfg, hot));
    m.chunks[0].tile_of = {0, 1, 2, 3};
    Matrix direct = assemble(m, noisy_weights(m, cfg, hot));
    CHECK_FALSE(permuted == direct);
}

TEST_CASE("uniform heating shifts every phase by the per-column drift") {
    AcceleratorConfig cfg = AcceleratorConfig::make(1, 1, 4);
    Matrix w = random_matrix(4, 4, 17, -0.5, 0.5);
    WeightMapping m = map_matrix(w, cfg);

    TemperatureField f;
    f.schedule = TemperatureSchedule::Constant;
    f.constant_offset = 0.5;
    NoiseInputs warm;
    warm.temperature = &f;
    Matrix got = realize_chunk(m, 0, cfg, warm);

    const CoreBlock& core = m.chunks[0].cores[0];
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double phi =
                core.phases(i, j) + phase_shift_from_temperature(0.5, cfg.columns[j]);
            const double want =
                weight_from_transmission(through_transmission(phi, cfg.columns[j]), core.scale);
            CHECK(got(i, j) == doctest::Approx(want).epsilon(1e-15));
        }
    // Heating moves weights; the realization is not the ideal any more.
    CHECK(nmae(got, m.chunks[0].cores[0].ideal) > 1e-4);
}

TEST_CASE("thermal crosstalk perturbs programmed weights") {
    AcceleratorConfig cfg = AcceleratorConfig::make(1, 1, 8);
    Matrix w = random_matrix(8, 8, 23, -1.0, 1.0);
    WeightMapping m = map_matrix(w, cfg);

    CrosstalkMatrix g = build_crosstalk_matrix(8, 60.0, 200.0, 0.1);
    NoiseInputs coupled;
    coupled.crosstalk = &g;
    Matrix got = realize_chunk(m, 0, cfg, coupled);
    CHECK(nmae(got, assemble_ideal(m)) > 1e-5);

    // Stronger coupling, larger distortion.
    CrosstalkMatrix g2 = build_crosstalk_matrix(8, 20.0, 60.0, 0.1);
    NoiseInputs coupled2;
    coupled2.crosstalk = &g2;
    Matrix got2 = realize_chunk(m, 0, cfg, coupled2);
    CHECK(nmae(got2, assemble_ideal(m)) > nmae(got, assemble_ideal(m)));
}

TEST_CASE("noisy realizations are keyed, reproducible and exec-mode invariant") {
    AcceleratorConfig cfg = AcceleratorConfig::make(2, 2, 8);
    Matrix w = random_matrix(32, 32, 31);
    WeightMapping m = map_matrix(w, cfg);

    PhaseNoiseConfig ncfg;
    ncfg.schedule = SigmaSchedule::high_noise();
    ncfg.t_max = 100;
    PhaseNoiseState state = PhaseNoiseState::zero(16, 16, ncfg);
    for (int t = 0; t < 40; ++t) step_noise_state(state, 77);

    NoiseInputs n1;
    n1.phase_noise = &state;
    n1.seed = 77;
    n1.draw = DrawKey{12, 0, 0};
    std::vector<Matrix> serial = noisy_weights(m, cfg, n1, ExecMode::Serial);
    std::vector<Matrix> parallel = noisy_weights(m, cfg, n1, ExecMode::Parallel);
    REQUIRE(serial.size() == parallel.size());
    for (std::size_t b = 0; b < serial.size(); ++b) CHECK(serial[b] == parallel[b]);

    NoiseInputs n2 = n1;
    n2.draw = DrawKey{13, 0, 0};
    std::vector<Matrix> other = noisy_weights(m, cfg, n2);
    CHECK_FALSE(serial[0] == other[0]);

    // Same draw again: bit-identical.
    std::vector<Matrix> again = noisy_weights(m, cfg, n1);
    for (std::size_t b = 0; b < serial.size(); ++b) CHECK(serial[b] == again[b]);
}

TEST_CASE("nmae matches its definition and rejects degenerate inputs") {
    Matrix ideal(2, 2);
    ideal(0, 0) = 1.0;
    ideal(0, 1) = -2.0;
    ideal(1, 0) = 0.0;
    ideal(1, 1) = 1.0;
    Matrix actual = ideal;
    actual(0, 0) = 1.5;
    actual(1, 0) = -0.5;
    CHECK(nmae(actual, ideal) == doctest::Approx(1.0 / 4.0).epsilon(1e-15));

    CHECK_THROWS_AS((void)nmae(actual, Matrix(3, 2)), ShapeMismatch);
    CHECK_THROWS_AS((void)nmae(Matrix(2, 2), Matrix(2, 2)), ZeroReference);
}

TEST_CASE("core scales cover the block range with encoding margin") {
    AcceleratorConfig cfg = AcceleratorConfig::make(1, 1, 2);
    Matrix w(2, 2);
    w(0, 0) = 0.8;
    w(0, 1) = -0.3;
    w(1, 0) = 0.1;
    w(1, 1) = 0.0;
    WeightMapping m = map_matrix(w, cfg);
    const CoreBlock& core = m.chunks[0].cores[0];
    // Largest positive entry must land at the top of the reachable interval.
    WeightRange wr = reachable_weights(core.scale, cfg.columns[0]);
    CHECK(wr.hi >= 0.8);
    CHECK(wr.lo <= -0.3);
    CHECK(core.scale == doctest::Approx(0.8 / 0.9779616006837398).epsilon(1e-12));
    CHECK(m.encode_clips == 0);

    // All-zero blocks still encode (scale floor).
    Matrix z(2, 2, 0.0);
    WeightMapping mz = map_matrix(z, cfg);
    CHECK(mz.chunks[0].cores[0].scale > 0.0);
    CHECK(assemble_ideal(mz) == z);
}

TEST_CASE("phase offsets act as persistent per-ring phase shifts") {
    AcceleratorConfig cfg = AcceleratorConfig::make(1, 1, 4);
    Matrix w = random_matrix(4, 4, 41, -0.5, 0.5);
    WeightMapping m = map_matrix(w, cfg);

    Matrix offset(4, 4);
    Rng rng = substream(9, StreamTag::Trial, 4, 4);
    for (std::size_t i = 0; i < offset.size(); ++i) offset.data()[i] = rng.uniform(-0.02, 0.02);

    NoiseInputs shifted;
    shifted.phase_offset = &offset;
    Matrix got = realize_chunk(m, 0, cfg, shifted);

    const CoreBlock& core = m.chunks[0].cores[0];
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double a = through_transmission(core.phases(i, j) + offset(i, j), cfg.columns[j]);
            CHECK(got(i, j) ==
                  doctest::Approx(weight_from_transmission(a, core.scale)).epsilon(1e-15));
        }
    CHECK(nmae(got, core.ideal) > 1e-4);

    // The offset is persistent state, not a draw: different keys, same result.
    NoiseInputs other = shifted;
    other.draw = DrawKey{99, 99, 99};
    CHECK(realize_chunk(m, 0, cfg, other) == got);

    // A grid-shaped map is required.
    Matrix wrong(3, 4);
    NoiseInputs bad;
    bad.phase_offset = &wrong;
    CHECK_THROWS_AS((void)realize_chunk(m, 0, cfg, bad), ShapeMismatch);
    CHECK_THROWS_AS((void)noisy_weights(m, cfg, bad), ShapeMismatch);
}

TEST_CASE("phase offsets follow the physical tile through a remap") {
    AcceleratorConfig cfg = AcceleratorConfig::make(2, 1, 2);
    Matrix w = random_matrix(4, 2, 43, -0.5, 0.5);
    WeightMapping m = map_matrix(w, cfg);

    // Tile 0 rows shifted up, tile 1 rows shifted down.
    Matrix offset(4, 2);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 2; ++c) offset(r, c) = (r < 2) ? 0.03 : -0.03;

    NoiseInputs n;
    n.phase_offset = &offset;
    Matrix before = realize_chunk(m, 0, cfg, n);

    apply_remap(m.chunks[0], {1, 0});
    Matrix after = realize_chunk(m, 0, cfg, n);
    CHECK_FALSE(before == after);

    // Logical row-chunk 0 now runs on physical tile 1 and must see that
    // tile's offset rows.
    const CoreBlock& core = m.chunks[0].cores[0];
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            const double a =
                through_transmission(core.phases(i, j) + offset(2 + i, j), cfg.columns[j]);
            CHECK(after(i, j) ==
                  doctest::Approx(weight_from_transmission(a, core.scale)).epsilon(1e-15));
        }
}

TEST_CASE("phase offsets compose with keyed draws and crosstalk ordering") {
    AcceleratorConfig cfg = AcceleratorConfig::make(1, 1, 4);
    Matrix w = random_matrix(4, 4, 47, -0.5, 0.5);
    WeightMapping m = map_matrix(w, cfg);

    PhaseNoiseConfig ncfg;
    ncfg.schedule = SigmaSchedule::high_noise();
    ncfg.t_max = 10;
    PhaseNoiseState state = PhaseNoiseState::zero(4, 4, ncfg);
    for (int t = 0; t < 10; ++t) step_noise_state(state, 5);

    Matrix offset(4, 4);
    Rng rng = substream(10, StreamTag::Trial, 4, 4);
    for (std::size_t i = 0; i < offset.size(); ++i) offset.data()[i] = rng.uniform(-0.02, 0.02);

    NoiseInputs both;
    both.phase_offset = &offset;
    both.phase_noise = &state;
    both.seed = 5;
    both.draw = DrawKey{3, 1, 4};
    Matrix got = realize_chunk(m, 0, cfg, both);

    const CoreBlock& core = m.chunks[0].cores[0];
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            const double phi = core.phases(i, j) + offset(i, j) +
                               sample_phase_noise_at(state, 5, both.draw, i, j);
            const double a = through_transmission(phi, cfg.columns[j]);
            CHECK(got(i, j) ==
                  doctest::Approx(weight_from_transmission(a, core.scale)).epsilon(1e-15));
        }
}
