#include "pta/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pta/rng.hpp"

namespace pta {

void charge_cycles(CycleLedger& ledger, CycleBucket bucket, std::uint64_t cycles) {
    switch (bucket) {
        case CycleBucket::Inference: ledger.inference_cycles += cycles; break;
        case CycleBucket::Probe: ledger.probe_cycles += cycles; break;
        case CycleBucket::Calibration: ledger.calibration_cycles += cycles; break;
        case CycleBucket::Remap: ledger.remap_cycles += cycles; break;
    }
}

void CalibrationConfig::validate() const {
    if (!(selection_fraction >= 0.0 && selection_fraction <= 1.0))
        throw ConfigError("calibration: selection_fraction must lie in [0, 1]");
    if (max_iterations < 1) throw ConfigError("calibration: max_iterations must be >= 1");
    if (probe_shots < 1) throw ConfigError("calibration: probe_shots must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("calibration: learning_rate must be > 0");
    if (!(stop_mae >= 0.0)) throw ConfigError("calibration: stop_mae must be >= 0");
    if (!(divergence_factor > 0.0))
        throw ConfigError("calibration: divergence_factor must be > 0");
}

Matrix probe_expected_weights(const WeightMapping& mapping, std::size_t chunk_index,
                              const AcceleratorConfig& cfg, NoiseInputs noise, int shots,
                              CycleBucket bucket, CycleLedger& ledger, ExecMode mode) {
    if (shots < 1) throw ConfigError("probe_expected_weights: shots must be >= 1");
    const DrawKey base = noise.draw;
    Matrix acc(mapping.tiles * mapping.core_size, mapping.cores_per_tile * mapping.core_size);
    for (int s = 0; s < shots; ++s) {
        noise.draw = DrawKey{base.a, base.b, base.c + static_cast<std::uint64_t>(s)};
        Matrix w = realize_chunk(mapping, chunk_index, cfg, noise, mode);
        for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] += w.data()[i];
    }
    const double inv = 1.0 / shots;
    for (std::size_t i = 0; i < acc.size(); ++i) acc.data()[i] *= inv;
    charge_cycles(ledger, bucket, static_cast<std::uint64_t>(shots) * mapping.core_size);
    return acc;
}

double chunk_probe_mae(const WeightMapping& mapping, std::size_t chunk_index,
                       const Matrix& probed) {
    const ChunkMapping& chunk = mapping.chunks.at(chunk_index);
    const std::size_t k = mapping.core_size, C = mapping.cores_per_tile;
    if (probed.rows() != mapping.tiles * k || probed.cols() != C * k)
        throw ShapeMismatch("chunk_probe_mae: probe has wrong shape");
    if (chunk.valid_rows == 0 || chunk.valid_cols == 0)
        throw ShapeMismatch("chunk_probe_mae: chunk has no valid region");
    double sum = 0.0;
    for (std::size_t r = 0; r < chunk.valid_rows; ++r) {
        for (std::size_t c = 0; c < chunk.valid_cols; ++c) {
            const CoreBlock& core = chunk.cores[(r / k) * C + c / k];
            sum += std::abs(probed(r, c) - core.ideal(r % k, c % k));
        }
    }
    return sum / (static_cast<double>(chunk.valid_rows) * static_cast<double>(chunk.valid_cols));
}

std::size_t selection_count(double beta, std::size_t chunks) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("selection_count: fraction must lie in [0, 1]");
    // The epsilon keeps exact products like 0.1 * 30 from ceiling to 4.
    const double raw = beta * static_cast<double>(chunks);
    const auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    return std::min(count, chunks);
}

std::vector<std::size_t> select_chunks(SelectionMethod method, const SalienceTable& salience,
                                       std::size_t chunks, std::size_t count, std::uint64_t seed,
                                       std::uint64_t event) {
    if (count > chunks) throw ConfigError("select_chunks: cannot select more chunks than exist");
    if (method != SelectionMethod::Random && salience.score.size() != chunks)
        throw ShapeMismatch("select_chunks: need one salience score per chunk");

    std::vector<std::size_t> order(chunks);
    std::iota(order.begin(), order.end(), std::size_t{0});

    switch (method) {
        case SelectionMethod::TopK: {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return salience.score[a] > salience.score[b];
            });
            break;
        }
        case SelectionMethod::ImportanceSampling: {
            // Weighted sampling without replacement: draw u ~ (0,1] per chunk,
            // rank by u^(1/p). Zero-weight chunks rank last, by index.
            Rng rng = substream(seed, StreamTag::Selection, event);
            std::vector<double> key(chunks);
            for (std::size_t i = 0; i < chunks; ++i) {
                const double u = rng.uniform_pos();
                const double p = salience.score[i];
                key[i] = p > 0.0 ? std::pow(u, 1.0 / p) : -1.0;
            }
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
            break;
        }
        case SelectionMethod::Random: {
            Rng rng = substream(seed, StreamTag::Selection, event);
            for (std::size_t i = 0; i + 1 < chunks; ++i) {
                const std::size_t j =
                    i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(chunks - i));
                std::swap(order[i], order[std::min(j, chunks - 1)]);
            }
            break;
        }
    }
    order.resize(count);
    return order;
}

ChunkCalibrationResult calibrate_chunk(WeightMapping& mapping, std::size_t chunk_index,
                                       const AcceleratorConfig& cfg, const NoiseInputs& noise,
                                       const CalibrationConfig& ccfg, std::uint64_t seed,
                                       std::uint64_t event, CycleLedger& ledger, ExecMode mode) {
    ccfg.validate();
    ChunkMapping& chunk = mapping.chunks.at(chunk_index);
    const std::size_t k = mapping.core_size, C = mapping.cores_per_tile;

    ChunkCalibrationResult res;
    res.chunk_index = chunk_index;
    // Stream root for this (event, chunk): iterations and shots key off it.
    const std::uint64_t root =
        substream(seed, StreamTag::CalibProbe, event, chunk_index).next_u64();

    // The loop runs in each core's normalized weight domain (real units / g):
    // the step is eta * g on the latent and the stop metric divides by g, so
    // convergence speed does not depend on how large a block's weights are.
    auto normalized_mae = [&](const Matrix& probed) {
        double sum = 0.0;
        for (std::size_t r = 0; r < chunk.valid_rows; ++r)
            for (std::size_t c = 0; c < chunk.valid_cols; ++c) {
                const CoreBlock& core = chunk.cores[(r / k) * C + c / k];
                sum += std::abs(probed(r, c) - core.ideal(r % k, c % k)) / core.scale;
            }
        return sum / static_cast<double>(chunk.valid_rows * chunk.valid_cols);
    };

    for (int iter = 0; iter < ccfg.max_iterations; ++iter) {
        NoiseInputs probe_noise = noise;
        probe_noise.draw = DrawKey{root, static_cast<std::uint64_t>(iter), 0};
        Matrix probed = probe_expected_weights(mapping, chunk_index, cfg, probe_noise,
                                               ccfg.probe_shots, CycleBucket::Calibration, ledger,
                                               mode);
        const double mae = normalized_mae(probed);
        res.iterations = iter + 1;
        if (iter == 0) res.initial_mae = mae;
        res.final_mae = mae;
        if (mae < ccfg.stop_mae) {
            res.converged = true;
            break;
        }
        if (mae > ccfg.divergence_factor * std::max(res.initial_mae, ccfg.stop_mae))
            throw Diverged("calibration: probed MAE grew past the divergence tripwire");

        // Sign descent on the latent weights; padding is never touched.
        for (std::size_t r = 0; r < chunk.valid_rows; ++r) {
            for (std::size_t c = 0; c < chunk.valid_cols; ++c) {
                CoreBlock& core = chunk.cores[(r / k) * C + c / k];
                const double err = probed(r, c) - core.ideal(r % k, c % k);
                if (err > 0.0)
                    core.latent(r % k, c % k) -= ccfg.learning_rate * core.scale;
                else if (err < 0.0)
                    core.latent(r % k, c % k) += ccfg.learning_rate * core.scale;
            }
        }
        for (CoreBlock& core : chunk.cores) reencode_core(core, cfg, mapping);
    }
    return res;
}

CalibrationReport calibrate_selected(WeightMapping& mapping, const AcceleratorConfig& cfg,
                                     const NoiseInputs& noise, const CalibrationConfig& ccfg,
                                     SelectionMethod method, const SalienceTable& salience,
                                     std::uint64_t seed, std::uint64_t event, CycleLedger& ledger,
                                     ExecMode mode) {
    ccfg.validate();
    const std::size_t count = selection_count(ccfg.selection_fraction, mapping.chunk_count());
    std::vector<std::size_t> chosen =
        select_chunks(method, salience, mapping.chunk_count(), count, seed, event);

    CalibrationReport rep;
    rep.selected = chosen.size();
    rep.probe_shots = ccfg.probe_shots;
    rep.core_size = mapping.core_size;
    const std::uint64_t before = ledger.calibration_cycles;
    for (std::size_t c : chosen)
        rep.blocks.push_back(
            calibrate_chunk(mapping, c, cfg, noise, ccfg, seed, event, ledger, mode));
    rep.cycles = ledger.calibration_cycles - before;
    return rep;
}

std::uint64_t calibration_block_cycle_estimate(double beta, int iterations, int shots,
                                               std::size_t core_size) {
    if (!(beta >= 0.0 && beta <= 1.0))
        throw ConfigError("calibration cycle estimate: fraction must lie in [0, 1]");
    if (iterations < 1 || shots < 1 || core_size < 1)
        throw ConfigError("calibration cycle estimate: counts must be >= 1");
    const double cycles = beta * static_cast<double>(iterations) * static_cast<double>(shots) *
                          static_cast<double>(core_size);
    return static_cast<std::uint64_t>(std::llround(cycles));
}

} // namespace pta
