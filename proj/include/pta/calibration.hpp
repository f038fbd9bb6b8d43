#pragma once

#include <cstdint>
#include <vector>

#include "pta/accelerator.hpp"

namespace pta {

// Which ledger counter a probe bills to: calibration-loop probes are
// calibration cost, controller health probes are probe cost, cost-matrix
// probes are remap cost.
enum class CycleBucket { Inference, Probe, Calibration, Remap };
void charge_cycles(CycleLedger& ledger, CycleBucket bucket, std::uint64_t cycles);

struct CalibrationConfig {
    double selection_fraction = 0.2;  // beta, fraction of chunks calibrated per event
    int max_iterations = 20;          // probe/update rounds per chunk
    int probe_shots = 1;              // m, realizations averaged per probe
    double learning_rate = 2e-3;      // eta, per-element sign step (normalized units)
    double stop_mae = 0.0038;         // stopping threshold on the normalized probed MAE
    double divergence_factor = 10.0;  // abort when MAE exceeds this multiple of start

    void validate() const;
};

enum class SelectionMethod { ImportanceSampling, TopK, Random };

// One score per chunk (same layout as WeightMapping::chunks), typically the
// mean |dL/dW| of the chunk. Produced by the model harness; passed in here.
struct SalienceTable {
    std::vector<double> score;
};

// E[W~] of one chunk by identity readout: average of `shots` noisy
// realizations. Costs shots * k cycles (the k basis vectors read all cores of
// the array in parallel), billed to `bucket`. noise.draw is the base key;
// shot s draws with key {a, b, c + s}.
Matrix probe_expected_weights(const WeightMapping& mapping, std::size_t chunk_index,
                              const AcceleratorConfig& cfg, NoiseInputs noise, int shots,
                              CycleBucket bucket, CycleLedger& ledger,
                              ExecMode mode = ExecMode::Serial);

// Mean |probed - ideal| over the chunk's valid (non-padding) region.
double chunk_probe_mae(const WeightMapping& mapping, std::size_t chunk_index,
                       const Matrix& probed);

// ceil(beta * chunks), with a guard against FP round-up on exact products.
std::size_t selection_count(double beta, std::size_t chunks);

// Pick `count` distinct chunk indices out of [0, chunks). ImportanceSampling
// weights by salience (keys u^(1/p)); TopK takes the highest scores, ties to
// the lowest index; Random is uniform without replacement.
std::vector<std::size_t> select_chunks(SelectionMethod method, const SalienceTable& salience,
                                       std::size_t chunks, std::size_t count, std::uint64_t seed,
                                       std::uint64_t event);

struct ChunkCalibrationResult {
    std::size_t chunk_index = 0;
    int iterations = 0;       // probe/update rounds consumed (>= 1)
    double initial_mae = 0.0;
    double final_mae = 0.0;
    bool converged = false;   // hit stop_mae before the iteration cap
};

// Probe -> sign update on the latent weights -> re-encode, until the probed
// MAE drops under stop_mae or the iteration cap hits. Steps and the stop
// metric live in each core's normalized domain (real units / g), so blocks
// with large weights converge as fast as small ones. Each iteration costs
// probe_shots * k calibration cycles. Throws Diverged when the probed MAE
// exceeds divergence_factor * max(initial MAE, stop_mae).
ChunkCalibrationResult calibrate_chunk(WeightMapping& mapping, std::size_t chunk_index,
                                       const AcceleratorConfig& cfg, const NoiseInputs& noise,
                                       const CalibrationConfig& ccfg, std::uint64_t seed,
                                       std::uint64_t event, CycleLedger& ledger,
                                       ExecMode mode = ExecMode::Serial);

struct CalibrationReport {
    std::vector<ChunkCalibrationResult> blocks;
    std::size_t selected = 0;  // == ceil(beta * chunk_count)
    int probe_shots = 1;
    std::size_t core_size = 0;
    std::uint64_t cycles = 0;  // == sum over blocks of iterations * shots * k
};

// One calibration event: select ceil(beta * N) chunks by the given method,
// then calibrate each selected chunk.
CalibrationReport calibrate_selected(WeightMapping& mapping, const AcceleratorConfig& cfg,
                                     const NoiseInputs& noise, const CalibrationConfig& ccfg,
                                     SelectionMethod method, const SalienceTable& salience,
                                     std::uint64_t seed, std::uint64_t event,
                                     CycleLedger& ledger, ExecMode mode = ExecMode::Serial);

// Per-block planning cost beta * T * m * k, rounded to the nearest integer.
std::uint64_t calibration_block_cycle_estimate(double beta, int iterations, int shots,
                                               std::size_t core_size);

} // namespace pta
