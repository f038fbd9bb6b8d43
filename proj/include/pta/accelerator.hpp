#pragma once

#include <cstdint>
#include <vector>

#include "pta/device.hpp"
#include "pta/exec.hpp"
#include "pta/matrix.hpp"
#include "pta/variation.hpp"

namespace pta {

// R tiles x C cores per tile, each core a k x k MRR weight bank. Inputs are
// broadcast down the tiles; partial sums accumulate across the C cores of a
// tile, so one R*k x C*k matrix-vector product completes per cycle.
struct AcceleratorConfig {
    std::size_t tiles = 4;           // R
    std::size_t cores_per_tile = 4;  // C
    std::size_t core_size = 8;       // k
    DeviceGrid device;
    std::vector<MrrParams> columns;  // per weight-bank column, size k

    static AcceleratorConfig make(std::size_t tiles, std::size_t cores_per_tile,
                                  std::size_t core_size, const DeviceGrid& grid = {});
    std::size_t block_height() const { return tiles * core_size; }       // R*k
    std::size_t block_width() const { return cores_per_tile * core_size; }  // C*k
    void validate() const;
};

// Exact cycle accounting, split by purpose. Counters only ever grow.
struct CycleLedger {
    std::uint64_t inference_cycles = 0;
    std::uint64_t probe_cycles = 0;
    std::uint64_t calibration_cycles = 0;
    std::uint64_t remap_cycles = 0;

    std::uint64_t total() const {
        return inference_cycles + probe_cycles + calibration_cycles + remap_cycles;
    }
    // (total - inference) / inference
    double overhead_ratio() const {
        if (inference_cycles == 0) return 0.0;
        return static_cast<double>(total() - inference_cycles) /
               static_cast<double>(inference_cycles);
    }
};

// Programming of one k x k weight bank.
struct CoreBlock {
    Matrix ideal;   // k x k ideal weights W*, zeros in padding
    Matrix latent;  // calibration variable W, starts equal to ideal
    Matrix phases;  // programmed phases, phases(i,j) = encode(latent(i,j))
    double scale = 1.0;  // g
};

// One R*k x C*k chunk of the partitioned matrix, mapped across the full
// tile/core grid. tile_of is the remapping permutation: logical row-chunk u
// executes on physical tile tile_of[u].
struct ChunkMapping {
    std::vector<CoreBlock> cores;       // R*C, index u*C + v
    std::vector<std::size_t> tile_of;   // bijection on [R]
    std::size_t valid_rows = 0;         // <= R*k, rest is padding
    std::size_t valid_cols = 0;         // <= C*k
};

struct WeightMapping {
    std::size_t rows = 0, cols = 0;            // logical M x N
    std::size_t block_rows = 0, block_cols = 0;  // ceil(M/Rk), ceil(N/Ck)
    std::size_t tiles = 0, cores_per_tile = 0, core_size = 0;
    std::vector<ChunkMapping> chunks;          // block_rows * block_cols, row-major
    std::uint64_t cycles_per_mvm = 0;          // block_rows * block_cols
    long long encode_clips = 0;                // weights clipped to the reachable range

    std::size_t chunk_count() const { return chunks.size(); }
    ChunkMapping& chunk_at(std::size_t bi, std::size_t bj) {
        return chunks[bi * block_cols + bj];
    }
    const ChunkMapping& chunk_at(std::size_t bi, std::size_t bj) const {
        return chunks[bi * block_cols + bj];
    }
};

// Partition an M x N matrix into R*k x C*k chunks (zero-padded at the edges),
// pick a per-core scale g covering the block's weight range, and encode phases.
WeightMapping map_matrix(const Matrix& weights, const AcceleratorConfig& cfg);

// Re-encode one core's phases from its latent weights, clipping unreachable
// values to the nearest reachable weight. Clips are counted on the mapping.
void reencode_core(CoreBlock& core, const AcceleratorConfig& cfg, WeightMapping& mapping);

// Noise sources for a realization; null members are disabled.
// phase_offset is a quasi-static per-device phase error map [rad] on the
// physical (R*k) x (C*k) grid, added before crosstalk: it persists across
// realizations (process-variation drift), unlike the keyed fresh draws from
// phase_noise, and is what in-situ calibration can actually correct.
struct NoiseInputs {
    const PhaseNoiseState* phase_noise = nullptr;
    const Matrix* phase_offset = nullptr;
    const TemperatureField* temperature = nullptr;
    const CrosstalkMatrix* crosstalk = nullptr;
    std::uint64_t step = 0;
    std::uint64_t seed = 0;
    DrawKey draw;  // phase-noise realization key
};

// Noisy weights W~ for one chunk: per device, phase = Gamma (Phi + dPhi + dPhi_T),
// then w~ = g (2 a(phase) - 1). Writes a R*k x C*k matrix in logical order.
Matrix realize_chunk(const WeightMapping& mapping, std::size_t chunk_index,
                     const AcceleratorConfig& cfg, const NoiseInputs& noise,
                     ExecMode mode = ExecMode::Serial);

// All chunks realized; parallelizes over cores.
std::vector<Matrix> noisy_weights(const WeightMapping& mapping, const AcceleratorConfig& cfg,
                                  const NoiseInputs& noise, ExecMode mode = ExecMode::Serial);

// Reassemble logical M x N matrices from per-chunk realizations (padding stripped).
Matrix assemble(const WeightMapping& mapping, const std::vector<Matrix>& blocks);
// Ideal logical matrix (identity realization), mainly for tests and NMAE baselines.
Matrix assemble_ideal(const WeightMapping& mapping);

// Blockwise product y = W~ x with per-tile partial-sum accumulation across the
// C cores of each tile. No ledger charge; used by mvm and the batched forward.
std::vector<double> apply_realized(const WeightMapping& mapping,
                                   const std::vector<Matrix>& blocks,
                                   const std::vector<double>& x);

// One accelerator MVM: realize noisy weights at the given step/draw and apply.
// Charges cycles_per_mvm inference cycles.
std::vector<double> mvm(const WeightMapping& mapping, const AcceleratorConfig& cfg,
                        const std::vector<double>& x, const NoiseInputs& noise,
                        CycleLedger& ledger, ExecMode mode = ExecMode::Serial);

// ||actual - ideal||_1 / ||ideal||_1
double nmae(const Matrix& actual, const Matrix& ideal);

} // namespace pta
