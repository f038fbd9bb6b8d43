#include "pta/accelerator.hpp"

#include <algorithm>
#include <numeric>

namespace pta {

AcceleratorConfig AcceleratorConfig::make(std::size_t tiles, std::size_t cores_per_tile,
                                          std::size_t core_size, const DeviceGrid& grid) {
    AcceleratorConfig cfg;
    cfg.tiles = tiles;
    cfg.cores_per_tile = cores_per_tile;
    cfg.core_size = core_size;
    cfg.device = grid;
    cfg.columns.reserve(core_size);
    for (std::size_t j = 0; j < core_size; ++j)
        cfg.columns.push_back(grid.column_params(static_cast<int>(j)));
    cfg.validate();
    return cfg;
}

void AcceleratorConfig::validate() const {
    if (tiles == 0 || cores_per_tile == 0 || core_size == 0)
        throw ConfigError("accelerator: tiles, cores_per_tile and core_size must all be >= 1");
    if (columns.size() != core_size)
        throw ConfigError("accelerator: need one MRR parameter set per weight-bank column");
    for (const MrrParams& p : columns) {
        p.validate();
        TransmissionRange tr = transmission_range(p);
        if (!(tr.a_min < 0.5 && 0.5 < tr.a_max))
            throw ConfigError("accelerator: transmission window must straddle 1/2 "
                              "so zero weights stay encodable");
    }
}

namespace {

// Smallest g with every block entry inside [g*unit.lo, g*unit.hi], where unit
// is the reachable weight interval at g = 1. Taking g = max|W| directly would
// put the extreme entries outside the open transmission window, so the scale
// carries the small margin the encoder needs.
double core_scale(const Matrix& ideal, const WeightRange& unit) {
    double g = 1e-12;  // floor keeps all-zero blocks encodable
    for (std::size_t i = 0; i < ideal.rows(); ++i) {
        for (std::size_t j = 0; j < ideal.cols(); ++j) {
            const double w = ideal(i, j);
            if (w > 0.0)
                g = std::max(g, w / unit.hi);
            else if (w < 0.0)
                g = std::max(g, w / unit.lo);
        }
    }
    return g;
}

} // namespace

WeightMapping map_matrix(const Matrix& weights, const AcceleratorConfig& cfg) {
    cfg.validate();
    if (weights.rows() == 0 || weights.cols() == 0)
        throw ShapeMismatch("map_matrix: weight matrix is empty");

    const std::size_t R = cfg.tiles, C = cfg.cores_per_tile, k = cfg.core_size;
    const std::size_t BH = R * k, BW = C * k;

    WeightMapping m;
    m.rows = weights.rows();
    m.cols = weights.cols();
    m.block_rows = (m.rows + BH - 1) / BH;
    m.block_cols = (m.cols + BW - 1) / BW;
    m.tiles = R;
    m.cores_per_tile = C;
    m.core_size = k;
    m.cycles_per_mvm = static_cast<std::uint64_t>(m.block_rows) * m.block_cols;
    m.chunks.resize(m.block_rows * m.block_cols);

    const WeightRange unit = reachable_weights(1.0, cfg.columns[0]);
    for (std::size_t bi = 0; bi < m.block_rows; ++bi) {
        for (std::size_t bj = 0; bj < m.block_cols; ++bj) {
            ChunkMapping& chunk = m.chunk_at(bi, bj);
            chunk.valid_rows = std::min(BH, m.rows - bi * BH);
            chunk.valid_cols = std::min(BW, m.cols - bj * BW);
            chunk.tile_of.resize(R);
            std::iota(chunk.tile_of.begin(), chunk.tile_of.end(), std::size_t{0});
            chunk.cores.resize(R * C);
            for (std::size_t u = 0; u < R; ++u) {
                for (std::size_t v = 0; v < C; ++v) {
                    CoreBlock& core = chunk.cores[u * C + v];
                    core.ideal = Matrix(k, k);
                    for (std::size_t i = 0; i < k; ++i) {
                        for (std::size_t j = 0; j < k; ++j) {
                            const std::size_t gr = bi * BH + u * k + i;
                            const std::size_t gc = bj * BW + v * k + j;
                            if (gr < m.rows && gc < m.cols) core.ideal(i, j) = weights(gr, gc);
                        }
                    }
                    core.latent = core.ideal;
                    core.scale = core_scale(core.ideal, unit);
                    core.phases = Matrix(k, k);
                    reencode_core(core, cfg, m);
                }
            }
        }
    }
    return m;
}

void reencode_core(CoreBlock& core, const AcceleratorConfig& cfg, WeightMapping& mapping) {
    for (std::size_t i = 0; i < cfg.core_size; ++i)
        for (std::size_t j = 0; j < cfg.core_size; ++j)
            core.phases(i, j) = phase_from_weight_clipped(core.latent(i, j), core.scale,
                                                          cfg.columns[j], &mapping.encode_clips);
}

namespace {

// One k x k bank: logical row-chunk u of `chunk`, core column v, running on
// physical tile chunk.tile_of[u]. Temperature and phase noise are indexed by
// the physical position; the result lands at the logical position in `out`.
void realize_core(const WeightMapping& mapping, const ChunkMapping& chunk, std::size_t u,
                  std::size_t v, const AcceleratorConfig& cfg, const NoiseInputs& noise,
                  Matrix& out) {
    const std::size_t C = mapping.cores_per_tile, k = mapping.core_size;
    const std::size_t p = chunk.tile_of[u];
    const CoreBlock& core = chunk.cores[u * C + v];

    std::vector<double> dphi_T(k, 0.0);
    if (noise.temperature != nullptr) {
        const double T = temperature_at(*noise.temperature, noise.step, p, v);
        for (std::size_t j = 0; j < k; ++j)
            dphi_T[j] = phase_shift_from_temperature(T - cfg.columns[j].ref_temp, cfg.columns[j]);
    }

    std::vector<double> phases(k * k);
    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            double phi = core.phases(i, j) + dphi_T[j];
            if (noise.phase_offset != nullptr) phi += (*noise.phase_offset)(p * k + i, v * k + j);
            if (noise.phase_noise != nullptr)
                phi += sample_phase_noise_at(*noise.phase_noise, noise.seed, noise.draw,
                                             p * k + i, v * k + j);
            phases[i * k + j] = phi;
        }
    }
    if (noise.crosstalk != nullptr && !noise.crosstalk->identity())
        phases = apply_crosstalk(*noise.crosstalk, phases);

    for (std::size_t i = 0; i < k; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double a = through_transmission(phases[i * k + j], cfg.columns[j]);
            out(u * k + i, v * k + j) = weight_from_transmission(a, core.scale);
        }
    }
}

void check_phase_offset(const WeightMapping& mapping, const NoiseInputs& noise) {
    if (noise.phase_offset == nullptr) return;
    if (noise.phase_offset->rows() != mapping.tiles * mapping.core_size ||
        noise.phase_offset->cols() != mapping.cores_per_tile * mapping.core_size)
        throw ShapeMismatch("phase offset map does not match the device grid");
}

} // namespace

Matrix realize_chunk(const WeightMapping& mapping, std::size_t chunk_index,
                     const AcceleratorConfig& cfg, const NoiseInputs& noise, ExecMode mode) {
    check_phase_offset(mapping, noise);
    const ChunkMapping& chunk = mapping.chunks.at(chunk_index);
    const std::size_t C = mapping.cores_per_tile;
    Matrix out(mapping.tiles * mapping.core_size, C * mapping.core_size);
    const long long units = static_cast<long long>(mapping.tiles * C);
    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long t = 0; t < units; ++t)
            realize_core(mapping, chunk, static_cast<std::size_t>(t) / C,
                         static_cast<std::size_t>(t) % C, cfg, noise, out);
    } else {
        for (long long t = 0; t < units; ++t)
            realize_core(mapping, chunk, static_cast<std::size_t>(t) / C,
                         static_cast<std::size_t>(t) % C, cfg, noise, out);
    }
    return out;
}

std::vector<Matrix> noisy_weights(const WeightMapping& mapping, const AcceleratorConfig& cfg,
                                  const NoiseInputs& noise, ExecMode mode) {
    check_phase_offset(mapping, noise);
    const std::size_t R = mapping.tiles, C = mapping.cores_per_tile, k = mapping.core_size;
    const std::size_t nchunks = mapping.chunk_count();
    std::vector<Matrix> blocks(nchunks);
    for (std::size_t b = 0; b < nchunks; ++b) blocks[b] = Matrix(R * k, C * k);

    // Each work unit fills a disjoint k x k window, so scheduling order is free.
    const long long units = static_cast<long long>(nchunks * R * C);
    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (long long t = 0; t < units; ++t) {
            const std::size_t b = static_cast<std::size_t>(t) / (R * C);
            const std::size_t rem = static_cast<std::size_t>(t) % (R * C);
            realize_core(mapping, mapping.chunks[b], rem / C, rem % C, cfg, noise, blocks[b]);
        }
    } else {
        for (long long t = 0; t < units; ++t) {
            const std::size_t b = static_cast<std::size_t>(t) / (R * C);
            const std::size_t rem = static_cast<std::size_t>(t) % (R * C);
            realize_core(mapping, mapping.chunks[b], rem / C, rem % C, cfg, noise, blocks[b]);
        }
    }
    return blocks;
}

Matrix assemble(const WeightMapping& mapping, const std::vector<Matrix>& blocks) {
    if (blocks.size() != mapping.chunk_count())
        throw ShapeMismatch("assemble: block count does not match mapping");
    const std::size_t BH = mapping.tiles * mapping.core_size;
    const std::size_t BW = mapping.cores_per_tile * mapping.core_size;
    Matrix out(mapping.rows, mapping.cols);
    for (std::size_t bi = 0; bi < mapping.block_rows; ++bi) {
        for (std::size_t bj = 0; bj < mapping.block_cols; ++bj) {
            const ChunkMapping& chunk = mapping.chunk_at(bi, bj);
            const Matrix& blk = blocks[bi * mapping.block_cols + bj];
            if (blk.rows() != BH || blk.cols() != BW)
                throw ShapeMismatch("assemble: block has wrong shape");
            for (std::size_t r = 0; r < chunk.valid_rows; ++r)
                for (std::size_t c = 0; c < chunk.valid_cols; ++c)
                    out(bi * BH + r, bj * BW + c) = blk(r, c);
        }
    }
    return out;
}

Matrix assemble_ideal(const WeightMapping& mapping) {
    const std::size_t k = mapping.core_size, C = mapping.cores_per_tile;
    const std::size_t BH = mapping.tiles * k, BW = C * k;
    Matrix out(mapping.rows, mapping.cols);
    for (std::size_t bi = 0; bi < mapping.block_rows; ++bi) {
        for (std::size_t bj = 0; bj < mapping.block_cols; ++bj) {
            const ChunkMapping& chunk = mapping.chunk_at(bi, bj);
            for (std::size_t r = 0; r < chunk.valid_rows; ++r)
                for (std::size_t c = 0; c < chunk.valid_cols; ++c)
                    out(bi * BH + r, bj * BW + c) =
                        chunk.cores[(r / k) * C + c / k].ideal(r % k, c % k);
        }
    }
    return out;
}

std::vector<double> apply_realized(const WeightMapping& mapping, const std::vector<Matrix>& blocks,
                                   const std::vector<double>& x) {
    if (x.size() != mapping.cols)
        throw DimensionMismatch("apply_realized: input length does not match matrix width");
    if (blocks.size() != mapping.chunk_count())
        throw ShapeMismatch("apply_realized: block count does not match mapping");

    const std::size_t k = mapping.core_size, C = mapping.cores_per_tile;
    const std::size_t BH = mapping.tiles * k, BW = C * k;
    std::vector<double> y(mapping.rows, 0.0);
    for (std::size_t bi = 0; bi < mapping.block_rows; ++bi) {
        for (std::size_t bj = 0; bj < mapping.block_cols; ++bj) {
            const ChunkMapping& chunk = mapping.chunk_at(bi, bj);
            const Matrix& blk = blocks[bi * mapping.block_cols + bj];
            for (std::size_t r = 0; r < chunk.valid_rows; ++r) {
                // Partial sums accumulate across a tile's cores in fixed order.
                double acc = 0.0;
                for (std::size_t v = 0; v < C; ++v) {
                    const std::size_t c0 = v * k;
                    const std::size_t c1 = std::min(c0 + k, chunk.valid_cols);
                    double partial = 0.0;
                    for (std::size_t c = c0; c < c1; ++c) partial += blk(r, c) * x[bj * BW + c];
                    acc += partial;
                }
                y[bi * BH + r] += acc;
            }
        }
    }
    return y;
}

std::vector<double> mvm(const WeightMapping& mapping, const AcceleratorConfig& cfg,
                        const std::vector<double>& x, const NoiseInputs& noise,
                        CycleLedger& ledger, ExecMode mode) {
    std::vector<Matrix> blocks = noisy_weights(mapping, cfg, noise, mode);
    ledger.inference_cycles += mapping.cycles_per_mvm;
    return apply_realized(mapping, blocks, x);
}

double nmae(const Matrix& actual, const Matrix& ideal) {
    if (!actual.same_shape(ideal)) throw ShapeMismatch("nmae: matrices differ in shape");
    double num = 0.0, den = 0.0;
    const double* a = actual.data();
    const double* b = ideal.data();
    for (std::size_t i = 0; i < ideal.size(); ++i) {
        num += std::abs(a[i] - b[i]);
        den += std::abs(b[i]);
    }
    if (den == 0.0) throw ZeroReference("nmae: reference matrix has zero L1 norm");
    return num / den;
}

} // namespace pta
