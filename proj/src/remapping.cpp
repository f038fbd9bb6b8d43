#include "pta/remapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "pta/rng.hpp"

namespace pta {

namespace {

// Score one logical row-band (rows [u*k, u*k+k) of the probed chunk) against
// its ideal, restricted to the valid region.
double band_cost(const WeightMapping& mapping, const ChunkMapping& chunk, std::size_t u,
                 const Matrix& probed, CostMethod method, const Matrix* grad,
                 const Matrix* curvature) {
    const std::size_t k = mapping.core_size, C = mapping.cores_per_tile;
    const std::size_t r0 = u * k;
    const std::size_t r1 = std::min(r0 + k, chunk.valid_rows);
    double abs_sum = 0.0, first = 0.0, second = 0.0;
    for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t c = 0; c < chunk.valid_cols; ++c) {
            const CoreBlock& core = chunk.cores[u * C + c / k];
            const double dw = probed(r, c) - core.ideal(r % k, c % k);
            switch (method) {
                case CostMethod::MAE: abs_sum += std::abs(dw); break;
                case CostMethod::SecondOrder:
                    second += (*curvature)(r, c) * dw * dw;
                    [[fallthrough]];
                case CostMethod::FirstOrder: first += (*grad)(r, c) * dw; break;
            }
        }
    }
    switch (method) {
        case CostMethod::MAE: return abs_sum;
        case CostMethod::FirstOrder: return std::abs(first);
        case CostMethod::SecondOrder: return std::abs(first) + 0.5 * std::abs(second);
    }
    return 0.0;
}

} // namespace

Matrix build_cost_matrix(WeightMapping& mapping, std::size_t chunk_index,
                         const AcceleratorConfig& cfg, const NoiseInputs& noise,
                         CostMethod method, const GradientTable* grads, int shots,
                         std::uint64_t seed, std::uint64_t event, CycleLedger& ledger,
                         ExecMode mode) {
    ChunkMapping& chunk = mapping.chunks.at(chunk_index);
    const std::size_t R = mapping.tiles;

    const Matrix* grad = nullptr;
    const Matrix* curvature = nullptr;
    if (method != CostMethod::MAE) {
        if (grads == nullptr || grads->grad.size() != mapping.chunk_count())
            throw MissingGradients("build_cost_matrix: method needs a per-chunk gradient table");
        grad = &grads->grad[chunk_index];
        if (grad->rows() != mapping.tiles * mapping.core_size ||
            grad->cols() != mapping.cores_per_tile * mapping.core_size)
            throw ShapeMismatch("build_cost_matrix: gradient table has wrong chunk shape");
        if (method == CostMethod::SecondOrder) {
            if (grads->curvature.size() != mapping.chunk_count())
                throw MissingGradients("build_cost_matrix: second-order method needs curvature");
            curvature = &grads->curvature[chunk_index];
            if (!curvature->same_shape(*grad))
                throw ShapeMismatch("build_cost_matrix: curvature table has wrong chunk shape");
        }
    }

    const std::uint64_t root =
        substream(seed, StreamTag::RemapProbe, event, chunk_index).next_u64();
    const std::vector<std::size_t> saved = chunk.tile_of;

    Matrix costs(R, R);
    for (std::size_t rho = 0; rho < R; ++rho) {
        for (std::size_t u = 0; u < R; ++u) chunk.tile_of[u] = (u + rho) % R;
        NoiseInputs probe_noise = noise;
        probe_noise.draw = DrawKey{root, rho, 0};
        Matrix probed = probe_expected_weights(mapping, chunk_index, cfg, probe_noise, shots,
                                               CycleBucket::Remap, ledger, mode);
        for (std::size_t u = 0; u < R; ++u)
            costs(u, (u + rho) % R) =
                band_cost(mapping, chunk, u, probed, method, grad, curvature);
    }
    chunk.tile_of = saved;
    return costs;
}

std::vector<std::size_t> solve_lap(const Matrix& costs) {
    if (costs.rows() == 0 || costs.rows() != costs.cols())
        throw ConfigError("solve_lap: cost matrix must be square and non-empty");
    for (std::size_t i = 0; i < costs.size(); ++i)
        if (!std::isfinite(costs.data()[i]))
            throw ConfigError("solve_lap: cost entries must be finite");

    // Shortest augmenting path with row/column potentials (1-based internals).
    const int n = static_cast<int>(costs.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = costs(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<std::size_t> f(n);
    for (int j = 1; j <= n; ++j)
        if (p[j] != 0) f[p[j] - 1] = static_cast<std::size_t>(j - 1);
    return f;
}

double assignment_cost(const Matrix& costs, const std::vector<std::size_t>& assignment) {
    if (assignment.size() != costs.rows())
        throw ShapeMismatch("assignment_cost: assignment length does not match cost matrix");
    double total = 0.0;
    for (std::size_t u = 0; u < assignment.size(); ++u) total += costs(u, assignment[u]);
    return total;
}

void apply_remap(ChunkMapping& chunk, const std::vector<std::size_t>& assignment) {
    const std::size_t R = chunk.tile_of.size();
    if (assignment.size() != R)
        throw IllegalAssignment("apply_remap: assignment length does not match tile count");
    std::vector<char> seen(R, 0);
    for (std::size_t v : assignment) {
        if (v >= R || seen[v])
            throw IllegalAssignment("apply_remap: assignment is not a bijection on the tiles");
        seen[v] = 1;
    }
    chunk.tile_of = assignment;
}

std::uint64_t remap_cycle_cost(std::size_t tiles, int shots, std::size_t core_size) {
    if (tiles < 1 || shots < 1 || core_size < 1)
        throw ConfigError("remap cycle cost: counts must be >= 1");
    const auto R = static_cast<std::uint64_t>(tiles);
    return R * static_cast<std::uint64_t>(shots) * static_cast<std::uint64_t>(core_size) +
           R * R * R;
}

RemapReport remap_chunk(WeightMapping& mapping, std::size_t chunk_index,
                        const AcceleratorConfig& cfg, const NoiseInputs& noise, CostMethod method,
                        const GradientTable* grads, int shots, std::uint64_t seed,
                        std::uint64_t event, CycleLedger& ledger, ExecMode mode) {
    RemapReport rep;
    rep.chunk_index = chunk_index;
    const std::uint64_t before = ledger.remap_cycles;

    Matrix costs = build_cost_matrix(mapping, chunk_index, cfg, noise, method, grads, shots, seed,
                                     event, ledger, mode);
    rep.assignment = solve_lap(costs);
    charge_cycles(ledger, CycleBucket::Remap,
                  static_cast<std::uint64_t>(mapping.tiles) * mapping.tiles * mapping.tiles);

    std::vector<std::size_t> identity(mapping.tiles);
    std::iota(identity.begin(), identity.end(), std::size_t{0});
    rep.direct_cost = assignment_cost(costs, identity);
    rep.solved_cost = assignment_cost(costs, rep.assignment);
    apply_remap(mapping.chunks.at(chunk_index), rep.assignment);

    rep.cycles = ledger.remap_cycles - before;
    return rep;
}

} // namespace pta
