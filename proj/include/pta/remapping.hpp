#pragma once

#include <cstdint>
#include <vector>

#include "pta/calibration.hpp"

namespace pta {

// How tile-assignment costs epsilon_{u,v} are scored from the probed
// deviation dW = E[W~ of logical row-chunk u on physical tile v] - W*_u:
//   MAE:         sum |dW|
//   FirstOrder:  |sum dL/dW . dW|
//   SecondOrder: FirstOrder + 1/2 |sum d2L/dW2 . dW^2|  (diagonal curvature)
enum class CostMethod { MAE, FirstOrder, SecondOrder };

// Per-chunk loss geometry for the sensitivity-aware methods: signed mean
// gradient and a diagonal curvature proxy, in logical Rk x Ck chunk layout.
// Either vector may be empty when the corresponding method is not used.
struct GradientTable {
    std::vector<Matrix> grad;
    std::vector<Matrix> curvature;
};

// R x R assignment costs for one chunk, probed in R cyclic-shift rounds:
// round rho runs logical u on physical (u + rho) % R and reads the band.
// Bills R * shots * k cycles to the remap counter.
Matrix build_cost_matrix(WeightMapping& mapping, std::size_t chunk_index,
                         const AcceleratorConfig& cfg, const NoiseInputs& noise,
                         CostMethod method, const GradientTable* grads, int shots,
                         std::uint64_t seed, std::uint64_t event, CycleLedger& ledger,
                         ExecMode mode = ExecMode::Serial);

// Minimum-cost assignment f (row u -> column f(u)) of a square finite cost
// matrix; shortest-augmenting-path Hungarian, O(n^3).
std::vector<std::size_t> solve_lap(const Matrix& costs);

double assignment_cost(const Matrix& costs, const std::vector<std::size_t>& assignment);

// Install a tile assignment on a chunk. Throws IllegalAssignment unless it is
// a bijection on [0, R).
void apply_remap(ChunkMapping& chunk, const std::vector<std::size_t>& assignment);

// R * shots * k probe cycles plus R^3 solver cycles.
std::uint64_t remap_cycle_cost(std::size_t tiles, int shots, std::size_t core_size);

struct RemapReport {
    std::size_t chunk_index = 0;
    std::vector<std::size_t> assignment;
    double direct_cost = 0.0;  // identity assignment total epsilon
    double solved_cost = 0.0;  // optimal total epsilon, <= direct_cost
    std::uint64_t cycles = 0;  // == remap_cycle_cost(R, shots, k)
};

// One remap event on one chunk: probe the cost matrix, solve, apply.
RemapReport remap_chunk(WeightMapping& mapping, std::size_t chunk_index,
                        const AcceleratorConfig& cfg, const NoiseInputs& noise,
                        CostMethod method, const GradientTable* grads, int shots,
                        std::uint64_t seed, std::uint64_t event, CycleLedger& ledger,
                        ExecMode mode = ExecMode::Serial);

} // namespace pta
