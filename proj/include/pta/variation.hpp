#pragma once

#include <cstdint>

#include "pta/exec.hpp"
#include "pta/matrix.hpp"
#include "pta/rng.hpp"

namespace pta {

// ---------------------------------------------------------------------------
// Drifting per-MRR phase-noise intensity
// ---------------------------------------------------------------------------

// mu_s(t), sigma_s(t) of the intensity-sampling distribution, evaluated on
// normalized progress t/t_max in [0,1].
struct SigmaSchedule {
    double mu_slope = 0.0025;     // mu_s(t) = mu_slope * t_hat
    double sigma_slope = 0.004;   // sigma_s(t) = sigma_slope * t_hat + sigma_offset
    double sigma_offset = 0.002;

    static SigmaSchedule low_noise() { return {0.0025, 0.004, 0.002}; }
    static SigmaSchedule high_noise() { return {0.01, 0.005, 0.005}; }

    double mu(double t_hat) const { return mu_slope * t_hat; }
    double sigma(double t_hat) const { return sigma_slope * t_hat + sigma_offset; }
};

enum class SpatialMask {
    None,
    EdgeToCorner,  // high-noise region slides from the left edge to the top-left corner
};

// Mask value in (0,1] at device coordinate (row, col) on the (R*k) x (C*k) grid.
// Blends a left-edge falloff into a top-left radial falloff as t_hat goes 0 -> 1;
// both falloffs are exp(-distance / decay_length) in device-index units.
double spatial_mask_value(SpatialMask mask, double t_hat, std::size_t row, std::size_t col,
                          double decay_length);

struct PhaseNoiseConfig {
    SigmaSchedule schedule;
    SpatialMask mask = SpatialMask::EdgeToCorner;
    double mask_decay_length = 16.0;  // device-index units
    double damping = 0.9;             // beta_sigma
    std::uint64_t t_max = 20000;
};

// Per-MRR noise std map sigma_ij(t) over the full device grid.
struct PhaseNoiseState {
    Matrix sigma;        // (R*k) x (C*k), all entries >= 0
    std::uint64_t timestep = 0;
    PhaseNoiseConfig config;

    static PhaseNoiseState zero(std::size_t rows, std::size_t cols, const PhaseNoiseConfig& cfg);
};

// One step of the two-level sampling: draw sigma' ~ N(mu_s, sigma_s^2) per device,
// apply the spatial mask, clamp at 0, then EMA with damping beta_sigma.
// Deterministic per (seed, timestep, device) regardless of execution order.
void step_noise_state(PhaseNoiseState& state, std::uint64_t seed, ExecMode mode = ExecMode::Serial);

// Identifies one phase-noise realization; equal keys yield identical draws.
struct DrawKey {
    std::uint64_t a = 0;
    std::uint64_t b = 0;
    std::uint64_t c = 0;
};

// Fresh zero-mean draw dphi_ij ~ N(0, sigma_ij^2) for every device.
Matrix sample_phase_noise(const PhaseNoiseState& state, std::uint64_t seed, const DrawKey& key,
                          ExecMode mode = ExecMode::Serial);

// Draw for a single device, identical to the matching entry of sample_phase_noise.
double sample_phase_noise_at(const PhaseNoiseState& state, std::uint64_t seed, const DrawKey& key,
                             std::size_t row, std::size_t col);

// ---------------------------------------------------------------------------
// Temperature schedules and spatial profiles
// ---------------------------------------------------------------------------

enum class TemperatureSchedule {
    Constant,  // T(t) = base + offset
    Linear,    // T(t) = base + t/t_max           (base 300 K -> 301 K)
    Cosine,    // T(t) = base + 0.25 - 0.25 cos(10 t / t_max)
};

enum class TemperatureProfile {
    Uniform,
    CornerHotspot,  // drift scaled by exp(-sqrt(r^2 + c^2)) from PTC (0,0)
};

struct TemperatureField {
    TemperatureSchedule schedule = TemperatureSchedule::Constant;
    TemperatureProfile profile = TemperatureProfile::Uniform;
    std::uint64_t t_max = 20000;
    double base_temp = 300.0;       // T(0) [K]
    double constant_offset = 0.0;   // [K], Constant schedule only
};

// Chip-level schedule value T(t), before the spatial profile.
double schedule_temperature(const TemperatureField& field, std::uint64_t t);

// Temperature of PTC (tile_row, core_col) at step t.
double temperature_at(const TemperatureField& field, std::uint64_t t, std::size_t tile_row,
                      std::size_t core_col);

// Mean over the R x C PTC grid at step t.
double mean_temperature(const TemperatureField& field, std::uint64_t t, std::size_t tiles,
                        std::size_t cores_per_tile);

// ---------------------------------------------------------------------------
// Thermal crosstalk within one k x k weight bank
// ---------------------------------------------------------------------------

// gamma_ij = exp(-k1 d_ij), d_ij from the physical spacing of MRRs (i, j) in
// row-major order; gamma_ii = 1. Shared by every core (identical layout).
struct CrosstalkMatrix {
    std::size_t core_size = 0;  // k
    Matrix gamma;               // k^2 x k^2
    double spacing_h = 60.0;    // l_h [um]
    double spacing_v = 200.0;   // l_v [um]
    double k1 = 0.1;            // [1/um]

    bool identity() const { return gamma.size() == 0; }
};

CrosstalkMatrix build_crosstalk_matrix(std::size_t core_size, double spacing_h, double spacing_v,
                                       double k1);

// Identity coupling (crosstalk disabled); apply_crosstalk passes phases through.
CrosstalkMatrix no_crosstalk(std::size_t core_size);

// Phi_coupled = Gamma * Phi for one core's k^2 phase vector.
std::vector<double> apply_crosstalk(const CrosstalkMatrix& gamma, const std::vector<double>& phases);

} // namespace pta
