#include "pta/variation.hpp"

#include <cmath>
#include <cstddef>

#include "pta/errors.hpp"

namespace pta {

double spatial_mask_value(SpatialMask mask, double t_hat, std::size_t row, std::size_t col,
                          double decay_length) {
    if (mask == SpatialMask::None) return 1.0;
    const double x = static_cast<double>(col);
    const double y = static_cast<double>(row);
    const double edge = std::exp(-x / decay_length);
    const double corner = std::exp(-std::sqrt(x * x + y * y) / decay_length);
    return (1.0 - t_hat) * edge + t_hat * corner;
}

PhaseNoiseState PhaseNoiseState::zero(std::size_t rows, std::size_t cols,
                                      const PhaseNoiseConfig& cfg) {
    PhaseNoiseState state;
    state.sigma = Matrix(rows, cols, 0.0);
    state.timestep = 0;
    state.config = cfg;
    return state;
}

void step_noise_state(PhaseNoiseState& state, std::uint64_t seed, ExecMode mode) {
    const std::uint64_t t_next = state.timestep + 1;
    const double t_hat =
        state.config.t_max > 0
            ? std::min(1.0, static_cast<double>(t_next) / static_cast<double>(state.config.t_max))
            : 1.0;
    const double mu = state.config.schedule.mu(t_hat);
    const double sd = state.config.schedule.sigma(t_hat);
    const double beta = state.config.damping;
    const std::size_t rows = state.sigma.rows();
    const std::size_t cols = state.sigma.cols();
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rows * cols);

    auto update = [&](std::ptrdiff_t idx) {
        const std::size_t r = static_cast<std::size_t>(idx) / cols;
        const std::size_t c = static_cast<std::size_t>(idx) % cols;
        Rng rng = substream(seed, StreamTag::SigmaDrift, t_next, static_cast<std::uint64_t>(idx));
        const double mask =
            spatial_mask_value(state.config.mask, t_hat, r, c, state.config.mask_decay_length);
        const double sampled = std::max(0.0, rng.normal(mu, sd)) * mask;
        double& cell = state.sigma.data()[idx];
        cell = beta * cell + (1.0 - beta) * sampled;
    };

    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) update(i);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) update(i);
    }
    state.timestep = t_next;
}

double sample_phase_noise_at(const PhaseNoiseState& state, std::uint64_t seed, const DrawKey& key,
                             std::size_t row, std::size_t col) {
    const double sigma = state.sigma(row, col);
    if (sigma == 0.0) return 0.0;
    const std::uint64_t idx = row * state.sigma.cols() + col;
    Rng rng = substream(seed, StreamTag::PhaseDraw, key.a, key.b, key.c, idx);
    return sigma * rng.normal();
}

Matrix sample_phase_noise(const PhaseNoiseState& state, std::uint64_t seed, const DrawKey& key,
                          ExecMode mode) {
    const std::size_t rows = state.sigma.rows();
    const std::size_t cols = state.sigma.cols();
    Matrix draw(rows, cols);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(rows * cols);

    auto fill = [&](std::ptrdiff_t idx) {
        const std::size_t r = static_cast<std::size_t>(idx) / cols;
        const std::size_t c = static_cast<std::size_t>(idx) % cols;
        draw.data()[idx] = sample_phase_noise_at(state, seed, key, r, c);
    };

    if (mode == ExecMode::Parallel) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < n; ++i) fill(i);
    } else {
        for (std::ptrdiff_t i = 0; i < n; ++i) fill(i);
    }
    return draw;
}

double schedule_temperature(const TemperatureField& field, std::uint64_t t) {
    const double t_max = static_cast<double>(field.t_max);
    switch (field.schedule) {
        case TemperatureSchedule::Constant:
            return field.base_temp + field.constant_offset;
        case TemperatureSchedule::Linear:
            return field.base_temp + static_cast<double>(t) / t_max;
        case TemperatureSchedule::Cosine:
            return field.base_temp + 0.25 - 0.25 * std::cos(10.0 * static_cast<double>(t) / t_max);
    }
    return field.base_temp;
}

double temperature_at(const TemperatureField& field, std::uint64_t t, std::size_t tile_row,
                      std::size_t core_col) {
    const double chip = schedule_temperature(field, t);
    if (field.profile == TemperatureProfile::Uniform) return chip;
    const double r = static_cast<double>(tile_row);
    const double c = static_cast<double>(core_col);
    const double decay = std::exp(-std::sqrt(r * r + c * c));
    return field.base_temp + decay * (chip - field.base_temp);
}

double mean_temperature(const TemperatureField& field, std::uint64_t t, std::size_t tiles,
                        std::size_t cores_per_tile) {
    double sum = 0.0;
    for (std::size_t r = 0; r < tiles; ++r)
        for (std::size_t c = 0; c < cores_per_tile; ++c) sum += temperature_at(field, t, r, c);
    return sum / static_cast<double>(tiles * cores_per_tile);
}

CrosstalkMatrix build_crosstalk_matrix(std::size_t core_size, double spacing_h, double spacing_v,
                                       double k1) {
    if (core_size < 1) throw ConfigError("crosstalk: core_size must be >= 1");
    if (!(spacing_h > 0.0 && spacing_v > 0.0 && k1 > 0.0))
        throw ConfigError("crosstalk: spacings and k1 must be positive");

    CrosstalkMatrix ct;
    ct.core_size = core_size;
    ct.spacing_h = spacing_h;
    ct.spacing_v = spacing_v;
    ct.k1 = k1;
    const std::size_t n = core_size * core_size;
    ct.gamma = Matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const double ri = static_cast<double>(i / core_size);
        const double ci = static_cast<double>(i % core_size);
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                ct.gamma(i, j) = 1.0;
                continue;
            }
            const double rj = static_cast<double>(j / core_size);
            const double cj = static_cast<double>(j % core_size);
            const double dv = (rj - ri) * spacing_v;
            const double dh = (cj - ci) * spacing_h;
            ct.gamma(i, j) = std::exp(-k1 * std::sqrt(dv * dv + dh * dh));
        }
    }
    return ct;
}

CrosstalkMatrix no_crosstalk(std::size_t core_size) {
    CrosstalkMatrix ct;
    ct.core_size = core_size;
    return ct;  // empty gamma, treated as identity
}

std::vector<double> apply_crosstalk(const CrosstalkMatrix& gamma, const std::vector<double>& phases) {
    if (gamma.identity()) return phases;
    const std::size_t n = gamma.gamma.rows();
    if (phases.size() != n)
        throw DimensionMismatch("apply_crosstalk: expected " + std::to_string(n) + " phases, got " +
                                std::to_string(phases.size()));
    std::vector<double> out(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const double* row = gamma.gamma.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * phases[j];
        out[i] = acc;
    }
    return out;
}

} // namespace pta
