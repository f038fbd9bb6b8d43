#include "pta/device.hpp"

#include <algorithm>
#include <cmath>

namespace pta {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;
} // namespace

void MrrParams::validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("MrrParams: alpha must be in (0,1)");
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("MrrParams: r must be in (0,1)");
    if (!(wavelength > 0.0)) throw ConfigError("MrrParams: wavelength must be positive");
    if (!(perimeter > 0.0)) throw ConfigError("MrrParams: perimeter must be positive");
    if (!(group_index > 0.0)) throw ConfigError("MrrParams: group_index must be positive");
    if (!(dlambda_dT > 0.0)) throw ConfigError("MrrParams: dlambda_dT must be positive");
}

MrrParams DeviceGrid::column_params(int column) const {
    MrrParams p;
    p.alpha = alpha;
    p.r = r;
    p.wavelength = base_wavelength + static_cast<double>(column) * wavelength_step;
    // Perimeter snapped to an integer number of on-resonance wavelengths.
    const double n = std::max(1.0, std::round(nominal_perimeter / p.wavelength));
    p.perimeter = n * p.wavelength;
    p.group_index = group_index;
    p.dlambda_dT = dlambda_dT;
    p.ref_temp = ref_temp;
    p.validate();
    return p;
}

double canonical_phase(double phase) {
    double p = std::fmod(phase, kTwoPi);
    if (p < 0.0) p += kTwoPi;
    if (p >= kTwoPi) p = 0.0;  // fmod can land exactly on 2pi
    return p;
}

double through_transmission(double phase, const MrrParams& params) {
    const double a = params.alpha;
    const double r = params.r;
    const double c = std::cos(phase);
    const double num = a * a - 2.0 * r * a * c + r * r;
    const double den = 1.0 - 2.0 * r * a * c + r * r * a * a;
    return num / den;
}

TransmissionRange transmission_range(const MrrParams& params) {
    return {through_transmission(0.0, params), through_transmission(kPi, params)};
}

double weight_from_transmission(double transmission, double scale) {
    return scale * (2.0 * transmission - 1.0);
}

WeightRange reachable_weights(double scale, const MrrParams& params) {
    const TransmissionRange range = transmission_range(params);
    return {scale * (2.0 * range.a_min - 1.0), scale * (2.0 * range.a_max - 1.0)};
}

namespace {

// cos phi = (alpha^2 + r^2 - a (1 + r^2 alpha^2)) / (2 r alpha (1 - a))
double cos_phase_for_transmission(double a, const MrrParams& p) {
    return (p.alpha * p.alpha + p.r * p.r - a * (1.0 + p.r * p.r * p.alpha * p.alpha)) /
           (2.0 * p.r * p.alpha * (1.0 - a));
}

double bisect_phase(double target_a, const MrrParams& p) {
    // a(phi) strictly increasing on (0, pi)
    double lo = 0.0, hi = kPi;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (through_transmission(mid, p) < target_a)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

std::optional<double> try_phase_from_weight(double weight, double scale, const MrrParams& params) {
    const double a = (weight / scale + 1.0) * 0.5;
    const TransmissionRange range = transmission_range(params);
    const double tol = 1e-12 * std::max(1.0, std::abs(a));
    if (a < range.a_min - tol || a > range.a_max + tol || a >= 1.0) return std::nullopt;

    const double target = std::clamp(a, range.a_min, range.a_max);
    double c = std::clamp(cos_phase_for_transmission(target, params), -1.0, 1.0);
    double phase = std::acos(c);
    if (std::abs(through_transmission(phase, params) - target) > 1e-12 * std::max(1.0, target))
        phase = bisect_phase(target, params);
    return phase;
}

double phase_from_weight(double weight, double scale, const MrrParams& params) {
    const auto phase = try_phase_from_weight(weight, scale, params);
    if (!phase)
        throw UnreachableWeight("weight " + std::to_string(weight) + " unreachable at scale " +
                                std::to_string(scale));
    return *phase;
}

double phase_from_weight_clipped(double weight, double scale, const MrrParams& params,
                                 long long* clip_count) {
    if (auto phase = try_phase_from_weight(weight, scale, params)) return *phase;
    const WeightRange wr = reachable_weights(scale, params);
    if (clip_count) ++*clip_count;
    const double clipped = std::clamp(weight, wr.lo, wr.hi);
    return phase_from_weight(clipped, scale, params);
}

double phase_shift_from_temperature(double delta_T, const MrrParams& params) {
    const double dlambda = delta_T * params.dlambda_dT;
    const double dn_eff = dlambda * params.group_index / params.wavelength;
    return dn_eff * kTwoPi * params.perimeter / params.wavelength;
}

} // namespace pta
