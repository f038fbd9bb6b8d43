#pragma once

#include <optional>

#include "pta/errors.hpp"

namespace pta {

// Physical constants of one add-drop micro-ring resonator. Phases are
// referenced to the resonance at ref_temp, so phase 0 means on-resonance.
struct MrrParams {
    double alpha = 0.9;           // attenuation factor, in (0,1)
    double r = 0.9;               // coupling factor, in (0,1)
    double wavelength = 1550e-9;  // on-resonance wavelength at ref_temp [m]
    double perimeter = 31.0e-6;   // round-trip length [m]
    double group_index = 4.2;
    double dlambda_dT = 0.1e-9;   // resonance shift per kelvin [m/K]
    double ref_temp = 300.0;      // [K]

    void validate() const;
};

// Weight bank column grid: column c resonates at base + c * step, with the
// perimeter snapped to a whole number of wavelengths so the ring is
// on-resonance at ref_temp.
struct DeviceGrid {
    double alpha = 0.9;
    double r = 0.9;
    double base_wavelength = 1550e-9;  // [m]
    double wavelength_step = 0.8e-9;   // [m] per column
    double nominal_perimeter = 31.4159265e-6;  // [m], snapped per column
    double group_index = 4.2;
    double dlambda_dT = 0.1e-9;  // [m/K]
    double ref_temp = 300.0;     // [K]

    MrrParams column_params(int column) const;
};

struct WeightCode {
    double phase = 0.0;  // round-trip phase shift, canonical [0, 2pi)
    double scale = 1.0;  // block scaling factor g, > 0
};

// Reachable through-port transmission window [a_min, a_max] for given (alpha, r);
// a_min at phase 0, a_max at phase pi.
struct TransmissionRange {
    double a_min;
    double a_max;
};

double canonical_phase(double phase);

// a(phi) = (alpha^2 - 2 r alpha cos phi + r^2) / (1 - 2 r alpha cos phi + r^2 alpha^2)
double through_transmission(double phase, const MrrParams& params);
inline double drop_transmission(double phase, const MrrParams& params) {
    return 1.0 - through_transmission(phase, params);
}

TransmissionRange transmission_range(const MrrParams& params);

// w = g (2a - 1)
double weight_from_transmission(double transmission, double scale);

// Reachable weight interval [g*(2 a_min - 1), g*(2 a_max - 1)] for the device.
struct WeightRange {
    double lo;
    double hi;
};
WeightRange reachable_weights(double scale, const MrrParams& params);

// Inverse encoder: unique phase in [0, pi] with through_transmission(phase) == a,
// a = (w/g + 1)/2. Closed-form arccos, bisection fallback if the closed form
// fails to reproduce the target transmission.
std::optional<double> try_phase_from_weight(double weight, double scale, const MrrParams& params);
double phase_from_weight(double weight, double scale, const MrrParams& params);  // throws UnreachableWeight

// Encoder that clips out-of-range targets to the nearest reachable weight.
// Returns the phase; increments *clip_count when clipping happened.
double phase_from_weight_clipped(double weight, double scale, const MrrParams& params,
                                 long long* clip_count = nullptr);

// Round-trip phase drift for a temperature change:
// dlambda = dT (dlambda/dT); dn_eff = dlambda n_g / lambda; dphi = dn_eff 2 pi L / lambda.
double phase_shift_from_temperature(double delta_T, const MrrParams& params);

} // namespace pta
