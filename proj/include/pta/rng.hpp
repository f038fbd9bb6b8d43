#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace pta {

// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Purpose tags keeping every random stream in the simulator disjoint.
enum class StreamTag : std::uint64_t {
    SigmaDrift = 1,   // per-step noise-intensity samples
    PhaseDraw = 2,    // per-device phase noise realizations
    CalibProbe = 3,   // probe shots inside calibration loops
    RemapProbe = 4,   // cost-matrix probe rounds
    Selection = 5,    // sparse chunk selection
    ProbeSubset = 6,  // controller NMAE probe subset
    Trainer = 7,      // fixture dataset + weight init
    Trial = 8,        // seeded test/benchmark trials
};

// Small counter-based generator. A stream is identified by the words folded
// into the constructor, so any (seed, tag, index...) tuple owns an independent
// sequence regardless of evaluation order across threads.
class Rng {
public:
    Rng() : state_(0) {}

    explicit Rng(std::initializer_list<std::uint64_t> words) : state_(0x853c49e6748fea9bULL) {
        for (std::uint64_t w : words) state_ = mix64(state_ ^ w);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in (0, 1]; safe to feed into log()
    double uniform_pos() { return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, Box-Muller with a cached spare
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform_pos();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 6.283185307179586476925286766559 * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline Rng substream(std::uint64_t seed, StreamTag tag, std::uint64_t a = 0,
                     std::uint64_t b = 0, std::uint64_t c = 0, std::uint64_t d = 0) {
    return Rng{seed, static_cast<std::uint64_t>(tag), a, b, c, d};
}

} // namespace pta
