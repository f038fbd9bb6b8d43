#pragma once

#include <stdexcept>
#include <string>

namespace pta {

// Base for all config/schema-level failures; the CLI maps these to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SchemaError : ConfigError {
    using ConfigError::ConfigError;
};

struct ShapeMismatch : ConfigError {
    using ConfigError::ConfigError;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Requested weight maps to a transmission outside [a_min, a_max] for the device.
struct UnreachableWeight : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ZeroReference : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Calibration MAE blew past 10x its initial value; the CLI maps this to exit code 3.
struct Diverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingGradients : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IllegalAssignment : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DidNotConverge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace pta
