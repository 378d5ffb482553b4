#pragma once

#include <stdexcept>
#include <string>

namespace fres {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Thrown when two positions coincide and a channel direction is undefined.
struct DegenerateGeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Zero-rate link asked to carry data.
struct InfeasibleLinkError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CorruptPayloadError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CheckpointVersionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raised when inference is requested for more UAVs than the agent has
// structure for; the caller must run the progressive scheduler first.
struct AdjustRequiredError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace fres
