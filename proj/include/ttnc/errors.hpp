#ifndef TTNC_ERRORS_HPP
#define TTNC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace ttnc {

/// Bad configuration (unknown key, out-of-range value). CLI exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data. CLI exit code 3.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Numerical failure (degenerate model, non-finite loss). CLI exit code 4.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Latency budget below the chi=1 floor; carries the measured floor.
struct LatencyFloorError : NumericError {
    LatencyFloorError(const std::string& msg, double floor_us_)
        : NumericError(msg), floor_us(floor_us_) {}
    double floor_us;
};

}  // namespace ttnc

#endif  // TTNC_ERRORS_HPP
