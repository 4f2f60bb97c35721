#pragma once

#include <stdexcept>
#include <string>

namespace tablere {

// Error taxonomy. The CLI maps these onto exit codes:
//   ConfigError/UsageError -> 2, DataError/FormatError/ShapeError -> 3,
//   NumericError -> 4.

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FormatError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace tablere
