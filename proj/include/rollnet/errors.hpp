#pragma once

#include <stdexcept>
#include <string>

namespace rollnet {

// Error classes map onto CLI exit codes: ConfigError -> 2 (usage),
// ParseError/DataError -> 3 (data), NumericError -> 4 (numeric abort).
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

} // namespace rollnet
