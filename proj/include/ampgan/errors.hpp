#pragma once

#include <stdexcept>
#include <string>

namespace ampgan {

// Error taxonomy mirrored by the CLI exit codes:
// ConfigError -> 2, DataError -> 3, DivergenceError -> 4.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

struct DivergenceError : NumericError {
    explicit DivergenceError(const std::string& msg) : NumericError(msg) {}
    DivergenceError(const std::string& msg, std::string ckpt)
        : NumericError(msg), last_good_checkpoint(std::move(ckpt)) {}
    std::string last_good_checkpoint;
};

}  // namespace ampgan
