#pragma once

#include <stdexcept>
#include <string>

namespace newscred {

// Shape/contract violation inside the numeric core.
struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller broke a documented precondition (bad arguments, bad state).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input data; message carries file and line where known.
struct LoadError : std::runtime_error {
    LoadError(const std::string& path, long line, const std::string& msg)
        : std::runtime_error(path + ":" + std::to_string(line) + ": " + msg) {}
    explicit LoadError(const std::string& msg) : std::runtime_error(msg) {}
};

// Optimization diverged (non-finite loss or gradients).
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace newscred
