#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lcmem {

// Invalid configuration: bad spec counts, unknown augmentation kind,
// malformed targets, unknown config keys.
struct config_error : std::runtime_error {
    explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed runtime input: shape mismatches, dimension mismatches.
struct input_error : std::runtime_error {
    explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse across calls, e.g. backward without a matching forward.
struct state_error : std::runtime_error {
    explicit state_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Corrupt or incompatible file. Carries the byte offset of the field
// that failed validation.
struct format_error : std::runtime_error {
    uint64_t byte_offset;
    format_error(const std::string& msg, uint64_t offset)
        : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
};

// Optimization failure (e.g. non-finite loss).
struct training_error : std::runtime_error {
    int epoch;
    double last_finite_loss;
    training_error(const std::string& msg, int epoch_, double last_loss)
        : std::runtime_error(msg + " (epoch " + std::to_string(epoch_) +
                             ", last finite loss " + std::to_string(last_loss) + ")"),
          epoch(epoch_), last_finite_loss(last_loss) {}
};

// Metric undefined for the given input (e.g. single-class AUC,
// unreachable operating point).
struct metric_error : std::runtime_error {
    explicit metric_error(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace lcmem
