#pragma once

#include <stdexcept>
#include <string>

namespace terra {

// Invalid or inconsistent configuration values.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

// A caller broke a documented precondition (shape mismatch, bad mask values, ...).
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error("contract error: " + msg) {}
};

// Bad input data (non-finite values, multi-band rasters, ...).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error("data error: " + msg) {}
};

// Procedural generation could not satisfy the request within its retry budget.
struct GenerationError : std::runtime_error {
    explicit GenerationError(const std::string& msg) : std::runtime_error("generation error: " + msg) {}
};

// Weight transfer between incompatible models.
struct TransferError : std::runtime_error {
    explicit TransferError(const std::string& msg) : std::runtime_error("transfer error: " + msg) {}
};

// Divergence or other numeric failure during optimization.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

// Filesystem-level failure (unreadable/unwritable paths).
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error("io error: " + msg) {}
};

// A required upstream artifact (scene dir, manifest, checkpoint) is absent.
struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& msg)
        : std::runtime_error("missing artifact: " + msg) {}
};

}  // namespace terra
