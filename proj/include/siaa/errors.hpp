#pragma once

#include <stdexcept>
#include <string>

namespace siaa {

// Zero-norm vectors, empty prompts and similar inputs for which the
// requested quantity has no defined value.
struct DegenerateInputError : std::runtime_error {
    explicit DegenerateInputError(const std::string& what) : std::runtime_error(what) {}
};

// Metric requested on a population where it is undefined (ASR with no
// pre-correct records, AUC with a single class, WPSNR of identical images).
struct UndefinedMetricError : std::runtime_error {
    explicit UndefinedMetricError(const std::string& what) : std::runtime_error(what) {}
};

// A required file (checkpoint, dataset, config) does not exist or cannot
// be parsed as the expected artifact.
struct MissingArtifactError : std::runtime_error {
    explicit MissingArtifactError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace siaa
