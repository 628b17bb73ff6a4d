#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "owd/eval.hpp"
#include "owd/losses.hpp"
#include "owd/matching.hpp"
#include "owd/sim.hpp"

namespace owd {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct FrameConfig {
    std::size_t k = 128;
    std::size_t d = 256;
    std::uint64_t seed = 1;
};

struct ExperimentConfig {
    WorldConfig world;
    FrameConfig frame;
    LossWeights weights;
    PseudoConfig pseudo;
    TrainConfig train;
    InferenceConfig inference;
    AblationFlags ablation;
    std::string out_dir = "out";
};

/// Sectioned key/value text ("[section]" headers, "key = value" lines,
/// '#' comments). Unknown sections or keys are errors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Canonical text form; parse_config_text(config_to_text(c)) round-trips.
std::string config_to_text(const ExperimentConfig& config);

/// FNV-1a over the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

}  // namespace owd
