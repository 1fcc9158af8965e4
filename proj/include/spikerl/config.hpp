#pragma once

// Key = value run configuration. Missing keys keep their defaults, which
// reproduce the optimised network.

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include "spikerl/environment.hpp"
#include "spikerl/experiment.hpp"
#include "spikerl/ga.hpp"
#include "spikerl/network.hpp"

namespace spikerl {

struct RunConfig {
    NetworkConfig network;  ///< network.rng_seed is the network seed
    EnvironmentParams environment;
    EpisodeOptions episode;
    GaConfig ga;
    std::uint64_t env_seed = 1;
    std::uint64_t ga_eval_seed = 1000;  ///< GA trials use env seeds ga_eval_seed + i

    void validate() const;
    bool operator==(const RunConfig&) const = default;
};

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Syntax:  key = value   one per line; '#' starts a comment.
/// Throws ConfigError naming the line for syntax problems and naming the
/// key and its allowed range for out-of-range values.
RunConfig parse_config(std::string_view text);

/// Every key, in a stable order, formatted so that parsing returns an equal config.
std::string serialize_config(const RunConfig& cfg);

}  // namespace spikerl
