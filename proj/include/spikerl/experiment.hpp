#pragma once

// Train/evaluate protocol, tracking criterion, learning curves and the
// strong-connection weight image.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "spikerl/environment.hpp"
#include "spikerl/network.hpp"

namespace spikerl {

struct EpisodeOptions {
    std::int64_t train_ms = 800000;
    std::int64_t eval_ms = 200000;
    std::int64_t window_ms = 200000;  ///< learning-curve window
    bool record_trace = false;
    bool log_events = false;

    std::int64_t total_ms() const { return train_ms + eval_ms; }
    bool operator==(const EpisodeOptions&) const = default;
};

struct TraceRow {
    std::int64_t t;
    Vec2 spot;
    Vec2 cam;
    double d;
    bool reward;
    bool punish;
};

struct WindowStat {
    std::int64_t start_ms;
    double in_zone_fraction;
};

struct EpisodeResult {
    double criterion = 0.0;
    std::vector<WindowStat> window_curve;
    std::vector<double> distance_trace;  ///< filled when record_trace is set
    std::vector<TraceRow> trace;         ///< filled when record_trace is set
    WeightSnapshot final_weights;
    std::vector<double> initial_resource_totals;
    std::vector<double> final_resource_totals;
    std::int64_t reward_spikes = 0;
    std::int64_t punish_spikes = 0;
    std::int64_t command_spikes = 0;
    std::vector<PlasticityEvent> plasticity_events;  ///< filled when log_events is set
    std::vector<std::vector<Time>> gate_firings;      ///< filled when log_events is set
    std::uint64_t env_seed = 0;
    std::uint64_t net_seed = 0;
};

/// Runs the environment and the network in lockstep. Plasticity stays on
/// for the whole run; the criterion is measured over the final eval_ms.
EpisodeResult run_episode(const NetworkConfig& cfg, const EnvironmentParams& env_params,
                          const EncoderCalibration& cal, std::uint64_t env_seed,
                          const EpisodeOptions& opt = {});

/// Fraction of steps in [window_start, window_end) with d < zone.
/// Throws std::invalid_argument on an empty or out-of-range window.
double compute_criterion(std::span<const double> distance_trace, std::size_t window_start,
                         std::size_t window_end, double zone = 0.15);

/// (window_start_sec, in_zone_fraction) rows with a header line.
std::string export_learning_curve(const EpisodeResult& result);
std::string export_trace_csv(const EpisodeResult& result);

// Weight image ---------------------------------------------------------------

struct Pixmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  ///< row-major, 3 bytes per pixel

    std::array<std::uint8_t, 3> at(int x, int y) const
    {
        const auto i = 3 * (static_cast<std::size_t>(y) * width + x);
        return {rgb[i], rgb[i + 1], rgb[i + 2]};
    }
};

/// One 20x20 tile per learning neuron; tile rows follow the group order
/// up, right, down, left. A pixel is red/green/blue when its brightness,
/// increase or decrease channel has resource above strong_threshold.
/// Tiles are separated and framed by one black pixel.
Pixmap export_weight_image(const WeightSnapshot& weights, int neurons_per_group,
                           double strong_threshold = 30.0);

/// Binary PPM (P6).
std::string encode_ppm(const Pixmap& image);

// Weight snapshot text format ------------------------------------------------
//
//   spikerl-weights <rows> <cols> <neurons_per_group>
//   one line per learning neuron, comma separated; "-" marks an absent synapse

std::string serialize_weights(const WeightSnapshot& weights, int neurons_per_group);
/// Throws std::runtime_error on malformed input.
WeightSnapshot parse_weights(const std::string& text, int& neurons_per_group);

}  // namespace spikerl
