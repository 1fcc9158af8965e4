#pragma once

// Light-spot tracking task: a 2x2 m arena, a chaotically moving light spot,
// and a movable 1x1 m camera with a 20x20-pixel event-style encoder.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spikerl/network.hpp"
#include "spikerl/snn_core.hpp"

namespace spikerl {

inline constexpr int kViewPixels = 20;
inline constexpr int kPixelCount = kViewPixels * kViewPixels;
inline constexpr int kChannelsPerPixel = 3;

using Vec2 = Eigen::Vector2d;
/// Row 0 is the top of the view (largest y), column 0 the left edge.
using Frame = Eigen::Array<double, kViewPixels, kViewPixels, Eigen::RowMajor>;

/// Channel layout: 3k brightness, 3k+1 increase, 3k+2 decrease, k = row*20+col.
enum class ChannelKind : int { Brightness = 0, Increase = 1, Decrease = 2 };

inline constexpr int channel_index(int pixel, ChannelKind kind) noexcept
{
    return kChannelsPerPixel * pixel + static_cast<int>(kind);
}

/// Mean-reverting velocity steered toward a waypoint that is redrawn
/// whenever the spot gets close to it. Waypoints are uniform over the arena
/// minus a margin; the default margin equals the range of the camera centre.
struct SpotProcessParams {
    double mean_speed = 0.0025;    ///< m/ms
    double reversion = 0.02;       ///< 1/ms
    double noise = 0.0006;         ///< m/ms per sqrt(ms)
    double waypoint_radius = 0.1;  ///< m
    double waypoint_margin = 0.5;  ///< m, waypoints keep this far from the walls

    bool operator==(const SpotProcessParams&) const = default;
};

struct EnvironmentParams {
    double arena_size = 2.0;     ///< m
    double view_size = 1.0;      ///< m
    double spot_radius = 0.175;  ///< m, radius of the linear-falloff disc
    SpotProcessParams spot;
    double command_gain = 0.01;  ///< m/ms per command spike
    double friction = 0.03;      ///< m/ms speed loss per ms
    double zone_radius = 0.15;   ///< m
    double hysteresis = 0.1;     ///< m
    double zone_reward_period = 6.0;  ///< ms

    double target_rate_hz = 30.0;
    double brightness_share = 1.0 / 3.0;  ///< share of all spikes on brightness channels
    int calibration_steps = 100000;
    std::uint64_t calibration_seed = 20220408;

    double pixel_pitch() const { return view_size / kViewPixels; }
    double cam_min() const { return view_size / 2; }
    double cam_max() const { return arena_size - view_size / 2; }

    void validate() const;
    bool operator==(const EnvironmentParams&) const = default;
};

struct EncoderCalibration {
    double rate_gain = 0.0;            ///< Hz per brightness unit
    double change_threshold_up = 0.0;  ///< brightness units
    double change_threshold_down = 0.0;
};

struct EncoderState {
    Frame prev_frame = Frame::Zero();
    Frame acc_up = Frame::Zero();
    Frame acc_down = Frame::Zero();
    bool primed = false;
};

struct EnvironmentState {
    Vec2 spot_pos{1.0, 1.0};
    Vec2 spot_vel{0.0, 0.0};
    Vec2 spot_target{1.0, 1.0};
    Vec2 cam_center{1.0, 1.0};
    Vec2 cam_vel{0.0, 0.0};
    EncoderState encoder;
};

struct RewardState {
    double stored_d = 0.0;
    Time last_zone_reward_t = kNever;
};

struct Feedback {
    bool reward = false;
    bool punish = false;
    RewardState state;
};

using Rng = std::mt19937_64;

// Spot, camera, encoder and feedback primitives. Each is a pure transition
// on its inputs apart from the random engine it is handed.

void step_spot(EnvironmentState& env, const EnvironmentParams& p, Time dt, Rng& rng);
void apply_commands(EnvironmentState& env, const GroupCounts& counts, const EnvironmentParams& p);
void step_camera(EnvironmentState& env, const EnvironmentParams& p, Time dt);
Frame render_frame(const EnvironmentState& env, const EnvironmentParams& p);

/// Converts a frame into the set of channels spiking this step (sorted).
std::vector<int> encode_dvs(const Frame& frame, EncoderState& enc, const EncoderCalibration& cal,
                            Time dt, Rng& rng);

Feedback generate_feedback(const RewardState& rs, double d, Time t, const EnvironmentParams& p);

inline double spot_distance(const EnvironmentState& env)
{
    return (env.spot_pos - env.cam_center).norm();
}

struct CalibrationReport {
    bool ok = false;
    std::string diagnostic;
    EncoderCalibration calibration;
    double expected_rate_hz = 0.0;  ///< model rate on the reference trajectory
};

/// Reference trajectory: the spot process from `seed` with the camera held
/// at the arena centre. Solves the brightness gain and change thresholds so
/// that the mean rate over all channels hits p.target_rate_hz.
CalibrationReport calibrate_encoder(const EnvironmentParams& p, std::uint64_t seed, int steps);
inline CalibrationReport calibrate_encoder(const EnvironmentParams& p)
{
    return calibrate_encoder(p, p.calibration_seed, p.calibration_steps);
}

/// Sampled mean spike rate (Hz, over all 1200 channels) with a fixed camera.
double measure_encoder_rate(const EnvironmentParams& p, const EncoderCalibration& cal,
                            std::uint64_t seed, int steps);

/// Closed-loop environment: owns state, random streams and feedback state.
class Environment {
public:
    Environment(const EnvironmentParams& p, const EncoderCalibration& cal, std::uint64_t seed);

    struct Observation {
        std::vector<int> spikes;
        bool reward = false;
        bool punish = false;
        double distance = 0.0;
    };

    /// Sensory spikes and feedback for the current state at time t.
    Observation observe(Time t);
    /// Applies the command counts and advances spot and camera by one step.
    void advance(const GroupCounts& counts);

    const EnvironmentState& state() const { return state_; }
    EnvironmentState& state() { return state_; }
    const EnvironmentParams& params() const { return params_; }
    const RewardState& reward_state() const { return reward_; }

private:
    EnvironmentParams params_;
    EncoderCalibration cal_;
    EnvironmentState state_;
    RewardState reward_;
    Rng spot_rng_;
    Rng encoder_rng_;
};

/// Initial spot/camera state: spot uniform in the arena, camera centred.
EnvironmentState initial_environment(const EnvironmentParams& p, Rng& spot_rng);

}  // namespace spikerl
