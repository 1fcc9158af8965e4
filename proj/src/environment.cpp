#include "spikerl/environment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spikerl {

namespace {

constexpr std::uint64_t kEncoderSalt = 0xd1b54a32d192ed03ULL;

double uniform01(Rng& rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

Vec2 random_point(const EnvironmentParams& p, Rng& rng)
{
    const double x = p.arena_size * uniform01(rng);
    const double y = p.arena_size * uniform01(rng);
    return {x, y};
}

Vec2 random_waypoint(const EnvironmentParams& p, Rng& rng)
{
    const double m = p.spot.waypoint_margin;
    const double x = m + (p.arena_size - 2 * m) * uniform01(rng);
    const double y = m + (p.arena_size - 2 * m) * uniform01(rng);
    return {x, y};
}

void reflect(double& pos, double& vel, double hi)
{
    if (pos < 0.0) {
        pos = -pos;
        vel = -vel;
    } else if (pos > hi) {
        pos = 2.0 * hi - pos;
        vel = -vel;
    }
    pos = std::clamp(pos, 0.0, hi);
}

}  // namespace

void EnvironmentParams::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(std::string("invalid environment params: ") + what);
    };
    require(arena_size > view_size && view_size > 0.0, "view must fit inside the arena");
    require(spot_radius > 0.0, "spot_radius must be positive");
    require(spot.mean_speed > 0.0, "spot mean speed must be positive");
    require(spot.reversion > 0.0 && spot.reversion <= 1.0, "spot reversion must be in (0, 1]");
    require(spot.noise >= 0.0, "spot noise must be non-negative");
    require(spot.waypoint_radius > 0.0, "waypoint radius must be positive");
    require(spot.waypoint_margin >= 0.0
                && spot.waypoint_margin <= arena_size / 2 - spot.waypoint_radius,
            "waypoint margin leaves no room for waypoints");
    require(command_gain >= 0.0 && friction >= 0.0, "camera dynamics must be non-negative");
    require(zone_radius > 0.0 && hysteresis > 0.0 && zone_reward_period > 0.0,
            "feedback parameters must be positive");
    require(target_rate_hz > 0.0, "target rate must be positive");
    require(brightness_share > 0.0 && brightness_share < 1.0, "brightness_share must be in (0, 1)");
    require(calibration_steps >= 1000, "calibration needs at least 1000 steps");
}

void step_spot(EnvironmentState& env, const EnvironmentParams& p, Time dt, Rng& rng)
{
    const SpotProcessParams& sp = p.spot;
    Vec2 to_target = env.spot_target - env.spot_pos;
    while (to_target.norm() < sp.waypoint_radius) {
        env.spot_target = random_waypoint(p, rng);
        to_target = env.spot_target - env.spot_pos;
    }
    const Vec2 heading = to_target.normalized();

    Vec2 kick = Vec2::Zero();
    if (sp.noise > 0.0) {
        std::normal_distribution<double> normal(0.0, 1.0);
        const double x = normal(rng);
        const double y = normal(rng);
        kick = sp.noise * std::sqrt(dt) * Vec2{x, y};
    }
    env.spot_vel += sp.reversion * (sp.mean_speed * heading - env.spot_vel) * dt + kick;
    env.spot_pos += env.spot_vel * dt;
    reflect(env.spot_pos.x(), env.spot_vel.x(), p.arena_size);
    reflect(env.spot_pos.y(), env.spot_vel.y(), p.arena_size);
}

void apply_commands(EnvironmentState& env, const GroupCounts& counts, const EnvironmentParams& p)
{
    const auto up = counts[static_cast<int>(Direction::Up)];
    const auto right = counts[static_cast<int>(Direction::Right)];
    const auto down = counts[static_cast<int>(Direction::Down)];
    const auto left = counts[static_cast<int>(Direction::Left)];
    env.cam_vel += p.command_gain * Vec2{double(right - left), double(up - down)};
}

void step_camera(EnvironmentState& env, const EnvironmentParams& p, Time dt)
{
    // The camera moves with the velocity the commands produced, then slows down.
    env.cam_center += env.cam_vel * dt;
    const double speed = env.cam_vel.norm();
    const double loss = p.friction * dt;
    if (speed <= loss)
        env.cam_vel.setZero();
    else
        env.cam_vel *= (speed - loss) / speed;

    for (int i = 0; i < 2; ++i) {
        if (env.cam_center[i] < p.cam_min()) {
            env.cam_center[i] = p.cam_min();
            env.cam_vel[i] = 0.0;
        } else if (env.cam_center[i] > p.cam_max()) {
            env.cam_center[i] = p.cam_max();
            env.cam_vel[i] = 0.0;
        }
    }
}

Frame render_frame(const EnvironmentState& env, const EnvironmentParams& p)
{
    Frame frame = Frame::Zero();
    const double pitch = p.pixel_pitch();
    const double r2 = p.spot_radius * p.spot_radius;
    const double left = env.cam_center.x() - p.view_size / 2;
    const double top = env.cam_center.y() + p.view_size / 2;

    std::array<double, kViewPixels> dx2{};
    std::array<double, kViewPixels> dy2{};
    for (int i = 0; i < kViewPixels; ++i) {
        const double dx = left + (i + 0.5) * pitch - env.spot_pos.x();
        const double dy = top - (i + 0.5) * pitch - env.spot_pos.y();
        dx2[i] = dx * dx;
        dy2[i] = dy * dy;
    }
    for (int r = 0; r < kViewPixels; ++r) {
        if (dy2[r] >= r2)
            continue;
        for (int c = 0; c < kViewPixels; ++c) {
            const double q = dx2[c] + dy2[r];
            if (q < r2)
                frame(r, c) = 1.0 - std::sqrt(q) / p.spot_radius;
        }
    }
    return frame;
}

std::vector<int> encode_dvs(const Frame& frame, EncoderState& enc, const EncoderCalibration& cal,
                            Time dt, Rng& rng)
{
    std::vector<int> spikes;
    const double rate_scale = cal.rate_gain * dt / 1000.0;
    for (int k = 0; k < kPixelCount; ++k) {
        const double b = frame(k / kViewPixels, k % kViewPixels);
        if (b > 0.0 && rate_scale > 0.0) {
            const double prob = -std::expm1(-rate_scale * b);
            if (uniform01(rng) < prob)
                spikes.push_back(channel_index(k, ChannelKind::Brightness));
        }

        double& up = enc.acc_up(k / kViewPixels, k % kViewPixels);
        double& down = enc.acc_down(k / kViewPixels, k % kViewPixels);
        if (enc.primed) {
            const double delta = b - enc.prev_frame(k / kViewPixels, k % kViewPixels);
            if (delta > 0.0)
                up += delta;
            else if (delta < 0.0)
                down -= delta;
        }
        if (cal.change_threshold_up > 0.0 && up >= cal.change_threshold_up) {
            up -= cal.change_threshold_up;
            spikes.push_back(channel_index(k, ChannelKind::Increase));
        }
        if (cal.change_threshold_down > 0.0 && down >= cal.change_threshold_down) {
            down -= cal.change_threshold_down;
            spikes.push_back(channel_index(k, ChannelKind::Decrease));
        }
    }
    enc.prev_frame = frame;
    enc.primed = true;
    return spikes;
}

Feedback generate_feedback(const RewardState& rs, double d, Time t, const EnvironmentParams& p)
{
    Feedback fb{false, false, rs};
    if (d >= rs.stored_d + p.hysteresis) {
        fb.punish = true;
        fb.state.stored_d = d;
    } else if (d <= rs.stored_d - p.hysteresis) {
        fb.reward = true;
        fb.state.stored_d = d;
    }
    if (d < p.zone_radius && t - rs.last_zone_reward_t >= p.zone_reward_period) {
        fb.reward = true;
        fb.state.last_zone_reward_t = t;
    }
    return fb;
}

EnvironmentState initial_environment(const EnvironmentParams& p, Rng& spot_rng)
{
    EnvironmentState env;
    env.spot_pos = random_point(p, spot_rng);
    env.spot_target = random_waypoint(p, spot_rng);
    env.spot_vel.setZero();
    env.cam_center = Vec2::Constant(p.arena_size / 2);
    env.cam_vel.setZero();
    return env;
}

namespace {

std::vector<Vec2> reference_trajectory(const EnvironmentParams& p, std::uint64_t seed, int steps)
{
    Rng rng(seed);
    EnvironmentState env = initial_environment(p, rng);
    std::vector<Vec2> out;
    out.reserve(steps);
    for (int i = 0; i < steps; ++i) {
        out.push_back(env.spot_pos);
        step_spot(env, p, 1.0, rng);
    }
    return out;
}

// Change-channel spikes produced on a fixed trajectory for a given threshold.
double count_change_spikes(const EnvironmentParams& p, const std::vector<Vec2>& traj,
                           double threshold)
{
    EnvironmentState env;
    env.cam_center = Vec2::Constant(p.arena_size / 2);
    Frame prev = Frame::Zero();
    Frame up = Frame::Zero();
    Frame down = Frame::Zero();
    double count = 0.0;
    bool primed = false;
    for (const Vec2& pos : traj) {
        env.spot_pos = pos;
        const Frame frame = render_frame(env, p);
        if (primed) {
            const Frame delta = frame - prev;
            up += delta.max(0.0);
            down += (-delta).max(0.0);
        }
        for (int k = 0; k < kPixelCount; ++k) {
            double& u = up(k / kViewPixels, k % kViewPixels);
            double& d = down(k / kViewPixels, k % kViewPixels);
            if (u >= threshold) {
                u -= threshold;
                count += 1.0;
            }
            if (d >= threshold) {
                d -= threshold;
                count += 1.0;
            }
        }
        prev = frame;
        primed = true;
    }
    return count;
}

}  // namespace

CalibrationReport calibrate_encoder(const EnvironmentParams& p, std::uint64_t seed, int steps)
{
    p.validate();
    CalibrationReport report;
    if (steps < 1000) {
        report.diagnostic = "reference trajectory too short";
        return report;
    }
    const std::vector<Vec2> traj = reference_trajectory(p, seed, steps);

    const double total_target = p.target_rate_hz * kPixelCount * kChannelsPerPixel * steps / 1000.0;
    const double bright_target = p.brightness_share * total_target;
    const double change_target = total_target - bright_target;

    // Brightness channels: the expected count is a sum of 1 - exp(-g b dt)
    // over lit pixel-steps, summarised by a fine histogram of b.
    constexpr int kBins = 4096;
    std::vector<double> bin_count(kBins, 0.0);
    std::vector<double> bin_sum(kBins, 0.0);
    double total_abs_change = 0.0;
    {
        EnvironmentState env;
        env.cam_center = Vec2::Constant(p.arena_size / 2);
        Frame prev = Frame::Zero();
        bool primed = false;
        for (const Vec2& pos : traj) {
            env.spot_pos = pos;
            const Frame frame = render_frame(env, p);
            for (int k = 0; k < kPixelCount; ++k) {
                const double b = frame(k / kViewPixels, k % kViewPixels);
                if (b > 0.0) {
                    const int bin = std::min(kBins - 1, static_cast<int>(b * kBins));
                    bin_count[bin] += 1.0;
                    bin_sum[bin] += b;
                }
            }
            if (primed)
                total_abs_change += (frame - prev).abs().sum();
            prev = frame;
            primed = true;
        }
    }
    auto expected_bright = [&](double gain) {
        double n = 0.0;
        for (int i = 0; i < kBins; ++i)
            if (bin_count[i] > 0.0)
                n += bin_count[i] * -std::expm1(-gain / 1000.0 * bin_sum[i] / bin_count[i]);
        return n;
    };

    double lit_steps = 0.0;
    for (double c : bin_count)
        lit_steps += c;
    if (bright_target >= 0.999 * lit_steps) {
        report.diagnostic = "brightness channels cannot reach the target rate: the spot is lit on "
                            + std::to_string(std::llround(lit_steps)) + " pixel-steps, "
                            + std::to_string(std::llround(bright_target)) + " spikes needed";
        return report;
    }
    double lo = 1e-6, hi = 1e9;
    for (int it = 0; it < 200 && hi / lo > 1.0 + 1e-12; ++it) {
        const double mid = std::sqrt(lo * hi);
        (expected_bright(mid) < bright_target ? lo : hi) = mid;
    }
    report.calibration.rate_gain = std::sqrt(lo * hi);

    if (total_abs_change <= 0.0) {
        report.diagnostic = "reference trajectory produces no brightness changes";
        return report;
    }
    // Without the one-spike-per-step cap the count is total_abs_change / threshold.
    const double guess = total_abs_change / change_target;
    double t_lo = guess / 64.0, t_hi = guess * 4.0;
    if (count_change_spikes(p, traj, t_lo) < change_target) {
        report.diagnostic = "change channels cannot reach the target rate";
        return report;
    }
    for (int it = 0; it < 18; ++it) {
        const double mid = std::sqrt(t_lo * t_hi);
        (count_change_spikes(p, traj, mid) > change_target ? t_lo : t_hi) = mid;
    }
    const double threshold = std::sqrt(t_lo * t_hi);
    report.calibration.change_threshold_up = threshold;
    report.calibration.change_threshold_down = threshold;

    const double total = expected_bright(report.calibration.rate_gain)
                         + count_change_spikes(p, traj, threshold);
    report.expected_rate_hz = total / (kPixelCount * kChannelsPerPixel) / (steps / 1000.0);
    report.ok = true;
    return report;
}

double measure_encoder_rate(const EnvironmentParams& p, const EncoderCalibration& cal,
                            std::uint64_t seed, int steps)
{
    Rng spot_rng(seed);
    Rng enc_rng(seed ^ kEncoderSalt);
    EnvironmentState env = initial_environment(p, spot_rng);
    double spikes = 0.0;
    for (int i = 0; i < steps; ++i) {
        const Frame frame = render_frame(env, p);
        spikes += static_cast<double>(encode_dvs(frame, env.encoder, cal, 1.0, enc_rng).size());
        step_spot(env, p, 1.0, spot_rng);
    }
    return spikes / (kPixelCount * kChannelsPerPixel) / (steps / 1000.0);
}

Environment::Environment(const EnvironmentParams& p, const EncoderCalibration& cal,
                         std::uint64_t seed)
    : params_(p), cal_(cal), spot_rng_(seed), encoder_rng_(seed ^ kEncoderSalt)
{
    params_.validate();
    state_ = initial_environment(params_, spot_rng_);
    reward_.stored_d = spot_distance(state_);
}

Environment::Observation Environment::observe(Time t)
{
    Observation obs;
    const Frame frame = render_frame(state_, params_);
    obs.spikes = encode_dvs(frame, state_.encoder, cal_, 1.0, encoder_rng_);
    obs.distance = spot_distance(state_);
    const Feedback fb = generate_feedback(reward_, obs.distance, t, params_);
    reward_ = fb.state;
    obs.reward = fb.reward;
    obs.punish = fb.punish;
    return obs;
}

void Environment::advance(const GroupCounts& counts)
{
    apply_commands(state_, counts, params_);
    step_camera(state_, params_, 1.0);
    step_spot(state_, params_, 1.0, spot_rng_);
}

}  // namespace spikerl
