#include "spikerl/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace spikerl {

namespace {

std::string fmt(const char* pattern, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, pattern, v);
    return buf;
}

}  // namespace

EpisodeResult run_episode(const NetworkConfig& cfg, const EnvironmentParams& env_params,
                          const EncoderCalibration& cal, std::uint64_t env_seed,
                          const EpisodeOptions& opt)
{
    if (opt.train_ms < 0 || opt.eval_ms <= 0 || opt.window_ms <= 0)
        throw std::invalid_argument("episode lengths must be positive");

    Network net(cfg);
    net.set_event_logging(opt.log_events);
    Environment env(env_params, cal, env_seed);

    EpisodeResult res;
    res.env_seed = env_seed;
    res.net_seed = cfg.rng_seed;
    for (int n = 0; n < net.learning_count(); ++n)
        res.initial_resource_totals.push_back(net.total_resource(n));

    const std::int64_t total = opt.total_ms();
    if (opt.record_trace) {
        res.distance_trace.reserve(total);
        res.trace.reserve(total);
    }
    std::int64_t window_hits = 0;
    std::int64_t window_start = 0;
    std::int64_t eval_hits = 0;
    const double zone = env_params.zone_radius;

    for (std::int64_t step = 0; step < total; ++step) {
        const Time t = static_cast<Time>(step);
        const Environment::Observation obs = env.observe(t);
        const bool in_zone = obs.distance < zone;
        window_hits += in_zone;
        if (step >= opt.train_ms)
            eval_hits += in_zone;
        res.reward_spikes += obs.reward;
        res.punish_spikes += obs.punish;
        if (opt.record_trace) {
            res.distance_trace.push_back(obs.distance);
            const auto& s = env.state();
            res.trace.push_back({step, s.spot_pos, s.cam_center, obs.distance, obs.reward,
                                 obs.punish});
        }

        const GroupCounts counts = net.step(obs.spikes, obs.reward, obs.punish, t);
        for (int c : counts)
            res.command_spikes += c;
        env.advance(counts);

        if (step + 1 - window_start == opt.window_ms || step + 1 == total) {
            const auto len = step + 1 - window_start;
            res.window_curve.push_back(
                {window_start, static_cast<double>(window_hits) / static_cast<double>(len)});
            window_start = step + 1;
            window_hits = 0;
        }
    }

    res.criterion = static_cast<double>(eval_hits) / static_cast<double>(opt.eval_ms);
    res.final_weights = net.snapshot_weights();
    for (int n = 0; n < net.learning_count(); ++n)
        res.final_resource_totals.push_back(net.total_resource(n));
    if (opt.log_events) {
        res.plasticity_events = net.plasticity_events();
        res.gate_firings = net.gate_firings();
    }
    return res;
}

double compute_criterion(std::span<const double> distance_trace, std::size_t window_start,
                         std::size_t window_end, double zone)
{
    if (window_end <= window_start)
        throw std::invalid_argument("criterion window is empty");
    if (window_end > distance_trace.size())
        throw std::invalid_argument("criterion window exceeds the trace");
    std::int64_t hits = 0;
    for (std::size_t i = window_start; i < window_end; ++i)
        hits += distance_trace[i] < zone;
    return static_cast<double>(hits) / static_cast<double>(window_end - window_start);
}

std::string export_learning_curve(const EpisodeResult& result)
{
    std::string out = "window_start_sec,in_zone_fraction\n";
    for (const auto& w : result.window_curve)
        out += fmt("%.3f", w.start_ms / 1000.0) + "," + fmt("%.6f", w.in_zone_fraction) + "\n";
    return out;
}

std::string export_trace_csv(const EpisodeResult& result)
{
    std::string out = "t,spot_x,spot_y,cam_x,cam_y,d,reward,punish\n";
    for (const auto& r : result.trace) {
        out += std::to_string(r.t);
        for (double v : {r.spot.x(), r.spot.y(), r.cam.x(), r.cam.y(), r.d})
            out += "," + fmt("%.6f", v);
        out += r.reward ? ",1" : ",0";
        out += r.punish ? ",1\n" : ",0\n";
    }
    return out;
}

Pixmap export_weight_image(const WeightSnapshot& weights, int neurons_per_group,
                           double strong_threshold)
{
    if (neurons_per_group < 1 || weights.rows() != neurons_per_group * kGroups)
        throw std::invalid_argument("weight snapshot does not match the group layout");
    if (weights.cols() != kPixelCount * kChannelsPerPixel)
        throw std::invalid_argument("weight snapshot must have 1200 channels");

    constexpr int kTile = kViewPixels + 1;
    Pixmap img;
    img.width = neurons_per_group * kTile + 1;
    img.height = kGroups * kTile + 1;
    img.rgb.assign(static_cast<std::size_t>(img.width) * img.height * 3, 0);

    // NaN (absent) compares false, so it never counts as strong.
    for (int n = 0; n < weights.rows(); ++n) {
        const int ox = 1 + (n % neurons_per_group) * kTile;
        const int oy = 1 + (n / neurons_per_group) * kTile;
        for (int k = 0; k < kPixelCount; ++k) {
            const int x = ox + k % kViewPixels;
            const int y = oy + k / kViewPixels;
            const auto idx = 3 * (static_cast<std::size_t>(y) * img.width + x);
            for (int ch = 0; ch < kChannelsPerPixel; ++ch)
                if (weights(n, kChannelsPerPixel * k + ch) > strong_threshold)
                    img.rgb[idx + ch] = 255;
        }
    }
    return img;
}

std::string encode_ppm(const Pixmap& image)
{
    std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height)
                      + "\n255\n";
    out.append(image.rgb.begin(), image.rgb.end());
    return out;
}

std::string serialize_weights(const WeightSnapshot& weights, int neurons_per_group)
{
    std::string out = "spikerl-weights " + std::to_string(weights.rows()) + " "
                      + std::to_string(weights.cols()) + " " + std::to_string(neurons_per_group)
                      + "\n";
    for (int r = 0; r < weights.rows(); ++r) {
        for (int c = 0; c < weights.cols(); ++c) {
            if (c)
                out += ',';
            const double v = weights(r, c);
            out += std::isnan(v) ? std::string("-") : fmt("%.17g", v);
        }
        out += '\n';
    }
    return out;
}

WeightSnapshot parse_weights(const std::string& text, int& neurons_per_group)
{
    std::istringstream in(text);
    std::string magic;
    long rows = 0, cols = 0;
    if (!(in >> magic >> rows >> cols >> neurons_per_group) || magic != "spikerl-weights"
        || rows < 1 || cols < 1 || neurons_per_group < 1)
        throw std::runtime_error("weight snapshot: bad header");
    std::string line;
    std::getline(in, line);

    WeightSnapshot w(rows, cols);
    for (long r = 0; r < rows; ++r) {
        if (!std::getline(in, line))
            throw std::runtime_error("weight snapshot: missing row " + std::to_string(r + 1));
        std::istringstream row(line);
        std::string cell;
        long c = 0;
        while (std::getline(row, cell, ',')) {
            if (c >= cols)
                throw std::runtime_error("weight snapshot: too many columns in row "
                                         + std::to_string(r + 1));
            if (cell == "-") {
                w(r, c) = std::numeric_limits<double>::quiet_NaN();
            } else {
                std::size_t used = 0;
                try {
                    w(r, c) = std::stod(cell, &used);
                } catch (const std::exception&) {
                    used = 0;
                }
                if (used != cell.size() || cell.empty())
                    throw std::runtime_error("weight snapshot: bad value '" + cell + "' in row "
                                             + std::to_string(r + 1));
            }
            ++c;
        }
        if (c != cols)
            throw std::runtime_error("weight snapshot: row " + std::to_string(r + 1)
                                     + " has " + std::to_string(c) + " columns");
    }
    return w;
}

}  // namespace spikerl
