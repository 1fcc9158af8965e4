#include "spikerl/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <type_traits>
#include <variant>
#include <vector>

namespace spikerl {

namespace {

using Slot = std::variant<double*, int*, std::int64_t*, std::uint64_t*, bool*>;

struct Entry {
    const char* key;
    Slot slot;
};

std::vector<Entry> entries(RunConfig& c)
{
    NetworkConfig& n = c.network;
    EnvironmentParams& e = c.environment;
    return {
        // Tunable network parameters.
        {"neurons_per_group", &n.neurons_per_group},
        {"noise_rate_hz", &n.noise_rate_hz},
        {"w_max_afferent", &n.w_max_afferent},
        {"initial_resource", &n.initial_resource},
        {"input_connection_share", &n.input_connection_share},
        {"w_input_to_gateinp_inhib", &n.w_input_to_gateinp_inhib},
        {"learn_tau_v_ms", &n.learn_tau_v_ms},
        {"learn_equilibrium_ms", &n.learn_equilibrium_ms},
        {"learn_threshold_increment", &n.learn_threshold_increment},
        {"plasticity_window_ms", &n.plasticity_window_ms},
        {"gate_tau_v_ms", &n.gate_tau_v_ms},
        {"gate_equilibrium_ms", &n.gate_equilibrium_ms},
        {"gate_threshold_increment", &n.gate_threshold_increment},
        {"gateinp_tau_v_ms", &n.gateinp_tau_v_ms},
        {"activating_weight_ms", &n.activating_weight_ms},
        {"pulse_neg_ratio", &n.pulse_neg_ratio},
        // Structural network settings.
        {"pulse_pos", &n.pulse_pos},
        {"antagonist_inhib_weight", &n.antagonist_inhib_weight},
        {"gate_drive_weight", &n.gate_drive_weight},
        {"gateinp_drive_weight", &n.gateinp_drive_weight},
        {"noise_path", &n.noise_path},
        {"network_seed", &n.rng_seed},
        // Environment.
        {"spot_radius", &e.spot_radius},
        {"spot_mean_speed", &e.spot.mean_speed},
        {"spot_reversion", &e.spot.reversion},
        {"spot_noise", &e.spot.noise},
        {"spot_waypoint_radius", &e.spot.waypoint_radius},
        {"spot_waypoint_margin", &e.spot.waypoint_margin},
        {"command_gain", &e.command_gain},
        {"friction", &e.friction},
        {"zone_radius", &e.zone_radius},
        {"hysteresis", &e.hysteresis},
        {"zone_reward_period_ms", &e.zone_reward_period},
        {"target_rate_hz", &e.target_rate_hz},
        {"brightness_share", &e.brightness_share},
        {"calibration_steps", &e.calibration_steps},
        {"calibration_seed", &e.calibration_seed},
        {"env_seed", &c.env_seed},
        // Protocol.
        {"train_ms", &c.episode.train_ms},
        {"eval_ms", &c.episode.eval_ms},
        {"window_ms", &c.episode.window_ms},
        // Genetic search.
        {"ga_population", &c.ga.population_size},
        {"ga_generations", &c.ga.generations},
        {"ga_mutation_prob", &c.ga.mutation_prob},
        {"ga_elitism", &c.ga.elitism_fraction},
        {"ga_trials", &c.ga.trials_per_genome},
        {"ga_seed", &c.ga.rng_seed},
        {"ga_parallelism", &c.ga.parallelism},
        {"ga_eval_seed", &c.ga_eval_seed},
    };
}

std::string trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::string fmt_double(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename Int>
bool parse_int(const std::string& s, Int& out)
{
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_value(const std::string& s, const Slot& slot)
{
    if (s.empty())
        return false;
    if (auto* d = std::get_if<double*>(&slot)) {
        char* end = nullptr;
        const double v = std::strtod(s.c_str(), &end);
        if (end != s.c_str() + s.size() || !std::isfinite(v))
            return false;
        **d = v;
        return true;
    }
    if (auto* b = std::get_if<bool*>(&slot)) {
        if (s == "true" || s == "1")
            **b = true;
        else if (s == "false" || s == "0")
            **b = false;
        else
            return false;
        return true;
    }
    return std::visit(
        [&](auto* p) {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>)
                return parse_int(s, *p);
            else
                return false;
        },
        slot);
}

std::string format_value(const Slot& slot)
{
    return std::visit(
        [](auto* p) -> std::string {
            using T = std::remove_pointer_t<decltype(p)>;
            if constexpr (std::is_same_v<T, bool>)
                return *p ? "true" : "false";
            else if constexpr (std::is_same_v<T, double>)
                return fmt_double(*p);
            else
                return std::to_string(*p);
        },
        slot);
}

double as_double(const Slot& slot)
{
    return std::visit([](auto* p) { return static_cast<double>(*p); }, slot);
}

// Config files may go up to all-to-all wiring, outside the search range.
double upper_bound(const GeneSpec& g)
{
    return std::string_view(g.key) == "input_connection_share" ? 1.0 : g.hi;
}

}  // namespace

void RunConfig::validate() const
{
    network.validate();
    environment.validate();
    ga.validate();
    if (episode.train_ms < 0 || episode.eval_ms <= 0 || episode.window_ms <= 0)
        throw std::invalid_argument("invalid protocol: train_ms >= 0, eval_ms > 0, window_ms > 0");
}

RunConfig parse_config(std::string_view text)
{
    RunConfig cfg;
    const auto table = entries(cfg);
    std::set<std::string> seen;

    int lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view raw = text.substr(pos, nl == std::string_view::npos ? text.npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const auto hash = raw.find('#');
        const std::string line = trim(raw.substr(0, hash));
        if (line.empty())
            continue;

        const std::string where = "line " + std::to_string(lineno) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where + "expected 'key = value'");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        if (key.empty())
            throw ConfigError(where + "missing key");

        const Entry* entry = nullptr;
        for (const auto& e : table)
            if (key == e.key)
                entry = &e;
        if (!entry)
            throw ConfigError(where + "unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError(where + "duplicate key '" + key + "'");
        if (!parse_value(value, entry->slot))
            throw ConfigError(where + "bad value '" + value + "' for " + key);

        if (const int gi = gene_index(key); gi >= 0) {
            const GeneSpec& g = gene_table()[gi];
            const double v = as_double(entry->slot);
            if (!(v >= g.lo && v <= upper_bound(g)))
                throw ConfigError(where + key + " = " + value + " is out of range ["
                                  + fmt_double(g.lo) + ", " + fmt_double(upper_bound(g)) + "]");
        }
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return cfg;
}

std::string serialize_config(const RunConfig& cfg)
{
    RunConfig copy = cfg;
    std::string out;
    for (const auto& e : entries(copy))
        out += std::string(e.key) + " = " + format_value(e.slot) + "\n";
    return out;
}

}  // namespace spikerl
