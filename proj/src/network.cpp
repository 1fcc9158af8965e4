#include "spikerl/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spikerl {

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw std::invalid_argument("invalid network config: " + what);
}

// Salt separating the noise stream from the wiring stream of the same seed.
constexpr std::uint64_t kNoiseSalt = 0x9e3779b97f4a7c15ULL;

}  // namespace

int NetworkConfig::afferents_per_neuron() const
{
    return static_cast<int>(std::lround(input_connection_share * n_input_channels));
}

NeuronParams NetworkConfig::learning_params() const
{
    auto p = NeuronParams::from_equilibrium(learn_tau_v_ms, learn_threshold_increment,
                                            learn_equilibrium_ms);
    p.is_plastic = true;
    p.tau_p = plasticity_window_ms;
    return p;
}

NeuronParams NetworkConfig::gate_params() const
{
    auto p = NeuronParams::from_equilibrium(gate_tau_v_ms, gate_threshold_increment,
                                            gate_equilibrium_ms);
    p.has_sleep_mode = true;
    return p;
}

NeuronParams NetworkConfig::gateinp_params() const
{
    // GATEINP neurons carry no adaptive threshold of their own.
    NeuronParams p;
    p.tau_v = gateinp_tau_v_ms;
    p.a = 1.0;
    p.t_hat = 0.0;
    return p;
}

PlasticityParams NetworkConfig::plasticity_params() const
{
    return PlasticityParams{0.0, w_max_afferent, true};
}

void NetworkConfig::validate() const
{
    require(neurons_per_group >= 1, "neurons_per_group must be >= 1");
    require(n_groups == kGroups, "n_groups must be 4");
    require(n_input_channels == kInputChannels, "n_input_channels must be 1200");
    require(input_connection_share > 0.0 && input_connection_share <= 1.0,
            "input_connection_share must be in (0, 1]");
    require(input_connection_share * n_input_channels >= 1.0,
            "input_connection_share selects no input channels");
    require(afferents_per_neuron() >= 1, "input_connection_share selects no input channels");
    require(w_max_afferent > 0.0, "w_max_afferent must be positive");
    require(std::isfinite(initial_resource), "initial_resource must be finite");
    require(noise_rate_hz >= 0.0, "noise_rate_hz must be non-negative");
    require(w_input_to_gateinp_inhib >= 0.0, "w_input_to_gateinp_inhib must be non-negative");
    require(activating_weight_ms > 0.0, "activating_weight_ms must be positive");
    require(pulse_pos >= 0.0, "pulse_pos must be non-negative");
    require(pulse_neg_ratio >= 0.0, "pulse_neg_ratio must be non-negative");
    require(antagonist_inhib_weight >= 0.0, "antagonist_inhib_weight must be non-negative");
    require(gate_drive_weight > 0.0, "gate_drive_weight must be positive");
    require(gateinp_drive_weight > 0.0, "gateinp_drive_weight must be positive");
    try {
        learning_params().validate();
        gate_params().validate();
        gateinp_params().validate();
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(std::string("invalid network config: ") + e.what());
    }
}

Network::Network(const NetworkConfig& cfg)
    : cfg_(cfg)
{
    cfg_.validate();
    learn_p_ = cfg_.learning_params();
    gate_p_ = cfg_.gate_params();
    gateinp_p_ = cfg_.gateinp_params();
    plast_p_ = cfg_.plasticity_params();

    const int n_learn = cfg_.learning_neurons();
    const int n_aff = cfg_.afferents_per_neuron();

    learning_.assign(n_learn, NeuronState::initial(learn_p_));
    channels_.resize(n_learn);
    synapses_.resize(n_learn);

    std::mt19937_64 wiring_rng(cfg_.rng_seed);
    std::vector<int> pool(cfg_.n_input_channels);
    for (int n = 0; n < n_learn; ++n) {
        std::iota(pool.begin(), pool.end(), 0);
        // Partial Fisher-Yates: the first n_aff slots form the subset.
        for (int i = 0; i < n_aff; ++i) {
            std::uniform_int_distribution<int> pick(i, cfg_.n_input_channels - 1);
            std::swap(pool[i], pool[pick(wiring_rng)]);
        }
        channels_[n].assign(pool.begin(), pool.begin() + n_aff);
        std::sort(channels_[n].begin(), channels_[n].end());
        synapses_[n].assign(n_aff, SynapseRecord{cfg_.initial_resource, kNever});
    }

    std::vector<int> fan_count(cfg_.n_input_channels, 0);
    for (const auto& ch : channels_)
        for (int c : ch)
            ++fan_count[c];
    fanout_offset_.assign(cfg_.n_input_channels + 1, 0);
    for (int c = 0; c < cfg_.n_input_channels; ++c)
        fanout_offset_[c + 1] = fanout_offset_[c] + fan_count[c];
    fanout_.resize(fanout_offset_.back());
    std::vector<int> fill(fanout_offset_.begin(), fanout_offset_.end() - 1);
    for (int n = 0; n < n_learn; ++n)
        for (int k = 0; k < n_aff; ++k)
            fanout_[fill[channels_[n][k]]++] = {n, k};

    gate_rew_.fill(NeuronState::initial(gate_p_));
    gate_pun_.fill(NeuronState::initial(gate_p_));

    gateinp_fired_prev_.assign(n_learn, 0);
    excit_.assign(n_learn, 0.0);
    input_hits_.assign(n_learn, 0);
    if (cfg_.noise_path) {
        gateinp_.assign(n_learn, NeuronState::initial(gateinp_p_));
        noise_rng_.seed(cfg_.rng_seed ^ kNoiseSalt);
        next_noise_.assign(n_learn, kForever);
        if (cfg_.noise_rate_hz > 0.0) {
            std::exponential_distribution<double> gap(cfg_.noise_rate_hz / 1000.0);
            for (auto& next : next_noise_)
                next = gap(noise_rng_);
        }
    }
    gate_firings_.resize(2 * kGroups);
}

int Network::neuron_count() const
{
    return learning_count() + 2 * kGroups + static_cast<int>(gateinp_.size());
}

double Network::total_resource(int neuron) const
{
    // Neumaier summation; resources reach 1e4 in magnitude over long runs.
    double sum = 0.0, carry = 0.0;
    for (const auto& syn : synapses_[neuron]) {
        const double w = syn.resource;
        const double s = sum + w;
        carry += std::abs(sum) >= std::abs(w) ? (sum - s) + w : (w - s) + sum;
        sum = s;
    }
    return sum + carry;
}

GroupCounts Network::step(std::span<const int> input_spikes, bool reward, bool punish, Time t)
{
    const int n_learn = learning_count();
    const int npg = cfg_.neurons_per_group;

    // Activating synapses: last step's group firings wake the gates.
    for (int g = 0; g < kGroups; ++g) {
        if (prev_counts_[g] > 0) {
            gate_rew_[g] = apply_activation(gate_rew_[g], gate_p_, cfg_.activating_weight_ms, t);
            gate_pun_[g] = apply_activation(gate_pun_[g], gate_p_, cfg_.activating_weight_ms, t);
        }
    }

    std::fill(excit_.begin(), excit_.end(), 0.0);
    std::fill(input_hits_.begin(), input_hits_.end(), 0);
    for (int c : input_spikes) {
        for (int i = fanout_offset_[c]; i < fanout_offset_[c + 1]; ++i) {
            const auto [n, k] = fanout_[i];
            SynapseRecord& syn = synapses_[n][k];
            excit_[n] += resource_to_weight(syn.resource, plast_p_);
            syn.last_presyn_t = t;
            ++input_hits_[n];
        }
    }

    GroupCounts counts{};
    for (int n = 0; n < n_learn; ++n) {
        const int g = n / npg;
        double excit = excit_[n];
        if (gateinp_fired_prev_[n])
            excit += cfg_.gateinp_drive_weight;
        const double inhib = cfg_.antagonist_inhib_weight * prev_counts_[antagonist_of(g)];
        const StepResult r = step_neuron(learning_[n], learn_p_, excit, inhib, t);
        learning_[n] = r.state;
        if (r.fired)
            ++counts[g];
    }

    if (!gateinp_.empty()) {
        for (int n = 0; n < n_learn; ++n) {
            double drive = 0.0;
            if (next_noise_[n] <= t) {
                drive = cfg_.gateinp_drive_weight;
                std::exponential_distribution<double> gap(cfg_.noise_rate_hz / 1000.0);
                while (next_noise_[n] <= t)
                    next_noise_[n] += gap(noise_rng_);
            }
            const double inhib = cfg_.w_input_to_gateinp_inhib * input_hits_[n];
            const StepResult r = step_neuron(gateinp_[n], gateinp_p_, drive, inhib, t);
            gateinp_[n] = r.state;
            gateinp_fired_prev_[n] = r.fired ? 1 : 0;
        }
    }

    std::array<bool, kGroups> rew_fired{};
    std::array<bool, kGroups> pun_fired{};
    for (int g = 0; g < kGroups; ++g) {
        StepResult r = step_neuron(gate_rew_[g], gate_p_, reward ? cfg_.gate_drive_weight : 0.0,
                                   0.0, t);
        gate_rew_[g] = r.state;
        rew_fired[g] = r.fired;
        r = step_neuron(gate_pun_[g], gate_p_, punish ? cfg_.gate_drive_weight : 0.0, 0.0, t);
        gate_pun_[g] = r.state;
        pun_fired[g] = r.fired;
    }

    for (int g = 0; g < kGroups; ++g) {
        if (rew_fired[g]) {
            if (log_events_)
                gate_firings_[g].push_back(t);
            deliver_pulse(g, cfg_.pulse_pos, t);
        }
        if (pun_fired[g]) {
            if (log_events_)
                gate_firings_[kGroups + g].push_back(t);
            deliver_pulse(g, -cfg_.pulse_pos * cfg_.pulse_neg_ratio, t);
        }
    }

    prev_counts_ = counts;
    return counts;
}

void Network::deliver_pulse(int group, double pulse, Time t)
{
    const int npg = cfg_.neurons_per_group;
    for (int n = group * npg; n < (group + 1) * npg; ++n)
        apply_plasticity_pulse(synapses_[n], pulse, t, learn_p_, plast_p_);
    if (log_events_)
        events_.push_back({t, group, pulse});
}

WeightSnapshot Network::snapshot_weights() const
{
    WeightSnapshot w = WeightSnapshot::Constant(learning_count(), cfg_.n_input_channels,
                                                std::numeric_limits<double>::quiet_NaN());
    for (int n = 0; n < learning_count(); ++n)
        for (std::size_t k = 0; k < channels_[n].size(); ++k)
            w(n, channels_[n][k]) = synapses_[n][k].resource;
    return w;
}

}  // namespace spikerl
