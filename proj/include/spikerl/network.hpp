#pragma once

// The reinforcement-learning SNN: learning-neuron groups fed by plastic
// afferents, reward/punishment gates, and the optional noise path.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "spikerl/snn_core.hpp"

namespace spikerl {

inline constexpr int kGroups = 4;
inline constexpr int kInputChannels = 1200;

/// Movement directions, in the order used for groups and image rows.
enum class Direction : int { Up = 0, Right = 1, Down = 2, Left = 3 };

inline constexpr int antagonist_of(int group) noexcept { return (group + 2) % kGroups; }

using GroupCounts = std::array<int, kGroups>;

struct NetworkConfig {
    // Optimized parameters. Defaults are the best values found by search.
    int neurons_per_group = 10;
    double noise_rate_hz = 0.001;
    double w_max_afferent = 0.638;
    double initial_resource = 2.66;
    double input_connection_share = 0.77;
    double w_input_to_gateinp_inhib = 0.13;
    double learn_tau_v_ms = 2.0;
    double learn_equilibrium_ms = 17.0;
    double learn_threshold_increment = 10.0;
    double plasticity_window_ms = 18.0;
    double gate_tau_v_ms = 8.0;
    double gate_equilibrium_ms = 41.0;
    double gate_threshold_increment = 8.0;
    double gateinp_tau_v_ms = 14.0;
    double activating_weight_ms = 4.0;
    double pulse_neg_ratio = 26.6;

    // Structural constants.
    int n_groups = kGroups;
    int n_input_channels = kInputChannels;
    double pulse_pos = 0.12;
    double antagonist_inhib_weight = 1.5;
    double gate_drive_weight = 1000.0;
    double gateinp_drive_weight = 1000.0;
    bool noise_path = true;
    std::uint64_t rng_seed = 1;

    int afferents_per_neuron() const;
    int learning_neurons() const { return neurons_per_group * n_groups; }

    NeuronParams learning_params() const;
    NeuronParams gate_params() const;
    NeuronParams gateinp_params() const;
    PlasticityParams plasticity_params() const;

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;

    bool operator==(const NetworkConfig&) const = default;
};

/// One gate firing that produced a plasticity pulse.
struct PlasticityEvent {
    Time t;
    int group;
    double pulse;
};

/// Rows are learning neurons (group-major), columns input channels.
/// Absent connections hold NaN.
using WeightSnapshot = Eigen::MatrixXd;

class Network {
public:
    explicit Network(const NetworkConfig& cfg);

    /// One simulation step. input_spikes holds channel indices firing at t.
    /// Returns the number of learning-neuron firings per group.
    GroupCounts step(std::span<const int> input_spikes, bool reward, bool punish, Time t);

    WeightSnapshot snapshot_weights() const;

    const NetworkConfig& config() const { return cfg_; }
    int neuron_count() const;
    int learning_count() const { return static_cast<int>(learning_.size()); }
    int group_of(int neuron) const { return neuron / cfg_.neurons_per_group; }

    std::span<const int> afferent_channels(int neuron) const { return channels_[neuron]; }
    std::span<const SynapseRecord> afferents(int neuron) const { return synapses_[neuron]; }
    std::span<SynapseRecord> afferents(int neuron) { return synapses_[neuron]; }
    double total_resource(int neuron) const;

    const NeuronState& learning_state(int neuron) const { return learning_[neuron]; }
    const NeuronState& reward_gate(int group) const { return gate_rew_[group]; }
    const NeuronState& punish_gate(int group) const { return gate_pun_[group]; }

    /// Plasticity events are recorded only when logging is enabled.
    void set_event_logging(bool on) { log_events_ = on; }
    const std::vector<PlasticityEvent>& plasticity_events() const { return events_; }
    /// Steps at which any reward or punishment gate fired, per gate.
    const std::vector<std::vector<Time>>& gate_firings() const { return gate_firings_; }

private:
    void deliver_pulse(int group, double pulse, Time t);

    NetworkConfig cfg_;
    NeuronParams learn_p_;
    NeuronParams gate_p_;
    NeuronParams gateinp_p_;
    PlasticityParams plast_p_;

    std::vector<NeuronState> learning_;
    std::vector<std::vector<int>> channels_;
    std::vector<std::vector<SynapseRecord>> synapses_;

    // Channel -> (neuron, synapse slot), flattened.
    std::vector<int> fanout_offset_;
    std::vector<std::pair<int, int>> fanout_;

    std::array<NeuronState, kGroups> gate_rew_;
    std::array<NeuronState, kGroups> gate_pun_;
    std::vector<NeuronState> gateinp_;

    GroupCounts prev_counts_{};
    std::vector<char> gateinp_fired_prev_;
    std::vector<double> excit_;
    std::vector<int> input_hits_;

    std::mt19937_64 noise_rng_;
    std::vector<Time> next_noise_;

    bool log_events_ = false;
    std::vector<PlasticityEvent> events_;
    std::vector<std::vector<Time>> gate_firings_;
};

}  // namespace spikerl
