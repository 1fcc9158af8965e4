#pragma once

// Discrete-time generalized LIFAT neuron and resource-based plasticity.
//
// Time is measured in milliseconds. Potentials are rescaled so that the
// resting membrane potential is 0 and the base threshold is 1.

#include <cstddef>
#include <limits>
#include <span>

namespace spikerl {

using Time = double;

/// Marks a synapse that has never seen a presynaptic spike.
inline constexpr Time kNever = -std::numeric_limits<Time>::infinity();
inline constexpr Time kForever = std::numeric_limits<Time>::infinity();

struct NeuronParams {
    double tau_v = 1.0;   ///< membrane decay time, ms
    double a = 1.0;       ///< threshold relaxation speed, potential per ms
    double t_hat = 0.0;   ///< threshold increment on firing
    bool has_sleep_mode = false;
    bool is_plastic = false;
    double tau_p = 0.0;   ///< plasticity window, ms (plastic neurons only)

    /// Builds parameters from the threshold increment and the equilibrium
    /// interval between consecutive spikes: a = t_hat / interval.
    static NeuronParams from_equilibrium(double tau_v, double t_hat, double equilibrium_ms);

    /// Throws std::invalid_argument when an invariant is broken.
    void validate() const;
};

struct NeuronState {
    double u = 0.0;
    double u_thr = 1.0;
    Time active_until = kForever;

    /// Initial state. Sleep-capable neurons start asleep.
    static NeuronState initial(const NeuronParams& p)
    {
        return NeuronState{0.0, 1.0, p.has_sleep_mode ? Time{0} : kForever};
    }
};

struct StepResult {
    NeuronState state;
    bool fired = false;
};

struct SynapseRecord {
    double resource = 0.0;  ///< W, unbounded
    Time last_presyn_t = kNever;
};

struct PlasticityParams {
    double w_min = 0.0;
    double w_max = 1.0;
    bool conserve_total_resource = true;

    void validate() const;
};

/// Saturating map from synaptic resource W to weight w in [w_min, w_max).
inline double resource_to_weight(double resource, const PlasticityParams& p) noexcept
{
    const double span = p.w_max - p.w_min;
    const double pos = resource > 0.0 ? resource : 0.0;
    return p.w_min + span * pos / (span + pos);
}

bool is_asleep(const NeuronState& s, const NeuronParams& p, Time t) noexcept;

/// Advances one neuron by dt. Order: decay, threshold relaxation, input,
/// fire test, reset. A sleeping neuron ignores its input and cannot fire.
/// When threshold relaxation alone brings u_thr below u, the spike is placed
/// at the crossing inside the step and the step's input is added after the
/// reset.
StepResult step_neuron(const NeuronState& s, const NeuronParams& p, double excit_sum,
                       double inhib_sum, Time t, Time dt = 1.0) noexcept;

/// Keeps a sleep-capable neuron awake until at least t + duration.
/// Throws std::logic_error on a neuron without sleep mode.
NeuronState apply_activation(const NeuronState& s, const NeuronParams& p, Time duration, Time t);

inline SynapseRecord record_presyn_spike(SynapseRecord syn, Time t) noexcept
{
    syn.last_presyn_t = t;
    return syn;
}

/// Adds pulse_weight to the resource of every synapse that saw a
/// presynaptic spike within the last tau_p ms, then shifts the remaining
/// synapses by an equal amount so the total resource stays unchanged.
/// Returns the number of synapses that were eligible.
std::size_t apply_plasticity_pulse(std::span<SynapseRecord> synapses, double pulse_weight, Time t,
                                   const NeuronParams& p, const PlasticityParams& pp);

}  // namespace spikerl
