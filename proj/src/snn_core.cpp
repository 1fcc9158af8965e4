#include "spikerl/snn_core.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace spikerl {

NeuronParams NeuronParams::from_equilibrium(double tau_v, double t_hat, double equilibrium_ms)
{
    if (!(equilibrium_ms > 0.0))
        throw std::invalid_argument("equilibrium interval must be positive");
    NeuronParams p;
    p.tau_v = tau_v;
    p.t_hat = t_hat;
    p.a = t_hat / equilibrium_ms;
    return p;
}

void NeuronParams::validate() const
{
    if (!(tau_v > 0.0))
        throw std::invalid_argument("tau_v must be positive, got " + std::to_string(tau_v));
    if (!(a > 0.0))
        throw std::invalid_argument("threshold relaxation speed must be positive");
    if (!(t_hat >= 0.0))
        throw std::invalid_argument("threshold increment must be non-negative");
    if (is_plastic && !(tau_p > 0.0))
        throw std::invalid_argument("plasticity window must be positive for plastic neurons");
}

void PlasticityParams::validate() const
{
    if (!(w_max > w_min))
        throw std::invalid_argument("w_max must exceed w_min");
}

bool is_asleep(const NeuronState& s, const NeuronParams& p, Time t) noexcept
{
    return p.has_sleep_mode && t >= s.active_until;
}

StepResult step_neuron(const NeuronState& s, const NeuronParams& p, double excit_sum,
                       double inhib_sum, Time t, Time dt) noexcept
{
    StepResult r{s, false};
    r.state.u *= std::exp(-dt / p.tau_v);
    r.state.u_thr = std::max(1.0, r.state.u_thr - p.a * dt);
    if (is_asleep(s, p, t))
        return r;

    // Relaxation alone can cross the threshold inside the step. Until the
    // threshold reaches its floor u - u_thr is convex, afterwards it only
    // falls, so its maximum over the step sits at the floor time (or dt).
    const auto gap = [&](double x) {
        return s.u * std::exp(-x / p.tau_v) - std::max(1.0, s.u_thr - p.a * x);
    };
    const double peak = s.u_thr > 1.0 && p.a > 0.0 ? std::min(dt, (s.u_thr - 1.0) / p.a) : 0.0;
    if (gap(peak) > 0.0) {
        // Fire at the crossing and let this step's input land on the reset membrane.
        double lo = 0.0, hi = peak;
        if (gap(lo) > 0.0)
            hi = lo;
        for (int i = 0; i < 60 && hi - lo > 1e-12 * dt; ++i) {
            const double mid = 0.5 * (lo + hi);
            (gap(mid) > 0.0 ? hi : lo) = mid;
        }
        const double thr_at_fire = std::max(1.0, s.u_thr - p.a * hi) + p.t_hat;
        r.fired = true;
        r.state.u = excit_sum - inhib_sum;
        r.state.u_thr = std::max(1.0, thr_at_fire - p.a * (dt - hi));
        return r;
    }

    r.state.u += excit_sum - inhib_sum;
    if (r.state.u > r.state.u_thr) {
        r.fired = true;
        r.state.u = 0.0;
        r.state.u_thr += p.t_hat;
    }
    return r;
}

NeuronState apply_activation(const NeuronState& s, const NeuronParams& p, Time duration, Time t)
{
    if (!p.has_sleep_mode)
        throw std::logic_error("activation applied to a neuron without sleep mode");
    NeuronState out = s;
    out.active_until = std::max(s.active_until, t + duration);
    return out;
}

std::size_t apply_plasticity_pulse(std::span<SynapseRecord> synapses, double pulse_weight, Time t,
                                   const NeuronParams& p, const PlasticityParams& pp)
{
    const std::size_t n = synapses.size();
    if (n == 0)
        return 0;

    std::size_t eligible = 0;
    for (auto& syn : synapses) {
        if (syn.last_presyn_t != kNever && t - syn.last_presyn_t <= p.tau_p)
            ++eligible;
    }
    if (eligible == 0 || pulse_weight == 0.0)
        return eligible;

    if (!pp.conserve_total_resource) {
        for (auto& syn : synapses)
            if (syn.last_presyn_t != kNever && t - syn.last_presyn_t <= p.tau_p)
                syn.resource += pulse_weight;
        return eligible;
    }

    // Every synapse eligible: the compensation equals the change itself.
    if (eligible == n)
        return eligible;

    const double k = static_cast<double>(eligible);
    const double rest = static_cast<double>(n - eligible);
    const double compensation = pulse_weight * k / rest;

    // Rounding of every update is tracked exactly (two-sum) and handed back to
    // the smallest non-eligible synapse, so the total stays put over long runs.
    double lost = 0.0;
    auto add = [&lost](double& w, double d) {
        const double s = w + d;
        const double bp = s - w;
        lost += (w - (s - bp)) + (d - bp);
        w = s;
    };
    SynapseRecord* sink = nullptr;
    for (auto& syn : synapses) {
        if (syn.last_presyn_t != kNever && t - syn.last_presyn_t <= p.tau_p) {
            add(syn.resource, pulse_weight);
        } else {
            add(syn.resource, -compensation);
            if (!sink || std::abs(syn.resource) < std::abs(sink->resource))
                sink = &syn;
        }
    }
    const double gained = k * pulse_weight;
    const double residual = std::fma(-rest, compensation, gained) + std::fma(k, pulse_weight, -gained);
    sink->resource += lost - residual;
    return eligible;
}

}  // namespace spikerl
