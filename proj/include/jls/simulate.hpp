#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "jls/model.hpp"

namespace jls {

// splitmix64 finalizer (Steele, Lea, Flood 2014), used to derive independent
// substream seeds from (seed, input index, copy index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t input_index,
                                    std::uint64_t copy_index) {
    std::uint64_t state = splitmix64(seed);
    state = splitmix64(state ^ (input_index + 1));
    state = splitmix64(state ^ (copy_index + 1));
    return state;
}

// Uniform double in [0, 1) from the top 53 bits of the generator output.
inline double uniform01(std::mt19937_64& engine) {
    return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

// First index whose cumulative probability exceeds u.
inline int draw_mode(const std::vector<double>& cumulative, double u) {
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    int idx = static_cast<int>(it - cumulative.begin());
    if (idx >= static_cast<int>(cumulative.size())) idx = static_cast<int>(cumulative.size()) - 1;
    return idx;
}

inline std::vector<double> cumulative_probs(const JlsModel& model) {
    std::vector<double> cumulative(model.probs.size());
    double acc = 0.0;
    for (size_t i = 0; i < model.probs.size(); ++i) {
        acc += model.probs[i];
        cumulative[i] = acc;
    }
    return cumulative;
}

inline SwitchSequence draw_switches(const JlsModel& model, int horizon, std::mt19937_64& engine) {
    const std::vector<double> cumulative = cumulative_probs(model);
    SwitchSequence seq;
    seq.entries.reserve(horizon);
    for (int k = 0; k < horizon; ++k) seq.entries.push_back(draw_mode(cumulative, uniform01(engine)));
    return seq;
}

struct Trajectory {
    std::vector<Vector> inputs;   // u_0 .. u_{K-1}
    std::vector<Vector> outputs;  // y_1 .. y_K
    std::vector<Vector> states;   // x_0 .. x_K
    SwitchSequence switches;      // theta(0) .. theta(K-1)
};

// Deterministic rollout from x_0 = 0. The horizon is the switch-sequence
// length; inputs shorter than the horizon are zero-padded.
inline Trajectory simulate_with_switches(const JlsModel& model, const SwitchSequence& switches,
                                         const std::vector<Vector>& inputs) {
    require_valid(model);
    const int horizon = switches.length();
    if (static_cast<int>(inputs.size()) > horizon)
        throw std::invalid_argument("simulate_with_switches: more inputs than switches");
    for (const Vector& u : inputs)
        if (u.size() != model.p)
            throw std::invalid_argument("simulate_with_switches: input dimension mismatch");
    for (int e : switches.entries)
        if (e < 0 || e >= model.s)
            throw std::out_of_range("simulate_with_switches: switch index out of range");

    Trajectory traj;
    traj.switches = switches;
    traj.inputs.reserve(horizon);
    traj.outputs.reserve(horizon);
    traj.states.reserve(horizon + 1);

    Vector x = Vector::Zero(model.n);
    traj.states.push_back(x);
    const Vector zero_input = Vector::Zero(model.p);
    for (int k = 0; k < horizon; ++k) {
        const Vector& u = k < static_cast<int>(inputs.size()) ? inputs[k] : zero_input;
        traj.inputs.push_back(u);
        x = model.modes[switches.entries[k]] * x + model.B * u;
        traj.states.push_back(x);
        traj.outputs.push_back(model.C * x);
    }
    return traj;
}

// Draws the switch sequence i.i.d. from the model probabilities using
// mt19937_64 seeded via substream_seed(seed, 0, 0), then delegates.
inline Trajectory simulate_random(const JlsModel& model, const std::vector<Vector>& inputs,
                                  int horizon, std::uint64_t seed) {
    require_valid(model);
    if (horizon < static_cast<int>(inputs.size()))
        throw std::invalid_argument("simulate_random: horizon shorter than inputs");
    std::mt19937_64 engine(substream_seed(seed, 0, 0));
    return simulate_with_switches(model, draw_switches(model, horizon, engine), inputs);
}

}  // namespace jls
