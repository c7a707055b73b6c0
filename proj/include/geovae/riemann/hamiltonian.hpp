#pragma once

#include <functional>

#include "geovae/core/rng.hpp"
#include "geovae/riemann/metric.hpp"

namespace geovae::riemann {

/// Position/velocity pair of the traveling particle.
struct PhasePoint {
    Vec position;
    Vec velocity;
};

/// Target log density with an optional analytic gradient; a central
/// finite-difference fallback is used when no gradient is supplied.
struct LogTarget {
    std::function<double(const Vec &)> value;
    std::function<Vec(const Vec &)> grad;

    Vec gradient(const Vec &z) const;

    static LogTarget standard_normal();
};

/// H(z, v) = U(z) + K(v, z) with U = -log p_target and
/// K = 1/2 [ log((2pi)^d |G(z)|) + v^T G^{-1}(z) v ].
double hamiltonian(const MetricField &field, const PhasePoint &p, const LogTarget &target);

/// One integrator step. Constant fields take a standard leapfrog step;
/// position-dependent fields use the generalized (implicit) leapfrog with
/// three fixed-point iterations per half step. Throws on non-finite state.
PhasePoint leapfrog_step(const MetricField &field, const PhasePoint &p, double step,
                         const LogTarget &target);

struct RhmcOptions {
    int n_steps = 100;
    double step = 0.01;
    int n_leapfrog = 3;
    bool metropolis = true;
};

/// Full chain of positions (n_steps entries after the initial state).
std::vector<Vec> rhmc_chain(const MetricField &field, const Vec &init, const LogTarget &target,
                            Rng &rng, const RhmcOptions &opt);

/// Final state of the chain; with Metropolis correction on, diverging
/// trajectories reject the proposal instead of aborting.
Vec rhmc_sample(const MetricField &field, const Vec &init, int n_steps, double step,
                int n_leapfrog, const LogTarget &target, Rng &rng, bool metropolis = true);

} // namespace geovae::riemann
