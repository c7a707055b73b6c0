#pragma once

#include "geovae/riemann/metric.hpp"

namespace geovae::riemann {

/// Discrete curve between two latent points; knots include both endpoints.
struct GeodesicCurve {
    Mat knots;                          ///< K x d, first/last rows fixed
    bool converged = false;
    double energy = 0.0;
    std::vector<double> energy_history; ///< energy after each accepted step
};

/// Discrete path energy sum_k (z_{k+1}-z_k)^T G(midpoint_k) (z_{k+1}-z_k).
double path_energy(const MetricField &field, const Mat &knots);

/// Gradient of the discrete energy with respect to every knot (endpoints
/// included; callers freeze the endpoint rows).
Mat path_energy_gradient(const MetricField &field, const Mat &knots);

struct GeodesicOptions {
    int knot_count = 16;
    int iterations = 500;
    double learning_rate = 1e-2;
    double tolerance = 1e-8;
};

/// Gradient-descent minimization of the discrete energy over interior knots,
/// with step backtracking so every accepted step decreases the energy.
/// A curve that fails to converge is still returned with converged = false.
GeodesicCurve geodesic_path(const MetricField &field, const Vec &a, const Vec &b,
                            const GeodesicOptions &opt = {});

} // namespace geovae::riemann
