#include "geovae/riemann/geodesic.hpp"

#include <cmath>
#include <stdexcept>

namespace geovae::riemann {

double path_energy(const MetricField &field, const Mat &knots)
{
    double e = 0.0;
    for (int k = 0; k + 1 < knots.rows(); ++k) {
        const Vec delta = (knots.row(k + 1) - knots.row(k)).transpose();
        const Vec mid = 0.5 * (knots.row(k + 1) + knots.row(k)).transpose();
        e += delta.dot(metric(field, mid) * delta);
    }
    return e;
}

Mat path_energy_gradient(const MetricField &field, const Mat &knots)
{
    const int K = static_cast<int>(knots.rows());
    const int d = static_cast<int>(knots.cols());
    Mat grad = Mat::Zero(K, d);

    for (int k = 0; k + 1 < K; ++k) {
        const Vec delta = (knots.row(k + 1) - knots.row(k)).transpose();
        const Vec mid = 0.5 * (knots.row(k + 1) + knots.row(k)).transpose();
        const Mat g = metric(field, mid);

        // quadratic-form part
        const Vec gd = 2.0 * (g * delta);
        grad.row(k) -= gd.transpose();
        grad.row(k + 1) += gd.transpose();

        if (!field.is_constant()) {
            // metric variation through the midpoint: dG = -G dG^{-1} G
            const auto jac_inv = inverse_metric_jacobian(field, mid);
            for (int j = 0; j < d; ++j) {
                const double dq = -delta.dot(g * jac_inv[j] * g * delta);
                grad(k, j) += 0.5 * dq;
                grad(k + 1, j) += 0.5 * dq;
            }
        }
    }
    return grad;
}

GeodesicCurve geodesic_path(const MetricField &field, const Vec &a, const Vec &b,
                            const GeodesicOptions &opt)
{
    if (a.size() != field.dim() || b.size() != field.dim())
        throw std::invalid_argument("geodesic_path: endpoint dimension mismatch");
    if ((a - b).norm() == 0.0)
        throw std::invalid_argument("geodesic_path: endpoints must differ");
    if (opt.knot_count < 2)
        throw std::invalid_argument("geodesic_path: need at least 2 knots");

    const int K = opt.knot_count;
    const int d = field.dim();

    GeodesicCurve curve;
    curve.knots.resize(K, d);
    for (int k = 0; k < K; ++k) {
        const double t = K == 1 ? 0.0 : static_cast<double>(k) / (K - 1);
        curve.knots.row(k) = ((1.0 - t) * a + t * b).transpose();
    }
    curve.energy = path_energy(field, curve.knots);
    curve.energy_history.push_back(curve.energy);

    if (K == 2) {
        curve.converged = true;
        return curve;
    }

    for (int it = 0; it < opt.iterations; ++it) {
        Mat grad = path_energy_gradient(field, curve.knots);
        grad.row(0).setZero();
        grad.row(K - 1).setZero();

        // backtrack until the step actually decreases the energy
        bool accepted = false;
        double trial_energy = curve.energy;
        Mat trial = curve.knots;
        double step = opt.learning_rate;
        for (int half = 0; half < 40; ++half) {
            trial = curve.knots - step * grad;
            trial_energy = path_energy(field, trial);
            if (trial_energy < curve.energy) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // no step size descends: stationary within floating point
            curve.converged = true;
            return curve;
        }

        const double decrease = curve.energy - trial_energy;
        curve.knots = trial;
        curve.energy = trial_energy;
        curve.energy_history.push_back(curve.energy);
        if (decrease < opt.tolerance) {
            curve.converged = true;
            return curve;
        }
    }

    // iteration budget exhausted while still making progress
    curve.converged = false;
    return curve;
}

} // namespace geovae::riemann
