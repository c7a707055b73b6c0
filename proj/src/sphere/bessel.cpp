#include "geovae/sphere/bessel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace geovae::sphere {

namespace {

constexpr double inf = std::numeric_limits<double>::infinity();

double log_i_half(double x)
{
    // I_{1/2}(x) = sqrt(2/(pi x)) sinh(x)
    return 0.5 * std::log(2.0 / (M_PI * x)) + x + std::log1p(-std::exp(-2.0 * x))
        - std::log(2.0);
}

double log_i0(double x)
{
    if (x < 25.0) {
        double term = 1.0, sum = 1.0;
        for (int k = 1; k < 200; ++k) {
            term *= (x * x / 4.0) / (static_cast<double>(k) * k);
            sum += term;
            if (term < 1e-18 * sum)
                break;
        }
        return std::log(sum);
    }
    // large-x expansion at order 0; every term is positive there
    double sum = 1.0, num = 1.0;
    for (int k = 1; k <= 11; ++k) {
        const double odd = 2.0 * k - 1.0;
        num *= (odd * odd) / (k * 8.0 * x);
        sum += num;
    }
    return x - 0.5 * std::log(2.0 * M_PI * x) + std::log(sum);
}

// Downward recurrence for r_j = I_j(x) / I_{j-1}(x), j = start..stop in unit
// steps. Returns log(r_stop) and optionally accumulates sum of log(r_j) for
// j in (base, nu]. Downward iteration tracks the minimal solution, so it is
// stable; the start offset must exceed the x-sized transition zone.
struct RatioScan {
    double log_r_at_nu;
    double log_sum_base_to_nu;
};

RatioScan ratio_scan(double nu, double x)
{
    const double base = (nu - std::floor(nu) > 0.25) ? 0.5 : 0.0;
    const double start = nu + std::max(40.0, 1.2 * x);
    double r = x / (2.0 * start + x);
    double log_r_nu = -inf;
    double acc = 0.0;
    for (double j = start; j > base + 0.6; j -= 1.0) {
        r = 1.0 / (2.0 * j / x + r);
        if (j <= nu + 0.1) {
            if (std::abs(j - nu) < 0.25)
                log_r_nu = std::log(r);
            acc += std::log(r);
        }
    }
    return { log_r_nu, acc };
}

} // namespace

double log_bessel_iv(double nu, double x)
{
    if (x < 0.0 || nu < 0.0)
        throw std::domain_error("log_bessel_iv: nu and x must be non-negative");
    const double twice = 2.0 * nu;
    if (std::abs(twice - std::round(twice)) > 1e-9)
        throw std::domain_error("log_bessel_iv: nu must be integer or half-integer");
    if (x == 0.0)
        return nu == 0.0 ? 0.0 : -inf;

    const bool half = std::abs(nu - std::floor(nu) - 0.5) < 1e-12;
    const double log_base = half ? log_i_half(x) : log_i0(x);
    const double base = half ? 0.5 : 0.0;
    if (std::abs(nu - base) < 1e-12)
        return log_base;
    return log_base + ratio_scan(nu, x).log_sum_base_to_nu;
}

double log_bessel_ratio(int m, double kappa)
{
    if (m < 2)
        throw std::domain_error("log_bessel_ratio: m must be >= 2");
    if (kappa < 0.0)
        throw std::domain_error("log_bessel_ratio: kappa must be >= 0");
    if (kappa == 0.0)
        return -inf;
    return ratio_scan(m / 2.0, kappa).log_r_at_nu;
}

double bessel_ratio(int m, double kappa)
{
    if (kappa == 0.0) {
        if (m < 2)
            throw std::domain_error("bessel_ratio: m must be >= 2");
        return 0.0;
    }
    return std::exp(log_bessel_ratio(m, kappa));
}

double bessel_ratio_derivative(int m, double kappa)
{
    if (m < 2)
        throw std::domain_error("bessel_ratio_derivative: m must be >= 2");
    if (kappa < 0.0)
        throw std::domain_error("bessel_ratio_derivative: kappa must be >= 0");
    if (kappa < 1e-8)
        return 1.0 / m;
    const double a = bessel_ratio(m, kappa);
    return 1.0 - a * a - (m - 1.0) / kappa * a;
}

} // namespace geovae::sphere
