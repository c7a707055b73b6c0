#pragma once

namespace geovae::sphere {

/// log I_nu(x) for nu a non-negative integer or half-integer, x >= 0.
/// Evaluated entirely in log space: a closed form at the base order
/// (I_0 series/asymptotic, I_1/2 exact) plus a downward ratio recurrence,
/// so it stays finite far beyond the x ~ 700 overflow of raw Bessel values.
double log_bessel_iv(double nu, double x);

/// log( I_{m/2}(kappa) / I_{m/2-1}(kappa) ), the log mean resultant length
/// of a vMF distribution on S^{m-1}. Monotone increasing in kappa, < 0.
/// Throws std::domain_error for kappa < 0 or m < 2.
double log_bessel_ratio(int m, double kappa);

/// A_m(kappa) = I_{m/2}(kappa) / I_{m/2-1}(kappa); 0 at kappa = 0.
double bessel_ratio(int m, double kappa);

/// d/dkappa A_m(kappa) = 1 - A^2 - (m-1)/kappa * A; limit 1/m at kappa -> 0.
double bessel_ratio_derivative(int m, double kappa);

} // namespace geovae::sphere
