#pragma once

#include <Eigen/Dense>

#include "geovae/core/rng.hpp"
#include "geovae/sphere/bessel.hpp"

namespace geovae::sphere {

using Vec = Eigen::VectorXd;

constexpr double unit_norm_tol = 1e-6;

/// Point on S^(m-1); factory functions enforce the unit-norm invariant.
struct UnitVector {
    Vec v;

    int dim() const { return static_cast<int>(v.size()); }

    /// Validate |norm - 1| <= 1e-6, throws std::invalid_argument otherwise.
    static UnitVector checked(Vec x);
    /// Normalize an arbitrary non-zero vector onto the sphere.
    static UnitVector normalized(Vec x);
    /// Basis vector e_axis in dimension m.
    static UnitVector basis(int m, int axis = 0);
};

/// von Mises-Fisher parameters; kappa = 0 is the uniform distribution.
struct VmfParams {
    UnitVector mu;
    double kappa = 0.0;

    VmfParams(UnitVector mu_, double kappa_);
    int dim() const { return mu.dim(); }
};

/// Reflection H = I - 2 h h^T mapping e_1 onto mu (identity when mu ~ e_1).
struct HouseholderReflection {
    Vec h;
    bool identity_flag = false;

    Vec apply(const Vec &z) const;
    Eigen::MatrixXd matrix() const;
};

HouseholderReflection householder(const UnitVector &mu);

/// Surface area of the radius-r sphere S^(m-1) embedded in R^m.
double sphere_surface_area(int m, double r = 1.0);
double log_sphere_surface_area(int m);

/// log density of vMF(mu, kappa) at z with respect to the surface measure.
double vmf_log_pdf(const VmfParams &params, const UnitVector &z);

/// KL( vMF(mu, kappa) || U(S^{m-1}) ); >= 0, zero iff kappa = 0.
double kl_vmf_uniform(const VmfParams &params);

/// d/dkappa of the KL above ( = kappa * A_m'(kappa) ).
double kl_vmf_uniform_dkappa(int m, double kappa);

/// One draw of the radial component omega ~ g(omega | kappa, m) by Wood's
/// acceptance-rejection scheme. Throws after the iteration cap (numerical
/// breakdown signal). rejection_cap defaults to the configured 1000.
double sample_omega(int m, double kappa, Rng &rng, int rejection_cap = 1000);

std::vector<UnitVector> sample_uniform_sphere(int m, int n, Rng &rng);
std::vector<UnitVector> sample_vmf(const VmfParams &params, int n, Rng &rng);

/// Arc length between two unit vectors, in [0, pi]; the inner product is
/// clamped before arccos.
double geodesic_distance(const UnitVector &z1, const UnitVector &z2);

/// Spherical linear interpolation; throws on antipodal endpoints.
UnitVector slerp(const UnitVector &z1, const UnitVector &z2, double t);

// ---- reparameterized sampling path (used by the model training code) ----

/// One vMF draw with everything needed to backpropagate through the
/// accepted transform (Naesseth-style rejection reparameterization; the
/// score-function correction is handled separately, see VmfGradConfig).
struct VmfDraw {
    Vec z;                     ///< the sample on S^{m-1}
    double omega = 0.0;        ///< radial component before reflection
    Vec tangent;               ///< v ~ U(S^{m-2}) (dim m-1)
    double domega_dkappa = 0.0;
    int rejections = 0;
};

VmfDraw sample_vmf_reparam(const VmfParams &params, Rng &rng, int rejection_cap = 1000);

/// Pathwise gradients of a scalar loss through one draw: given dL/dz,
/// produce dL/dmu and the pathwise dL/dkappa.
void vmf_reparam_backward(const VmfDraw &draw, const VmfParams &params, const Vec &dz,
                          Vec *dmu, double *dkappa);

struct VmfGradConfig {
    /// Include the rejection-sampling score term. The pathwise term alone
    /// underestimates d/dkappa E[mu^T z] by ~21% at (m=3, kappa=5), so the
    /// correction is on by default; disable it to get the plain pathwise
    /// estimator used inside the training loop.
    bool score_correction = true;
};

/// Monte-Carlo estimate of d/dkappa E[mu^T z] over n draws; the closed form
/// is bessel_ratio_derivative(m, kappa).
double vmf_mean_cosine_grad(int m, double kappa, int n, Rng &rng,
                            const VmfGradConfig &cfg = {});

} // namespace geovae::sphere
