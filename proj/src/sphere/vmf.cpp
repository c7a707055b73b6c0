#include "geovae/sphere/vmf.hpp"

#include <cmath>
#include <stdexcept>

namespace geovae::sphere {

namespace {

void require_same_dim(int a, int b, const char *what)
{
    if (a != b)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

double lgamma_half(int m) { return std::lgamma(m / 2.0); }

// Wood's envelope constants for S^{m-1}.
struct WoodEnvelope {
    double b, x0, c;

    WoodEnvelope(int m, double kappa)
    {
        const double p = m - 1.0;
        const double s = std::sqrt(4.0 * kappa * kappa + p * p);
        b = p / (s + 2.0 * kappa);
        x0 = (1.0 - b) / (1.0 + b);
        c = kappa * x0 + p * std::log(1.0 - x0 * x0);
    }
};

struct OmegaDraw {
    double omega;
    double domega_dkappa;
    int rejections;
};

OmegaDraw draw_omega(int m, double kappa, Rng &rng, int rejection_cap)
{
    if (m < 2)
        throw std::domain_error("sample_omega: m must be >= 2");
    if (!(kappa > 0.0))
        throw std::domain_error("sample_omega: kappa must be > 0");

    const double p = m - 1.0;
    const WoodEnvelope env(m, kappa);
    for (int it = 0; it <= rejection_cap; ++it) {
        const double eps = rng.beta(p / 2.0, p / 2.0);
        const double denom = 1.0 - (1.0 - env.b) * eps;
        const double omega = (1.0 - (1.0 + env.b) * eps) / denom;
        const double u = rng.uniform();
        if (kappa * omega + p * std::log(1.0 - env.x0 * omega) - env.c
            >= std::log(u > 0.0 ? u : 1e-300)) {
            // pathwise derivative at the accepted eps
            const double s = std::sqrt(4.0 * kappa * kappa + p * p);
            const double db_dk = -p * (4.0 * kappa / s + 2.0) / ((s + 2.0 * kappa) * (s + 2.0 * kappa));
            const double domega_db = -2.0 * eps * (1.0 - eps) / (denom * denom);
            return { omega, domega_db * db_dk, it };
        }
    }
    throw std::runtime_error("sample_omega: rejection iteration cap exceeded (kappa="
                             + std::to_string(kappa) + ", m=" + std::to_string(m) + ")");
}

} // namespace

UnitVector UnitVector::checked(Vec x)
{
    if (x.size() < 1)
        throw std::invalid_argument("UnitVector: empty vector");
    const double n = x.norm();
    if (std::abs(n - 1.0) > unit_norm_tol)
        throw std::invalid_argument("UnitVector: norm " + std::to_string(n) + " is not 1");
    return UnitVector { std::move(x) };
}

UnitVector UnitVector::normalized(Vec x)
{
    const double n = x.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw std::invalid_argument("UnitVector: cannot normalize zero/non-finite vector");
    x /= n;
    return UnitVector { std::move(x) };
}

UnitVector UnitVector::basis(int m, int axis)
{
    if (m < 1 || axis < 0 || axis >= m)
        throw std::invalid_argument("UnitVector::basis: bad dimension/axis");
    Vec v = Vec::Zero(m);
    v[axis] = 1.0;
    return UnitVector { std::move(v) };
}

VmfParams::VmfParams(UnitVector mu_, double kappa_) : mu(std::move(mu_)), kappa(kappa_)
{
    if (kappa < 0.0)
        throw std::invalid_argument("VmfParams: kappa must be >= 0");
}

Vec HouseholderReflection::apply(const Vec &z) const
{
    if (identity_flag)
        return z;
    return z - 2.0 * h * (h.dot(z));
}

Eigen::MatrixXd HouseholderReflection::matrix() const
{
    const auto n = identity_flag ? h.size() : h.size();
    Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
    if (identity_flag)
        return id;
    return id - 2.0 * h * h.transpose();
}

HouseholderReflection householder(const UnitVector &mu)
{
    const int m = mu.dim();
    Vec u = -mu.v;
    u[0] += 1.0; // e1 - mu
    const double n = u.norm();
    if (n < 1e-8) {
        // mu ~ e1: the formula is 0/0, identity is the continuous limit
        Vec h = Vec::Zero(m);
        return HouseholderReflection { std::move(h), true };
    }
    u /= n;
    return HouseholderReflection { std::move(u), false };
}

double sphere_surface_area(int m, double r)
{
    if (m < 1)
        throw std::domain_error("sphere_surface_area: m must be >= 1");
    if (!(r > 0.0))
        throw std::domain_error("sphere_surface_area: r must be > 0");
    // S^{m-1} in R^m scales with r^{m-1}
    return 2.0 * std::pow(M_PI, m / 2.0) / std::exp(lgamma_half(m)) * std::pow(r, m - 1);
}

double log_sphere_surface_area(int m)
{
    if (m < 1)
        throw std::domain_error("log_sphere_surface_area: m must be >= 1");
    return std::log(2.0) + (m / 2.0) * std::log(M_PI) - lgamma_half(m);
}

double vmf_log_pdf(const VmfParams &params, const UnitVector &z)
{
    require_same_dim(params.dim(), z.dim(), "vmf_log_pdf");
    const int m = params.dim();
    if (params.kappa < 1e-12)
        return -log_sphere_surface_area(m);
    const double nu = m / 2.0 - 1.0;
    const double log_c = nu * std::log(params.kappa) - (m / 2.0) * std::log(2.0 * M_PI)
        - log_bessel_iv(nu, params.kappa);
    return log_c + params.kappa * params.mu.v.dot(z.v);
}

double kl_vmf_uniform(const VmfParams &params)
{
    const int m = params.dim();
    const double kappa = params.kappa;
    if (kappa < 1e-12)
        return 0.0;
    const double nu = m / 2.0 - 1.0;
    const double log_c = nu * std::log(kappa) - (m / 2.0) * std::log(2.0 * M_PI)
        - log_bessel_iv(nu, kappa);
    const double kl = kappa * bessel_ratio(m, kappa) + log_c + log_sphere_surface_area(m);
    return kl > 0.0 ? kl : 0.0;
}

double kl_vmf_uniform_dkappa(int m, double kappa)
{
    if (kappa < 1e-12)
        return 0.0;
    return kappa * bessel_ratio_derivative(m, kappa);
}

double sample_omega(int m, double kappa, Rng &rng, int rejection_cap)
{
    return draw_omega(m, kappa, rng, rejection_cap).omega;
}

std::vector<UnitVector> sample_uniform_sphere(int m, int n, Rng &rng)
{
    if (m < 1)
        throw std::domain_error("sample_uniform_sphere: m must be >= 1");
    std::vector<UnitVector> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        if (m == 1) {
            Vec v(1);
            v[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
            out.push_back(UnitVector { std::move(v) });
            continue;
        }
        Vec v(m);
        double norm2 = 0.0;
        do {
            for (int d = 0; d < m; ++d)
                v[d] = rng.normal();
            norm2 = v.squaredNorm();
        } while (norm2 < 1e-24);
        v /= std::sqrt(norm2);
        out.push_back(UnitVector { std::move(v) });
    }
    return out;
}

VmfDraw sample_vmf_reparam(const VmfParams &params, Rng &rng, int rejection_cap)
{
    const int m = params.dim();
    if (m < 2)
        throw std::domain_error("sample_vmf: m must be >= 2");
    const auto od = draw_omega(m, params.kappa, rng, rejection_cap);
    const UnitVector v = sample_uniform_sphere(m - 1, 1, rng)[0];

    Vec zprime(m);
    zprime[0] = od.omega;
    const double tang = std::sqrt(std::max(0.0, 1.0 - od.omega * od.omega));
    zprime.tail(m - 1) = tang * v.v;

    const auto refl = householder(params.mu);
    VmfDraw draw;
    draw.z = refl.apply(zprime);
    draw.omega = od.omega;
    draw.tangent = v.v;
    draw.domega_dkappa = od.domega_dkappa;
    draw.rejections = od.rejections;
    // guard against accumulated rounding off the sphere
    draw.z /= draw.z.norm();
    return draw;
}

std::vector<UnitVector> sample_vmf(const VmfParams &params, int n, Rng &rng)
{
    if (n < 1)
        throw std::invalid_argument("sample_vmf: n must be >= 1");
    std::vector<UnitVector> out;
    out.reserve(n);
    if (params.kappa == 0.0)
        return sample_uniform_sphere(params.dim(), n, rng);
    for (int i = 0; i < n; ++i)
        out.push_back(UnitVector { sample_vmf_reparam(params, rng).z });
    return out;
}

double geodesic_distance(const UnitVector &z1, const UnitVector &z2)
{
    require_same_dim(z1.dim(), z2.dim(), "geodesic_distance");
    double dot = z1.v.dot(z2.v);
    dot = std::min(1.0, std::max(-1.0, dot));
    return std::acos(dot);
}

UnitVector slerp(const UnitVector &z1, const UnitVector &z2, double t)
{
    require_same_dim(z1.dim(), z2.dim(), "slerp");
    const double dot = std::min(1.0, std::max(-1.0, z1.v.dot(z2.v)));
    if (dot < -1.0 + 1e-6)
        throw std::invalid_argument("slerp: endpoints are antipodal, geodesic is ambiguous");
    const double theta = std::acos(dot);
    if (theta < 1e-9) {
        Vec v = (1.0 - t) * z1.v + t * z2.v;
        return UnitVector::normalized(std::move(v));
    }
    const double s = std::sin(theta);
    Vec v = (std::sin((1.0 - t) * theta) / s) * z1.v + (std::sin(t * theta) / s) * z2.v;
    return UnitVector::normalized(std::move(v));
}

void vmf_reparam_backward(const VmfDraw &draw, const VmfParams &params, const Vec &dz,
                          Vec *dmu, double *dkappa)
{
    const int m = params.dim();
    const auto refl = householder(params.mu);

    // dL/dz' = H dz (H symmetric)
    const Vec dzprime = refl.apply(dz);

    // z' = (omega ; sqrt(1-omega^2) v)
    const double tang = std::sqrt(std::max(1e-12, 1.0 - draw.omega * draw.omega));
    double dl_domega = dzprime[0];
    dl_domega -= (draw.omega / tang) * dzprime.tail(m - 1).dot(draw.tangent);

    if (dkappa)
        *dkappa = dl_domega * draw.domega_dkappa;

    if (dmu) {
        dmu->setZero(m);
        if (!refl.identity_flag) {
            // L = g^T z' - 2 (g^T h)(h^T z'); h = u/|u|, u = e1 - mu
            Vec zprime(m);
            zprime[0] = draw.omega;
            zprime.tail(m - 1) = tang * draw.tangent;
            const Vec &h = refl.h;
            const double g_h = dz.dot(h);
            const double h_z = h.dot(zprime);
            const Vec dl_dh = -2.0 * (h_z * dz + g_h * zprime);
            Vec u = -params.mu.v;
            u[0] += 1.0;
            const double un = u.norm();
            const Vec dl_du = (dl_dh - h * h.dot(dl_dh)) / un;
            *dmu = -dl_du;
        }
    }
}

double vmf_mean_cosine_grad(int m, double kappa, int n, Rng &rng, const VmfGradConfig &cfg)
{
    // mu^T z = omega regardless of mu, so the path term is mean(domega/dkappa)
    const double p = m - 1.0;
    double path = 0.0;
    std::vector<double> omegas, scores;
    if (cfg.score_correction) {
        omegas.reserve(n);
        scores.reserve(n);
    }
    const WoodEnvelope env(m, kappa);
    const double s = std::sqrt(4.0 * kappa * kappa + p * p);
    const double db_dk = -p * (4.0 * kappa / s + 2.0) / ((s + 2.0 * kappa) * (s + 2.0 * kappa));
    const double dx0_db = -2.0 / ((1.0 + env.b) * (1.0 + env.b));
    const double dx0_dk = dx0_db * db_dk;
    const double dc_dk = env.x0 + kappa * dx0_dk + p * (-2.0 * env.x0 * dx0_dk) / (1.0 - env.x0 * env.x0);

    for (int i = 0; i < n; ++i) {
        const auto od = draw_omega(m, kappa, rng, 1000);
        path += od.domega_dkappa;
        if (cfg.score_correction) {
            const double dlog_acc = od.omega + kappa * od.domega_dkappa
                + p * (-(dx0_dk * od.omega + env.x0 * od.domega_dkappa)) / (1.0 - env.x0 * od.omega)
                - dc_dk;
            omegas.push_back(od.omega);
            scores.push_back(dlog_acc);
        }
    }
    double grad = path / n;
    if (cfg.score_correction) {
        double mean_score = 0.0;
        for (double v : scores)
            mean_score += v;
        mean_score /= n;
        double corr = 0.0;
        for (int i = 0; i < n; ++i)
            corr += omegas[i] * (scores[i] - mean_score);
        grad += corr / n;
    }
    return grad;
}

} // namespace geovae::sphere
