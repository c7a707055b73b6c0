#include "geovae/riemann/hamiltonian.hpp"

#include <cmath>
#include <stdexcept>

namespace geovae::riemann {

namespace {

constexpr int fixed_point_iters = 3;

double log_det_inverse_metric(const MetricField &field, const Vec &z)
{
    const Mat ginv = inverse_metric(field, z);
    Eigen::LLT<Mat> llt(ginv);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("hamiltonian: inverse metric factorization failed");
    double log_det = 0.0;
    for (int i = 0; i < field.dim(); ++i)
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    return log_det;
}

void check_finite(const Vec &v, const char *what)
{
    if (!v.allFinite())
        throw std::runtime_error(std::string(what) + ": integration diverged (non-finite state)");
}

// dH/dz at velocity v:
//   -grad log p(z) - 1/2 tr(G dG^{-1}/dz_j) + 1/2 v^T dG^{-1}/dz_j v
Vec hamiltonian_position_grad(const MetricField &field, const Vec &z, const Vec &v,
                              const LogTarget &target)
{
    Vec g = -target.gradient(z);
    if (!field.is_constant()) {
        const Mat gmat = metric(field, z);
        const auto jac = inverse_metric_jacobian(field, z);
        for (int j = 0; j < field.dim(); ++j) {
            g[j] += -0.5 * (gmat * jac[j]).trace();
            g[j] += 0.5 * v.dot(jac[j] * v);
        }
    }
    return g;
}

} // namespace

Vec LogTarget::gradient(const Vec &z) const
{
    if (grad)
        return grad(z);
    // central differences fallback
    const double h = 1e-6 * std::max(1.0, z.norm());
    Vec g(z.size());
    Vec zp = z, zm = z;
    for (int i = 0; i < z.size(); ++i) {
        zp[i] += h;
        zm[i] -= h;
        g[i] = (value(zp) - value(zm)) / (2.0 * h);
        zp[i] = z[i];
        zm[i] = z[i];
    }
    return g;
}

LogTarget LogTarget::standard_normal()
{
    LogTarget t;
    t.value = [](const Vec &z) {
        return -0.5 * z.squaredNorm() - 0.5 * z.size() * std::log(2.0 * M_PI);
    };
    t.grad = [](const Vec &z) { return Vec(-z); };
    return t;
}

double hamiltonian(const MetricField &field, const PhasePoint &p, const LogTarget &target)
{
    if (p.position.size() != p.velocity.size())
        throw std::invalid_argument("hamiltonian: position/velocity dimension mismatch");
    const double u = -target.value(p.position);
    if (!std::isfinite(u))
        throw std::runtime_error("hamiltonian: non-finite log target value");
    const int d = field.dim();
    const double log_det_g = -log_det_inverse_metric(field, p.position);
    const Mat ginv = inverse_metric(field, p.position);
    const double k = 0.5 * (d * std::log(2.0 * M_PI) + log_det_g + p.velocity.dot(ginv * p.velocity));
    return u + k;
}

PhasePoint leapfrog_step(const MetricField &field, const PhasePoint &p, double step,
                         const LogTarget &target)
{
    if (!(step > 0.0))
        throw std::invalid_argument("leapfrog_step: step must be > 0");

    if (field.is_constant()) {
        // G^{-1} = lambda I: plain leapfrog with constant mass matrix
        const double lam = field.regularization();
        Vec v_half = p.velocity + (0.5 * step) * target.gradient(p.position);
        Vec z_new = p.position + step * lam * v_half;
        Vec v_new = v_half + (0.5 * step) * target.gradient(z_new);
        check_finite(z_new, "leapfrog_step");
        check_finite(v_new, "leapfrog_step");
        return { std::move(z_new), std::move(v_new) };
    }

    // generalized leapfrog, implicit updates resolved by fixed-point iteration
    Vec v_half = p.velocity;
    for (int it = 0; it < fixed_point_iters; ++it)
        v_half = p.velocity
            - (0.5 * step) * hamiltonian_position_grad(field, p.position, v_half, target);

    const Mat ginv_old = inverse_metric(field, p.position);
    Vec z_new = p.position;
    for (int it = 0; it < fixed_point_iters; ++it)
        z_new = p.position
            + (0.5 * step) * (ginv_old * v_half + inverse_metric(field, z_new) * v_half);

    Vec v_new = v_half - (0.5 * step) * hamiltonian_position_grad(field, z_new, v_half, target);

    check_finite(z_new, "leapfrog_step");
    check_finite(v_new, "leapfrog_step");
    return { std::move(z_new), std::move(v_new) };
}

std::vector<Vec> rhmc_chain(const MetricField &field, const Vec &init, const LogTarget &target,
                            Rng &rng, const RhmcOptions &opt)
{
    if (init.size() != field.dim())
        throw std::invalid_argument("rhmc_chain: init dimension mismatch");
    std::vector<Vec> chain;
    chain.reserve(opt.n_steps);
    Vec z = init;
    const int d = field.dim();

    for (int s = 0; s < opt.n_steps; ++s) {
        // full velocity refresh: v ~ N(0, G(z))
        const Mat g = metric(field, z);
        Eigen::LLT<Mat> llt(g);
        Vec xi(d);
        for (int i = 0; i < d; ++i)
            xi[i] = rng.normal();
        PhasePoint p { z, llt.matrixL() * xi };

        bool diverged = false;
        double h0 = 0.0, h1 = 0.0;
        PhasePoint q = p;
        try {
            h0 = hamiltonian(field, p, target);
            for (int l = 0; l < opt.n_leapfrog; ++l)
                q = leapfrog_step(field, q, opt.step, target);
            h1 = hamiltonian(field, q, target);
            if (!std::isfinite(h1))
                diverged = true;
        } catch (const std::runtime_error &) {
            diverged = true;
        }

        if (opt.metropolis) {
            const double u = rng.uniform();
            if (!diverged && std::log(u > 0.0 ? u : 1e-300) < h0 - h1)
                z = q.position;
            // otherwise keep z (reject)
        } else {
            if (diverged)
                throw std::runtime_error("rhmc_chain: trajectory diverged with metropolis off");
            z = q.position;
        }
        chain.push_back(z);
    }
    return chain;
}

Vec rhmc_sample(const MetricField &field, const Vec &init, int n_steps, double step,
                int n_leapfrog, const LogTarget &target, Rng &rng, bool metropolis)
{
    if (n_steps == 0)
        return init;
    RhmcOptions opt;
    opt.n_steps = n_steps;
    opt.step = step;
    opt.n_leapfrog = n_leapfrog;
    opt.metropolis = metropolis;
    return rhmc_chain(field, init, target, rng, opt).back();
}

} // namespace geovae::riemann
