#pragma once

#include <cmath>

#include "geovae/nets/layers.hpp"

namespace geovae::nets {

/// Adam with per-parameter moment buffers, aligned with the registration
/// order of the parameter list it was built from.
template <class T>
class Adam {
public:
    explicit Adam(const ParamRefs<T> &params, double lr = 5e-4, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8)
        : params_(params), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps)
    {
        m_.reserve(params.size());
        v_.reserve(params.size());
        for (const auto *p : params) {
            m_.emplace_back(std::vector<double>(p->value.size(), 0.0));
            v_.emplace_back(std::vector<double>(p->value.size(), 0.0));
        }
    }

    void zero_grad()
    {
        for (auto *p : params_)
            p->zero_grad();
    }

    void step(double lr_override = -1.0)
    {
        ++t_;
        const double lr = lr_override >= 0.0 ? lr_override : lr_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < params_.size(); ++i) {
            auto &p = *params_[i];
            for (std::int64_t j = 0; j < p.value.size(); ++j) {
                const double g = static_cast<double>(p.grad.v[j]);
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
                const double mhat = m_[i][j] / bc1;
                const double vhat = v_[i][j] / bc2;
                p.value.v[j] -= static_cast<T>(lr * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    double base_lr() const { return lr_; }
    int step_count() const { return t_; }

    std::vector<std::vector<double>> &first_moments() { return m_; }
    std::vector<std::vector<double>> &second_moments() { return v_; }
    void set_step_count(int t) { t_ = t; }

private:
    ParamRefs<T> params_;
    double lr_, beta1_, beta2_, eps_;
    int t_ = 0;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
};

/// Cosine annealing from the base rate toward zero across the epoch budget.
inline double cosine_annealed_lr(double base_lr, int epoch, int total_epochs)
{
    if (total_epochs <= 0)
        return base_lr;
    const double t = static_cast<double>(epoch) / total_epochs;
    return 0.5 * base_lr * (1.0 + std::cos(M_PI * t));
}

} // namespace geovae::nets
