#pragma once

#include "geovae/nets/tensor.hpp"
#include "geovae/sphere/vmf.hpp"

namespace geovae::nets {

/// reconstruction + regularization + spread_weight * spread, the decomposed
/// training objective. total is computed as exactly that sum.
struct LossBreakdown {
    double reconstruction = 0.0;
    double regularization = 0.0;
    double spread = 0.0;
    double spread_weight = 0.0;
    double total = 0.0;

    void finalize() { total = reconstruction + regularization + spread_weight * spread; }
};

/// Sum-squared error over the central (H-2*border) square, summed over
/// channels, averaged over the batch. The 2px border is the padding frame
/// that rotation-equivariant models cannot reconstruct fairly.
template <class T>
class MaskedReconstructionLoss {
public:
    explicit MaskedReconstructionLoss(int border = 2) : border_(border) {}

    double forward(const Tensor<T> &x, const Tensor<T> &x_hat)
    {
        if (x.shape != x_hat.shape)
            throw std::invalid_argument("masked_reconstruction_loss: shape mismatch");
        x_ = &x;
        x_hat_ = &x_hat;
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        double acc = 0.0;
        for (int i = 0; i < b; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int y = border_; y < h - border_; ++y)
                    for (int xx = border_; xx < w - border_; ++xx) {
                        const std::size_t idx =
                            ((static_cast<std::size_t>(i) * c + ch) * h + y) * w + xx;
                        const double d =
                            static_cast<double>(x_hat.v[idx]) - static_cast<double>(x.v[idx]);
                        acc += d * d;
                    }
        return acc / b;
    }

    /// dL/dx_hat
    Tensor<T> backward() const
    {
        const Tensor<T> &x = *x_, &x_hat = *x_hat_;
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        Tensor<T> g(x.shape);
        const T scale = static_cast<T>(2.0 / b);
        for (int i = 0; i < b; ++i)
            for (int ch = 0; ch < c; ++ch)
                for (int y = border_; y < h - border_; ++y)
                    for (int xx = border_; xx < w - border_; ++xx) {
                        const std::size_t idx =
                            ((static_cast<std::size_t>(i) * c + ch) * h + y) * w + xx;
                        g.v[idx] = scale * (x_hat.v[idx] - x.v[idx]);
                    }
        return g;
    }

private:
    int border_;
    const Tensor<T> *x_ = nullptr;
    const Tensor<T> *x_hat_ = nullptr;
};

/// KL( N(mu, sigma^2 I) || N(0, I) ) with an isotropic scalar sigma per
/// sample: 1/2 sum_i (mu_i^2 + sigma^2 - 1 - log sigma^2).
inline double kl_gaussian_standard(const Eigen::VectorXd &mu, double sigma)
{
    if (!(sigma > 0.0))
        throw std::invalid_argument("kl_gaussian_standard: sigma must be > 0");
    const double m = static_cast<double>(mu.size());
    const double s2 = sigma * sigma;
    const double kl = 0.5 * (mu.squaredNorm() + m * (s2 - 1.0) - m * std::log(s2));
    return kl > 0.0 ? kl : 0.0;
}

/// Mean over ordered pairs i != j of z_i . z_j; equals (|sum z|^2 - N)/(N(N-1)).
/// Minimized when the batch sums to zero, i.e. points spread over the sphere.
template <class T>
class SpreadLoss {
public:
    double forward(const Tensor<T> &z)
    {
        const int b = z.dim(0), m = z.dim(1);
        if (b < 2)
            throw std::invalid_argument("spread_loss: batch size must be >= 2");
        b_ = b;
        m_ = m;
        sum_.assign(m, 0.0);
        for (int i = 0; i < b; ++i)
            for (int d = 0; d < m; ++d)
                sum_[d] += static_cast<double>(z.v[static_cast<std::size_t>(i) * m + d]);
        double s2 = 0.0;
        for (double s : sum_)
            s2 += s * s;
        return (s2 - b) / (static_cast<double>(b) * (b - 1));
    }

    /// dL/dz
    Tensor<T> backward(const Tensor<T> &z) const
    {
        Tensor<T> g(z.shape);
        const double scale = 2.0 / (static_cast<double>(b_) * (b_ - 1));
        for (int i = 0; i < b_; ++i)
            for (int d = 0; d < m_; ++d) {
                const std::size_t idx = static_cast<std::size_t>(i) * m_ + d;
                g.v[idx] = static_cast<T>(scale * (sum_[d] - static_cast<double>(z.v[idx])));
            }
        return g;
    }

private:
    int b_ = 0, m_ = 0;
    std::vector<double> sum_;
};

/// Softmax cross entropy with integer labels, batch mean.
template <class T>
class CrossEntropyLoss {
public:
    double forward(const Tensor<T> &logits, const std::vector<int> &labels)
    {
        const int b = logits.dim(0), k = logits.dim(1);
        if (static_cast<int>(labels.size()) != b)
            throw std::invalid_argument("cross_entropy: label count mismatch");
        probs_ = Tensor<T>(logits.shape);
        labels_ = labels;
        double loss = 0.0;
        for (int i = 0; i < b; ++i) {
            const T *row = logits.data() + static_cast<std::size_t>(i) * k;
            T mx = row[0];
            for (int j = 1; j < k; ++j)
                mx = std::max(mx, row[j]);
            double denom = 0.0;
            for (int j = 0; j < k; ++j)
                denom += std::exp(static_cast<double>(row[j] - mx));
            for (int j = 0; j < k; ++j)
                probs_.v[static_cast<std::size_t>(i) * k + j] =
                    static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / denom);
            loss -= static_cast<double>(row[labels[i]] - mx) - std::log(denom);
        }
        return loss / b;
    }

    Tensor<T> backward() const
    {
        const int b = probs_.dim(0), k = probs_.dim(1);
        Tensor<T> g(probs_.shape);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < k; ++j) {
                const std::size_t idx = static_cast<std::size_t>(i) * k + j;
                g.v[idx] = (probs_.v[idx] - (labels_[i] == j ? T(1) : T(0))) / static_cast<T>(b);
            }
        return g;
    }

private:
    Tensor<T> probs_;
    std::vector<int> labels_;
};

} // namespace geovae::nets
