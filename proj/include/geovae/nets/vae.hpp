#pragma once

#include "geovae/nets/model.hpp"

namespace geovae::nets {

/// Full encoder/decoder model for one cell of the model matrix. Forward
/// caches everything backward() needs; parameters are exposed through
/// params() in a stable registration order.
template <class T>
class Model {
public:
    Model(const ModelConfig &cfg, Rng &init_rng) : cfg_(cfg)
    {
        cfg_.validate();
        if (cfg_.equivariant)
            eq_enc_ = std::make_unique<EquivariantEncoder<T>>(cfg_, init_rng);
        else
            enc_ = std::make_unique<PlainEncoder<T>>(cfg_, init_rng);
        dec_ = std::make_unique<Decoder<T>>(cfg_, init_rng);
    }

    const ModelConfig &config() const { return cfg_; }

    ParamRefs<T> params()
    {
        ParamRefs<T> refs;
        if (eq_enc_)
            eq_enc_->collect(refs);
        else
            enc_->collect(refs);
        dec_->collect(refs);
        return refs;
    }

    std::int64_t parameter_count()
    {
        std::int64_t n = 0;
        for (auto *p : params())
            n += p->value.size();
        return n;
    }

    /// Deterministic encoding (posterior parameters, no sampling).
    LatentHeadOutput<T> encode(const Tensor<T> &x)
    {
        return encode_impl(x).head;
    }

    /// Decode latents; poses rotate each decoded frame (equivariant models).
    Tensor<T> decode(const Tensor<T> &z, const std::vector<int> &pose = {})
    {
        Tensor<T> x = dec_->forward(z);
        if (cfg_.equivariant && !pose.empty())
            x = rotate_batch(x, pose, false);
        return x;
    }

    ModelOutput<T> forward(const Tensor<T> &x, Rng &rng, bool train)
    {
        auto enc = encode_impl(x);
        const int b = x.dim(0);
        const int m = cfg_.latent_dim;

        ModelOutput<T> out;
        out.head = std::move(enc.head);

        // draw or copy the latent code
        out.z = Tensor<T>({ b, m });
        draws_.clear();
        eps_ = Tensor<T>();
        if (!cfg_.variational || !train) {
            out.z = out.head.mu;
        } else if (cfg_.family == Family::gaussian) {
            eps_ = Tensor<T>({ b, m });
            for (int i = 0; i < b; ++i)
                for (int d = 0; d < m; ++d) {
                    const double e = rng.normal();
                    eps_.v[static_cast<std::size_t>(i) * m + d] = static_cast<T>(e);
                    out.z.v[static_cast<std::size_t>(i) * m + d] =
                        out.head.mu.v[static_cast<std::size_t>(i) * m + d]
                        + static_cast<T>(out.head.scale[i] * e);
                }
        } else {
            draws_.reserve(b);
            for (int i = 0; i < b; ++i) {
                Eigen::VectorXd mu(m);
                for (int d = 0; d < m; ++d)
                    mu[d] = static_cast<double>(
                        out.head.mu.v[static_cast<std::size_t>(i) * m + d]);
                sphere::VmfParams params(sphere::UnitVector::normalized(mu),
                                         out.head.scale[i]);
                draws_.push_back(sphere::sample_vmf_reparam(params, rng));
                for (int d = 0; d < m; ++d)
                    out.z.v[static_cast<std::size_t>(i) * m + d] =
                        static_cast<T>(draws_.back().z[d]);
            }
        }

        // decode, re-applying the estimated pose for equivariant models
        Tensor<T> x_dec = dec_->forward(out.z);
        out.x_hat = cfg_.equivariant ? rotate_batch(x_dec, out.head.pose, false) : x_dec;

        // losses are computed against the cached copies so that backward()
        // never depends on the caller keeping the returned tensors alive
        x_cache_ = x;
        cached_ = std::make_unique<ModelOutput<T>>(std::move(out));
        ModelOutput<T> &co = *cached_;

        co.loss.reconstruction = recon_.forward(x_cache_, co.x_hat);
        co.loss.spread_weight = cfg_.spread_weight;
        if (cfg_.variational) {
            double reg = 0.0;
            for (int i = 0; i < b; ++i) {
                if (cfg_.family == Family::gaussian) {
                    Eigen::VectorXd mu(m);
                    for (int d = 0; d < m; ++d)
                        mu[d] = static_cast<double>(
                            co.head.mu.v[static_cast<std::size_t>(i) * m + d]);
                    reg += kl_gaussian_standard(mu, co.head.scale[i]);
                } else {
                    reg += sphere::kl_vmf_uniform(sphere::VmfParams(
                        sphere::UnitVector::basis(m), co.head.scale[i]));
                }
            }
            co.loss.regularization = reg / b;
        }
        if (cfg_.spread_weight > 0.0)
            co.loss.spread = spread_.forward(co.z);
        co.loss.finalize();
        return co;
    }

    /// Backpropagate the cached forward pass; parameter gradients accumulate.
    void backward()
    {
        if (!cached_)
            throw std::logic_error("Model::backward: no cached forward pass");
        const ModelOutput<T> &out = *cached_;
        const int b = out.z.dim(0), m = cfg_.latent_dim;

        Tensor<T> dxhat = recon_.backward();
        if (cfg_.equivariant)
            dxhat = rotate_batch(dxhat, out.head.pose, true);
        Tensor<T> dz = dec_->backward(dxhat);

        if (cfg_.spread_weight > 0.0) {
            Tensor<T> ds = spread_.backward(out.z);
            for (std::int64_t i = 0; i < dz.size(); ++i)
                dz.v[i] += static_cast<T>(cfg_.spread_weight) * ds.v[i];
        }

        Tensor<T> dmu_can({ b, m });
        Tensor<T> dscale_raw({ b, 1 });

        if (!cfg_.variational) {
            if (cfg_.family == Family::spherical)
                dmu_can = normalize_backward(dz);
            else
                dmu_can = dz;
        } else if (cfg_.family == Family::gaussian) {
            dmu_can = dz;
            for (int i = 0; i < b; ++i) {
                double dsigma = 0.0;
                for (int d = 0; d < m; ++d)
                    dsigma += static_cast<double>(dz.v[static_cast<std::size_t>(i) * m + d])
                        * static_cast<double>(eps_.v[static_cast<std::size_t>(i) * m + d]);
                // KL term: d/dmu = mu/B, d/dsigma = m(sigma - 1/sigma)/B
                const double sigma = out.head.scale[i];
                for (int d = 0; d < m; ++d)
                    dmu_can.v[static_cast<std::size_t>(i) * m + d] += static_cast<T>(
                        static_cast<double>(out.head.mu.v[static_cast<std::size_t>(i) * m + d])
                        / b);
                dsigma += m * (sigma - 1.0 / sigma) / b;
                // sigma = softplus(raw) + eps_floor
                dscale_raw.v[i] = static_cast<T>(dsigma * sigmoid(scale_raw_cache_[i]));
            }
        } else {
            // variational spherical: pathwise gradient through the draw
            Tensor<T> dmu_unit({ b, m });
            for (int i = 0; i < b; ++i) {
                Eigen::VectorXd mu(m), dz_i(m);
                for (int d = 0; d < m; ++d) {
                    mu[d] = static_cast<double>(
                        out.head.mu.v[static_cast<std::size_t>(i) * m + d]);
                    dz_i[d] = static_cast<double>(dz.v[static_cast<std::size_t>(i) * m + d]);
                }
                sphere::VmfParams params(sphere::UnitVector { mu }, out.head.scale[i]);
                Eigen::VectorXd dmu;
                double dkappa = 0.0;
                sphere::vmf_reparam_backward(draws_[i], params, dz_i, &dmu, &dkappa);
                dkappa += sphere::kl_vmf_uniform_dkappa(m, out.head.scale[i]) / b;
                for (int d = 0; d < m; ++d)
                    dmu_unit.v[static_cast<std::size_t>(i) * m + d] = static_cast<T>(dmu[d]);
                // kappa = max(softplus(raw) + 1, kappa_min): clamped heads get
                // no gradient
                const bool clamped = out.head.scale[i] <= cfg_.kappa_min;
                dscale_raw.v[i] =
                    clamped ? T(0) : static_cast<T>(dkappa * sigmoid(scale_raw_cache_[i]));
            }
            dmu_can = normalize_backward(dmu_unit);
        }

        if (cfg_.equivariant) {
            // undo the canonicalization rotation: d(mu_raw) = rho(+theta) d(mu_can)
            for (int i = 0; i < b; ++i)
                equi::apply_block_rotation(dmu_can.data() + static_cast<std::size_t>(i) * m, m,
                                           2.0 * M_PI * out.head.pose[i] / cfg_.group_order);
            eq_enc_->backward(dmu_can, dscale_raw);
        } else {
            enc_->backward(dmu_can, dscale_raw);
        }
        cached_.reset();
    }

    const LossBreakdown &last_loss() const
    {
        if (!cached_)
            throw std::logic_error("Model::last_loss: no cached forward pass");
        return cached_->loss;
    }

private:
    struct EncodeResult {
        LatentHeadOutput<T> head;
    };

    EncodeResult encode_impl(const Tensor<T> &x)
    {
        const int b = x.dim(0), m = cfg_.latent_dim;
        Tensor<T> mu_raw, scale_raw;
        std::vector<int> pose;
        if (cfg_.equivariant) {
            auto r = eq_enc_->forward(x);
            mu_raw = std::move(r.mu_raw);
            scale_raw = std::move(r.scale_raw);
            pose = std::move(r.pose);
            // canonicalize before any normalization
            for (int i = 0; i < b; ++i)
                equi::apply_block_rotation(mu_raw.data() + static_cast<std::size_t>(i) * m, m,
                                           -2.0 * M_PI * pose[i] / cfg_.group_order);
        } else {
            auto [mr, sr] = enc_->forward(x);
            mu_raw = std::move(mr);
            scale_raw = std::move(sr);
        }

        EncodeResult res;
        res.head.pose = std::move(pose);
        scale_raw_cache_.resize(b);
        for (int i = 0; i < b; ++i)
            scale_raw_cache_[i] = static_cast<double>(scale_raw.v[i]);

        res.head.scale.resize(b);
        if (cfg_.family == Family::gaussian) {
            res.head.mu = mu_raw;
            for (int i = 0; i < b; ++i)
                res.head.scale[i] = softplus(scale_raw_cache_[i]) + 1e-4;
        } else {
            mu_raw_norms_.resize(b);
            mu_raw_cache_ = mu_raw;
            res.head.mu = Tensor<T>({ b, m });
            for (int i = 0; i < b; ++i) {
                double n2 = 0.0;
                for (int d = 0; d < m; ++d) {
                    const double v =
                        static_cast<double>(mu_raw.v[static_cast<std::size_t>(i) * m + d]);
                    n2 += v * v;
                }
                const double n = std::sqrt(std::max(n2, 1e-24));
                mu_raw_norms_[i] = n;
                for (int d = 0; d < m; ++d)
                    res.head.mu.v[static_cast<std::size_t>(i) * m + d] =
                        static_cast<T>(mu_raw.v[static_cast<std::size_t>(i) * m + d] / n);
            }
            for (int i = 0; i < b; ++i) {
                if (!cfg_.variational)
                    res.head.scale[i] = cfg_.kappa_fixed;
                else
                    res.head.scale[i] =
                        std::max(softplus(scale_raw_cache_[i]) + 1.0, cfg_.kappa_min);
            }
        }
        return res;
    }

    /// gradient of row-normalized mu w.r.t. the raw head output
    Tensor<T> normalize_backward(const Tensor<T> &dmu_unit) const
    {
        const int b = dmu_unit.dim(0), m = dmu_unit.dim(1);
        Tensor<T> draw({ b, m });
        for (int i = 0; i < b; ++i) {
            const double n = mu_raw_norms_[i];
            double dot = 0.0;
            for (int d = 0; d < m; ++d)
                dot += static_cast<double>(dmu_unit.v[static_cast<std::size_t>(i) * m + d])
                    * static_cast<double>(mu_raw_cache_.v[static_cast<std::size_t>(i) * m + d])
                    / n;
            for (int d = 0; d < m; ++d) {
                const double unit =
                    static_cast<double>(mu_raw_cache_.v[static_cast<std::size_t>(i) * m + d]) / n;
                draw.v[static_cast<std::size_t>(i) * m + d] = static_cast<T>(
                    (static_cast<double>(dmu_unit.v[static_cast<std::size_t>(i) * m + d])
                     - dot * unit)
                    / n);
            }
        }
        return draw;
    }

    Tensor<T> rotate_batch(const Tensor<T> &x, const std::vector<int> &pose, bool transpose)
    {
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2);
        Tensor<T> y(x.shape);
        const std::size_t hw = static_cast<std::size_t>(h) * h;
        for (int i = 0; i < b; ++i) {
            const auto &plan = equi::gdetail::kernel_plan(h, cfg_.group_order, pose[i]);
            for (int ch = 0; ch < c; ++ch) {
                const T *src = x.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
                T *dst = y.data() + (static_cast<std::size_t>(i) * c + ch) * hw;
                if (transpose)
                    plan.apply_transposed(src, dst);
                else
                    plan.apply(src, dst);
            }
        }
        return y;
    }

    static double softplus(double x)
    {
        return x > 30.0 ? x : std::log1p(std::exp(x));
    }
    static double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

    ModelConfig cfg_;
    std::unique_ptr<PlainEncoder<T>> enc_;
    std::unique_ptr<EquivariantEncoder<T>> eq_enc_;
    std::unique_ptr<Decoder<T>> dec_;

    MaskedReconstructionLoss<T> recon_ { ModelConfig::mask_border };
    SpreadLoss<T> spread_;

    // cached forward state for backward()
    std::unique_ptr<ModelOutput<T>> cached_;
    Tensor<T> x_cache_;
    std::vector<sphere::VmfDraw> draws_;
    Tensor<T> eps_;
    std::vector<double> scale_raw_cache_;
    std::vector<double> mu_raw_norms_;
    Tensor<T> mu_raw_cache_;
};

} // namespace geovae::nets
