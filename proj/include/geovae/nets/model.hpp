#pragma once

#include <array>
#include <memory>
#include <optional>

#include "geovae/equivariance/group.hpp"
#include "geovae/nets/layers.hpp"
#include "geovae/nets/losses.hpp"
#include "geovae/sphere/vmf.hpp"

namespace geovae::nets {

enum class Family { gaussian, spherical };

/// Model matrix cell: family x variational x equivariant, plus the latent
/// size and the stability/regularization knobs.
struct ModelConfig {
    Family family = Family::gaussian;
    bool variational = true;
    bool equivariant = false;
    int latent_dim = 64;
    double kappa_min = 100.0;   ///< clamp floor for variational spherical heads
    double kappa_fixed = 1000.0; ///< point-mass concentration of the spherical AE
    int group_order = 8;
    double spread_weight = 0.0;
    int channels = 3;            ///< 3 for RGB tiles, 1 for grayscale toys
    std::array<int, 3> widths { 32, 64, 128 };

    static constexpr int image_size = 68; ///< 64 tiles padded by 2 per side
    static constexpr int mask_border = 2;

    std::string tag() const;
    void validate() const; ///< throws std::invalid_argument with the offending key
};

/// Per-batch encoder outputs after the head transforms.
template <class T>
struct LatentHeadOutput {
    Tensor<T> mu;              ///< [B, m]; unit rows for spherical families
    std::vector<double> scale; ///< sigma or kappa per sample
    std::vector<int> pose;     ///< group element per sample (equivariant only)
};

template <class T>
struct ModelOutput {
    Tensor<T> x_hat;
    LatentHeadOutput<T> head;
    Tensor<T> z;
    LossBreakdown loss;
};

namespace mdetail {

// ConvNeXt-style block: k5 conv, then a layer-normalized pointwise sandwich
// with GELU, residual around the sandwich.
template <class T>
struct ConvBlock {
    Conv2d<T> conv;
    LayerNormChannel<T> ln;
    Conv2d<T> pw1, pw2;
    Gelu<T> act;

    ConvBlock() = default;
    ConvBlock(const std::string &name, int in, int out, int pad, Rng &rng)
        : conv(name + ".conv", in, out, 5, pad, rng)
        , ln(name + ".ln", out)
        , pw1(name + ".pw1", out, 2 * out, 1, 0, rng)
        , pw2(name + ".pw2", 2 * out, out, 1, 0, rng)
    {
    }

    void collect(ParamRefs<T> &into)
    {
        conv.collect(into);
        ln.collect(into);
        pw1.collect(into);
        pw2.collect(into);
    }

    Tensor<T> forward(const Tensor<T> &x)
    {
        Tensor<T> h = conv.forward(x);
        Tensor<T> r = pw2.forward(act.forward(pw1.forward(ln.forward(h))));
        r += h;
        return r;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        Tensor<T> dh = ln.backward(pw1.backward(act.backward(pw2.backward(dy))));
        dh += dy;
        return conv.backward(dh);
    }
};

// group-conv counterpart of ConvBlock (used by the equivariant encoder)
template <class T>
struct GroupBlock {
    equi::GroupConv<T> conv;
    LayerNormChannel<T> ln;
    equi::GroupConv<T> pw1, pw2;
    Gelu<T> act;

    GroupBlock() = default;
    GroupBlock(const std::string &name, int in, int out, int group_order, Rng &rng)
        : conv(name + ".conv", in, out, 5, group_order, 0, rng)
        , ln(name + ".ln", out)
        , pw1(name + ".pw1", out, 2 * out, 1, group_order, 0, rng)
        , pw2(name + ".pw2", 2 * out, out, 1, group_order, 0, rng)
    {
    }

    void collect(ParamRefs<T> &into)
    {
        conv.collect(into);
        ln.collect(into);
        pw1.collect(into);
        pw2.collect(into);
    }

    equi::GroupFeatureMap<T> forward(const equi::GroupFeatureMap<T> &x)
    {
        equi::GroupFeatureMap<T> h = conv.forward(x);
        equi::GroupFeatureMap<T> t1 = h;
        t1.t = ln.forward(h.t);
        equi::GroupFeatureMap<T> r = pw2.forward(fmap(act, pw1.forward(t1)));
        r.t += h.t;
        return r;
    }

    equi::GroupFeatureMap<T> backward(const equi::GroupFeatureMap<T> &dy)
    {
        equi::GroupFeatureMap<T> dh = pw2.backward(dy);
        dh.t = act.backward(dh.t);
        dh = pw1.backward(dh);
        dh.t = ln.backward(dh.t);
        dh.t += dy.t;
        return conv.backward(dh);
    }

private:
    equi::GroupFeatureMap<T> fmap(Gelu<T> &g, equi::GroupFeatureMap<T> x)
    {
        x.t = g.forward(x.t);
        return x;
    }
};

// pool a group feature map spatially by viewing it as [B, C*N, H, W]
template <class T>
equi::GroupFeatureMap<T> pool_group(MaxPool2<T> &pool, const equi::GroupFeatureMap<T> &x)
{
    const int b = x.t.dim(0), c = x.t.dim(1), n = x.t.dim(2), h = x.t.dim(3), w = x.t.dim(4);
    equi::GroupFeatureMap<T> y;
    y.group_order = x.group_order;
    y.t = pool.forward(x.t.reshaped({ b, c * n, h, w })).reshaped({ b, c, n, h / 2, w / 2 });
    return y;
}

template <class T>
equi::GroupFeatureMap<T> pool_group_backward(MaxPool2<T> &pool, const equi::GroupFeatureMap<T> &dy)
{
    const int b = dy.t.dim(0), c = dy.t.dim(1), n = dy.t.dim(2), h = dy.t.dim(3), w = dy.t.dim(4);
    equi::GroupFeatureMap<T> dx;
    dx.group_order = dy.group_order;
    dx.t = pool.backward(dy.t.reshaped({ b, c * n, h, w }))
               .reshaped({ b, c, n, 2 * h, 2 * w });
    return dx;
}

} // namespace mdetail

// ------------------------------------------------------------ PlainEncoder

/// Three valid k5 ConvNeXt blocks with stride-2 pooling: 68 -> 64 -> 32 ->
/// 28 -> 14 -> 10 -> 5, then linear heads on the flattened features.
template <class T>
class PlainEncoder {
public:
    PlainEncoder() = default;
    PlainEncoder(const ModelConfig &cfg, Rng &rng)
        : b1_("encoder.b1", cfg.channels, cfg.widths[0], 0, rng)
        , b2_("encoder.b2", cfg.widths[0], cfg.widths[1], 0, rng)
        , b3_("encoder.b3", cfg.widths[1], cfg.widths[2], 0, rng)
        , head_mu_("encoder.head_mu", cfg.widths[2] * 25, cfg.latent_dim, rng)
        , head_scale_("encoder.head_scale", cfg.widths[2] * 25, 1, rng)
        , feat_dim_(cfg.widths[2] * 25)
    {
    }

    void collect(ParamRefs<T> &into)
    {
        b1_.collect(into);
        b2_.collect(into);
        b3_.collect(into);
        head_mu_.collect(into);
        head_scale_.collect(into);
    }

    void trunk_collect(ParamRefs<T> &into)
    {
        b1_.collect(into);
        b2_.collect(into);
        b3_.collect(into);
    }

    /// returns (mu_raw [B,m], scale_raw [B,1])
    std::pair<Tensor<T>, Tensor<T>> forward(const Tensor<T> &x)
    {
        Tensor<T> f = trunk(x);
        return { head_mu_.forward(f), head_scale_.forward(f) };
    }

    Tensor<T> trunk(const Tensor<T> &x)
    {
        Tensor<T> h = p1_.forward(b1_.forward(x));
        h = p2_.forward(b2_.forward(h));
        h = p3_.forward(b3_.forward(h));
        const int b = h.dim(0);
        return h.reshaped({ b, feat_dim_ });
    }

    Tensor<T> backward(const Tensor<T> &dmu_raw, const Tensor<T> &dscale_raw)
    {
        Tensor<T> df = head_mu_.backward(dmu_raw);
        df += head_scale_.backward(dscale_raw);
        return trunk_backward(df);
    }

    Tensor<T> trunk_backward(const Tensor<T> &dfeat)
    {
        const int b = dfeat.dim(0);
        const int w3 = feat_dim_ / 25;
        Tensor<T> dh = dfeat.reshaped({ b, w3, 5, 5 });
        dh = b3_.backward(p3_.backward(dh));
        dh = b2_.backward(p2_.backward(dh));
        return b1_.backward(p1_.backward(dh));
    }

    int feature_dim() const { return feat_dim_; }

private:
    mdetail::ConvBlock<T> b1_, b2_, b3_;
    MaxPool2<T> p1_, p2_, p3_;
    Linear<T> head_mu_, head_scale_;
    int feat_dim_ = 0;
};

// ------------------------------------------------------- EquivariantEncoder

/// Lifting + two group-conv blocks with the same spatial flow as the plain
/// encoder; heads read out invariant (scale) and frequency-1 (mu) group
/// statistics, plus the group-energy pose.
template <class T>
class EquivariantEncoder {
public:
    EquivariantEncoder() = default;
    EquivariantEncoder(const ModelConfig &cfg, Rng &rng)
        : n_(cfg.group_order)
        , lift_("encoder.lift", cfg.channels, cfg.widths[0], 5, cfg.group_order, rng)
        , ln1_("encoder.b1.ln", cfg.widths[0])
        , pw11_("encoder.b1.pw1", cfg.widths[0], 2 * cfg.widths[0], 1, cfg.group_order, 0, rng)
        , pw12_("encoder.b1.pw2", 2 * cfg.widths[0], cfg.widths[0], 1, cfg.group_order, 0, rng)
        , b2_("encoder.b2", cfg.widths[0], cfg.widths[1], cfg.group_order, rng)
        , b3_("encoder.b3", cfg.widths[1], cfg.widths[2], cfg.group_order, rng)
        , head_scale_("encoder.head_scale", cfg.widths[2], 1, rng)
        , w3_(cfg.widths[2])
        , m_(cfg.latent_dim)
    {
        head_mu_re_.init("encoder.head_mu.re", { m_ / 2, w3_ });
        head_mu_im_.init("encoder.head_mu.im", { m_ / 2, w3_ });
        detail::he_normal(head_mu_re_.value, w3_, rng);
        detail::he_normal(head_mu_im_.value, w3_, rng);
    }

    void collect(ParamRefs<T> &into)
    {
        lift_.collect(into);
        ln1_.collect(into);
        pw11_.collect(into);
        pw12_.collect(into);
        b2_.collect(into);
        b3_.collect(into);
        into.push_back(&head_mu_re_);
        into.push_back(&head_mu_im_);
        head_scale_.collect(into);
    }

    /// returns (mu_raw [B,m] in the *uncanonicalized* frame, scale_raw [B,1],
    /// pose per sample)
    struct Output {
        Tensor<T> mu_raw;
        Tensor<T> scale_raw;
        std::vector<int> pose;
    };

    Output forward(const Tensor<T> &x)
    {
        feat_ = trunk(x);
        const int b = feat_.t.dim(0);
        const int h = feat_.t.dim(3), w = feat_.t.dim(4);
        const std::size_t hw = static_cast<std::size_t>(h) * w;

        // spatial sums per (sample, channel, group element)
        psum_.assign(static_cast<std::size_t>(b) * w3_ * n_, 0.0);
        for (int i = 0; i < b; ++i)
            for (int c = 0; c < w3_; ++c)
                for (int g = 0; g < n_; ++g) {
                    const T *src = feat_.t.data()
                        + (((static_cast<std::size_t>(i) * w3_ + c) * n_ + g) * hw);
                    double acc = 0.0;
                    for (std::size_t p = 0; p < hw; ++p)
                        acc += static_cast<double>(src[p]);
                    psum_[(static_cast<std::size_t>(i) * w3_ + c) * n_ + g] = acc;
                }

        // frequency-1 components over the group axis
        a_.assign(static_cast<std::size_t>(b) * w3_, 0.0);
        bb_.assign(static_cast<std::size_t>(b) * w3_, 0.0);
        for (int i = 0; i < b; ++i)
            for (int c = 0; c < w3_; ++c) {
                double ca = 0.0, cb = 0.0;
                for (int g = 0; g < n_; ++g) {
                    const double p = psum_[(static_cast<std::size_t>(i) * w3_ + c) * n_ + g];
                    ca += p * std::cos(2.0 * M_PI * g / n_);
                    cb += p * std::sin(2.0 * M_PI * g / n_);
                }
                a_[static_cast<std::size_t>(i) * w3_ + c] = ca;
                bb_[static_cast<std::size_t>(i) * w3_ + c] = cb;
            }

        Output out;
        out.mu_raw = Tensor<T>({ b, m_ });
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < m_ / 2; ++j) {
                double u = 0.0, v = 0.0;
                for (int c = 0; c < w3_; ++c) {
                    const double wre = head_mu_re_.value.v[static_cast<std::size_t>(j) * w3_ + c];
                    const double wim = head_mu_im_.value.v[static_cast<std::size_t>(j) * w3_ + c];
                    const double av = a_[static_cast<std::size_t>(i) * w3_ + c];
                    const double bv = bb_[static_cast<std::size_t>(i) * w3_ + c];
                    u += wre * av - wim * bv;
                    v += wre * bv + wim * av;
                }
                out.mu_raw.v[static_cast<std::size_t>(i) * m_ + 2 * j] = static_cast<T>(u);
                out.mu_raw.v[static_cast<std::size_t>(i) * m_ + 2 * j + 1] = static_cast<T>(v);
            }

        // invariant features for the scale head: group-and-space mean
        Tensor<T> inv({ b, w3_ });
        for (int i = 0; i < b; ++i)
            for (int c = 0; c < w3_; ++c) {
                double acc = 0.0;
                for (int g = 0; g < n_; ++g)
                    acc += psum_[(static_cast<std::size_t>(i) * w3_ + c) * n_ + g];
                inv.v[static_cast<std::size_t>(i) * w3_ + c] =
                    static_cast<T>(acc / (static_cast<double>(n_) * hw));
            }
        out.scale_raw = head_scale_.forward(inv);

        // group-energy pose per sample (ties resolve to the lowest index)
        out.pose.resize(b);
        for (int i = 0; i < b; ++i) {
            double best = -1.0;
            int best_g = 0;
            for (int g = 0; g < n_; ++g) {
                double e = 0.0;
                for (int c = 0; c < w3_; ++c) {
                    const T *src = feat_.t.data()
                        + (((static_cast<std::size_t>(i) * w3_ + c) * n_ + g) * hw);
                    for (std::size_t p = 0; p < hw; ++p)
                        e += static_cast<double>(src[p]) * static_cast<double>(src[p]);
                }
                if (e > best + 1e-12 * std::max(1.0, std::abs(best))) {
                    best = e;
                    best_g = g;
                }
            }
            out.pose[i] = best_g;
        }
        return out;
    }

    Tensor<T> backward(const Tensor<T> &dmu_raw, const Tensor<T> &dscale_raw)
    {
        const int b = feat_.t.dim(0);
        const int h = feat_.t.dim(3), w = feat_.t.dim(4);
        const std::size_t hw = static_cast<std::size_t>(h) * w;

        // head gradients back to the frequency components
        std::vector<double> da(static_cast<std::size_t>(b) * w3_, 0.0);
        std::vector<double> db(static_cast<std::size_t>(b) * w3_, 0.0);
        for (int i = 0; i < b; ++i)
            for (int j = 0; j < m_ / 2; ++j) {
                const double du =
                    static_cast<double>(dmu_raw.v[static_cast<std::size_t>(i) * m_ + 2 * j]);
                const double dv =
                    static_cast<double>(dmu_raw.v[static_cast<std::size_t>(i) * m_ + 2 * j + 1]);
                for (int c = 0; c < w3_; ++c) {
                    const std::size_t wi = static_cast<std::size_t>(j) * w3_ + c;
                    const double wre = head_mu_re_.value.v[wi];
                    const double wim = head_mu_im_.value.v[wi];
                    const double av = a_[static_cast<std::size_t>(i) * w3_ + c];
                    const double bv = bb_[static_cast<std::size_t>(i) * w3_ + c];
                    head_mu_re_.grad.v[wi] += static_cast<T>(du * av + dv * bv);
                    head_mu_im_.grad.v[wi] += static_cast<T>(-du * bv + dv * av);
                    da[static_cast<std::size_t>(i) * w3_ + c] += du * wre + dv * wim;
                    db[static_cast<std::size_t>(i) * w3_ + c] += -du * wim + dv * wre;
                }
            }

        Tensor<T> dinv = head_scale_.backward(dscale_raw);

        // scatter back over group and space (both reductions were sums)
        equi::GroupFeatureMap<T> dfeat;
        dfeat.group_order = n_;
        dfeat.t = Tensor<T>(feat_.t.shape);
        for (int i = 0; i < b; ++i)
            for (int c = 0; c < w3_; ++c) {
                const double dinv_c =
                    static_cast<double>(dinv.v[static_cast<std::size_t>(i) * w3_ + c])
                    / (static_cast<double>(n_) * hw);
                const double dac = da[static_cast<std::size_t>(i) * w3_ + c];
                const double dbc = db[static_cast<std::size_t>(i) * w3_ + c];
                for (int g = 0; g < n_; ++g) {
                    const double dpsum = dac * std::cos(2.0 * M_PI * g / n_)
                        + dbc * std::sin(2.0 * M_PI * g / n_) + dinv_c;
                    T *dst = dfeat.t.data()
                        + (((static_cast<std::size_t>(i) * w3_ + c) * n_ + g) * hw);
                    for (std::size_t p = 0; p < hw; ++p)
                        dst[p] = static_cast<T>(dpsum);
                }
            }
        return trunk_backward(dfeat);
    }

    equi::GroupFeatureMap<T> trunk(const Tensor<T> &x)
    {
        equi::GroupFeatureMap<T> h = lift_.forward(x);
        lift_out_shape_ = h.t.shape;
        equi::GroupFeatureMap<T> t1 = h;
        t1.t = ln1_.forward(h.t);
        equi::GroupFeatureMap<T> r = pw11_.forward(t1);
        r.t = act1_.forward(r.t);
        r = pw12_.forward(r);
        r.t += h.t;
        h = mdetail::pool_group(p1_, r);
        h = mdetail::pool_group(p2_, b2_.forward(h));
        h = mdetail::pool_group(p3_, b3_.forward(h));
        return h;
    }

    Tensor<T> trunk_backward(const equi::GroupFeatureMap<T> &dfeat)
    {
        equi::GroupFeatureMap<T> dh = b3_.backward(mdetail::pool_group_backward(p3_, dfeat));
        dh = b2_.backward(mdetail::pool_group_backward(p2_, dh));
        dh = mdetail::pool_group_backward(p1_, dh);

        // block 1 residual
        equi::GroupFeatureMap<T> dr = pw12_.backward(dh);
        dr.t = act1_.backward(dr.t);
        dr = pw11_.backward(dr);
        dr.t = ln1_.backward(dr.t);
        dr.t += dh.t;
        return lift_.backward(dr);
    }

    const equi::GroupFeatureMap<T> &features() const { return feat_; }
    int group_order() const { return n_; }
    int feature_dim() const { return w3_; }

private:
    int n_ = 8;
    equi::LiftingConv<T> lift_;
    LayerNormChannel<T> ln1_;
    equi::GroupConv<T> pw11_, pw12_;
    Gelu<T> act1_;
    mdetail::GroupBlock<T> b2_, b3_;
    MaxPool2<T> p1_, p2_, p3_;
    Param<T> head_mu_re_, head_mu_im_;
    Linear<T> head_scale_;
    int w3_ = 0, m_ = 0;

    equi::GroupFeatureMap<T> feat_;
    std::vector<int> lift_out_shape_;
    std::vector<double> psum_, a_, bb_;
};

// --------------------------------------------------------------- Decoder

/// Mirror of the encoder: 5 -> 10 -> 14 -> 28 -> 32 -> 64 -> 68 via nearest
/// upsampling and pad-4 transposed-convolution blocks, pointwise output.
template <class T>
class Decoder {
public:
    Decoder() = default;
    Decoder(const ModelConfig &cfg, Rng &rng)
        : fc_("decoder.fc", cfg.latent_dim, cfg.widths[2] * 25, rng)
        , d1_("decoder.d1", cfg.widths[2], cfg.widths[1], 4, rng)
        , d2_("decoder.d2", cfg.widths[1], cfg.widths[0], 4, rng)
        , d3_("decoder.d3", cfg.widths[0], cfg.widths[0], 4, rng)
        , out_("decoder.out", cfg.widths[0], cfg.channels, 1, 0, rng)
        , w3_(cfg.widths[2])
    {
        if (cfg.family == Family::spherical) {
            // spherical latents are unit vectors, so each coordinate carries
            // variance 1/m; rescale the entry layer so its output magnitude
            // does not shrink with the latent size
            const T gain = static_cast<T>(std::sqrt(static_cast<double>(cfg.latent_dim)));
            for (auto &w : fc_.weight.value.v)
                w *= gain;
        }
    }

    void collect(ParamRefs<T> &into)
    {
        fc_.collect(into);
        d1_.collect(into);
        d2_.collect(into);
        d3_.collect(into);
        out_.collect(into);
    }

    Tensor<T> forward(const Tensor<T> &z)
    {
        const int b = z.dim(0);
        Tensor<T> h = fc_.forward(z).reshaped({ b, w3_, 5, 5 });
        h = d1_.forward(u1_.forward(h));
        h = d2_.forward(u2_.forward(h));
        h = d3_.forward(u3_.forward(h));
        return out_.forward(h);
    }

    Tensor<T> backward(const Tensor<T> &dxhat)
    {
        Tensor<T> dh = out_.backward(dxhat);
        dh = u3_.backward(d3_.backward(dh));
        dh = u2_.backward(d2_.backward(dh));
        dh = u1_.backward(d1_.backward(dh));
        const int b = dh.dim(0);
        return fc_.backward(dh.reshaped({ b, w3_ * 25 }));
    }

private:
    Linear<T> fc_;
    Upsample2<T> u1_, u2_, u3_;
    mdetail::ConvBlock<T> d1_, d2_, d3_;
    Conv2d<T> out_;
    int w3_ = 0;
};

} // namespace geovae::nets
