#pragma once

#include <cmath>
#include <string>

#include "geovae/core/rng.hpp"
#include "geovae/nets/tensor.hpp"

namespace geovae::nets {

template <class T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    void init(std::string n, std::vector<int> shape)
    {
        name = std::move(n);
        value = Tensor<T>(shape);
        grad = Tensor<T>(std::move(shape));
    }
    void zero_grad() { grad.fill(T(0)); }
};

template <class T>
using ParamRefs = std::vector<Param<T> *>;

namespace detail {

template <class T>
void he_normal(Tensor<T> &w, int fan_in, Rng &rng)
{
    const double std_dev = std::sqrt(2.0 / fan_in);
    for (auto &x : w.v)
        x = static_cast<T>(rng.normal() * std_dev);
}

} // namespace detail

// ---------------------------------------------------------------- Linear

template <class T>
class Linear {
public:
    Param<T> weight; // [out, in]
    Param<T> bias;   // [out]

    Linear() = default;
    Linear(const std::string &name, int in, int out, Rng &rng) : in_(in), out_(out)
    {
        weight.init(name + ".weight", { out, in });
        bias.init(name + ".bias", { out });
        detail::he_normal(weight.value, in, rng);
    }

    void collect(ParamRefs<T> &into)
    {
        into.push_back(&weight);
        into.push_back(&bias);
    }

    /// x: [B, in] -> [B, out]
    Tensor<T> forward(const Tensor<T> &x)
    {
        input_ = x;
        const int b = x.dim(0);
        Tensor<T> y({ b, out_ });
        ConstMatMap<T> xm(x.data(), b, in_);
        ConstMatMap<T> wm(weight.value.data(), out_, in_);
        MatMap<T> ym(y.data(), b, out_);
        ym.noalias() = xm * wm.transpose();
        for (int i = 0; i < b; ++i)
            for (int o = 0; o < out_; ++o)
                y.v[i * out_ + o] += bias.value.v[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        const int b = dy.dim(0);
        ConstMatMap<T> dym(dy.data(), b, out_);
        ConstMatMap<T> xm(input_.data(), b, in_);
        MatMap<T> dwm(weight.grad.data(), out_, in_);
        dwm.noalias() += dym.transpose() * xm;
        for (int i = 0; i < b; ++i)
            for (int o = 0; o < out_; ++o)
                bias.grad.v[o] += dy.v[i * out_ + o];

        Tensor<T> dx({ b, in_ });
        ConstMatMap<T> wm(weight.value.data(), out_, in_);
        MatMap<T> dxm(dx.data(), b, in_);
        dxm.noalias() = dym * wm;
        return dx;
    }

    int in_features() const { return in_; }
    int out_features() const { return out_; }

private:
    int in_ = 0, out_ = 0;
    Tensor<T> input_;
};

// ---------------------------------------------------------------- Conv2d

/// Stride-1 convolution with symmetric zero padding. pad = 0 gives the
/// valid convolution the encoder uses; pad = k-1-p realizes the stride-1
/// transposed convolution of the decoder.
template <class T>
class Conv2d {
public:
    Param<T> weight; // [out, in, k, k]
    Param<T> bias;   // [out]

    Conv2d() = default;
    Conv2d(const std::string &name, int in, int out, int k, int pad, Rng &rng)
        : in_(in), out_(out), k_(k), pad_(pad)
    {
        weight.init(name + ".weight", { out, in, k, k });
        bias.init(name + ".bias", { out });
        detail::he_normal(weight.value, in * k * k, rng);
    }

    void collect(ParamRefs<T> &into)
    {
        into.push_back(&weight);
        into.push_back(&bias);
    }

    int out_size(int h) const { return h + 2 * pad_ - k_ + 1; }

    Tensor<T> forward(const Tensor<T> &x)
    {
        input_ = x;
        const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int ho = out_size(h), wo = out_size(w);
        if (ho <= 0 || wo <= 0)
            throw std::invalid_argument("Conv2d: input too small for kernel");
        Tensor<T> y({ b, out_, ho, wo });
        const int ckk = in_ * k_ * k_;
        AlignedVec<T> col(static_cast<std::size_t>(ckk) * ho * wo);
        for (int i = 0; i < b; ++i) {
            im2col(x.data() + static_cast<std::size_t>(i) * in_ * h * w, h, w, col.data());
            ConstMatMap<T> wm(weight.value.data(), out_, ckk);
            ConstMatMap<T> cm(col.data(), ckk, ho * wo);
            MatMap<T> ym(y.data() + static_cast<std::size_t>(i) * out_ * ho * wo, out_, ho * wo);
            ym.noalias() = wm * cm;
            for (int o = 0; o < out_; ++o)
                ym.row(o).array() += static_cast<T>(bias.value.v[o]);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        const int b = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
        const int ho = dy.dim(2), wo = dy.dim(3);
        const int ckk = in_ * k_ * k_;
        Tensor<T> dx(input_.shape);
        AlignedVec<T> col(static_cast<std::size_t>(ckk) * ho * wo);
        AlignedVec<T> dcol(col.size());
        for (int i = 0; i < b; ++i) {
            im2col(input_.data() + static_cast<std::size_t>(i) * in_ * h * w, h, w, col.data());
            ConstMatMap<T> dym(dy.data() + static_cast<std::size_t>(i) * out_ * ho * wo, out_,
                               ho * wo);
            ConstMatMap<T> cm(col.data(), ckk, ho * wo);
            MatMap<T> dwm(weight.grad.data(), out_, ckk);
            dwm.noalias() += dym * cm.transpose();
            for (int o = 0; o < out_; ++o)
                bias.grad.v[o] += dym.row(o).sum();

            ConstMatMap<T> wm(weight.value.data(), out_, ckk);
            MatMap<T> dcm(dcol.data(), ckk, ho * wo);
            dcm.noalias() = wm.transpose() * dym;
            col2im(dcol.data(), h, w, dx.data() + static_cast<std::size_t>(i) * in_ * h * w);
        }
        return dx;
    }

private:
    void im2col(const T *x, int h, int w, T *col) const
    {
        const int ho = out_size(h), wo = out_size(w);
        std::size_t idx = 0;
        for (int c = 0; c < in_; ++c) {
            const T *xc = x + static_cast<std::size_t>(c) * h * w;
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx)
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy + ky - pad_;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox + kx - pad_;
                            col[idx++] = (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                ? xc[iy * w + ix]
                                : T(0);
                        }
                    }
        }
    }

    void col2im(const T *col, int h, int w, T *dx) const
    {
        const int ho = out_size(h), wo = out_size(w);
        std::size_t idx = 0;
        for (int c = 0; c < in_; ++c) {
            T *xc = dx + static_cast<std::size_t>(c) * h * w;
            for (int ky = 0; ky < k_; ++ky)
                for (int kx = 0; kx < k_; ++kx)
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy + ky - pad_;
                        for (int ox = 0; ox < wo; ++ox) {
                            const int ix = ox + kx - pad_;
                            if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                                xc[iy * w + ix] += col[idx];
                            ++idx;
                        }
                    }
        }
    }

    int in_ = 0, out_ = 0, k_ = 0, pad_ = 0;
    Tensor<T> input_;
};

// ---------------------------------------------------------------- MaxPool2

template <class T>
class MaxPool2 {
public:
    /// x: [B, C, H, W] with H, W even -> halved spatial dims.
    Tensor<T> forward(const Tensor<T> &x)
    {
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const int ho = h / 2, wo = w / 2;
        in_shape_ = x.shape;
        Tensor<T> y({ b, c, ho, wo });
        argmax_.assign(y.size(), 0);
        std::size_t o = 0;
        for (int i = 0; i < b; ++i)
            for (int ch = 0; ch < c; ++ch) {
                const T *xc = x.data() + ((static_cast<std::size_t>(i) * c + ch) * h) * w;
                for (int oy = 0; oy < ho; ++oy)
                    for (int ox = 0; ox < wo; ++ox) {
                        std::size_t best = (2 * oy) * static_cast<std::size_t>(w) + 2 * ox;
                        T bv = xc[best];
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                const std::size_t idx =
                                    (2 * oy + dy) * static_cast<std::size_t>(w) + 2 * ox + dx;
                                if (xc[idx] > bv) {
                                    bv = xc[idx];
                                    best = idx;
                                }
                            }
                        y.v[o] = bv;
                        argmax_[o] = ((static_cast<std::size_t>(i) * c + ch) * h) * w + best;
                        ++o;
                    }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        Tensor<T> dx(in_shape_);
        for (std::int64_t o = 0; o < dy.size(); ++o)
            dx.v[argmax_[o]] += dy.v[o];
        return dx;
    }

private:
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

// ------------------------------------------------------------- Upsample2

template <class T>
class Upsample2 {
public:
    Tensor<T> forward(const Tensor<T> &x)
    {
        const int b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        in_shape_ = x.shape;
        Tensor<T> y({ b, c, 2 * h, 2 * w });
        for (int i = 0; i < b * c; ++i) {
            const T *xc = x.data() + static_cast<std::size_t>(i) * h * w;
            T *yc = y.data() + static_cast<std::size_t>(i) * 4 * h * w;
            for (int oy = 0; oy < 2 * h; ++oy)
                for (int ox = 0; ox < 2 * w; ++ox)
                    yc[oy * 2 * w + ox] = xc[(oy / 2) * w + ox / 2];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        const int b = in_shape_[0], c = in_shape_[1], h = in_shape_[2], w = in_shape_[3];
        Tensor<T> dx(in_shape_);
        for (int i = 0; i < b * c; ++i) {
            T *xc = dx.data() + static_cast<std::size_t>(i) * h * w;
            const T *yc = dy.data() + static_cast<std::size_t>(i) * 4 * h * w;
            for (int oy = 0; oy < 2 * h; ++oy)
                for (int ox = 0; ox < 2 * w; ++ox)
                    xc[(oy / 2) * w + ox / 2] += yc[oy * 2 * w + ox];
        }
        return dx;
    }

private:
    std::vector<int> in_shape_;
};

// ------------------------------------------------------- LayerNormChannel

/// Normalize across the channel axis independently at every remaining
/// position; works for [B, C, ...] of any spatial rank.
template <class T>
class LayerNormChannel {
public:
    Param<T> gamma;
    Param<T> beta;

    LayerNormChannel() = default;
    LayerNormChannel(const std::string &name, int channels) : c_(channels)
    {
        gamma.init(name + ".gamma", { channels });
        beta.init(name + ".beta", { channels });
        gamma.value.fill(T(1));
    }

    void collect(ParamRefs<T> &into)
    {
        into.push_back(&gamma);
        into.push_back(&beta);
    }

    Tensor<T> forward(const Tensor<T> &x)
    {
        const int b = x.dim(0);
        std::int64_t pos = 1;
        for (int i = 2; i < x.rank(); ++i)
            pos *= x.dim(i);
        b_ = b;
        pos_ = pos;
        norm_ = Tensor<T>(x.shape);
        inv_std_.assign(static_cast<std::size_t>(b) * pos, T(0));

        Tensor<T> y(x.shape);
        for (int i = 0; i < b; ++i)
            for (std::int64_t p = 0; p < pos; ++p) {
                T mean = 0;
                for (int ch = 0; ch < c_; ++ch)
                    mean += at(x, i, ch, p);
                mean /= c_;
                T var = 0;
                for (int ch = 0; ch < c_; ++ch) {
                    const T d = at(x, i, ch, p) - mean;
                    var += d * d;
                }
                var /= c_;
                const T inv = T(1) / std::sqrt(var + T(1e-5));
                inv_std_[i * pos + p] = inv;
                for (int ch = 0; ch < c_; ++ch) {
                    const T n = (at(x, i, ch, p) - mean) * inv;
                    at(norm_, i, ch, p) = n;
                    at(y, i, ch, p) = n * gamma.value.v[ch] + beta.value.v[ch];
                }
            }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        Tensor<T> dx(norm_.shape);
        for (int i = 0; i < b_; ++i)
            for (std::int64_t p = 0; p < pos_; ++p) {
                T sum_dn = 0, sum_dn_n = 0;
                for (int ch = 0; ch < c_; ++ch) {
                    const T dyv = at(dy, i, ch, p);
                    const T n = at(norm_, i, ch, p);
                    gamma.grad.v[ch] += dyv * n;
                    beta.grad.v[ch] += dyv;
                    const T dn = dyv * gamma.value.v[ch];
                    sum_dn += dn;
                    sum_dn_n += dn * n;
                }
                const T inv = inv_std_[i * pos_ + p];
                for (int ch = 0; ch < c_; ++ch) {
                    const T n = at(norm_, i, ch, p);
                    const T dn = at(dy, i, ch, p) * gamma.value.v[ch];
                    at(dx, i, ch, p) = inv * (dn - sum_dn / c_ - n * sum_dn_n / c_);
                }
            }
        return dx;
    }

private:
    T &at(Tensor<T> &t, int i, int ch, std::int64_t p) const
    {
        return t.v[(static_cast<std::size_t>(i) * c_ + ch) * pos_ + p];
    }
    const T &at(const Tensor<T> &t, int i, int ch, std::int64_t p) const
    {
        return t.v[(static_cast<std::size_t>(i) * c_ + ch) * pos_ + p];
    }

    int c_ = 0, b_ = 0;
    std::int64_t pos_ = 0;
    Tensor<T> norm_;
    std::vector<T> inv_std_;
};

// ---------------------------------------------------------------- GELU

template <class T>
class Gelu {
public:
    Tensor<T> forward(const Tensor<T> &x)
    {
        input_ = x;
        Tensor<T> y(x.shape);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            const double v = static_cast<double>(x.v[i]);
            y.v[i] = static_cast<T>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        Tensor<T> dx(input_.shape);
        for (std::int64_t i = 0; i < dy.size(); ++i) {
            const double v = static_cast<double>(input_.v[i]);
            const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
            const double pdf = std::exp(-0.5 * v * v) / std::sqrt(2.0 * M_PI);
            dx.v[i] = dy.v[i] * static_cast<T>(cdf + v * pdf);
        }
        return dx;
    }

private:
    Tensor<T> input_;
};

// ---------------------------------------------------------------- ReLU

template <class T>
class Relu {
public:
    Tensor<T> forward(const Tensor<T> &x)
    {
        mask_.assign(x.size(), false);
        Tensor<T> y(x.shape);
        for (std::int64_t i = 0; i < x.size(); ++i) {
            mask_[i] = x.v[i] > T(0);
            y.v[i] = mask_[i] ? x.v[i] : T(0);
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T> &dy)
    {
        Tensor<T> dx(dy.shape);
        for (std::int64_t i = 0; i < dy.size(); ++i)
            dx.v[i] = mask_[i] ? dy.v[i] : T(0);
        return dx;
    }

private:
    std::vector<char> mask_;
};

} // namespace geovae::nets
