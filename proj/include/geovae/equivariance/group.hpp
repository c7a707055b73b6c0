#pragma once

#include <stdexcept>
#include <string>

#include "geovae/core/rng.hpp"
#include "geovae/equivariance/rotate.hpp"
#include "geovae/nets/layers.hpp"
#include "geovae/nets/tensor.hpp"

namespace geovae::equi {


using nets::ConstMatMap;
using nets::MatMap;
using nets::Param;
using nets::ParamRefs;
using nets::Tensor;

/// Feature map over the cyclic group C_N: [batch, channel, group, H, W].
template <class T>
struct GroupFeatureMap {
    Tensor<T> t;
    int group_order = 0;
};

/// Pose estimate; the regular-readout head quantizes to multiples of 2pi/N.
struct PoseDescriptor {
    int index = 0;
    int group_order = 1;

    double angle() const { return 2.0 * M_PI * index / group_order; }
};

namespace gdetail {

inline const RotationPlan &kernel_plan(int k, int group_order, int n)
{
    // plans keyed by (k, N); built once
    static std::vector<std::tuple<int, int, std::vector<RotationPlan>>> cache;
    for (auto &[ck, cn, plans] : cache)
        if (ck == k && cn == group_order)
            return plans[n];
    std::vector<RotationPlan> plans;
    plans.reserve(group_order);
    for (int i = 0; i < group_order; ++i)
        plans.push_back(RotationPlan::make(k, 2.0 * M_PI * i / group_order));
    cache.emplace_back(k, group_order, std::move(plans));
    return std::get<2>(cache.back())[n];
}

// shared valid/padded stride-1 conv core used by the group layers
template <class T>
void im2col(const T *x, int cin, int h, int w, int k, int pad, T *col)
{
    const int ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1;
    std::size_t idx = 0;
    for (int c = 0; c < cin; ++c) {
        const T *xc = x + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy + ky - pad;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox + kx - pad;
                        col[idx++] =
                            (iy >= 0 && iy < h && ix >= 0 && ix < w) ? xc[iy * w + ix] : T(0);
                    }
                }
    }
}

template <class T>
void col2im(const T *col, int cin, int h, int w, int k, int pad, T *dx)
{
    const int ho = h + 2 * pad - k + 1, wo = w + 2 * pad - k + 1;
    std::size_t idx = 0;
    for (int c = 0; c < cin; ++c) {
        T *xc = dx + static_cast<std::size_t>(c) * h * w;
        for (int ky = 0; ky < k; ++ky)
            for (int kx = 0; kx < k; ++kx)
                for (int oy = 0; oy < ho; ++oy) {
                    const int iy = oy + ky - pad;
                    for (int ox = 0; ox < wo; ++ox) {
                        const int ix = ox + kx - pad;
                        if (iy >= 0 && iy < h && ix >= 0 && ix < w)
                            xc[iy * w + ix] += col[idx];
                        ++idx;
                    }
                }
    }
}

} // namespace gdetail

// ------------------------------------------------------------ LiftingConv

/// Convolve the input with N rotated copies of one kernel stack, adding the
/// group axis: [B, Cin, H, W] -> [B, Cout, N, Ho, Wo]. Valid (pad 0) by
/// default, matching the encoder's size flow.
template <class T>
class LiftingConv {
public:
    Param<T> weight; // [Cout, Cin, k, k]
    Param<T> bias;   // [Cout]

    LiftingConv() = default;
    LiftingConv(const std::string &name, int in, int out, int k, int group_order, Rng &rng)
        : in_(in), out_(out), k_(k), n_(group_order)
    {
        if (group_order < 1)
            throw std::invalid_argument("LiftingConv: group order must be >= 1");
        weight.init(name + ".weight", { out, in, k, k });
        bias.init(name + ".bias", { out });
        nets::detail::he_normal(weight.value, in * k * k, rng);
    }

    void collect(ParamRefs<T> &into)
    {
        into.push_back(&weight);
        into.push_back(&bias);
    }

    GroupFeatureMap<T> forward(const Tensor<T> &x)
    {
        input_ = x;
        const int b = x.dim(0), h = x.dim(2), w = x.dim(3);
        const int ho = h - k_ + 1, wo = w - k_ + 1;
        GroupFeatureMap<T> out;
        out.group_order = n_;
        out.t = Tensor<T>({ b, out_, n_, ho, wo });

        const int ckk = in_ * k_ * k_;
        nets::AlignedVec<T> rot(static_cast<std::size_t>(out_) * ckk);
        nets::AlignedVec<T> col(static_cast<std::size_t>(ckk) * ho * wo);
        for (int n = 0; n < n_; ++n) {
            rotate_weights(weight.value.data(), rot.data(), n);
            for (int i = 0; i < b; ++i) {
                gdetail::im2col(x.data() + static_cast<std::size_t>(i) * in_ * h * w, in_, h, w,
                                k_, 0, col.data());
                ConstMatMap<T> wm(rot.data(), out_, ckk);
                ConstMatMap<T> cm(col.data(), ckk, ho * wo);
                for (int o = 0; o < out_; ++o) {
                    T *dst = out.t.data()
                        + (((static_cast<std::size_t>(i) * out_ + o) * n_ + n) * ho) * wo;
                    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> ym(dst, ho * wo);
                    ym.noalias() = wm.row(o) * cm;
                    ym.array() += static_cast<T>(bias.value.v[o]);
                }
            }
        }
        return out;
    }

    Tensor<T> backward(const GroupFeatureMap<T> &dy)
    {
        const int b = input_.dim(0), h = input_.dim(2), w = input_.dim(3);
        const int ho = h - k_ + 1, wo = w - k_ + 1;
        const int ckk = in_ * k_ * k_;
        Tensor<T> dx(input_.shape);
        nets::AlignedVec<T> col(static_cast<std::size_t>(ckk) * ho * wo);
        nets::AlignedVec<T> dcol(col.size());
        nets::AlignedVec<T> drot(static_cast<std::size_t>(out_) * ckk);
        nets::AlignedVec<T> rot(drot.size());
        nets::AlignedVec<T> dy_slice(static_cast<std::size_t>(out_) * ho * wo);

        for (int n = 0; n < n_; ++n) {
            std::fill(drot.begin(), drot.end(), T(0));
            rotate_weights(weight.value.data(), rot.data(), n);
            for (int i = 0; i < b; ++i) {
                for (int o = 0; o < out_; ++o) {
                    const T *src = dy.t.data()
                        + (((static_cast<std::size_t>(i) * out_ + o) * n_ + n) * ho) * wo;
                    std::copy(src, src + static_cast<std::size_t>(ho) * wo,
                              dy_slice.begin() + static_cast<std::size_t>(o) * ho * wo);
                    double bsum = 0.0;
                    for (int p = 0; p < ho * wo; ++p)
                        bsum += static_cast<double>(src[p]);
                    bias.grad.v[o] += static_cast<T>(bsum);
                }
                gdetail::im2col(input_.data() + static_cast<std::size_t>(i) * in_ * h * w, in_, h,
                                w, k_, 0, col.data());
                ConstMatMap<T> dym(dy_slice.data(), out_, ho * wo);
                ConstMatMap<T> cm(col.data(), ckk, ho * wo);
                MatMap<T> drm(drot.data(), out_, ckk);
                drm.noalias() += dym * cm.transpose();

                ConstMatMap<T> wm(rot.data(), out_, ckk);
                MatMap<T> dcm(dcol.data(), ckk, ho * wo);
                dcm.noalias() = wm.transpose() * dym;
                gdetail::col2im(dcol.data(), in_, h, w, k_, 0,
                                dx.data() + static_cast<std::size_t>(i) * in_ * h * w);
            }
            // push the rotated-weight gradient back through the rotation map
            const auto &plan = gdetail::kernel_plan(k_, n_, n);
            for (int oc = 0; oc < out_ * in_; ++oc)
                plan.apply_transposed(drot.data() + static_cast<std::size_t>(oc) * k_ * k_,
                                      weight.grad.data() + static_cast<std::size_t>(oc) * k_ * k_);
        }
        return dx;
    }

    int group_order() const { return n_; }

private:
    void rotate_weights(const T *src, T *dst, int n) const
    {
        const auto &plan = gdetail::kernel_plan(k_, n_, n);
        for (int oc = 0; oc < out_ * in_; ++oc)
            plan.apply(src + static_cast<std::size_t>(oc) * k_ * k_,
                       dst + static_cast<std::size_t>(oc) * k_ * k_);
    }

    int in_ = 0, out_ = 0, k_ = 0, n_ = 1;
    Tensor<T> input_;
};

// ------------------------------------------------------------- GroupConv

/// C_N group-to-group convolution: kernels carry their own group axis that
/// is cyclically shifted and spatially rotated per output group element.
template <class T>
class GroupConv {
public:
    Param<T> weight; // [Cout, Cin, N, k, k]
    Param<T> bias;   // [Cout]

    GroupConv() = default;
    GroupConv(const std::string &name, int in, int out, int k, int group_order, int pad,
              Rng &rng)
        : in_(in), out_(out), k_(k), n_(group_order), pad_(pad)
    {
        weight.init(name + ".weight", { out, in, group_order, k, k });
        bias.init(name + ".bias", { out });
        nets::detail::he_normal(weight.value, in * group_order * k * k, rng);
    }

    void collect(ParamRefs<T> &into)
    {
        into.push_back(&weight);
        into.push_back(&bias);
    }

    GroupFeatureMap<T> forward(const GroupFeatureMap<T> &x)
    {
        if (x.group_order != n_)
            throw std::invalid_argument("GroupConv: group order mismatch");
        input_ = x.t;
        const int b = x.t.dim(0), h = x.t.dim(3), w = x.t.dim(4);
        const int ho = h + 2 * pad_ - k_ + 1, wo = w + 2 * pad_ - k_ + 1;
        GroupFeatureMap<T> out;
        out.group_order = n_;
        out.t = Tensor<T>({ b, out_, n_, ho, wo });

        const int cnkk = in_ * n_ * k_ * k_;
        nets::AlignedVec<T> gathered(static_cast<std::size_t>(out_) * cnkk);
        nets::AlignedVec<T> col(static_cast<std::size_t>(cnkk) * ho * wo);
        for (int n = 0; n < n_; ++n) {
            gather_kernel(weight.value.data(), gathered.data(), n);
            for (int i = 0; i < b; ++i) {
                // input viewed as [Cin*N, H, W]
                gdetail::im2col(x.t.data() + static_cast<std::size_t>(i) * in_ * n_ * h * w,
                                in_ * n_, h, w, k_, pad_, col.data());
                ConstMatMap<T> wm(gathered.data(), out_, cnkk);
                ConstMatMap<T> cm(col.data(), cnkk, ho * wo);
                for (int o = 0; o < out_; ++o) {
                    T *dst = out.t.data()
                        + (((static_cast<std::size_t>(i) * out_ + o) * n_ + n) * ho) * wo;
                    Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> ym(dst, ho * wo);
                    ym.noalias() = wm.row(o) * cm;
                    ym.array() += static_cast<T>(bias.value.v[o]);
                }
            }
        }
        return out;
    }

    GroupFeatureMap<T> backward(const GroupFeatureMap<T> &dy)
    {
        const int b = input_.dim(0), h = input_.dim(3), w = input_.dim(4);
        const int ho = dy.t.dim(3), wo = dy.t.dim(4);
        const int cnkk = in_ * n_ * k_ * k_;

        GroupFeatureMap<T> dx;
        dx.group_order = n_;
        dx.t = Tensor<T>(input_.shape);

        nets::AlignedVec<T> gathered(static_cast<std::size_t>(out_) * cnkk);
        nets::AlignedVec<T> dgathered(gathered.size());
        nets::AlignedVec<T> col(static_cast<std::size_t>(cnkk) * ho * wo);
        nets::AlignedVec<T> dcol(col.size());
        nets::AlignedVec<T> dy_slice(static_cast<std::size_t>(out_) * ho * wo);

        for (int n = 0; n < n_; ++n) {
            gather_kernel(weight.value.data(), gathered.data(), n);
            std::fill(dgathered.begin(), dgathered.end(), T(0));
            for (int i = 0; i < b; ++i) {
                for (int o = 0; o < out_; ++o) {
                    const T *src = dy.t.data()
                        + (((static_cast<std::size_t>(i) * out_ + o) * n_ + n) * ho) * wo;
                    std::copy(src, src + static_cast<std::size_t>(ho) * wo,
                              dy_slice.begin() + static_cast<std::size_t>(o) * ho * wo);
                    double bsum = 0.0;
                    for (int p = 0; p < ho * wo; ++p)
                        bsum += static_cast<double>(src[p]);
                    bias.grad.v[o] += static_cast<T>(bsum);
                }
                gdetail::im2col(input_.data() + static_cast<std::size_t>(i) * in_ * n_ * h * w,
                                in_ * n_, h, w, k_, pad_, col.data());
                ConstMatMap<T> dym(dy_slice.data(), out_, ho * wo);
                ConstMatMap<T> cm(col.data(), cnkk, ho * wo);
                MatMap<T> dgm(dgathered.data(), out_, cnkk);
                dgm.noalias() += dym * cm.transpose();

                ConstMatMap<T> wm(gathered.data(), out_, cnkk);
                MatMap<T> dcm(dcol.data(), cnkk, ho * wo);
                dcm.noalias() = wm.transpose() * dym;
                gdetail::col2im(dcol.data(), in_ * n_, h, w, k_, pad_,
                                dx.t.data() + static_cast<std::size_t>(i) * in_ * n_ * h * w);
            }
            scatter_kernel_grad(dgathered.data(), n);
        }
        return dx;
    }

    int group_order() const { return n_; }

private:
    // gathered[o, ci, s, :, :] = rot_n( weight[o, ci, (s - n) mod N, :, :] )
    void gather_kernel(const T *wsrc, T *dst, int n) const
    {
        const auto &plan = gdetail::kernel_plan(k_, n_, n);
        const int kk = k_ * k_;
        for (int o = 0; o < out_; ++o)
            for (int ci = 0; ci < in_; ++ci)
                for (int s = 0; s < n_; ++s) {
                    const int s_src = ((s - n) % n_ + n_) % n_;
                    const T *src = wsrc
                        + ((static_cast<std::size_t>(o) * in_ + ci) * n_ + s_src) * kk;
                    T *d = dst + ((static_cast<std::size_t>(o) * in_ + ci) * n_ + s) * kk;
                    plan.apply(src, d);
                }
    }

    void scatter_kernel_grad(const T *dgathered, int n)
    {
        const auto &plan = gdetail::kernel_plan(k_, n_, n);
        const int kk = k_ * k_;
        for (int o = 0; o < out_; ++o)
            for (int ci = 0; ci < in_; ++ci)
                for (int s = 0; s < n_; ++s) {
                    const int s_src = ((s - n) % n_ + n_) % n_;
                    const T *dg = dgathered
                        + ((static_cast<std::size_t>(o) * in_ + ci) * n_ + s) * kk;
                    T *wg = weight.grad.data()
                        + ((static_cast<std::size_t>(o) * in_ + ci) * n_ + s_src) * kk;
                    plan.apply_transposed(dg, wg);
                }
    }

    int in_ = 0, out_ = 0, k_ = 0, n_ = 1, pad_ = 0;
    Tensor<T> input_;
};

// ------------------------------------------------------------ projection

enum class ProjectMode { max, mean, sum };

/// Remove the group axis with an invariant reduction.
template <class T>
class ProjectInvariant {
public:
    explicit ProjectInvariant(ProjectMode mode = ProjectMode::mean) : mode_(mode) {}

    Tensor<T> forward(const GroupFeatureMap<T> &x)
    {
        const int b = x.t.dim(0), c = x.t.dim(1), n = x.t.dim(2), h = x.t.dim(3), w = x.t.dim(4);
        n_ = n;
        in_shape_ = x.t.shape;
        Tensor<T> y({ b, c, h, w });
        if (mode_ == ProjectMode::max)
            argmax_.assign(y.size(), 0);
        const std::size_t hw = static_cast<std::size_t>(h) * w;
        for (int i = 0; i < b * c; ++i) {
            const T *xc = x.t.data() + static_cast<std::size_t>(i) * n * hw;
            T *yc = y.data() + static_cast<std::size_t>(i) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
                if (mode_ == ProjectMode::max) {
                    int best = 0;
                    T bv = xc[p];
                    for (int g = 1; g < n; ++g)
                        if (xc[g * hw + p] > bv) {
                            bv = xc[g * hw + p];
                            best = g;
                        }
                    yc[p] = bv;
                    argmax_[static_cast<std::size_t>(i) * hw + p] = best;
                } else {
                    double acc = 0.0;
                    for (int g = 0; g < n; ++g)
                        acc += static_cast<double>(xc[g * hw + p]);
                    yc[p] = static_cast<T>(mode_ == ProjectMode::mean ? acc / n : acc);
                }
            }
        }
        return y;
    }

    GroupFeatureMap<T> backward(const Tensor<T> &dy)
    {
        GroupFeatureMap<T> dx;
        dx.group_order = n_;
        dx.t = Tensor<T>(in_shape_);
        const int b = in_shape_[0], c = in_shape_[1], n = in_shape_[2];
        const std::size_t hw = static_cast<std::size_t>(in_shape_[3]) * in_shape_[4];
        for (int i = 0; i < b * c; ++i) {
            T *xc = dx.t.data() + static_cast<std::size_t>(i) * n * hw;
            const T *yc = dy.data() + static_cast<std::size_t>(i) * hw;
            for (std::size_t p = 0; p < hw; ++p) {
                if (mode_ == ProjectMode::max) {
                    xc[argmax_[static_cast<std::size_t>(i) * hw + p] * hw + p] += yc[p];
                } else {
                    const T g = mode_ == ProjectMode::mean ? yc[p] / static_cast<T>(n) : yc[p];
                    for (int gg = 0; gg < n; ++gg)
                        xc[gg * hw + p] += g;
                }
            }
        }
        return dx;
    }

private:
    ProjectMode mode_;
    int n_ = 0;
    std::vector<int> in_shape_;
    std::vector<int> argmax_;
};

// --------------------------------------------------------------- pose

/// Group-axis energy argmax after spatial pooling; ties break toward the
/// lowest index so the estimate is deterministic.
template <class T>
PoseDescriptor estimate_pose(const GroupFeatureMap<T> &f)
{
    const int b = f.t.dim(0);
    if (b != 1)
        throw std::invalid_argument("estimate_pose: expects a single item (use per-sample maps)");
    const int c = f.t.dim(1), n = f.t.dim(2);
    const std::size_t hw = static_cast<std::size_t>(f.t.dim(3)) * f.t.dim(4);
    PoseDescriptor pose;
    pose.group_order = n;
    double best = -1.0;
    for (int g = 0; g < n; ++g) {
        double e = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            const T *xc = f.t.data() + (static_cast<std::size_t>(ch) * n + g) * hw;
            for (std::size_t p = 0; p < hw; ++p)
                e += static_cast<double>(xc[p]) * static_cast<double>(xc[p]);
        }
        if (e > best + 1e-12 * std::max(1.0, std::abs(best))) {
            best = e;
            pose.index = g;
        }
    }
    return pose;
}

// -------------------------------------------------------- canonicalize

/// Apply the block-diagonal rotation representation rho(angle) to a vector:
/// consecutive coordinate pairs rotate by the angle, a dangling last
/// coordinate (odd m) transforms trivially.
template <class T>
void apply_block_rotation(T *mu, int m, double angle)
{
    const double cs = std::cos(angle), sn = std::sin(angle);
    for (int j = 0; j + 1 < m; j += 2) {
        const double a = static_cast<double>(mu[j]);
        const double b = static_cast<double>(mu[j + 1]);
        mu[j] = static_cast<T>(cs * a - sn * b);
        mu[j + 1] = static_cast<T>(sn * a + cs * b);
    }
}

/// mu0 = rho(R^{-1}) mu : strip the estimated orientation from the latent.
template <class T>
std::vector<T> canonicalize(const std::vector<T> &mu, const PoseDescriptor &pose)
{
    std::vector<T> out = mu;
    apply_block_rotation(out.data(), static_cast<int>(out.size()), -pose.angle());
    return out;
}

} // namespace geovae::equi
