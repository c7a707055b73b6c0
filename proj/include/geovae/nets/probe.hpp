#pragma once

#include "geovae/nets/losses.hpp"
#include "geovae/nets/model.hpp"
#include "geovae/nets/optim.hpp"

namespace geovae::nets {

/// Latent-representation classifier: three linear layers with hidden
/// width 64, trained with cross entropy.
template <class T>
class ProbeMlp {
public:
    ProbeMlp() = default;
    ProbeMlp(const std::string &name, int in_dim, int classes, Rng &rng, int hidden = 64)
        : l1_(name + ".l1", in_dim, hidden, rng)
        , l2_(name + ".l2", hidden, hidden, rng)
        , l3_(name + ".l3", hidden, classes, rng)
    {
    }

    void collect(ParamRefs<T> &into)
    {
        l1_.collect(into);
        l2_.collect(into);
        l3_.collect(into);
    }

    ParamRefs<T> params()
    {
        ParamRefs<T> refs;
        collect(refs);
        return refs;
    }

    Tensor<T> forward(const Tensor<T> &x)
    {
        return l3_.forward(r2_.forward(l2_.forward(r1_.forward(l1_.forward(x)))));
    }

    Tensor<T> backward(const Tensor<T> &dlogits)
    {
        return l1_.backward(r1_.backward(l2_.backward(r2_.backward(l3_.backward(dlogits)))));
    }

private:
    Linear<T> l1_, l2_, l3_;
    Relu<T> r1_, r2_;
};

/// Patch classifier that reuses the model encoder trunks with the probe's
/// MLP head. The equivariant variant pools invariantly over group and
/// space, so C4-rotating the input cannot change its logits.
template <class T>
class CnnClassifier {
public:
    CnnClassifier(const ModelConfig &cfg, int classes, Rng &rng) : cfg_(cfg)
    {
        if (cfg_.equivariant) {
            eq_enc_ = std::make_unique<EquivariantEncoder<T>>(cfg_, rng);
            head_ = ProbeMlp<T>("cnn.head", cfg_.widths[2], classes, rng);
        } else {
            enc_ = std::make_unique<PlainEncoder<T>>(cfg_, rng);
            head_ = ProbeMlp<T>("cnn.head", cfg_.widths[2] * 25, classes, rng);
        }
    }

    ParamRefs<T> params()
    {
        ParamRefs<T> refs;
        if (eq_enc_)
            eq_enc_->collect(refs);
        else
            enc_->trunk_collect(refs);
        head_.collect(refs);
        return refs;
    }

    Tensor<T> forward(const Tensor<T> &x)
    {
        if (eq_enc_) {
            const auto f = eq_enc_->trunk(x);
            feat_shape_ = f.t.shape;
            const int b = f.t.dim(0), c = f.t.dim(1), n = f.t.dim(2);
            const std::size_t hw = static_cast<std::size_t>(f.t.dim(3)) * f.t.dim(4);
            Tensor<T> inv({ b, c });
            for (int i = 0; i < b; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    double acc = 0.0;
                    const T *base = f.t.data()
                        + ((static_cast<std::size_t>(i) * c + ch) * n) * hw;
                    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * hw; ++p)
                        acc += static_cast<double>(base[p]);
                    inv.v[static_cast<std::size_t>(i) * c + ch] =
                        static_cast<T>(acc / (static_cast<double>(n) * hw));
                }
            return head_.forward(inv);
        }
        return head_.forward(enc_->trunk(x));
    }

    void backward(const Tensor<T> &dlogits)
    {
        Tensor<T> dfeat = head_.backward(dlogits);
        if (eq_enc_) {
            const int b = feat_shape_[0], c = feat_shape_[1], n = feat_shape_[2];
            const std::size_t hw =
                static_cast<std::size_t>(feat_shape_[3]) * feat_shape_[4];
            equi::GroupFeatureMap<T> dmap;
            dmap.group_order = n;
            dmap.t = Tensor<T>(feat_shape_);
            for (int i = 0; i < b; ++i)
                for (int ch = 0; ch < c; ++ch) {
                    const T g = dfeat.v[static_cast<std::size_t>(i) * c + ch]
                        / static_cast<T>(static_cast<double>(n) * hw);
                    T *base = dmap.t.data()
                        + ((static_cast<std::size_t>(i) * c + ch) * n) * hw;
                    for (std::size_t p = 0; p < static_cast<std::size_t>(n) * hw; ++p)
                        base[p] = g;
                }
            eq_enc_->trunk_backward(dmap);
        } else {
            enc_->trunk_backward(dfeat);
        }
    }

private:
    ModelConfig cfg_;
    std::unique_ptr<PlainEncoder<T>> enc_;
    std::unique_ptr<EquivariantEncoder<T>> eq_enc_;
    ProbeMlp<T> head_;
    std::vector<int> feat_shape_;
};

} // namespace geovae::nets
