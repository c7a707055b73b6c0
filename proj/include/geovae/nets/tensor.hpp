#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace geovae::nets {

/// 64-byte aligned allocator. Keeping every tensor buffer identically
/// aligned makes Eigen's vectorized head/tail peeling, and therefore the
/// floating-point reduction order, reproducible across runs.
template <class T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::size_t alignment = 64;

    AlignedAllocator() = default;
    template <class U>
    AlignedAllocator(const AlignedAllocator<U> &) noexcept
    {
    }

    T *allocate(std::size_t n)
    {
        if (n == 0)
            return nullptr;
        void *p = ::operator new(n * sizeof(T), std::align_val_t(alignment));
        return static_cast<T *>(p);
    }
    void deallocate(T *p, std::size_t) noexcept
    {
        ::operator delete(p, std::align_val_t(alignment));
    }
    template <class U>
    bool operator==(const AlignedAllocator<U> &) const noexcept
    {
        return true;
    }
};

template <class T>
using AlignedVec = std::vector<T, AlignedAllocator<T>>;

/// Dense row-major tensor. Shapes follow [batch, channel, ...spatial] order.
template <class T>
struct Tensor {
    std::vector<int> shape;
    AlignedVec<T> v;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(count(shape), T(0)) {}

    static std::int64_t count(const std::vector<int> &s)
    {
        std::int64_t n = 1;
        for (int d : s) {
            if (d < 0)
                throw std::invalid_argument("Tensor: negative dimension");
            n *= d;
        }
        return n;
    }

    std::int64_t size() const { return static_cast<std::int64_t>(v.size()); }
    int dim(int i) const { return shape.at(i); }
    int rank() const { return static_cast<int>(shape.size()); }

    T *data() { return v.data(); }
    const T *data() const { return v.data(); }

    Tensor reshaped(std::vector<int> s) const
    {
        if (count(s) != size())
            throw std::invalid_argument("Tensor::reshaped: element count mismatch");
        Tensor out = *this;
        out.shape = std::move(s);
        return out;
    }

    void fill(T value) { std::fill(v.begin(), v.end(), value); }

    Tensor &operator+=(const Tensor &o)
    {
        if (o.size() != size())
            throw std::invalid_argument("Tensor::operator+=: size mismatch");
        for (std::int64_t i = 0; i < size(); ++i)
            v[i] += o.v[i];
        return *this;
    }

    bool all_finite() const
    {
        for (const T &x : v)
            if (!std::isfinite(static_cast<double>(x)))
                return false;
        return true;
    }
};

template <class T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <class T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

} // namespace geovae::nets
