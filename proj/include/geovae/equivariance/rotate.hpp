#pragma once

#include <cmath>
#include <vector>

namespace geovae::equi {

/// Sparse linear map rotating a square grid about its center by a fixed
/// angle (counter-clockwise, quarter-turn multiples are exact index
/// permutations, everything else is bilinear with zeros outside support).
struct RotationPlan {
    struct Tap {
        int src;
        double w;
    };
    int size = 0;                       // grid side length
    std::vector<std::vector<Tap>> taps; // per destination pixel

    static RotationPlan make(int n, double angle_ccw)
    {
        RotationPlan plan;
        plan.size = n;
        plan.taps.resize(static_cast<std::size_t>(n) * n);
        const double c = (n - 1) / 2.0;
        const double cs = std::cos(angle_ccw), sn = std::sin(angle_ccw);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                const double dy = i - c, dx = j - c;
                // inverse rotation fetches the source sample
                const double sy = c + cs * dy + sn * dx;
                const double sx = c - sn * dy + cs * dx;
                auto &dst = plan.taps[static_cast<std::size_t>(i) * n + j];
                const int y0 = static_cast<int>(std::floor(sy));
                const int x0 = static_cast<int>(std::floor(sx));
                const double fy = sy - y0, fx = sx - x0;
                const double w[2][2] = { { (1 - fy) * (1 - fx), (1 - fy) * fx },
                                         { fy * (1 - fx), fy * fx } };
                for (int a = 0; a < 2; ++a)
                    for (int b = 0; b < 2; ++b) {
                        const int yy = y0 + a, xx = x0 + b;
                        if (yy < 0 || yy >= n || xx < 0 || xx >= n)
                            continue;
                        if (w[a][b] < 1e-12)
                            continue;
                        dst.push_back({ yy * n + xx, w[a][b] });
                    }
            }
        return plan;
    }

    template <class T>
    void apply(const T *src, T *dst) const
    {
        for (std::size_t i = 0; i < taps.size(); ++i) {
            double acc = 0.0;
            for (const Tap &t : taps[i])
                acc += t.w * static_cast<double>(src[t.src]);
            dst[i] = static_cast<T>(acc);
        }
    }

    /// Transpose map: scatter destination-side gradients back to sources.
    template <class T>
    void apply_transposed(const T *dst_grad, T *src_grad) const
    {
        for (std::size_t i = 0; i < taps.size(); ++i)
            for (const Tap &t : taps[i])
                src_grad[t.src] += static_cast<T>(t.w * static_cast<double>(dst_grad[i]));
    }
};

/// Exact counter-clockwise quarter-turn of a square [H, H] buffer.
template <class T>
void rot90_square(const T *src, T *dst, int n, int quarter_turns)
{
    const int q = ((quarter_turns % 4) + 4) % 4;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            int si = i, sj = j;
            switch (q) {
            case 0: break;
            case 1: si = j; sj = n - 1 - i; break;
            case 2: si = n - 1 - i; sj = n - 1 - j; break;
            case 3: si = n - 1 - j; sj = i; break;
            }
            dst[i * n + j] = src[si * n + sj];
        }
}

} // namespace geovae::equi
