#include "geovae/patchkit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>

namespace geovae::patchkit {

namespace {

struct Rgb {
    double r, g, b;
};

// H&E-like palette per class, jittered per tile
constexpr Rgb base_colors[class_count] = {
    { 245, 245, 245 }, // background: near white
    { 238, 200, 215 }, // stroma: pale pink
    { 235, 155, 175 }, // squamous
    { 185, 125, 205 }, // NDBE
    { 170, 95, 115 },  // LGD
    { 115, 70, 145 },  // HGD
};

// smooth value noise on a coarse lattice, bilinear between lattice points
struct ValueNoise {
    int cell;
    int grid;
    std::vector<double> values;

    ValueNoise(int size, int cell_size, Rng &rng) : cell(cell_size)
    {
        grid = size / cell + 2;
        values.resize(static_cast<std::size_t>(grid) * grid);
        for (auto &v : values)
            v = rng.uniform();
    }

    double at(double y, double x) const
    {
        const double gy = y / cell, gx = x / cell;
        const int y0 = static_cast<int>(gy), x0 = static_cast<int>(gx);
        const double fy = gy - y0, fx = gx - x0;
        auto v = [&](int yy, int xx) {
            return values[static_cast<std::size_t>(std::min(yy, grid - 1)) * grid
                          + std::min(xx, grid - 1)];
        };
        return (1 - fy) * ((1 - fx) * v(y0, x0) + fx * v(y0, x0 + 1))
            + fy * ((1 - fx) * v(y0 + 1, x0) + fx * v(y0 + 1, x0 + 1));
    }
};

// per-pixel texture intensity in [0, 1] for a relevant class
double texture_value(int cls, double y, double x, int size, Rng &params_rng,
                     const std::vector<double> &p, const ValueNoise *noise)
{
    (void)params_rng;
    switch (cls) {
    case squamous: {
        // stripes: p = {angle, freq, phase}
        const double t = std::cos(p[1] * (x * std::cos(p[0]) + y * std::sin(p[0])) + p[2]);
        return 0.5 + 0.5 * t;
    }
    case ndbe: {
        // round blobs: p = {cx1, cy1, r1, cx2, cy2, r2, ...}
        double acc = 0.0;
        for (std::size_t i = 0; i + 2 < p.size(); i += 3) {
            const double d2 = (x - p[i]) * (x - p[i]) + (y - p[i + 1]) * (y - p[i + 1]);
            acc += std::exp(-d2 / (2.0 * p[i + 2] * p[i + 2]));
        }
        return std::min(1.0, acc);
    }
    case lgd: {
        // rings: p = {cx, cy, radius, width, cx2, cy2, radius2, width2}
        double acc = 0.0;
        for (std::size_t i = 0; i + 3 < p.size(); i += 4) {
            const double d = std::hypot(x - p[i], y - p[i + 1]);
            acc += std::exp(-(d - p[i + 2]) * (d - p[i + 2]) / (2.0 * p[i + 3] * p[i + 3]));
        }
        return std::min(1.0, acc);
    }
    case hgd:
        // granular field
        return noise->at(y, x) > p[0] ? 1.0 : 0.25;
    default:
        (void)size;
        return 0.0;
    }
}

std::vector<double> texture_params(int cls, int size, Rng &rng)
{
    std::vector<double> p;
    switch (cls) {
    case squamous:
        p = { rng.uniform(0.0, M_PI), rng.uniform(0.30, 0.75), rng.uniform(0.0, 2.0 * M_PI) };
        break;
    case ndbe: {
        const int blobs = 5 + static_cast<int>(rng.uniform() * 6);
        for (int i = 0; i < blobs; ++i) {
            p.push_back(rng.uniform(4.0, size - 4.0));
            p.push_back(rng.uniform(4.0, size - 4.0));
            p.push_back(rng.uniform(3.0, 7.0));
        }
        break;
    }
    case lgd: {
        const int rings = 2 + static_cast<int>(rng.uniform() * 2);
        for (int i = 0; i < rings; ++i) {
            p.push_back(rng.uniform(10.0, size - 10.0));
            p.push_back(rng.uniform(10.0, size - 10.0));
            p.push_back(rng.uniform(7.0, 18.0));
            p.push_back(rng.uniform(1.5, 3.5));
        }
        break;
    }
    case hgd:
        p = { rng.uniform(0.35, 0.6) };
        break;
    default:
        break;
    }
    return p;
}

} // namespace

SynthCorpus synth_corpus(const SynthOptions &opt, Rng &rng)
{
    static const char *sources[] = { "alpha", "beta", "gamma", "delta", "heldout" };
    const int size = opt.tile_size;
    SynthCorpus corpus;

    for (int cls = first_relevant_class; cls < class_count; ++cls) {
        for (int idx = 0; idx < opt.n_per_class; ++idx) {
            Image tile(size, size, opt.grayscale ? 1 : 3);
            MaskTile mask(size, size);

            const auto params = texture_params(cls, size, rng);
            std::unique_ptr<ValueNoise> noise;
            if (cls == hgd)
                noise = std::make_unique<ValueNoise>(
                    size, 6 + static_cast<int>(rng.uniform() * 5), rng);

            // per-tile color jitter shared by every pixel
            const double jr = rng.uniform(-18.0, 18.0);
            const double jg = rng.uniform(-18.0, 18.0);
            const double jb = rng.uniform(-18.0, 18.0);

            // smooth per-tile illumination fields: low-frequency structure a
            // model can only reconstruct by actually encoding it
            const ValueNoise field_r(size, 14, rng);
            const ValueNoise field_g(size, 14, rng);
            const ValueNoise field_b(size, 14, rng);

            // irrelevant regions: one border band of background, one stroma disc
            const int band_side = static_cast<int>(rng.uniform() * 4.0);
            const int band_width = 3 + static_cast<int>(rng.uniform() * 10.0);
            const double scx = rng.uniform(0.0, size), scy = rng.uniform(0.0, size);
            const double sradius = rng.uniform(6.0, 14.0);

            for (int y = 0; y < size; ++y)
                for (int x = 0; x < size; ++x) {
                    int pixel_class = cls;
                    const bool in_band = (band_side == 0 && y < band_width)
                        || (band_side == 1 && y >= size - band_width)
                        || (band_side == 2 && x < band_width)
                        || (band_side == 3 && x >= size - band_width);
                    if (in_band)
                        pixel_class = background;
                    else if (std::hypot(x - scx, y - scy) < sradius)
                        pixel_class = stroma;
                    mask.at(y, x) = static_cast<std::uint8_t>(pixel_class);

                    const Rgb base = base_colors[pixel_class];
                    double shade = 1.0;
                    if (pixel_class >= first_relevant_class) {
                        const double t =
                            texture_value(cls, y, x, size, rng, params, noise.get());
                        shade = 0.55 + 0.45 * (1.0 - t);
                    }
                    const double fr = 20.0 * (field_r.at(y, x) - 0.5);
                    const double fg = 20.0 * (field_g.at(y, x) - 0.5);
                    const double fb = 20.0 * (field_b.at(y, x) - 0.5);
                    const double rr = std::clamp(base.r * shade + jr + fr, 0.0, 255.0);
                    const double gg = std::clamp(base.g * shade + jg + fg, 0.0, 255.0);
                    const double bb = std::clamp(base.b * shade + jb + fb, 0.0, 255.0);
                    if (opt.grayscale) {
                        tile.at(y, x, 0) =
                            static_cast<std::uint8_t>((rr + gg + bb) / 3.0 + 0.5);
                    } else {
                        tile.at(y, x, 0) = static_cast<std::uint8_t>(rr + 0.5);
                        tile.at(y, x, 1) = static_cast<std::uint8_t>(gg + 0.5);
                        tile.at(y, x, 2) = static_cast<std::uint8_t>(bb + 0.5);
                    }
                }

            corpus.tiles.push_back(std::move(tile));
            corpus.masks.push_back(std::move(mask));
            corpus.source_ids.emplace_back(sources[idx % 5]);
            corpus.texture_class.push_back(cls);
        }
    }
    return corpus;
}

void write_corpus(const SynthCorpus &corpus, const std::string &dir)
{
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "tiles");
    fs::create_directories(fs::path(dir) / "masks");
    for (std::size_t i = 0; i < corpus.tiles.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "p%05zu_%s.png", i, corpus.source_ids[i].c_str());
        write_png((fs::path(dir) / "tiles" / name).string(), corpus.tiles[i]);
        write_png((fs::path(dir) / "masks" / name).string(), corpus.masks[i].to_image());
    }
}

std::string source_from_filename(const std::string &filename)
{
    std::string stem = filename;
    const auto slash = stem.find_last_of('/');
    if (slash != std::string::npos)
        stem = stem.substr(slash + 1);
    const auto dot = stem.find_last_of('.');
    if (dot != std::string::npos)
        stem = stem.substr(0, dot);
    const auto underscore = stem.find_last_of('_');
    if (underscore == std::string::npos)
        return "unknown";
    return stem.substr(underscore + 1);
}

} // namespace geovae::patchkit
