#pragma once

#include <cstdint>
#include <vector>

#include "geovae/core/image.hpp"

namespace geovae::patchkit {

/// Pixel class ids used throughout the pipeline.
enum ClassId : int {
    background = 0,
    stroma = 1,
    squamous = 2,
    ndbe = 3,
    lgd = 4,
    hgd = 5,
};

constexpr int first_relevant_class = squamous;
constexpr int class_count = 6;

/// Integer annotation grid accompanying a tile; values in 0..5.
struct MaskTile {
    int height = 0;
    int width = 0;
    std::vector<std::uint8_t> values;

    MaskTile() = default;
    MaskTile(int h, int w) : height(h), width(w), values(static_cast<std::size_t>(h) * w, 0) {}

    std::uint8_t &at(int y, int x) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int y, int x) const
    {
        return values[static_cast<std::size_t>(y) * width + x];
    }

    static MaskTile from_image(const Image &img);
    Image to_image() const;
    void validate() const; ///< throws when a pixel leaves 0..5
};

/// Fraction of pixels belonging to the relevant classes (squamous and the
/// dysplasia grades); background and stroma do not count.
double relevant_fraction(const MaskTile &mask);

struct DominantLabel {
    int label = 0;       ///< class id in {2, 3, 4, 5}
    double dominance = 0; ///< winner pixel count / all pixels
};

/// Most common relevant pixel value; ties break toward the lower class id.
/// Throws std::invalid_argument when no relevant pixel exists.
DominantLabel dominant_label(const MaskTile &mask);

} // namespace geovae::patchkit
