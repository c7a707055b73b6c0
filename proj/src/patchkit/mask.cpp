#include "geovae/patchkit/mask.hpp"

#include <array>
#include <stdexcept>

namespace geovae::patchkit {

MaskTile MaskTile::from_image(const Image &img)
{
    if (img.channels != 1)
        throw std::invalid_argument("MaskTile: mask images must be single channel");
    MaskTile m(img.height, img.width);
    m.values = img.pixels;
    m.validate();
    return m;
}

Image MaskTile::to_image() const
{
    Image img(width, height, 1);
    img.pixels = values;
    return img;
}

void MaskTile::validate() const
{
    for (std::uint8_t v : values)
        if (v >= class_count)
            throw std::invalid_argument("MaskTile: pixel value " + std::to_string(v)
                                        + " outside 0..5");
}

double relevant_fraction(const MaskTile &mask)
{
    if (mask.values.empty())
        return 0.0;
    std::size_t relevant = 0;
    for (std::uint8_t v : mask.values)
        relevant += v >= first_relevant_class;
    return static_cast<double>(relevant) / mask.values.size();
}

DominantLabel dominant_label(const MaskTile &mask)
{
    std::array<std::size_t, class_count> counts {};
    for (std::uint8_t v : mask.values)
        ++counts[v];

    int best = -1;
    std::size_t best_count = 0;
    for (int c = first_relevant_class; c < class_count; ++c)
        if (counts[c] > best_count) { // strict: ties keep the lower class id
            best_count = counts[c];
            best = c;
        }
    if (best < 0)
        throw std::invalid_argument("dominant_label: mask has no relevant pixels");
    return { best, static_cast<double>(best_count) / mask.values.size() };
}

} // namespace geovae::patchkit
