#include "geovae/nets/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace geovae::nets {

namespace {
constexpr int latent_grid[] = { 3, 8, 16, 32, 64, 128, 256, 512 };
}

std::string ModelConfig::tag() const
{
    std::string t;
    if (equivariant)
        t += "eq-";
    t += family == Family::spherical ? "s" : "n";
    t += variational ? "-vae" : "-ae";
    if (spread_weight > 0.0)
        t += "-spread";
    return t;
}

void ModelConfig::validate() const
{
    if (std::find(std::begin(latent_grid), std::end(latent_grid), latent_dim)
        == std::end(latent_grid))
        throw std::invalid_argument(
            "latent_dim: must be one of {3, 8, 16, 32, 64, 128, 256, 512}");
    if (family == Family::spherical && variational && latent_dim > 256)
        throw std::invalid_argument(
            "latent_dim: spherical variational models are numerically unstable above 256; "
            "the vanishing hypersphere surface area makes the vMF head collapse even with "
            "the kappa_min clamp, so this configuration is refused (use the spherical "
            "autoencoder for 512)");
    if (equivariant && latent_dim < 8)
        throw std::invalid_argument(
            "latent_dim: equivariant models need at least 8 (rotation blocks act on "
            "coordinate pairs)");
    if (equivariant && latent_dim % 2 != 0)
        throw std::invalid_argument("latent_dim: equivariant models need an even size");
    if (group_order < 1)
        throw std::invalid_argument("group_order: must be >= 1");
    if (kappa_min < 0.0)
        throw std::invalid_argument("kappa_min: must be >= 0");
    if (!(kappa_fixed > 0.0))
        throw std::invalid_argument("kappa_fixed: must be > 0");
    if (spread_weight < 0.0)
        throw std::invalid_argument("spread_weight: must be >= 0");
    if (spread_weight > 0.0 && family != Family::spherical)
        throw std::invalid_argument(
            "spread_weight: the spread penalty is defined on unit latents; it applies to "
            "spherical families only");
    if (channels != 1 && channels != 3)
        throw std::invalid_argument("channels: must be 1 (grayscale) or 3 (RGB)");
    for (int w : widths)
        if (w < 1)
            throw std::invalid_argument("widths: must be positive");
}

} // namespace geovae::nets
