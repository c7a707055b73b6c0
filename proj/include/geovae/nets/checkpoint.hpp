#pragma once

#include <array>
#include <optional>
#include <string>

#include "geovae/nets/optim.hpp"
#include "geovae/nets/vae.hpp"

namespace geovae::nets {

/// Optimizer state carried across resumes.
struct AdamState {
    int step_count = 0;
    std::vector<std::vector<double>> first_moments;
    std::vector<std::vector<double>> second_moments;
};

/// Single-file training archive: config, named parameter tensors, the
/// training-set normalization statistics, rng state, epoch counter and
/// optional optimizer state. Versioned, deterministic byte layout.
struct Checkpoint {
    static constexpr int format_version = 1;

    ModelConfig config;
    int epoch = 0;
    std::uint64_t seed = 0;
    std::array<std::uint64_t, 4> rng_state {};
    std::vector<double> norm_mean; ///< per channel, training split
    std::vector<double> norm_std;
    std::vector<double> latent_lo; ///< train-latent bounding box (generation
    std::vector<double> latent_hi; ///< support for euclidean autoencoders)
    std::vector<std::pair<std::string, Tensor<float>>> tensors;
    std::optional<AdamState> adam;

    void save(const std::string &path) const;
    static Checkpoint load(const std::string &path);

    /// Snapshot parameters (by canonical name) out of a model.
    static Checkpoint from_model(Model<float> &model);
    /// Restore parameters into a model built from this config.
    void apply_to(Model<float> &model) const;
};

/// json round trip for configs (shared by checkpoints and run configs).
std::string model_config_to_json(const ModelConfig &cfg);
ModelConfig model_config_from_json(const std::string &json, bool reject_unknown = true);

} // namespace geovae::nets
