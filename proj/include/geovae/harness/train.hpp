#pragma once

#include "geovae/harness/dataset.hpp"
#include "geovae/nets/checkpoint.hpp"

namespace geovae::harness {

struct TrainConfig {
    int epochs = 500;
    int batch_size = 128;
    double learning_rate = 5e-4; ///< Adam base rate, cosine-annealed
    std::uint64_t seed = 0;
    nets::ModelConfig model;
};

struct EpochStats {
    int epoch = 0;
    double reconstruction = 0.0;
    double regularization = 0.0;
    double spread = 0.0;
    double total = 0.0;
};

struct TrainResult {
    nets::Checkpoint checkpoint;
    std::vector<EpochStats> history;
};

/// Adam + cosine annealing training loop over the manifest's train split.
/// Deterministic given the seed. Non-finite losses abort with the epoch and
/// batch index in the message. Pass a checkpoint to resume from its epoch;
/// stop_after interrupts early while keeping the full-length lr schedule.
TrainResult train(const TrainConfig &config, const Dataset &data,
                  const nets::Checkpoint *resume_from = nullptr, int stop_after = -1);

/// Convenience wrapper loading the dataset from a manifest first.
TrainResult train(const TrainConfig &config, const patchkit::CorpusManifest &manifest,
                  const std::string &corpus_root, const nets::Checkpoint *resume_from = nullptr,
                  int stop_after = -1);

} // namespace geovae::harness
