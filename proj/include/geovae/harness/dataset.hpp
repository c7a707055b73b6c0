#pragma once

#include "geovae/nets/tensor.hpp"
#include "geovae/patchkit/manifest.hpp"

namespace geovae::harness {

/// Manifest tiles loaded to normalized float tensors, padded to 68x68.
/// Normalization statistics always come from the train split and ride along
/// so checkpoints can reproduce them.
struct Dataset {
    nets::Tensor<float> images;           ///< [N, C, 68, 68]
    std::vector<int> labels;              ///< 0..3 (classes 2..5 remapped)
    std::vector<int> raw_labels;          ///< original class ids 2..5
    std::vector<patchkit::Split> splits;
    std::vector<std::size_t> train_idx, val_idx, test_idx;
    std::vector<double> mean, stdev;      ///< per channel

    const std::vector<std::size_t> &split_indices(patchkit::Split s) const
    {
        switch (s) {
        case patchkit::Split::train: return train_idx;
        case patchkit::Split::val: return val_idx;
        case patchkit::Split::test: return test_idx;
        }
        return train_idx;
    }

    /// Gather a batch of images by dataset indices.
    nets::Tensor<float> gather(const std::vector<std::size_t> &idx) const;
};

/// Load every manifest record (paths resolved against corpus_root). When
/// stats_mean/std are supplied they override the train-split statistics
/// (used when evaluating with a checkpoint's stored normalization).
Dataset load_dataset(const patchkit::CorpusManifest &manifest, const std::string &corpus_root,
                     int channels, const std::vector<double> *stats_mean = nullptr,
                     const std::vector<double> *stats_std = nullptr);

/// Normalize + pad one decoded tile with the given statistics.
nets::Tensor<float> prepare_tile(const Image &tile, int channels,
                                 const std::vector<double> &mean,
                                 const std::vector<double> &stdev);

/// Invert the normalization back to an 8-bit image (central 64x64 content
/// plus the padding frame as stored).
Image tensor_to_image(const nets::Tensor<float> &batch, int item, const std::vector<double> &mean,
                      const std::vector<double> &stdev, bool crop_to_64 = true);

} // namespace geovae::harness
