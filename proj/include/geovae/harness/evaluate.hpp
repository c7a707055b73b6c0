#pragma once

#include "geovae/harness/dataset.hpp"
#include "geovae/nets/checkpoint.hpp"
#include "geovae/riemann/geodesic.hpp"

namespace geovae::harness {

/// Frozen latents of one manifest, probe-ready (posterior means, canonical
/// for equivariant models).
struct LatentTable {
    int latent_dim = 0;
    std::vector<std::vector<double>> latents;
    std::vector<int> labels; ///< 0..3
    std::vector<patchkit::Split> splits;
    std::vector<int> poses;
};

LatentTable encode_latents(const nets::Checkpoint &ckpt, const Dataset &data);

/// Mean masked reconstruction loss over one split (Table-1 units).
double eval_reconstruction(const nets::Checkpoint &ckpt, const Dataset &data,
                           patchkit::Split split);

struct ProbeConfig {
    int epochs = 500;
    int batch_size = 64;
    double learning_rate = 1e-3;
    int hidden = 64;
    std::uint64_t seed = 0;
    bool shuffle_labels = false; ///< chance-level control
};

struct ProbeResult {
    double accuracy = 0.0;                        ///< test split
    std::vector<std::vector<int>> confusion;      ///< [true][predicted]
    std::vector<int> predictions;                 ///< per test record
};

/// Train the three-layer MLP on train-split latents, report test accuracy.
/// Throws when a class is absent from the training split.
ProbeResult linear_probe(const LatentTable &table, const ProbeConfig &cfg);

/// Patch-level CNN baseline sharing the encoder trunk architecture.
ProbeResult cnn_baseline(const Dataset &data, const nets::ModelConfig &model_cfg,
                         const ProbeConfig &cfg);

/// Probe predictions for arbitrary latents (annotating interpolation frames).
std::vector<int> probe_predict(const LatentTable &train_table, const ProbeConfig &cfg,
                               const std::vector<std::vector<double>> &queries);

// ---------------------------------------------------------- generation

/// Generative latent draws per family: N(0, I) for the gaussian VAE,
/// U(S^{m-1}) for spherical models, the train-latent bounding box for the
/// euclidean AE.
nets::Tensor<float> sample_generative_latents(const nets::Checkpoint &ckpt, int n, Rng &rng);

struct SampleGrid {
    std::vector<Image> tiles;
    Image grid;
};

SampleGrid sample_grid(const nets::Checkpoint &ckpt, int n, Rng &rng);

// -------------------------------------------------------- interpolation

enum class InterpMode { linear, slerp, geodesic };

/// Mode the checkpoint's family implies: slerp on spheres, linear otherwise.
InterpMode default_interp_mode(const nets::ModelConfig &cfg);

struct InterpolationStrip {
    std::vector<Image> frames;        ///< x1, recon1, interiors, recon2, x2
    std::vector<int> predicted_class; ///< per frame, -1 when no probe given
    Image strip;
};

/// steps >= 2 curve frames (the endpoint reconstructions included), plus the
/// two originals at the ends. The riemannian mode pulls the metric field
/// from the training latents.
InterpolationStrip interpolate(const nets::Checkpoint &ckpt, const Dataset &data,
                               const Image &x1, const Image &x2, int steps, InterpMode mode,
                               const LatentTable *probe_table = nullptr,
                               const ProbeConfig *probe_cfg = nullptr);

// ----------------------------------------------------------- riemannian

/// Metric field over the latent space: centroids are encoded train latents
/// (capped, k-means grouped beyond the cap), factors sigma_i * I from the
/// per-sample posterior scale.
riemann::MetricField build_metric_field(const nets::Checkpoint &ckpt, const Dataset &data,
                                        int centroid_cap = 1000, double temperature = 1.5,
                                        double regularization = 0.01);

/// (z, log sqrt det G) rows at the encoded latents, as CSV.
void export_volume_map(const nets::Checkpoint &ckpt, const Dataset &data,
                       const std::string &csv_path, int centroid_cap = 1000);

/// m=3 latent point cloud: x,y,z,label rows. Throws for other dimensions.
void export_latent_3d(const nets::Checkpoint &ckpt, const Dataset &data,
                      const std::string &csv_path);

} // namespace geovae::harness
