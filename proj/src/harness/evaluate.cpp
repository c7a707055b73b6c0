#include "geovae/harness/evaluate.hpp"

#include <cmath>
#include <fstream>

#include "geovae/nets/probe.hpp"
#include "geovae/nets/vae.hpp"
#include "geovae/sphere/vmf.hpp"

namespace geovae::harness {

namespace {

constexpr int n_classes = 4;

nets::Model<float> restore(const nets::Checkpoint &ckpt)
{
    Rng rng(ckpt.seed);
    nets::Model<float> model(ckpt.config, rng);
    ckpt.apply_to(model);
    return model;
}

std::vector<std::size_t> batched(std::size_t n, std::size_t batch, std::size_t off)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = off; i < std::min(n, off + batch); ++i)
        idx.push_back(i);
    return idx;
}

} // namespace

LatentTable encode_latents(const nets::Checkpoint &ckpt, const Dataset &data)
{
    auto model = restore(ckpt);
    const int m = ckpt.config.latent_dim;
    const std::size_t n = data.labels.size();

    LatentTable table;
    table.latent_dim = m;
    table.latents.reserve(n);
    table.labels = data.labels;
    table.splits = data.splits;

    constexpr std::size_t batch = 32;
    for (std::size_t off = 0; off < n; off += batch) {
        std::vector<std::size_t> idx;
        for (std::size_t i = off; i < std::min(n, off + batch); ++i)
            idx.push_back(i);
        const auto head = model.encode(data.gather(idx));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::vector<double> z(m);
            for (int d = 0; d < m; ++d)
                z[d] = head.mu.v[i * m + d];
            table.latents.push_back(std::move(z));
            table.poses.push_back(head.pose.empty() ? 0 : head.pose[i]);
        }
    }
    return table;
}

double eval_reconstruction(const nets::Checkpoint &ckpt, const Dataset &data,
                           patchkit::Split split)
{
    const auto &idx_all = data.split_indices(split);
    if (idx_all.empty())
        throw std::invalid_argument("eval_reconstruction: split is empty");
    auto model = restore(ckpt);

    Rng rng(0); // eval path is deterministic (z = mu), the rng goes unused
    double acc = 0.0;
    std::size_t seen = 0;
    constexpr std::size_t batch = 16;
    for (std::size_t off = 0; off < idx_all.size(); off += batch) {
        std::vector<std::size_t> idx(idx_all.begin() + off,
                                     idx_all.begin()
                                         + std::min(idx_all.size(), off + batch));
        const auto x = data.gather(idx);
        const auto out = model.forward(x, rng, false);
        acc += out.loss.reconstruction * idx.size();
        seen += idx.size();
    }
    return acc / seen;
}

namespace {

ProbeResult run_probe(const std::vector<std::vector<double>> &latents,
                      const std::vector<int> &labels,
                      const std::vector<patchkit::Split> &splits, int in_dim,
                      const ProbeConfig &cfg,
                      const std::vector<std::vector<double>> *queries = nullptr,
                      std::vector<int> *query_pred = nullptr)
{
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (splits[i] == patchkit::Split::train)
            train_idx.push_back(i);
        else if (splits[i] == patchkit::Split::test)
            test_idx.push_back(i);
    }
    if (train_idx.empty())
        throw std::invalid_argument("linear_probe: no train-split latents");

    Rng rng(cfg.seed);
    std::vector<int> train_labels;
    train_labels.reserve(train_idx.size());
    for (std::size_t i : train_idx)
        train_labels.push_back(labels[i]);
    if (cfg.shuffle_labels)
        for (std::size_t i = train_labels.size(); i > 1; --i)
            std::swap(train_labels[i - 1],
                      train_labels[static_cast<std::size_t>(rng.uniform() * i)]);

    bool present[n_classes] = {};
    for (int l : train_labels)
        present[l] = true;
    for (int c = 0; c < n_classes; ++c)
        if (!present[c])
            throw std::invalid_argument("linear_probe: class " + std::to_string(c)
                                        + " absent from the training split");

    nets::ProbeMlp<float> probe("probe", in_dim, n_classes, rng, cfg.hidden);
    nets::Adam<float> opt(probe.params(), cfg.learning_rate);
    nets::CrossEntropyLoss<float> ce;

    std::vector<std::size_t> order(train_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * i)]);
        for (std::size_t off = 0; off < order.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min<std::size_t>(cfg.batch_size, order.size() - off);
            nets::Tensor<float> x({ static_cast<int>(take), in_dim });
            std::vector<int> y(take);
            for (std::size_t k = 0; k < take; ++k) {
                const std::size_t row = train_idx[order[off + k]];
                for (int d = 0; d < in_dim; ++d)
                    x.v[k * in_dim + d] = static_cast<float>(latents[row][d]);
                y[k] = train_labels[order[off + k]];
            }
            const auto logits = probe.forward(x);
            ce.forward(logits, y);
            opt.zero_grad();
            probe.backward(ce.backward());
            opt.step();
        }
    }

    auto predict = [&](const std::vector<double> &z) {
        nets::Tensor<float> x({ 1, in_dim });
        for (int d = 0; d < in_dim; ++d)
            x.v[d] = static_cast<float>(z[d]);
        const auto logits = probe.forward(x);
        int arg = 0;
        for (int j = 1; j < n_classes; ++j)
            if (logits.v[j] > logits.v[arg])
                arg = j;
        return arg;
    };

    ProbeResult result;
    result.confusion.assign(n_classes, std::vector<int>(n_classes, 0));
    int correct = 0;
    for (std::size_t i : test_idx) {
        const int pred = predict(latents[i]);
        result.predictions.push_back(pred);
        ++result.confusion[labels[i]][pred];
        correct += pred == labels[i];
    }
    result.accuracy = test_idx.empty() ? 0.0 : static_cast<double>(correct) / test_idx.size();

    if (queries && query_pred) {
        query_pred->clear();
        for (const auto &q : *queries)
            query_pred->push_back(predict(q));
    }
    return result;
}

} // namespace

ProbeResult linear_probe(const LatentTable &table, const ProbeConfig &cfg)
{
    return run_probe(table.latents, table.labels, table.splits, table.latent_dim, cfg);
}

std::vector<int> probe_predict(const LatentTable &train_table, const ProbeConfig &cfg,
                               const std::vector<std::vector<double>> &queries)
{
    std::vector<int> preds;
    run_probe(train_table.latents, train_table.labels, train_table.splits,
              train_table.latent_dim, cfg, &queries, &preds);
    return preds;
}

ProbeResult cnn_baseline(const Dataset &data, const nets::ModelConfig &model_cfg,
                         const ProbeConfig &cfg)
{
    Rng rng(cfg.seed);
    nets::CnnClassifier<float> clf(model_cfg, n_classes, rng);
    nets::Adam<float> opt(clf.params(), cfg.learning_rate);
    nets::CrossEntropyLoss<float> ce;

    if (data.train_idx.empty())
        throw std::invalid_argument("cnn_baseline: no train split");
    std::vector<int> train_labels;
    for (std::size_t i : data.train_idx)
        train_labels.push_back(data.labels[i]);
    if (cfg.shuffle_labels)
        for (std::size_t i = train_labels.size(); i > 1; --i)
            std::swap(train_labels[i - 1],
                      train_labels[static_cast<std::size_t>(rng.uniform() * i)]);

    std::vector<std::size_t> order(data.train_idx.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * i)]);
        for (std::size_t off = 0; off < order.size();
             off += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t take =
                std::min<std::size_t>(cfg.batch_size, order.size() - off);
            std::vector<std::size_t> idx(take);
            std::vector<int> y(take);
            for (std::size_t k = 0; k < take; ++k) {
                idx[k] = data.train_idx[order[off + k]];
                y[k] = train_labels[order[off + k]];
            }
            const auto logits = clf.forward(data.gather(idx));
            ce.forward(logits, y);
            opt.zero_grad();
            clf.backward(ce.backward());
            opt.step();
        }
    }

    ProbeResult result;
    result.confusion.assign(n_classes, std::vector<int>(n_classes, 0));
    int correct = 0;
    constexpr std::size_t batch = 16;
    for (std::size_t off = 0; off < data.test_idx.size(); off += batch) {
        std::vector<std::size_t> idx(data.test_idx.begin() + off,
                                     data.test_idx.begin()
                                         + std::min(data.test_idx.size(), off + batch));
        const auto logits = clf.forward(data.gather(idx));
        for (std::size_t k = 0; k < idx.size(); ++k) {
            int arg = 0;
            for (int j = 1; j < n_classes; ++j)
                if (logits.v[k * n_classes + j] > logits.v[k * n_classes + arg])
                    arg = j;
            result.predictions.push_back(arg);
            ++result.confusion[data.labels[idx[k]]][arg];
            correct += arg == data.labels[idx[k]];
        }
    }
    result.accuracy =
        data.test_idx.empty() ? 0.0 : static_cast<double>(correct) / data.test_idx.size();
    return result;
}

nets::Tensor<float> sample_generative_latents(const nets::Checkpoint &ckpt, int n, Rng &rng)
{
    const int m = ckpt.config.latent_dim;
    nets::Tensor<float> z({ n, m });
    const bool spherical = ckpt.config.family == nets::Family::spherical;
    if (spherical) {
        const auto zs = sphere::sample_uniform_sphere(m, n, rng);
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < m; ++d)
                z.v[static_cast<std::size_t>(i) * m + d] = static_cast<float>(zs[i].v[d]);
    } else if (ckpt.config.variational) {
        for (std::int64_t i = 0; i < z.size(); ++i)
            z.v[i] = static_cast<float>(rng.normal());
    } else {
        // euclidean AE: uniform in the train-latent bounding box
        if (static_cast<int>(ckpt.latent_lo.size()) != m)
            throw std::runtime_error(
                "sample_generative_latents: checkpoint lacks the latent bounding box");
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < m; ++d)
                z.v[static_cast<std::size_t>(i) * m + d] =
                    static_cast<float>(rng.uniform(ckpt.latent_lo[d], ckpt.latent_hi[d]));
    }
    return z;
}

SampleGrid sample_grid(const nets::Checkpoint &ckpt, int n, Rng &rng)
{
    SampleGrid grid;
    if (n == 0)
        return grid;
    auto model = restore(ckpt);
    const auto z = sample_generative_latents(ckpt, n, rng);
    const std::vector<int> poses(n, 0); // canonical orientation for generation
    const auto decoded =
        ckpt.config.equivariant ? model.decode(z, poses) : model.decode(z);
    for (int i = 0; i < n; ++i)
        grid.tiles.push_back(tensor_to_image(decoded, i, ckpt.norm_mean, ckpt.norm_std));
    grid.grid = tile_row(grid.tiles);
    return grid;
}

InterpMode default_interp_mode(const nets::ModelConfig &cfg)
{
    return cfg.family == nets::Family::spherical ? InterpMode::slerp : InterpMode::linear;
}

InterpolationStrip interpolate(const nets::Checkpoint &ckpt, const Dataset &data,
                               const Image &x1, const Image &x2, int steps, InterpMode mode,
                               const LatentTable *probe_table, const ProbeConfig *probe_cfg)
{
    if (steps < 2)
        throw std::invalid_argument("interpolate: steps must be >= 2");
    auto model = restore(ckpt);
    const int m = ckpt.config.latent_dim;

    const auto t1 = prepare_tile(x1, ckpt.config.channels, ckpt.norm_mean, ckpt.norm_std);
    const auto t2 = prepare_tile(x2, ckpt.config.channels, ckpt.norm_mean, ckpt.norm_std);
    const auto h1 = model.encode(t1);
    const auto h2 = model.encode(t2);

    Eigen::VectorXd z1(m), z2(m);
    for (int d = 0; d < m; ++d) {
        z1[d] = h1.mu.v[d];
        z2[d] = h2.mu.v[d];
    }

    // latent curve including both endpoints
    std::vector<Eigen::VectorXd> curve(steps);
    if (mode == InterpMode::slerp && (z1 - z2).norm() > 1e-12) {
        const auto u1 = sphere::UnitVector::normalized(z1);
        const auto u2 = sphere::UnitVector::normalized(z2);
        for (int j = 0; j < steps; ++j)
            curve[j] = sphere::slerp(u1, u2, static_cast<double>(j) / (steps - 1)).v;
    } else if (mode == InterpMode::geodesic && (z1 - z2).norm() > 1e-12) {
        const auto field = build_metric_field(ckpt, data);
        riemann::GeodesicOptions opt;
        opt.knot_count = steps;
        const auto path = riemann::geodesic_path(field, z1, z2, opt);
        for (int j = 0; j < steps; ++j)
            curve[j] = path.knots.row(j).transpose();
    } else {
        for (int j = 0; j < steps; ++j) {
            const double t = static_cast<double>(j) / (steps - 1);
            curve[j] = (1.0 - t) * z1 + t * z2;
        }
    }

    nets::Tensor<float> zs({ steps, m });
    for (int j = 0; j < steps; ++j)
        for (int d = 0; d < m; ++d)
            zs.v[static_cast<std::size_t>(j) * m + d] = static_cast<float>(curve[j][d]);
    // frames carry the first endpoint's pose (pose is discrete; blending it
    // has no meaning on the group)
    const std::vector<int> poses(steps, h1.pose.empty() ? 0 : h1.pose[0]);
    const auto decoded =
        ckpt.config.equivariant ? model.decode(zs, poses) : model.decode(zs);

    InterpolationStrip strip;
    strip.frames.push_back(tensor_to_image(t1, 0, ckpt.norm_mean, ckpt.norm_std));
    for (int j = 0; j < steps; ++j)
        strip.frames.push_back(tensor_to_image(decoded, j, ckpt.norm_mean, ckpt.norm_std));
    strip.frames.push_back(tensor_to_image(t2, 0, ckpt.norm_mean, ckpt.norm_std));

    strip.predicted_class.assign(strip.frames.size(), -1);
    if (probe_table && probe_cfg) {
        std::vector<std::vector<double>> queries;
        for (int j = 0; j < steps; ++j) {
            std::vector<double> q(m);
            for (int d = 0; d < m; ++d)
                q[d] = curve[j][d];
            queries.push_back(std::move(q));
        }
        const auto preds = probe_predict(*probe_table, *probe_cfg, queries);
        for (int j = 0; j < steps; ++j)
            strip.predicted_class[j + 1] = preds[j];
    }
    strip.strip = tile_row(strip.frames);
    return strip;
}

riemann::MetricField build_metric_field(const nets::Checkpoint &ckpt, const Dataset &data,
                                        int centroid_cap, double temperature,
                                        double regularization)
{
    auto model = restore(ckpt);
    const int m = ckpt.config.latent_dim;
    const auto &train = data.train_idx;
    if (train.empty())
        throw std::invalid_argument("build_metric_field: no train split");

    // encode the train split: one centroid per point up to the cap
    std::vector<Eigen::VectorXd> latents;
    std::vector<double> scales;
    constexpr std::size_t batch = 32;
    for (std::size_t off = 0; off < train.size(); off += batch) {
        std::vector<std::size_t> idx(train.begin() + off,
                                     train.begin() + std::min(train.size(), off + batch));
        const auto head = model.encode(data.gather(idx));
        for (std::size_t i = 0; i < idx.size(); ++i) {
            Eigen::VectorXd z(m);
            for (int d = 0; d < m; ++d)
                z[d] = head.mu.v[i * m + d];
            latents.push_back(std::move(z));
            scales.push_back(head.scale[i]);
        }
    }

    const int n = static_cast<int>(latents.size());
    int n_cent = std::min(n, centroid_cap);
    riemann::Mat centroids(n_cent, m);
    std::vector<riemann::Mat> factors;

    if (n <= centroid_cap) {
        for (int i = 0; i < n; ++i) {
            centroids.row(i) = latents[i].transpose();
            const double s = ckpt.config.family == nets::Family::gaussian
                ? std::max(scales[i], 1e-3)
                : 1.0 / std::sqrt(std::max(scales[i], 1.0));
            factors.push_back(s * riemann::Mat::Identity(m, m));
        }
    } else {
        // beyond the cap several points share one centroid (k-means style,
        // a few fixed Lloyd rounds seeded by strided picks)
        for (int c = 0; c < n_cent; ++c)
            centroids.row(c) = latents[static_cast<std::size_t>(c) * n / n_cent].transpose();
        std::vector<int> assign(n, 0);
        for (int round = 0; round < 5; ++round) {
            for (int i = 0; i < n; ++i) {
                double best = 1e300;
                for (int c = 0; c < n_cent; ++c) {
                    const double d = (latents[i].transpose() - centroids.row(c)).squaredNorm();
                    if (d < best) {
                        best = d;
                        assign[i] = c;
                    }
                }
            }
            riemann::Mat sums = riemann::Mat::Zero(n_cent, m);
            std::vector<int> counts(n_cent, 0);
            for (int i = 0; i < n; ++i) {
                sums.row(assign[i]) += latents[i].transpose();
                ++counts[assign[i]];
            }
            for (int c = 0; c < n_cent; ++c)
                if (counts[c] > 0)
                    centroids.row(c) = sums.row(c) / counts[c];
        }
        std::vector<double> scale_sum(n_cent, 0.0);
        std::vector<int> counts(n_cent, 0);
        for (int i = 0; i < n; ++i) {
            scale_sum[assign[i]] += scales[i];
            ++counts[assign[i]];
        }
        for (int c = 0; c < n_cent; ++c) {
            const double mean_scale = counts[c] ? scale_sum[c] / counts[c] : 1.0;
            const double s = ckpt.config.family == nets::Family::gaussian
                ? std::max(mean_scale, 1e-3)
                : 1.0 / std::sqrt(std::max(mean_scale, 1.0));
            factors.push_back(s * riemann::Mat::Identity(m, m));
        }
    }
    return riemann::MetricField(centroids, factors, temperature, regularization);
}

void export_volume_map(const nets::Checkpoint &ckpt, const Dataset &data,
                       const std::string &csv_path, int centroid_cap)
{
    const auto field = build_metric_field(ckpt, data, centroid_cap);
    const auto table = encode_latents(ckpt, data);

    std::ofstream f(csv_path, std::ios::binary);
    if (!f)
        throw std::runtime_error("export_volume_map: cannot open " + csv_path);
    f << "label";
    for (int d = 0; d < table.latent_dim; ++d)
        f << ",z" << d;
    f << ",log_sqrt_det\n";
    char buf[40];
    for (std::size_t i = 0; i < table.latents.size(); ++i) {
        riemann::Vec z(table.latent_dim);
        for (int d = 0; d < table.latent_dim; ++d)
            z[d] = table.latents[i][d];
        f << table.labels[i];
        for (int d = 0; d < table.latent_dim; ++d) {
            std::snprintf(buf, sizeof(buf), "%.9f", table.latents[i][d]);
            f << ',' << buf;
        }
        std::snprintf(buf, sizeof(buf), "%.9f", riemann::log_sqrt_det_metric(field, z));
        f << ',' << buf << "\n";
    }
}

void export_latent_3d(const nets::Checkpoint &ckpt, const Dataset &data,
                      const std::string &csv_path)
{
    if (ckpt.config.latent_dim != 3)
        throw std::invalid_argument("export_latent_3d: checkpoint latent_dim must be 3");
    const auto table = encode_latents(ckpt, data);
    std::ofstream f(csv_path, std::ios::binary);
    if (!f)
        throw std::runtime_error("export_latent_3d: cannot open " + csv_path);
    f << "x,y,z,label\n";
    char buf[40];
    for (std::size_t i = 0; i < table.latents.size(); ++i) {
        for (int d = 0; d < 3; ++d) {
            std::snprintf(buf, sizeof(buf), "%.9f", table.latents[i][d]);
            f << buf << ',';
        }
        f << table.labels[i] << "\n";
    }
}

} // namespace geovae::harness
