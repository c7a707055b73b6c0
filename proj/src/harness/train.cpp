#include "geovae/harness/train.hpp"

#include <cmath>
#include <filesystem>

#include "geovae/nets/optim.hpp"
#include "geovae/nets/vae.hpp"

namespace geovae::harness {

namespace {

namespace fs = std::filesystem;

Image to_channels(const Image &img, int channels)
{
    if (img.channels == channels)
        return img;
    Image out(img.width, img.height, channels);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            if (channels == 1) {
                int acc = 0;
                for (int c = 0; c < img.channels; ++c)
                    acc += img.at(y, x, c);
                out.at(y, x, 0) = static_cast<std::uint8_t>(acc / img.channels);
            } else {
                for (int c = 0; c < channels; ++c)
                    out.at(y, x, c) = img.at(y, x, std::min(c, img.channels - 1));
            }
        }
    return out;
}

} // namespace

nets::Tensor<float> prepare_tile(const Image &tile, int channels,
                                 const std::vector<double> &mean,
                                 const std::vector<double> &stdev)
{
    constexpr int frame = nets::ModelConfig::image_size;
    const Image img = to_channels(tile, channels);
    const int pad_y = (frame - img.height) / 2;
    const int pad_x = (frame - img.width) / 2;
    if (pad_y < 0 || pad_x < 0)
        throw std::invalid_argument("prepare_tile: tile larger than the 68x68 frame");
    nets::Tensor<float> out({ 1, channels, frame, frame });
    for (int c = 0; c < channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                const double v = img.at(y, x, c) / 255.0;
                out.v[(static_cast<std::size_t>(c) * frame + (y + pad_y)) * frame + (x + pad_x)] =
                    static_cast<float>((v - mean[c]) / stdev[c]);
            }
    return out;
}

Image tensor_to_image(const nets::Tensor<float> &batch, int item, const std::vector<double> &mean,
                      const std::vector<double> &stdev, bool crop_to_64)
{
    const int c = batch.dim(1), h = batch.dim(2), w = batch.dim(3);
    const int border = crop_to_64 ? (h - 64) / 2 : 0;
    const int oh = crop_to_64 ? 64 : h, ow = crop_to_64 ? 64 : w;
    Image img(ow, oh, c);
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < oh; ++y)
            for (int x = 0; x < ow; ++x) {
                const double v = batch.v[((static_cast<std::size_t>(item) * c + ch) * h
                                          + (y + border))
                                             * w
                    + (x + border)];
                const double denorm = (v * stdev[ch] + mean[ch]) * 255.0;
                img.at(y, x, ch) =
                    static_cast<std::uint8_t>(std::clamp(denorm, 0.0, 255.0) + 0.5);
            }
    return img;
}

Dataset load_dataset(const patchkit::CorpusManifest &manifest, const std::string &corpus_root,
                     int channels, const std::vector<double> *stats_mean,
                     const std::vector<double> *stats_std)
{
    constexpr int frame = nets::ModelConfig::image_size;
    Dataset ds;
    const std::size_t n = manifest.records.size();
    ds.images = nets::Tensor<float>({ static_cast<int>(n), channels, frame, frame });
    ds.labels.resize(n);
    ds.raw_labels.resize(n);
    ds.splits.resize(n);

    // first pass: raw [0,1] pixels into place, remember split membership
    std::vector<Image> tiles;
    tiles.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto &rec = manifest.records[i];
        const fs::path path = fs::path(corpus_root) / rec.image_path;
        tiles.push_back(to_channels(read_png(path.string()), channels));
        ds.raw_labels[i] = rec.label;
        ds.labels[i] = rec.label - patchkit::first_relevant_class;
        ds.splits[i] = rec.split;
        switch (rec.split) {
        case patchkit::Split::train: ds.train_idx.push_back(i); break;
        case patchkit::Split::val: ds.val_idx.push_back(i); break;
        case patchkit::Split::test: ds.test_idx.push_back(i); break;
        }
    }

    if (stats_mean && stats_std) {
        ds.mean = *stats_mean;
        ds.stdev = *stats_std;
    } else {
        // per-channel statistics over the train split content pixels
        ds.mean.assign(channels, 0.0);
        ds.stdev.assign(channels, 0.0);
        std::size_t count = 0;
        const auto &stat_idx = ds.train_idx.empty()
            ? (ds.test_idx.empty() ? ds.val_idx : ds.test_idx)
            : ds.train_idx;
        for (std::size_t i : stat_idx) {
            const Image &img = tiles[i];
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    for (int ch = 0; ch < channels; ++ch)
                        ds.mean[ch] += img.at(y, x, ch) / 255.0;
            count += static_cast<std::size_t>(img.height) * img.width;
        }
        for (int ch = 0; ch < channels; ++ch)
            ds.mean[ch] /= std::max<std::size_t>(count, 1);
        for (std::size_t i : stat_idx) {
            const Image &img = tiles[i];
            for (int y = 0; y < img.height; ++y)
                for (int x = 0; x < img.width; ++x)
                    for (int ch = 0; ch < channels; ++ch) {
                        const double d = img.at(y, x, ch) / 255.0 - ds.mean[ch];
                        ds.stdev[ch] += d * d;
                    }
        }
        for (int ch = 0; ch < channels; ++ch)
            ds.stdev[ch] = std::max(std::sqrt(ds.stdev[ch] / std::max<std::size_t>(count, 1)),
                                    1e-6);
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto one = prepare_tile(tiles[i], channels, ds.mean, ds.stdev);
        std::copy(one.v.begin(), one.v.end(),
                  ds.images.v.begin()
                      + static_cast<std::size_t>(i) * channels * frame * frame);
    }
    return ds;
}

nets::Tensor<float> Dataset::gather(const std::vector<std::size_t> &idx) const
{
    const int c = images.dim(1), h = images.dim(2), w = images.dim(3);
    nets::Tensor<float> out({ static_cast<int>(idx.size()), c, h, w });
    const std::size_t stride = static_cast<std::size_t>(c) * h * w;
    for (std::size_t k = 0; k < idx.size(); ++k)
        std::copy(images.v.begin() + idx[k] * stride, images.v.begin() + (idx[k] + 1) * stride,
                  out.v.begin() + k * stride);
    return out;
}

TrainResult train(const TrainConfig &config, const Dataset &data,
                  const nets::Checkpoint *resume_from, int stop_after)
{
    if (config.epochs < 0 || config.batch_size < 1)
        throw std::invalid_argument("train: non-positive epoch/batch settings");
    if (data.train_idx.empty())
        throw std::invalid_argument("train: dataset has no train split");

    Rng rng(config.seed);
    nets::Model<float> model(config.model, rng);
    nets::Adam<float> opt(model.params(), config.learning_rate);

    int start_epoch = 0;
    if (resume_from) {
        resume_from->apply_to(model);
        start_epoch = resume_from->epoch;
        rng.set_state(resume_from->rng_state);
        if (resume_from->adam) {
            opt.set_step_count(resume_from->adam->step_count);
            opt.first_moments() = resume_from->adam->first_moments;
            opt.second_moments() = resume_from->adam->second_moments;
        }
    }

    TrainResult result;

    const int end_epoch = stop_after >= 0 ? std::min(stop_after, config.epochs) : config.epochs;
    for (int epoch = start_epoch; epoch < end_epoch; ++epoch) {
        // seeded shuffle per epoch, always from the pristine order so a
        // resumed run sees exactly the batches the uninterrupted run would
        std::vector<std::size_t> order = data.train_idx;
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform() * i)]);

        const double lr = nets::cosine_annealed_lr(config.learning_rate, epoch, config.epochs);
        EpochStats stats;
        stats.epoch = epoch;
        int batches = 0;
        for (std::size_t off = 0; off < order.size(); off += config.batch_size) {
            const std::size_t take = std::min<std::size_t>(config.batch_size,
                                                           order.size() - off);
            if (take < 2 && config.model.spread_weight > 0.0)
                continue; // spread needs pairs; drop the unpairable remainder
            std::vector<std::size_t> idx(order.begin() + off, order.begin() + off + take);
            const auto x = data.gather(idx);
            const auto out = model.forward(x, rng, true);
            if (!std::isfinite(out.loss.total))
                throw std::runtime_error("train: non-finite loss at epoch "
                                         + std::to_string(epoch) + ", batch "
                                         + std::to_string(batches));
            opt.zero_grad();
            model.backward();
            opt.step(lr);
            stats.reconstruction += out.loss.reconstruction;
            stats.regularization += out.loss.regularization;
            stats.spread += out.loss.spread;
            stats.total += out.loss.total;
            ++batches;
        }
        if (batches > 0) {
            stats.reconstruction /= batches;
            stats.regularization /= batches;
            stats.spread /= batches;
            stats.total /= batches;
        }
        result.history.push_back(stats);
    }

    result.checkpoint = nets::Checkpoint::from_model(model);
    result.checkpoint.epoch = end_epoch;
    result.checkpoint.seed = config.seed;
    result.checkpoint.rng_state = rng.state();
    result.checkpoint.norm_mean = data.mean;
    result.checkpoint.norm_std = data.stdev;

    nets::AdamState adam;
    adam.step_count = opt.step_count();
    adam.first_moments = opt.first_moments();
    adam.second_moments = opt.second_moments();
    result.checkpoint.adam = std::move(adam);

    // train-latent bounding box: the generation support of euclidean AEs
    const int m = config.model.latent_dim;
    result.checkpoint.latent_lo.assign(m, std::numeric_limits<double>::infinity());
    result.checkpoint.latent_hi.assign(m, -std::numeric_limits<double>::infinity());
    const int enc_batch = 64;
    for (std::size_t off = 0; off < data.train_idx.size(); off += enc_batch) {
        const std::size_t take = std::min<std::size_t>(enc_batch, data.train_idx.size() - off);
        std::vector<std::size_t> idx(data.train_idx.begin() + off,
                                     data.train_idx.begin() + off + take);
        const auto head = model.encode(data.gather(idx));
        for (std::size_t i = 0; i < take; ++i)
            for (int d = 0; d < m; ++d) {
                const double v = head.mu.v[i * m + d];
                result.checkpoint.latent_lo[d] = std::min(result.checkpoint.latent_lo[d], v);
                result.checkpoint.latent_hi[d] = std::max(result.checkpoint.latent_hi[d], v);
            }
    }
    if (data.train_idx.empty())
        result.checkpoint.latent_lo.assign(m, -1.0), result.checkpoint.latent_hi.assign(m, 1.0);
    return result;
}

TrainResult train(const TrainConfig &config, const patchkit::CorpusManifest &manifest,
                  const std::string &corpus_root, const nets::Checkpoint *resume_from,
                  int stop_after)
{
    if (resume_from) {
        const auto data = load_dataset(manifest, corpus_root, config.model.channels,
                                       &resume_from->norm_mean, &resume_from->norm_std);
        return train(config, data, resume_from, stop_after);
    }
    const auto data = load_dataset(manifest, corpus_root, config.model.channels);
    return train(config, data, resume_from, stop_after);
}

} // namespace geovae::harness
