#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "geovae/harness/evaluate.hpp"
#include "geovae/harness/metrics.hpp"
#include "geovae/harness/rundir.hpp"
#include "geovae/harness/train.hpp"
#include "geovae/patchkit/synth.hpp"

namespace fs = std::filesystem;
using namespace geovae;

namespace {

struct UserError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void write_text(const std::string &path, const std::string &text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw std::runtime_error("cannot open for writing: " + path);
    f << text;
}

std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

// ---------------------------------------------------------------- synth

int cmd_synth(const std::string &out_dir, int n_per_class, int tile, std::uint64_t seed,
              bool grayscale)
{
    Rng rng(seed);
    patchkit::SynthOptions opt;
    opt.n_per_class = n_per_class;
    opt.tile_size = tile;
    opt.grayscale = grayscale;
    const auto corpus = patchkit::synth_corpus(opt, rng);
    patchkit::write_corpus(corpus, out_dir);
    std::cout << "wrote " << corpus.tiles.size() << " tile/mask pairs to " << out_dir << "\n";
    return 0;
}

// ------------------------------------------------------------ preprocess

int cmd_preprocess(const std::string &corpus_dir, double threshold, int cap,
                   std::uint64_t seed, double val_fraction,
                   const std::vector<std::string> &test_sources, const std::string &out_path)
{
    const fs::path tiles_dir = fs::path(corpus_dir) / "tiles";
    const fs::path masks_dir = fs::path(corpus_dir) / "masks";
    if (!fs::is_directory(tiles_dir))
        throw UserError("corpus has no tiles/ directory: " + corpus_dir);

    std::vector<std::string> names;
    for (const auto &entry : fs::directory_iterator(tiles_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".png")
            names.push_back(entry.path().filename().string());
    std::sort(names.begin(), names.end());

    std::vector<patchkit::PatchRecord> records;
    for (const auto &name : names) {
        const fs::path mask_path = masks_dir / name;
        if (!fs::exists(mask_path))
            throw UserError("missing mask for tile: " + name);
        patchkit::MaskTile mask;
        try {
            mask = patchkit::MaskTile::from_image(read_png(mask_path.string()));
        } catch (const std::exception &e) {
            throw UserError("unreadable mask " + name + ": " + e.what());
        }
        const double rel = patchkit::relevant_fraction(mask);
        if (rel < threshold)
            continue;
        const auto dom = patchkit::dominant_label(mask);
        patchkit::PatchRecord r;
        r.image_path = (fs::path("tiles") / name).string();
        r.mask_path = (fs::path("masks") / name).string();
        r.label = dom.label;
        r.dominance = dom.dominance;
        r.relevant_fraction = rel;
        r.source_id = patchkit::source_from_filename(name);
        records.push_back(std::move(r));
    }

    auto manifest = patchkit::stratify(records, cap, threshold, seed);
    if (!manifest.records.empty()) {
        Rng rng(seed);
        patchkit::assign_splits(manifest, val_fraction,
                                { test_sources.begin(), test_sources.end() }, rng);
    } else {
        std::cerr << "warning: no records passed the threshold " << threshold << "\n";
    }
    manifest.save(out_path);

    std::cout << "class counts:\n";
    static const char *class_names[] = { "background", "stroma", "squamous", "ndbe", "lgd",
                                         "hgd" };
    for (const auto &[cls, n] : manifest.class_counts())
        std::cout << "  " << class_names[cls] << " (" << cls << "): " << n << "\n";
    for (const auto &[split, n] : manifest.split_counts())
        std::cout << "  split " << patchkit::split_name(split) << ": " << n << "\n";
    std::cout << "manifest: " << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------- train

harness::RunConfig load_run_config(const std::string &path, std::int64_t seed_override)
{
    harness::RunConfig cfg;
    try {
        cfg = harness::RunConfig::load(path);
    } catch (const std::invalid_argument &e) {
        throw UserError(std::string("invalid config: ") + e.what());
    }
    if (seed_override >= 0)
        cfg.train.seed = static_cast<std::uint64_t>(seed_override);
    return cfg;
}

int cmd_train(const std::string &config_path, std::int64_t seed_override,
              const std::string &run_root, bool resume)
{
    const auto cfg = load_run_config(config_path, seed_override);
    const auto manifest = patchkit::CorpusManifest::load(cfg.manifest_path);
    const std::string run_dir = harness::run_directory(cfg, run_root);
    fs::create_directories(run_dir);

    const nets::Checkpoint *resume_ptr = nullptr;
    nets::Checkpoint previous;
    const std::string ckpt_path = (fs::path(run_dir) / "checkpoint.bin").string();
    if (resume) {
        if (!fs::exists(ckpt_path))
            throw UserError("resume requested but no checkpoint at " + ckpt_path);
        previous = nets::Checkpoint::load(ckpt_path);
        resume_ptr = &previous;
    }

    const auto result = harness::train(cfg.train, manifest, cfg.corpus_root, resume_ptr);
    result.checkpoint.save(ckpt_path);
    write_text((fs::path(run_dir) / "config.json").string(), cfg.to_json());

    std::string curves;
    const std::string curves_path = (fs::path(run_dir) / "loss_curves.csv").string();
    if (resume_ptr && fs::exists(curves_path)) {
        std::ifstream f(curves_path);
        std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
        curves = text;
    } else {
        curves = "epoch,reconstruction,regularization,spread,total\n";
    }
    for (const auto &e : result.history)
        curves += std::to_string(e.epoch) + "," + format_real(e.reconstruction) + ","
            + format_real(e.regularization) + "," + format_real(e.spread) + ","
            + format_real(e.total) + "\n";
    write_text(curves_path, curves);

    std::cout << run_dir << "\n";
    return 0;
}

// ------------------------------------------------------------ run loading

struct LoadedRun {
    harness::RunConfig cfg;
    nets::Checkpoint ckpt;
    patchkit::CorpusManifest manifest;
    std::string dir;
};

LoadedRun load_run(const std::string &run_dir)
{
    LoadedRun run;
    run.dir = run_dir;
    const auto cfg_path = fs::path(run_dir) / "config.json";
    const auto ckpt_path = fs::path(run_dir) / "checkpoint.bin";
    if (!fs::exists(cfg_path) || !fs::exists(ckpt_path))
        throw UserError("run directory lacks config.json/checkpoint.bin: " + run_dir);
    std::ifstream f(cfg_path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    run.cfg = harness::RunConfig::from_json(text);
    run.ckpt = nets::Checkpoint::load(ckpt_path.string());
    run.manifest = patchkit::CorpusManifest::load(run.cfg.manifest_path);
    return run;
}

harness::Dataset run_dataset(const LoadedRun &run)
{
    return harness::load_dataset(run.manifest, run.cfg.corpus_root, run.ckpt.config.channels,
                                 &run.ckpt.norm_mean, &run.ckpt.norm_std);
}

// ---------------------------------------------------------------- eval

int cmd_eval(const std::string &run_dir, const std::string &split_name)
{
    const auto run = load_run(run_dir);
    const auto data = run_dataset(run);
    const auto split = patchkit::split_from_name(split_name);
    if (data.split_indices(split).empty())
        throw UserError("split '" + split_name + "' is empty for this manifest");

    const auto t0 = std::chrono::steady_clock::now();
    const double loss = harness::eval_reconstruction(run.ckpt, data, split);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    harness::MetricsRow row;
    row.model_tag = run.ckpt.config.tag();
    row.latent_dim = run.ckpt.config.latent_dim;
    row.split = split_name;
    row.metric = "reconstruction";
    row.value = loss;
    row.seed = run.ckpt.seed;
    row.wall_time = secs;
    harness::append_metrics((fs::path(run_dir) / "metrics.csv").string(), { row });
    harness::append_timings((fs::path(run_dir) / "timings.csv").string(), { row });
    std::cout << row.model_tag << " m=" << row.latent_dim << " " << split_name
              << " reconstruction " << format_real(loss) << "\n";
    return 0;
}

// ---------------------------------------------------------------- probe

int cmd_probe(const std::string &run_dir, int epochs, std::uint64_t seed, bool shuffle)
{
    const auto run = load_run(run_dir);
    const auto data = run_dataset(run);
    const auto table = harness::encode_latents(run.ckpt, data);

    harness::ProbeConfig pcfg;
    pcfg.epochs = epochs;
    pcfg.seed = seed;
    pcfg.shuffle_labels = shuffle;
    const auto t0 = std::chrono::steady_clock::now();
    const auto result = harness::linear_probe(table, pcfg);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::string confusion = "true\\pred,squamous,ndbe,lgd,hgd\n";
    static const char *names[] = { "squamous", "ndbe", "lgd", "hgd" };
    for (int t = 0; t < 4; ++t) {
        confusion += names[t];
        for (int p = 0; p < 4; ++p)
            confusion += "," + std::to_string(result.confusion[t][p]);
        confusion += "\n";
    }
    write_text((fs::path(run_dir)
                / (shuffle ? "probe_confusion_shuffled.csv" : "probe_confusion.csv"))
                   .string(),
               confusion);

    harness::MetricsRow row;
    row.model_tag = run.ckpt.config.tag();
    row.latent_dim = run.ckpt.config.latent_dim;
    row.split = "test";
    row.metric = shuffle ? "probe_accuracy_shuffled" : "probe_accuracy";
    row.value = result.accuracy;
    row.seed = seed;
    row.wall_time = secs;
    harness::append_metrics((fs::path(run_dir) / "metrics.csv").string(), { row });
    harness::append_timings((fs::path(run_dir) / "timings.csv").string(), { row });
    std::cout << row.metric << " " << format_real(result.accuracy) << "\n";
    return 0;
}

// ----------------------------------------------------------------- cnn

int cmd_cnn(const std::string &config_path, int epochs, std::uint64_t seed)
{
    const auto cfg = load_run_config(config_path, -1);
    const auto manifest = patchkit::CorpusManifest::load(cfg.manifest_path);
    const auto data = harness::load_dataset(manifest, cfg.corpus_root, cfg.train.model.channels);

    harness::ProbeConfig pcfg;
    pcfg.epochs = epochs;
    pcfg.seed = seed;
    pcfg.learning_rate = 1e-3;
    pcfg.batch_size = 16;
    const auto result = harness::cnn_baseline(data, cfg.train.model, pcfg);
    std::cout << "cnn_accuracy " << format_real(result.accuracy) << "\n";
    return 0;
}

// --------------------------------------------------------------- sample

int cmd_sample(const std::string &run_dir, int n, std::uint64_t seed)
{
    const auto run = load_run(run_dir);
    Rng rng(seed);
    const auto grid = harness::sample_grid(run.ckpt, n, rng);
    const fs::path out_dir = fs::path(run_dir) / "samples";
    fs::create_directories(out_dir);
    for (std::size_t i = 0; i < grid.tiles.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "tile_%03zu.png", i);
        write_png((out_dir / name).string(), grid.tiles[i]);
    }
    if (!grid.grid.empty())
        write_png((out_dir / "grid.png").string(), grid.grid);
    std::cout << (out_dir / "grid.png").string() << "\n";
    return 0;
}

// ---------------------------------------------------------------- interp

int cmd_interp(const std::string &run_dir, const std::string &a_path, const std::string &b_path,
               int steps, const std::string &mode_name, bool with_probe, std::uint64_t seed)
{
    const auto run = load_run(run_dir);
    const auto data = run_dataset(run);

    harness::InterpMode mode;
    if (mode_name == "auto")
        mode = harness::default_interp_mode(run.ckpt.config);
    else if (mode_name == "linear")
        mode = harness::InterpMode::linear;
    else if (mode_name == "slerp")
        mode = harness::InterpMode::slerp;
    else if (mode_name == "geodesic")
        mode = harness::InterpMode::geodesic;
    else
        throw UserError("unknown interpolation mode: " + mode_name);

    Image img_a, img_b;
    try {
        img_a = read_png(a_path);
        img_b = read_png(b_path);
    } catch (const std::exception &e) {
        throw UserError(e.what());
    }

    std::optional<harness::LatentTable> table;
    harness::ProbeConfig pcfg;
    pcfg.seed = seed;
    if (with_probe)
        table = harness::encode_latents(run.ckpt, data);

    const auto strip =
        harness::interpolate(run.ckpt, data, img_a, img_b, steps, mode,
                             table ? &*table : nullptr, with_probe ? &pcfg : nullptr);
    const fs::path out_dir = fs::path(run_dir) / "interp";
    fs::create_directories(out_dir);
    write_png((out_dir / "strip.png").string(), strip.strip);
    for (std::size_t i = 0; i < strip.frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%02zu.png", i);
        write_png((out_dir / name).string(), strip.frames[i]);
    }
    std::string classes = "frame,predicted_class\n";
    for (std::size_t i = 0; i < strip.predicted_class.size(); ++i)
        classes += std::to_string(i) + "," + std::to_string(strip.predicted_class[i]) + "\n";
    write_text((out_dir / "classes.csv").string(), classes);
    std::cout << (out_dir / "strip.png").string() << "\n";
    return 0;
}

// --------------------------------------------------------------- export

int cmd_export3d(const std::string &run_dir, const std::string &out_path)
{
    const auto run = load_run(run_dir);
    const auto data = run_dataset(run);
    try {
        harness::export_latent_3d(run.ckpt, data, out_path);
    } catch (const std::invalid_argument &e) {
        throw UserError(e.what());
    }
    std::cout << out_path << "\n";
    return 0;
}

int cmd_volmap(const std::string &run_dir, const std::string &out_path, int cap)
{
    const auto run = load_run(run_dir);
    const auto data = run_dataset(run);
    harness::export_volume_map(run.ckpt, data, out_path, cap);
    std::cout << out_path << "\n";
    return 0;
}

// ---------------------------------------------------------------- report

int cmd_report(const std::vector<std::string> &metric_files, const std::string &out_dir)
{
    std::vector<harness::MetricsRow> rows;
    int skipped_total = 0;
    for (const auto &path : metric_files) {
        int skipped = 0;
        auto part = harness::read_metrics(path, &skipped);
        skipped_total += skipped;
        rows.insert(rows.end(), part.begin(), part.end());
    }
    const auto tables = harness::pivot_metrics(rows);
    fs::create_directories(out_dir);
    std::string all_md;
    for (const auto &t : tables) {
        all_md += t.to_markdown() + "\n";
        write_text((fs::path(out_dir) / (t.metric + "_" + t.split + ".csv")).string(),
                   t.to_csv());
    }
    write_text((fs::path(out_dir) / "report.md").string(), all_md);
    if (skipped_total > 0)
        std::cerr << "skipped " << skipped_total << " malformed metric rows\n";
    std::cout << (fs::path(out_dir) / "report.md").string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app { "geometric latent-representation toolkit" };
    app.require_subcommand(1);

    auto *synth = app.add_subcommand("synth", "generate a synthetic tile/mask corpus");
    std::string synth_out = "corpus";
    int synth_n = 10, synth_tile = 64;
    std::uint64_t synth_seed = 0;
    bool synth_gray = false;
    synth->add_option("--out", synth_out, "output corpus directory");
    synth->add_option("--n-per-class", synth_n, "tiles per texture class");
    synth->add_option("--tile", synth_tile, "tile side length");
    synth->add_option("--seed", synth_seed, "generator seed");
    synth->add_flag("--grayscale", synth_gray, "single-channel tiles");

    auto *prep = app.add_subcommand("preprocess", "threshold, label, stratify, split");
    std::string prep_corpus = "corpus", prep_out = "manifest.tsv";
    double prep_threshold = 0.5, prep_val = 0.1;
    int prep_cap = 8000;
    std::uint64_t prep_seed = 0;
    std::vector<std::string> prep_test_sources { "heldout" };
    prep->add_option("--corpus", prep_corpus, "corpus directory (tiles/ + masks/)");
    prep->add_option("--threshold", prep_threshold, "relevant-tissue threshold");
    prep->add_option("--cap", prep_cap, "per-class stratification cap");
    prep->add_option("--seed", prep_seed, "split shuffle seed");
    prep->add_option("--val-fraction", prep_val, "validation share of non-test records");
    prep->add_option("--test-sources", prep_test_sources, "source ids held out as test");
    prep->add_option("--out", prep_out, "manifest output path");

    auto *train_cmd = app.add_subcommand("train", "train a model from a run config");
    std::string train_config, train_root;
    std::int64_t train_seed = -1;
    bool train_resume = false;
    train_cmd->add_option("--config", train_config, "run config json")->required();
    train_cmd->add_option("--seed", train_seed, "override the config seed");
    train_cmd->add_option("--out", train_root, "run root directory");
    train_cmd->add_flag("--resume", train_resume, "continue from the existing checkpoint");

    auto *eval_cmd = app.add_subcommand("eval", "masked reconstruction loss on a split");
    std::string eval_run, eval_split = "test";
    eval_cmd->add_option("--run", eval_run, "run directory")->required();
    eval_cmd->add_option("--split", eval_split, "train|val|test");

    auto *probe_cmd = app.add_subcommand("probe", "linear probe on frozen latents");
    std::string probe_run;
    int probe_epochs = 500;
    std::uint64_t probe_seed = 0;
    bool probe_shuffle = false;
    probe_cmd->add_option("--run", probe_run, "run directory")->required();
    probe_cmd->add_option("--epochs", probe_epochs, "probe training epochs");
    probe_cmd->add_option("--seed", probe_seed, "probe seed");
    probe_cmd->add_flag("--shuffle-labels", probe_shuffle, "chance-level control");

    auto *cnn_cmd = app.add_subcommand("cnn", "patch classification baseline");
    std::string cnn_config;
    int cnn_epochs = 500;
    std::uint64_t cnn_seed = 0;
    cnn_cmd->add_option("--config", cnn_config, "run config json")->required();
    cnn_cmd->add_option("--epochs", cnn_epochs, "training epochs");
    cnn_cmd->add_option("--seed", cnn_seed, "seed");

    auto *sample_cmd = app.add_subcommand("sample", "random generative sampling grid");
    std::string sample_run;
    int sample_n = 8;
    std::uint64_t sample_seed = 0;
    sample_cmd->add_option("--run", sample_run, "run directory")->required();
    sample_cmd->add_option("--n", sample_n, "number of samples");
    sample_cmd->add_option("--seed", sample_seed, "sampling seed");

    auto *interp_cmd = app.add_subcommand("interp", "latent interpolation strip");
    std::string interp_run, interp_a, interp_b, interp_mode = "auto";
    int interp_steps = 6;
    bool interp_probe = false;
    std::uint64_t interp_seed = 0;
    interp_cmd->add_option("--run", interp_run, "run directory")->required();
    interp_cmd->add_option("--a", interp_a, "first endpoint tile png")->required();
    interp_cmd->add_option("--b", interp_b, "second endpoint tile png")->required();
    interp_cmd->add_option("--steps", interp_steps, "curve frames incl. endpoint recons");
    interp_cmd->add_option("--mode", interp_mode, "auto|linear|slerp|geodesic");
    interp_cmd->add_flag("--probe", interp_probe, "annotate frames with probe classes");
    interp_cmd->add_option("--seed", interp_seed, "probe seed");

    auto *export_cmd = app.add_subcommand("export3d", "m=3 latent point cloud csv");
    std::string export_run, export_out = "latents3d.csv";
    export_cmd->add_option("--run", export_run, "run directory")->required();
    export_cmd->add_option("--out", export_out, "csv output path");

    auto *volmap_cmd = app.add_subcommand("volmap", "latent volume-element map");
    std::string volmap_run, volmap_out = "volmap.csv";
    int volmap_cap = 1000;
    volmap_cmd->add_option("--run", volmap_run, "run directory")->required();
    volmap_cmd->add_option("--out", volmap_out, "csv output path");
    volmap_cmd->add_option("--cap", volmap_cap, "centroid cap");

    auto *report_cmd = app.add_subcommand("report", "pivot metrics logs into tables");
    std::vector<std::string> report_files;
    std::string report_out = "reports";
    report_cmd->add_option("--metrics", report_files, "metrics csv files")->required();
    report_cmd->add_option("--out-dir", report_out, "report output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0)
            return app.exit(e); // --help and friends
        std::cerr << "{\"error\": \"" << e.what() << "\", \"type\": \"user\"}\n";
        return 1;
    }

    try {
        if (*synth)
            return cmd_synth(synth_out, synth_n, synth_tile, synth_seed, synth_gray);
        if (*prep)
            return cmd_preprocess(prep_corpus, prep_threshold, prep_cap, prep_seed, prep_val,
                                  prep_test_sources, prep_out);
        if (*train_cmd)
            return cmd_train(train_config, train_seed, train_root, train_resume);
        if (*eval_cmd)
            return cmd_eval(eval_run, eval_split);
        if (*probe_cmd)
            return cmd_probe(probe_run, probe_epochs, probe_seed, probe_shuffle);
        if (*cnn_cmd)
            return cmd_cnn(cnn_config, cnn_epochs, cnn_seed);
        if (*sample_cmd)
            return cmd_sample(sample_run, sample_n, sample_seed);
        if (*interp_cmd)
            return cmd_interp(interp_run, interp_a, interp_b, interp_steps, interp_mode,
                              interp_probe, interp_seed);
        if (*export_cmd)
            return cmd_export3d(export_run, export_out);
        if (*volmap_cmd)
            return cmd_volmap(volmap_run, volmap_out, volmap_cap);
        if (*report_cmd)
            return cmd_report(report_files, report_out);
    } catch (const UserError &e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"type\": \"user\"}\n";
        return 1;
    } catch (const std::invalid_argument &e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"type\": \"user\"}\n";
        return 1;
    } catch (const std::exception &e) {
        std::cerr << "{\"error\": \"" << e.what() << "\", \"type\": \"internal\"}\n";
        return 2;
    }
    return 1;
}
