// Acceptance suite: one pass/fail line per criterion, exit 0 only when every
// selected criterion passes. Each criterion pins its tolerances in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "geovae/harness/evaluate.hpp"
#include "geovae/harness/train.hpp"
#include "geovae/nets/optim.hpp"
#include "geovae/nets/vae.hpp"
#include "geovae/patchkit/synth.hpp"
#include "geovae/riemann/geodesic.hpp"
#include "geovae/riemann/hamiltonian.hpp"
#include "geovae/sphere/vmf.hpp"

namespace fs = std::filesystem;
using namespace geovae;

namespace {

std::string g_cli_path;
std::string g_work_dir = "acceptance_work";

struct Criterion {
    int id;
    std::string name;
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------- helpers

patchkit::CorpusManifest build_toy_manifest(const std::string &dir, int n_per_class,
                                            std::uint64_t seed)
{
    fs::remove_all(dir);
    Rng rng(seed);
    patchkit::SynthOptions opt;
    opt.n_per_class = n_per_class;
    const auto synth = patchkit::synth_corpus(opt, rng);
    patchkit::write_corpus(synth, dir);

    std::vector<patchkit::PatchRecord> records;
    for (std::size_t i = 0; i < synth.tiles.size(); ++i) {
        if (patchkit::relevant_fraction(synth.masks[i]) < 0.5)
            continue;
        const auto d = patchkit::dominant_label(synth.masks[i]);
        patchkit::PatchRecord r;
        char name[64];
        std::snprintf(name, sizeof(name), "p%05zu_%s.png", i, synth.source_ids[i].c_str());
        r.image_path = std::string("tiles/") + name;
        r.mask_path = std::string("masks/") + name;
        r.label = d.label;
        r.dominance = d.dominance;
        r.relevant_fraction = patchkit::relevant_fraction(synth.masks[i]);
        r.source_id = synth.source_ids[i];
        records.push_back(std::move(r));
    }
    auto manifest = patchkit::stratify(records, 8000, 0.5, seed);
    Rng split_rng(seed);
    patchkit::assign_splits(manifest, 0.1, { "heldout" }, split_rng);
    return manifest;
}

harness::TrainConfig toy_config(nets::Family family, bool variational, int m,
                                std::uint64_t seed, int epochs, int batch = 16,
                                double lr = 2e-3)
{
    harness::TrainConfig cfg;
    cfg.epochs = epochs;
    cfg.batch_size = batch;
    cfg.learning_rate = lr;
    cfg.seed = seed;
    cfg.model.family = family;
    cfg.model.variational = variational;
    cfg.model.latent_dim = m;
    cfg.model.channels = 3;
    cfg.model.widths = { 8, 16, 32 };
    return cfg;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ------------------------------------------------------------ criterion 1

Criterion criterion_1()
{
    Criterion c { 1, "vMF moment consistency across (m, kappa)" };
    std::ostringstream detail;
    bool ok = true;
    int idx = 0;
    for (int m : { 3, 8 })
        for (double kappa : { 1.0, 10.0, 100.0 }) {
            Rng rng(1000 + idx++);
            const int n = 100000;
            sphere::VmfParams params(sphere::UnitVector::basis(m), kappa);
            Eigen::VectorXd sum = Eigen::VectorXd::Zero(m);
            for (const auto &z : sphere::sample_vmf(params, n, rng))
                sum += z.v;
            const double resultant = sum.norm() / n;
            const double a = sphere::bessel_ratio(m, kappa);
            const double se = std::sqrt(
                std::max(sphere::bessel_ratio_derivative(m, kappa), 1e-12) / n);
            const double sigmas = std::abs(resultant - a) / se;
            if (sigmas > 4.0)
                ok = false;
            detail << "(m=" << m << ",k=" << kappa << "): " << fmt(sigmas) << " SE; ";
        }
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

// ------------------------------------------------------------ criterion 2

Criterion criterion_2()
{
    Criterion c { 2, "KL divergences match their Monte-Carlo oracles (1e-2)" };
    std::ostringstream detail;
    bool ok = true;

    int idx = 0;
    for (double kappa : { 0.5, 5.0, 20.0 }) {
        Rng rng(2000 + idx++);
        sphere::VmfParams params(sphere::UnitVector::basis(3, 1), kappa);
        const int n = 200000;
        double mc = 0.0;
        for (const auto &z : sphere::sample_vmf(params, n, rng))
            mc += sphere::vmf_log_pdf(params, z) + sphere::log_sphere_surface_area(3);
        mc /= n;
        const double kl = sphere::kl_vmf_uniform(params);
        const double err = std::abs(kl - mc);
        if (err > 1e-2)
            ok = false;
        detail << "vmf k=" << kappa << ": |err|=" << fmt(err) << "; ";
    }

    {
        Rng rng(2100);
        Eigen::VectorXd mu(4);
        for (int i = 0; i < 4; ++i)
            mu[i] = rng.uniform(-1.0, 1.0);
        const double sigma = 0.7;
        const int n = 1000000;
        double mc = 0.0;
        for (int s = 0; s < n; ++s) {
            double term = 0.0;
            for (int d = 0; d < 4; ++d) {
                const double e = rng.normal();
                const double z = mu[d] + sigma * e;
                term += -0.5 * e * e - std::log(sigma) + 0.5 * z * z;
            }
            mc += term;
        }
        mc /= n;
        const double err = std::abs(nets::kl_gaussian_standard(mu, sigma) - mc);
        if (err > 1e-2)
            ok = false;
        detail << "gaussian: |err|=" << fmt(err);
    }
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

// ------------------------------------------------------------ criterion 3

Criterion criterion_3()
{
    Criterion c { 3, "exact C4 encoder invariance (mu0 within 1e-4, pose shift 1 mod 4)" };
    nets::ModelConfig cfg;
    cfg.family = nets::Family::spherical;
    cfg.variational = false;
    cfg.equivariant = true;
    cfg.group_order = 4;
    cfg.latent_dim = 8;
    cfg.channels = 3;
    cfg.widths = { 8, 16, 32 };
    Rng rng(3000);
    nets::Model<float> model(cfg, rng);

    double worst_mu = 0.0;
    int pose_errors = 0;
    Rng data_rng(3001);
    for (int trial = 0; trial < 100; ++trial) {
        nets::Tensor<float> x({ 1, 3, 68, 68 });
        for (auto &v : x.v)
            v = static_cast<float>(data_rng.normal() * 0.5);
        const auto h0 = model.encode(x);

        nets::Tensor<float> xr(x.shape);
        for (int ch = 0; ch < 3; ++ch)
            equi::rot90_square(x.data() + static_cast<std::size_t>(ch) * 68 * 68,
                               xr.data() + static_cast<std::size_t>(ch) * 68 * 68, 68, 1);
        const auto h1 = model.encode(xr);

        if (h1.pose[0] != (h0.pose[0] + 1) % 4)
            ++pose_errors;
        for (int d = 0; d < cfg.latent_dim; ++d)
            worst_mu = std::max(worst_mu,
                                static_cast<double>(std::abs(h1.mu.v[d] - h0.mu.v[d])));
    }
    c.pass = worst_mu < 1e-4 && pose_errors == 0;
    c.detail = "worst |mu0 drift| = " + fmt(worst_mu) + ", pose errors = "
        + std::to_string(pose_errors) + "/100";
    return c;
}

// ------------------------------------------------------------ criterion 4

Criterion criterion_4()
{
    Criterion c { 4, "Riemannian reductions (geodesic, leapfrog, RHMC)" };
    std::ostringstream detail;
    bool ok = true;
    const auto target = riemann::LogTarget::standard_normal();

    { // constant-metric geodesic equals the straight line within 1e-4 per knot
        auto field = riemann::MetricField::euclidean(3, 0.01);
        Rng rng(4000);
        riemann::Vec a(3), b(3);
        for (int i = 0; i < 3; ++i) {
            a[i] = rng.uniform(-2.0, 2.0);
            b[i] = rng.uniform(-2.0, 2.0);
        }
        riemann::GeodesicOptions opt;
        opt.knot_count = 16;
        const auto curve = riemann::geodesic_path(field, a, b, opt);
        double worst = 0.0;
        for (int k = 0; k < 16; ++k) {
            const double t = k / 15.0;
            worst = std::max(worst,
                             (curve.knots.row(k).transpose() - ((1.0 - t) * a + t * b)).norm());
        }
        if (worst >= 1e-4)
            ok = false;
        detail << "geodesic max knot error " << fmt(worst) << "; ";
    }

    { // leapfrog reversibility within 1e-5, energy drift < 1e-3 over 100 steps
        auto field = riemann::MetricField::euclidean(2, 1.0);
        riemann::PhasePoint p { riemann::Vec::Ones(2), riemann::Vec::Zero(2) };
        riemann::PhasePoint q = p;
        for (int i = 0; i < 100; ++i)
            q = riemann::leapfrog_step(field, q, 0.01, target);
        const double h0 = riemann::hamiltonian(field, p, target);
        double drift = 0.0;
        riemann::PhasePoint r = p;
        for (int i = 0; i < 100; ++i) {
            r = riemann::leapfrog_step(field, r, 0.01, target);
            drift = std::max(drift, std::abs(riemann::hamiltonian(field, r, target) - h0));
        }
        q.velocity = -q.velocity;
        for (int i = 0; i < 100; ++i)
            q = riemann::leapfrog_step(field, q, 0.01, target);
        const double rev = (q.position - p.position).norm();
        if (rev >= 1e-5 || drift >= 1e-3)
            ok = false;
        detail << "reversibility " << fmt(rev) << ", drift " << fmt(drift) << "; ";
    }

    { // RHMC on N(0, I) with identity metric: unit variance within 10%
        auto field = riemann::MetricField::euclidean(2, 1.0);
        Rng rng(4001);
        riemann::RhmcOptions opt;
        opt.n_steps = 5000;
        opt.step = 0.25;
        opt.n_leapfrog = 8;
        const auto chain = riemann::rhmc_chain(field, riemann::Vec::Zero(2), target, rng, opt);
        double worst_var_err = 0.0;
        for (int d = 0; d < 2; ++d) {
            double mean = 0.0, m2 = 0.0;
            int n = 0;
            for (std::size_t i = 500; i < chain.size(); ++i) {
                mean += chain[i][d];
                m2 += chain[i][d] * chain[i][d];
                ++n;
            }
            mean /= n;
            worst_var_err = std::max(worst_var_err, std::abs(m2 / n - mean * mean - 1.0));
        }
        if (worst_var_err >= 0.10)
            ok = false;
        detail << "rhmc var error " << fmt(worst_var_err);
    }
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

// ------------------------------------------------------------ criterion 5

Criterion criterion_5()
{
    Criterion c { 5, "spread loss widens the encoded point cloud (m=3 S-AE)" };
    const std::string dir = g_work_dir + "/spread_corpus";
    const auto manifest = build_toy_manifest(dir, 63, 50); // >= 200 encodable tiles
    const auto data = harness::load_dataset(manifest, dir, 3);

    auto cfg_plain = toy_config(nets::Family::spherical, false, 3, 5, 30);
    auto cfg_spread = cfg_plain;
    cfg_spread.model.spread_weight = 1.0;

    const auto run_plain = harness::train(cfg_plain, data);
    const auto run_spread = harness::train(cfg_spread, data);

    // encode the same 200-image batch with both models
    auto mean_pairwise = [&](const nets::Checkpoint &ckpt) {
        const auto table = harness::encode_latents(ckpt, data);
        const int n = 200;
        nets::Tensor<double> z({ n, 3 });
        for (int i = 0; i < n; ++i)
            for (int d = 0; d < 3; ++d)
                z.v[static_cast<std::size_t>(i) * 3 + d] = table.latents[i][d];
        nets::SpreadLoss<double> spread;
        return spread.forward(z);
    };
    const double plain = mean_pairwise(run_plain.checkpoint);
    const double spread = mean_pairwise(run_spread.checkpoint);

    const double s = 1.0 / std::sqrt(3.0);
    nets::Tensor<double> tetra({ 4, 3 });
    tetra.v = { s, s, s, s, -s, -s, -s, s, -s, -s, -s, s };
    nets::SpreadLoss<double> sl;
    const double tetra_value = sl.forward(tetra);

    c.pass = spread < plain && tetra_value == -1.0 / 3.0;
    c.detail = "mean pairwise inner product: plain " + fmt(plain) + " vs spread "
        + fmt(spread) + "; tetrahedron " + fmt(tetra_value);
    return c;
}

// ------------------------------------------------------------ criterion 6

Criterion criterion_6()
{
    Criterion c { 6, "kappa_min stability grid and the m=512 refusal" };
    std::ostringstream detail;
    bool ok = true;

    Rng data_rng(6000);
    nets::Tensor<float> x({ 16, 3, 68, 68 });

    for (int m : { 32, 64, 128, 256 }) {
        nets::ModelConfig cfg;
        cfg.family = nets::Family::spherical;
        cfg.variational = true;
        cfg.latent_dim = m;
        cfg.kappa_min = 100.0;
        cfg.channels = 3;
        cfg.widths = { 8, 16, 32 };
        Rng rng(6000 + m);
        nets::Model<float> model(cfg, rng);
        nets::Adam<float> opt(model.params(), 5e-4);
        Rng fr(6100 + m);
        bool finite = true;
        for (int step = 0; step < 50 && finite; ++step) {
            for (auto &v : x.v)
                v = static_cast<float>(data_rng.normal() * 0.5);
            const auto out = model.forward(x, fr, true);
            if (!std::isfinite(out.loss.total))
                finite = false;
            opt.zero_grad();
            model.backward();
            opt.step();
            for (auto *p : model.params())
                if (!p->value.all_finite()) {
                    finite = false;
                    break;
                }
        }
        if (!finite)
            ok = false;
        detail << "m=" << m << (finite ? " finite" : " NON-FINITE") << "; ";
    }

    bool refused = false;
    std::string message;
    try {
        nets::ModelConfig cfg;
        cfg.family = nets::Family::spherical;
        cfg.variational = true;
        cfg.latent_dim = 512;
        cfg.validate();
    } catch (const std::invalid_argument &e) {
        refused = true;
        message = e.what();
    }
    if (!refused)
        ok = false;
    detail << "m=512 " << (refused ? "refused" : "NOT refused");
    c.pass = ok;
    c.detail = detail.str();
    return c;
}

// ------------------------------------------------------------ criterion 7

Criterion criterion_7()
{
    Criterion c { 7, "reconstruction loss non-increasing in m (>= 11/12 columns)" };
    const std::string dir = g_work_dir + "/trend_corpus";
    const auto manifest = build_toy_manifest(dir, 40, 7);
    const auto data = harness::load_dataset(manifest, dir, 3);

    struct Column {
        nets::Family family;
        bool variational;
        std::uint64_t seed;
    };
    std::vector<Column> columns;
    for (const auto &[family, variational] :
         std::vector<std::pair<nets::Family, bool>> { { nets::Family::spherical, true },
                                                      { nets::Family::spherical, false },
                                                      { nets::Family::gaussian, true },
                                                      { nets::Family::gaussian, false } })
        for (std::uint64_t seed : { 1, 2, 3 })
            columns.push_back({ family, variational, seed });

    const std::vector<int> dims { 8, 16, 32, 64 };
    std::vector<std::array<double, 4>> losses(columns.size());

    // independent training jobs, two workers; each job owns its model + rng
    std::vector<std::pair<std::size_t, std::size_t>> jobs; // (column, dim index)
    for (std::size_t col = 0; col < columns.size(); ++col)
        for (std::size_t d = 0; d < dims.size(); ++d)
            jobs.emplace_back(col, d);
    std::mutex mu;
    std::size_t next = 0;
    auto worker = [&] {
        for (;;) {
            std::size_t j;
            {
                std::lock_guard<std::mutex> lk(mu);
                if (next >= jobs.size())
                    return;
                j = next++;
            }
            const auto [col, d] = jobs[j];
            auto cfg = toy_config(columns[col].family, columns[col].variational, dims[d],
                                  columns[col].seed, 30, 8, 3e-3);
            const auto result = harness::train(cfg, data);
            losses[col][d] =
                harness::eval_reconstruction(result.checkpoint, data, patchkit::Split::test);
        }
    };
    std::thread t1(worker), t2(worker);
    t1.join();
    t2.join();

    int monotone = 0;
    std::ostringstream detail;
    for (std::size_t col = 0; col < columns.size(); ++col) {
        bool non_increasing = true;
        for (int d = 1; d < 4; ++d)
            if (losses[col][d] > losses[col][d - 1])
                non_increasing = false;
        monotone += non_increasing;
        detail << (columns[col].family == nets::Family::spherical ? "s" : "n")
               << (columns[col].variational ? "-vae" : "-ae") << "/s" << columns[col].seed
               << (non_increasing ? " ok" : " violated") << " [";
        for (int d = 0; d < 4; ++d)
            detail << fmt(losses[col][d]) << (d < 3 ? " " : "]; ");
    }
    c.pass = monotone >= 11;
    c.detail = std::to_string(monotone) + "/12 columns monotone. " + detail.str();
    return c;
}

// ------------------------------------------------------------ criterion 8

Criterion criterion_8()
{
    Criterion c { 8, "probe sanity: chance on shuffled labels, above chance when trained" };
    const std::string dir = g_work_dir + "/probe_corpus";
    const auto manifest = build_toy_manifest(dir, 125, 80); // 100 test records
    const auto data = harness::load_dataset(manifest, dir, 3);

    auto cfg = toy_config(nets::Family::spherical, true, 16, 88, 20);
    const auto trained = harness::train(cfg, data);
    const auto table = harness::encode_latents(trained.checkpoint, data);

    harness::ProbeConfig shuffled;
    shuffled.epochs = 500;
    shuffled.seed = 81;
    shuffled.shuffle_labels = true;
    const double chance_acc = harness::linear_probe(table, shuffled).accuracy;

    harness::ProbeConfig pcfg;
    pcfg.epochs = 500;
    pcfg.seed = 82;
    const double acc = harness::linear_probe(table, pcfg).accuracy;

    const double n_test = static_cast<double>(data.test_idx.size());
    const double three_sigma = 3.0 * std::sqrt(0.25 * 0.75 / n_test);
    c.pass = chance_acc >= 0.20 && chance_acc <= 0.30 && acc > 0.25 + three_sigma;
    c.detail = "shuffled " + fmt(chance_acc) + " (want [0.20, 0.30]), trained " + fmt(acc)
        + " vs chance+3sigma " + fmt(0.25 + three_sigma) + " (n_test=" + fmt(n_test) + ")";
    return c;
}

// ------------------------------------------------------------ criterion 9

Criterion criterion_9()
{
    Criterion c { 9, "pipeline determinism: byte-identical artifacts under a fixed seed" };
    if (g_cli_path.empty() || !fs::exists(g_cli_path)) {
        c.detail = "cli binary path not supplied (--cli)";
        return c;
    }
    const fs::path work = fs::path(g_work_dir) / "determinism";
    fs::remove_all(work);
    fs::create_directories(work);

    auto sh = [&](const std::string &cmd) {
        const std::string full = cmd + " > /dev/null 2>&1";
        return std::system(full.c_str()) == 0;
    };

    bool ok = true;
    std::string detail;
    for (const char *side : { "a", "b" }) {
        const std::string corpus = (work / (std::string("corpus_") + side)).string();
        const std::string manifest = (work / (std::string("manifest_") + side)).string();
        const std::string runroot = (work / (std::string("runs_") + side)).string();
        ok = ok && sh(g_cli_path + " synth --out " + corpus + " --n-per-class 6 --seed 12");
        ok = ok
            && sh(g_cli_path + " preprocess --corpus " + corpus + " --seed 12 --out "
                  + manifest);
        const std::string config = (work / (std::string("config_") + side + ".json")).string();
        std::ofstream f(config);
        f << "{\n  \"schema_version\": 1,\n  \"model\": {\"family\": \"spherical\", "
             "\"variational\": true, \"latent_dim\": 8, \"widths\": [4, 8, 12], "
             "\"channels\": 3},\n  \"train\": {\"epochs\": 5, \"batch_size\": 16, "
             "\"learning_rate\": 0.002, \"seed\": 13},\n  \"data\": {\"manifest\": \""
          << manifest << "\", \"corpus_root\": \"" << corpus << "\"}\n}\n";
        f.close();
        ok = ok && sh(g_cli_path + " train --config " + config + " --out " + runroot);
        if (!ok) {
            c.detail = "pipeline step failed on side " + std::string(side);
            return c;
        }
    }

    auto find_run = [&](const char *side) {
        const fs::path root = work / (std::string("runs_") + side);
        for (const auto &entry : fs::directory_iterator(root))
            if (entry.is_directory())
                return entry.path();
        return fs::path();
    };
    const auto run_a = find_run("a"), run_b = find_run("b");
    ok = ok && sh(g_cli_path + " eval --run " + run_a.string() + " --split test");
    ok = ok && sh(g_cli_path + " eval --run " + run_b.string() + " --split test");
    ok = ok && sh(g_cli_path + " sample --run " + run_a.string() + " --n 6 --seed 14");
    ok = ok && sh(g_cli_path + " sample --run " + run_b.string() + " --n 6 --seed 14");
    if (!ok) {
        c.detail = "eval/sample step failed";
        return c;
    }

    auto same_bytes = [](const fs::path &a, const fs::path &b) {
        std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
        std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        return !sa.empty() && sa == sb;
    };
    const bool manifest_same =
        same_bytes(work / "manifest_a", work / "manifest_b");
    const bool metrics_same = same_bytes(run_a / "metrics.csv", run_b / "metrics.csv");
    const bool grid_same =
        same_bytes(run_a / "samples/grid.png", run_b / "samples/grid.png");
    c.pass = manifest_same && metrics_same && grid_same;
    c.detail = std::string("manifest ") + (manifest_same ? "identical" : "DIFFERS")
        + ", metrics.csv " + (metrics_same ? "identical" : "DIFFERS") + ", grid.png "
        + (grid_same ? "identical" : "DIFFERS");
    return c;
}

// ----------------------------------------------------------- criterion 10

Criterion criterion_10()
{
    Criterion c { 10, "hypersphere surface-area diagnostic" };
    const double s3 = sphere::sphere_surface_area(3, 1.0);
    const bool exact = std::abs(s3 - 4.0 * M_PI) <= 4.0 * M_PI * 1e-15;

    int peak = 1;
    double best = 0.0;
    bool decays_after_peak = true;
    double prev = 0.0;
    for (int m = 1; m <= 128; ++m) {
        const double a = sphere::sphere_surface_area(m, 1.0);
        if (a > best) {
            best = a;
            peak = m;
        }
        if (m > 8 && a >= prev)
            decays_after_peak = false;
        prev = a;
    }
    c.pass = exact && peak == 7 && decays_after_peak
        && sphere::sphere_surface_area(128, 1.0) < 1e-30;
    c.detail = "S(3,1)=" + fmt(s3) + " (4pi=" + fmt(4.0 * M_PI) + "), peak at m="
        + std::to_string(peak) + ", monotone decay past the peak: "
        + (decays_after_peak ? "yes" : "no");
    return c;
}

} // namespace

int main(int argc, char **argv)
{
    int only = -1;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc)
            only = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--cli") == 0 && i + 1 < argc)
            g_cli_path = argv[++i];
        else if (std::strcmp(argv[i], "--work") == 0 && i + 1 < argc)
            g_work_dir = argv[++i];
    }
    fs::create_directories(g_work_dir);

    using CriterionFn = Criterion (*)();
    const CriterionFn fns[] = { criterion_1, criterion_2, criterion_3, criterion_4,
                                criterion_5, criterion_6, criterion_7, criterion_8,
                                criterion_9, criterion_10 };

    bool all_pass = true;
    for (int k = 1; k <= 10; ++k) {
        if (only > 0 && k != only)
            continue;
        const auto t0 = std::chrono::steady_clock::now();
        Criterion result;
        try {
            result = fns[k - 1]();
        } catch (const std::exception &e) {
            result.id = k;
            result.name = "criterion threw";
            result.pass = false;
            result.detail = e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] criterion %d: %s (%.1fs) -- %s\n", result.pass ? "PASS" : "FAIL", k,
                    result.name.c_str(), secs, result.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && result.pass;
    }
    return all_pass ? 0 : 1;
}
