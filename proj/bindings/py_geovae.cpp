#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "geovae/harness/evaluate.hpp"
#include "geovae/harness/train.hpp"
#include "geovae/patchkit/synth.hpp"
#include "geovae/riemann/geodesic.hpp"
#include "geovae/riemann/hamiltonian.hpp"
#include "geovae/sphere/vmf.hpp"

namespace py = pybind11;
using namespace geovae;

namespace {

sphere::UnitVector to_unit(const py::array_t<double> &arr)
{
    const auto buf = arr.request();
    if (buf.ndim != 1)
        throw std::invalid_argument("expected a 1-d vector");
    Eigen::VectorXd v(buf.shape[0]);
    const double *p = static_cast<const double *>(buf.ptr);
    for (py::ssize_t i = 0; i < buf.shape[0]; ++i)
        v[i] = p[i];
    return sphere::UnitVector::normalized(std::move(v));
}

py::array_t<double> from_vec(const Eigen::VectorXd &v)
{
    py::array_t<double> out(v.size());
    std::copy(v.data(), v.data() + v.size(), static_cast<double *>(out.request().ptr));
    return out;
}

py::array_t<double> from_mat(const Eigen::MatrixXd &m)
{
    py::array_t<double> out({ m.rows(), m.cols() });
    auto buf = out.request();
    double *p = static_cast<double *>(buf.ptr);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            p[i * m.cols() + j] = m(i, j);
    return out;
}

Eigen::MatrixXd to_mat(const py::array_t<double> &arr)
{
    const auto buf = arr.request();
    if (buf.ndim != 2)
        throw std::invalid_argument("expected a 2-d array");
    Eigen::MatrixXd m(buf.shape[0], buf.shape[1]);
    const double *p = static_cast<const double *>(buf.ptr);
    for (py::ssize_t i = 0; i < buf.shape[0]; ++i)
        for (py::ssize_t j = 0; j < buf.shape[1]; ++j)
            m(i, j) = p[i * buf.shape[1] + j];
    return m;
}

patchkit::MaskTile to_mask(const py::array_t<std::uint8_t> &arr)
{
    const auto buf = arr.request();
    if (buf.ndim != 2)
        throw std::invalid_argument("mask must be a 2-d uint8 array");
    patchkit::MaskTile mask(static_cast<int>(buf.shape[0]), static_cast<int>(buf.shape[1]));
    const auto *p = static_cast<const std::uint8_t *>(buf.ptr);
    std::copy(p, p + buf.size, mask.values.begin());
    mask.validate();
    return mask;
}

nets::ModelConfig config_from_json_str(const std::string &json)
{
    auto cfg = nets::model_config_from_json(json, true);
    cfg.validate();
    return cfg;
}

} // namespace

PYBIND11_MODULE(_geovae, m)
{
    m.doc() = "geometric latent-representation toolkit (C++ core)";

    // ---------------------------------------------------------- sphere
    auto sph = m.def_submodule("sphere", "hypersphere and von Mises-Fisher numerics");
    sph.def("log_bessel_ratio", &sphere::log_bessel_ratio, py::arg("m"), py::arg("kappa"));
    sph.def("bessel_ratio", &sphere::bessel_ratio, py::arg("m"), py::arg("kappa"));
    sph.def("sphere_surface_area", &sphere::sphere_surface_area, py::arg("m"),
            py::arg("r") = 1.0);
    sph.def(
        "vmf_log_pdf",
        [](const py::array_t<double> &mu, double kappa, const py::array_t<double> &z) {
            return sphere::vmf_log_pdf(sphere::VmfParams(to_unit(mu), kappa), to_unit(z));
        },
        py::arg("mu"), py::arg("kappa"), py::arg("z"));
    sph.def(
        "kl_vmf_uniform",
        [](int m, double kappa) {
            return sphere::kl_vmf_uniform(
                sphere::VmfParams(sphere::UnitVector::basis(m), kappa));
        },
        py::arg("m"), py::arg("kappa"));
    sph.def(
        "sample_vmf",
        [](const py::array_t<double> &mu, double kappa, int n, std::uint64_t seed) {
            Rng rng(seed);
            const auto unit = to_unit(mu);
            const auto zs = sphere::sample_vmf(sphere::VmfParams(unit, kappa), n, rng);
            py::array_t<double> out({ static_cast<py::ssize_t>(zs.size()),
                                      static_cast<py::ssize_t>(unit.dim()) });
            double *p = static_cast<double *>(out.request().ptr);
            for (std::size_t i = 0; i < zs.size(); ++i)
                for (int d = 0; d < unit.dim(); ++d)
                    p[i * unit.dim() + d] = zs[i].v[d];
            return out;
        },
        py::arg("mu"), py::arg("kappa"), py::arg("n"), py::arg("seed") = 0);
    sph.def(
        "sample_uniform_sphere",
        [](int m, int n, std::uint64_t seed) {
            Rng rng(seed);
            const auto zs = sphere::sample_uniform_sphere(m, n, rng);
            py::array_t<double> out({ static_cast<py::ssize_t>(zs.size()),
                                      static_cast<py::ssize_t>(m) });
            double *p = static_cast<double *>(out.request().ptr);
            for (std::size_t i = 0; i < zs.size(); ++i)
                for (int d = 0; d < m; ++d)
                    p[i * m + d] = zs[i].v[d];
            return out;
        },
        py::arg("m"), py::arg("n"), py::arg("seed") = 0);
    sph.def(
        "geodesic_distance",
        [](const py::array_t<double> &a, const py::array_t<double> &b) {
            return sphere::geodesic_distance(to_unit(a), to_unit(b));
        },
        py::arg("z1"), py::arg("z2"));
    sph.def(
        "slerp",
        [](const py::array_t<double> &a, const py::array_t<double> &b, double t) {
            return from_vec(sphere::slerp(to_unit(a), to_unit(b), t).v);
        },
        py::arg("z1"), py::arg("z2"), py::arg("t"));

    // --------------------------------------------------------- riemann
    auto rie = m.def_submodule("riemann", "learned metric, Hamiltonian flow, geodesics");
    py::class_<riemann::MetricField>(rie, "MetricField")
        .def(py::init([](const py::array_t<double> &centroids,
                         const std::vector<py::array_t<double>> &factors, double temperature,
                         double regularization) {
                 std::vector<Eigen::MatrixXd> fs;
                 fs.reserve(factors.size());
                 for (const auto &f : factors)
                     fs.push_back(to_mat(f));
                 return riemann::MetricField(to_mat(centroids), std::move(fs), temperature,
                                             regularization);
             }),
             py::arg("centroids"), py::arg("factors"), py::arg("temperature") = 1.5,
             py::arg("regularization") = 0.01)
        .def_static("euclidean", &riemann::MetricField::euclidean, py::arg("dim"),
                    py::arg("regularization") = 0.01)
        .def_property_readonly("dim", &riemann::MetricField::dim);
    rie.def(
        "inverse_metric",
        [](const riemann::MetricField &f, const py::array_t<double> &z) {
            Eigen::VectorXd v(f.dim());
            const auto buf = z.request();
            const double *p = static_cast<const double *>(buf.ptr);
            for (int i = 0; i < f.dim(); ++i)
                v[i] = p[i];
            return from_mat(riemann::inverse_metric(f, v));
        },
        py::arg("field"), py::arg("z"));
    rie.def(
        "metric",
        [](const riemann::MetricField &f, const py::array_t<double> &z) {
            Eigen::VectorXd v(f.dim());
            const auto buf = z.request();
            const double *p = static_cast<const double *>(buf.ptr);
            for (int i = 0; i < f.dim(); ++i)
                v[i] = p[i];
            return from_mat(riemann::metric(f, v));
        },
        py::arg("field"), py::arg("z"));
    rie.def(
        "log_sqrt_det_metric",
        [](const riemann::MetricField &f, const py::array_t<double> &z) {
            Eigen::VectorXd v(f.dim());
            const auto buf = z.request();
            const double *p = static_cast<const double *>(buf.ptr);
            for (int i = 0; i < f.dim(); ++i)
                v[i] = p[i];
            return riemann::log_sqrt_det_metric(f, v);
        },
        py::arg("field"), py::arg("z"));
    rie.def(
        "geodesic_path",
        [](const riemann::MetricField &f, const py::array_t<double> &a,
           const py::array_t<double> &b, int knots, int iterations, double lr) {
            Eigen::VectorXd va(f.dim()), vb(f.dim());
            const double *pa = static_cast<const double *>(a.request().ptr);
            const double *pb = static_cast<const double *>(b.request().ptr);
            for (int i = 0; i < f.dim(); ++i) {
                va[i] = pa[i];
                vb[i] = pb[i];
            }
            riemann::GeodesicOptions opt;
            opt.knot_count = knots;
            opt.iterations = iterations;
            opt.learning_rate = lr;
            const auto curve = riemann::geodesic_path(f, va, vb, opt);
            return py::make_tuple(from_mat(curve.knots), curve.energy, curve.converged);
        },
        py::arg("field"), py::arg("a"), py::arg("b"), py::arg("knots") = 16,
        py::arg("iterations") = 500, py::arg("lr") = 1e-2);
    rie.def(
        "rhmc_sample_standard_normal",
        [](const riemann::MetricField &f, const py::array_t<double> &init, int n_steps,
           double step, int n_leapfrog, std::uint64_t seed) {
            Eigen::VectorXd v(f.dim());
            const double *p = static_cast<const double *>(init.request().ptr);
            for (int i = 0; i < f.dim(); ++i)
                v[i] = p[i];
            Rng rng(seed);
            return from_vec(riemann::rhmc_sample(f, v, n_steps, step, n_leapfrog,
                                                 riemann::LogTarget::standard_normal(), rng));
        },
        py::arg("field"), py::arg("init"), py::arg("n_steps"), py::arg("step") = 0.01,
        py::arg("n_leapfrog") = 3, py::arg("seed") = 0);

    // -------------------------------------------------------- patchkit
    auto pk = m.def_submodule("patchkit", "tile/mask preprocessing pipeline");
    pk.def(
        "relevant_fraction",
        [](const py::array_t<std::uint8_t> &mask) {
            return patchkit::relevant_fraction(to_mask(mask));
        },
        py::arg("mask"));
    pk.def(
        "dominant_label",
        [](const py::array_t<std::uint8_t> &mask) {
            const auto d = patchkit::dominant_label(to_mask(mask));
            return py::make_tuple(d.label, d.dominance);
        },
        py::arg("mask"));
    pk.def(
        "synth_corpus",
        [](const std::string &out_dir, int n_per_class, int tile, std::uint64_t seed,
           bool grayscale) {
            Rng rng(seed);
            patchkit::SynthOptions opt;
            opt.n_per_class = n_per_class;
            opt.tile_size = tile;
            opt.grayscale = grayscale;
            const auto corpus = patchkit::synth_corpus(opt, rng);
            patchkit::write_corpus(corpus, out_dir);
            return static_cast<int>(corpus.tiles.size());
        },
        py::arg("out_dir"), py::arg("n_per_class") = 10, py::arg("tile") = 64,
        py::arg("seed") = 0, py::arg("grayscale") = false);

    // ------------------------------------------------------------ nets
    auto nn = m.def_submodule("nets", "model losses and training entry points");
    nn.def(
        "spread_loss",
        [](const py::array_t<double> &z) {
            const auto buf = z.request();
            if (buf.ndim != 2)
                throw std::invalid_argument("spread_loss: expected [N, m] array");
            nets::Tensor<double> t({ static_cast<int>(buf.shape[0]),
                                     static_cast<int>(buf.shape[1]) });
            const double *p = static_cast<const double *>(buf.ptr);
            std::copy(p, p + buf.size, t.v.begin());
            nets::SpreadLoss<double> loss;
            return loss.forward(t);
        },
        py::arg("z"));
    nn.def(
        "kl_gaussian_standard",
        [](const py::array_t<double> &mu, double sigma) {
            Eigen::VectorXd v(mu.request().shape[0]);
            const double *p = static_cast<const double *>(mu.request().ptr);
            for (Eigen::Index i = 0; i < v.size(); ++i)
                v[i] = p[i];
            return nets::kl_gaussian_standard(v, sigma);
        },
        py::arg("mu"), py::arg("sigma"));

    // --------------------------------------------------------- harness
    auto hr = m.def_submodule("harness", "training and evaluation drivers");
    hr.def(
        "train",
        [](const std::string &manifest_path, const std::string &corpus_root,
           const std::string &model_config_json, int epochs, int batch_size, double lr,
           std::uint64_t seed, const std::string &checkpoint_out) {
            harness::TrainConfig cfg;
            cfg.model = config_from_json_str(model_config_json);
            cfg.epochs = epochs;
            cfg.batch_size = batch_size;
            cfg.learning_rate = lr;
            cfg.seed = seed;
            const auto manifest = patchkit::CorpusManifest::load(manifest_path);
            const auto result = harness::train(cfg, manifest, corpus_root);
            if (!checkpoint_out.empty())
                result.checkpoint.save(checkpoint_out);
            py::dict history;
            if (!result.history.empty()) {
                history["first_total"] = result.history.front().total;
                history["final_total"] = result.history.back().total;
                history["first_reconstruction"] = result.history.front().reconstruction;
                history["final_reconstruction"] = result.history.back().reconstruction;
            }
            return history;
        },
        py::arg("manifest"), py::arg("corpus_root"), py::arg("model_config_json"),
        py::arg("epochs") = 5, py::arg("batch_size") = 16, py::arg("learning_rate") = 2e-3,
        py::arg("seed") = 0, py::arg("checkpoint_out") = "");
    hr.def(
        "eval_reconstruction",
        [](const std::string &checkpoint_path, const std::string &manifest_path,
           const std::string &corpus_root, const std::string &split) {
            const auto ckpt = nets::Checkpoint::load(checkpoint_path);
            const auto manifest = patchkit::CorpusManifest::load(manifest_path);
            const auto data = harness::load_dataset(manifest, corpus_root,
                                                    ckpt.config.channels, &ckpt.norm_mean,
                                                    &ckpt.norm_std);
            return harness::eval_reconstruction(ckpt, data,
                                                patchkit::split_from_name(split));
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("corpus_root"),
        py::arg("split") = "test");
    hr.def(
        "encode_latents",
        [](const std::string &checkpoint_path, const std::string &manifest_path,
           const std::string &corpus_root) {
            const auto ckpt = nets::Checkpoint::load(checkpoint_path);
            const auto manifest = patchkit::CorpusManifest::load(manifest_path);
            const auto data = harness::load_dataset(manifest, corpus_root,
                                                    ckpt.config.channels, &ckpt.norm_mean,
                                                    &ckpt.norm_std);
            const auto table = harness::encode_latents(ckpt, data);
            py::array_t<double> lat({ static_cast<py::ssize_t>(table.latents.size()),
                                      static_cast<py::ssize_t>(table.latent_dim) });
            double *p = static_cast<double *>(lat.request().ptr);
            for (std::size_t i = 0; i < table.latents.size(); ++i)
                for (int d = 0; d < table.latent_dim; ++d)
                    p[i * table.latent_dim + d] = table.latents[i][d];
            return py::make_tuple(lat, table.labels);
        },
        py::arg("checkpoint"), py::arg("manifest"), py::arg("corpus_root"));
    hr.def(
        "sample_grid",
        [](const std::string &checkpoint_path, int n, std::uint64_t seed,
           const std::string &out_png) {
            const auto ckpt = nets::Checkpoint::load(checkpoint_path);
            Rng rng(seed);
            const auto grid = harness::sample_grid(ckpt, n, rng);
            if (!out_png.empty() && !grid.grid.empty())
                write_png(out_png, grid.grid);
            return static_cast<int>(grid.tiles.size());
        },
        py::arg("checkpoint"), py::arg("n"), py::arg("seed") = 0, py::arg("out_png") = "");
}
