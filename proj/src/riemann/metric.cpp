#include "geovae/riemann/metric.hpp"

#include <cmath>
#include <stdexcept>

namespace geovae::riemann {

MetricField::MetricField(Mat centroids, std::vector<Mat> factors, double temperature,
                         double regularization)
    : centroids_(std::move(centroids))
    , factors_(std::move(factors))
    , temperature_(temperature)
    , regularization_(regularization)
{
    if (!(temperature_ > 0.0))
        throw std::invalid_argument("MetricField: temperature must be > 0");
    if (!(regularization_ > 0.0))
        throw std::invalid_argument("MetricField: regularization must be > 0");
    if (static_cast<std::size_t>(centroids_.rows()) != factors_.size())
        throw std::invalid_argument("MetricField: one factor per centroid required");
    dim_ = static_cast<int>(centroids_.cols());
    if (centroids_.rows() == 0)
        throw std::invalid_argument("MetricField: use MetricField::euclidean for empty fields");

    grams_.reserve(factors_.size());
    for (const auto &L : factors_) {
        if (L.rows() != dim_ || L.cols() != dim_)
            throw std::invalid_argument("MetricField: factor dimension mismatch");
        for (int i = 0; i < dim_; ++i) {
            if (!(L(i, i) > 0.0))
                throw std::invalid_argument("MetricField: factor diagonal must be positive");
            for (int j = i + 1; j < dim_; ++j)
                if (L(i, j) != 0.0)
                    throw std::invalid_argument("MetricField: factors must be lower triangular");
        }
        grams_.push_back(L * L.transpose());
    }
}

MetricField MetricField::euclidean(int dim, double regularization)
{
    MetricField f { Mat::Zero(1, dim), { Mat::Identity(dim, dim) }, 1.5, regularization };
    f.centroids_.resize(0, dim);
    f.factors_.clear();
    f.grams_.clear();
    f.dim_ = dim;
    return f;
}

namespace {

void require_dim(const MetricField &field, const Vec &z, const char *what)
{
    if (z.size() != field.dim())
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

} // namespace

Mat inverse_metric(const MetricField &field, const Vec &z)
{
    require_dim(field, z, "inverse_metric");
    const int d = field.dim();
    Mat g = field.regularization() * Mat::Identity(d, d);
    const double t2 = field.temperature() * field.temperature();
    for (int i = 0; i < field.centroid_count(); ++i) {
        const double w = std::exp(-(z - field.centroids().row(i).transpose()).squaredNorm() / t2);
        g.noalias() += field.grams()[i] * w;
    }
    // enforce exact symmetry against accumulation order
    g = 0.5 * (g + g.transpose()).eval();
    return g;
}

Mat metric(const MetricField &field, const Vec &z)
{
    const Mat ginv = inverse_metric(field, z);
    Eigen::LLT<Mat> llt(ginv);
    if (llt.info() != Eigen::Success) {
        Eigen::SelfAdjointEigenSolver<Mat> es(ginv);
        const double lo = es.eigenvalues().minCoeff();
        const double hi = es.eigenvalues().maxCoeff();
        throw std::runtime_error("metric: inverse metric is numerically singular (cond ~ "
                                 + std::to_string(hi / std::max(lo, 1e-300)) + ")");
    }
    const int d = field.dim();
    Mat g = llt.solve(Mat::Identity(d, d));
    g = 0.5 * (g + g.transpose()).eval();
    return g;
}

double log_sqrt_det_metric(const MetricField &field, const Vec &z)
{
    const Mat ginv = inverse_metric(field, z);
    Eigen::LLT<Mat> llt(ginv);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("log_sqrt_det_metric: factorization failed");
    double log_det = 0.0;
    for (int i = 0; i < field.dim(); ++i)
        log_det += 2.0 * std::log(llt.matrixL()(i, i));
    return -0.5 * log_det;
}

std::vector<Mat> inverse_metric_jacobian(const MetricField &field, const Vec &z)
{
    require_dim(field, z, "inverse_metric_jacobian");
    const int d = field.dim();
    std::vector<Mat> jac(d, Mat::Zero(d, d));
    const double t2 = field.temperature() * field.temperature();
    for (int i = 0; i < field.centroid_count(); ++i) {
        const Vec diff = z - field.centroids().row(i).transpose();
        const double w = std::exp(-diff.squaredNorm() / t2);
        for (int j = 0; j < d; ++j)
            jac[j].noalias() += field.grams()[i] * (w * (-2.0 * diff[j] / t2));
    }
    return jac;
}

} // namespace geovae::riemann
