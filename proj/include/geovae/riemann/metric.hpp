#pragma once

#include <Eigen/Dense>
#include <vector>

namespace geovae::riemann {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Learned Riemannian metric over the latent space:
///   G^{-1}(z) = sum_i L_i L_i^T exp(-|z - c_i|^2 / T^2) + lambda I.
/// Immutable after construction; the L_i L_i^T grams are precomputed.
class MetricField {
public:
    /// centroids: N x d (one row per centroid); factors: N lower-triangular
    /// d x d matrices with strictly positive diagonals.
    MetricField(Mat centroids, std::vector<Mat> factors, double temperature = 1.5,
                double regularization = 0.01);

    /// The flat field G^{-1} = lambda I (no centroids).
    static MetricField euclidean(int dim, double regularization = 0.01);

    int dim() const { return dim_; }
    int centroid_count() const { return static_cast<int>(centroids_.rows()); }
    bool is_constant() const { return centroids_.rows() == 0; }
    double temperature() const { return temperature_; }
    double regularization() const { return regularization_; }
    const Mat &centroids() const { return centroids_; }
    const std::vector<Mat> &factors() const { return factors_; }
    const std::vector<Mat> &grams() const { return grams_; }

private:
    Mat centroids_;
    std::vector<Mat> factors_;
    std::vector<Mat> grams_;
    double temperature_;
    double regularization_;
    int dim_;
};

/// G^{-1}(z); symmetric positive definite with eigenvalues >= lambda.
Mat inverse_metric(const MetricField &field, const Vec &z);

/// G(z) = (G^{-1}(z))^{-1}. Throws (reporting the condition number) if the
/// factorization degenerates numerically.
Mat metric(const MetricField &field, const Vec &z);

/// log sqrt(det G(z)) = -1/2 log det G^{-1}(z); the Riemannian volume element.
double log_sqrt_det_metric(const MetricField &field, const Vec &z);

/// Partial derivatives dG^{-1}/dz_j for j = 0..d-1.
std::vector<Mat> inverse_metric_jacobian(const MetricField &field, const Vec &z);

} // namespace geovae::riemann
