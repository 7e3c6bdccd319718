#include "koopctl/bounds.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <boost/math/distributions/chi_squared.hpp>

#include "koopctl/errors.hpp"

namespace koopctl {

namespace {
constexpr double kGoldenRatio = 1.6180339887498948482;

// Gram-based extremal singular values; cheap for short-and-wide data matrices.
std::pair<double, double> singular_range(const Mat& m) {
    if (m.size() == 0) return {0.0, 0.0};
    const bool wide = m.cols() >= m.rows();
    Mat gram = wide ? Mat(m * m.transpose()) : Mat(m.transpose() * m);
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    const Vec& ev = eig.eigenvalues();
    double lo = std::sqrt(std::max(0.0, ev(0)));
    double hi = std::sqrt(std::max(0.0, ev(ev.size() - 1)));
    return {lo, hi};
}
}  // namespace

double spectral_norm(const Mat& m) { return singular_range(m).second; }

double smallest_singular_value(const Mat& m) { return singular_range(m).first; }

double gaussian_confidence_radius(double sigma, int dim, double confidence) {
    if (sigma < 0.0) throw std::invalid_argument("gaussian_confidence_radius: sigma >= 0");
    if (dim <= 0) throw std::invalid_argument("gaussian_confidence_radius: dim must be positive");
    if (confidence <= 0.0 || confidence >= 1.0)
        throw std::invalid_argument("gaussian_confidence_radius: confidence in (0,1)");
    if (sigma == 0.0) return 0.0;
    boost::math::chi_squared chi2(dim);
    return sigma * std::sqrt(boost::math::quantile(chi2, confidence));
}

double lifted_noise_norm(const BasisLibrary& basis, const Mat& X, double sigma, double confidence,
                         NormAggregate aggregate) {
    if (sigma < 0.0) throw std::invalid_argument("lifted_noise_norm: sigma >= 0");
    if (sigma == 0.0 || X.cols() == 0) return 0.0;
    const double r = gaussian_confidence_radius(sigma, basis.state_dim(), confidence);
    if (aggregate == NormAggregate::SqrtNMaxCol) {
        double max_jac = 0.0;
        for (Eigen::Index k = 0; k < X.cols(); ++k)
            max_jac = std::max(max_jac, spectral_norm(basis.jacobian(X.col(k))));
        return std::sqrt(static_cast<double>(X.cols())) * max_jac * r;
    }
    double sum_sq = 0.0;
    for (Eigen::Index k = 0; k < X.cols(); ++k) {
        const double c = spectral_norm(basis.jacobian(X.col(k))) * r;
        sum_sq += c * c;
    }
    return std::sqrt(sum_sq);
}

double pinv_perturbation_bound(double pinv_s_norm, double pinv_t_norm, double e_norm) {
    if (pinv_s_norm < 0.0 || pinv_t_norm < 0.0 || e_norm < 0.0)
        throw std::invalid_argument("pinv_perturbation_bound: inputs must be nonnegative");
    return kGoldenRatio * std::max(pinv_s_norm * pinv_s_norm, pinv_t_norm * pinv_t_norm) * e_norm;
}

MismatchBounds model_mismatch_bound(const SnapshotData& noisy, const BasisLibrary& basis,
                                    const NoiseParams& params, double pinv_tol) {
    MismatchBounds b;
    b.mu = kGoldenRatio;
    b.sigma = params.sigma;
    b.confidence = params.confidence;

    const Eigen::Index N = noisy.X1.cols();
    Mat Z1 = basis.lift_columns(noisy.X1);
    Mat Z2 = basis.lift_columns(noisy.X2);
    Mat T(Z1.rows() + noisy.U.rows(), N);
    T.topRows(Z1.rows()) = Z1;
    T.bottomRows(noisy.U.rows()) = noisy.U;

    auto [smin, smax] = singular_range(T);
    if (smin <= pinv_tol * smax)
        throw NumericError("model_mismatch_bound: stacked regressor is rank deficient");
    b.T_pinv_norm = 1.0 / smin;

    b.E1_norm = lifted_noise_norm(basis, noisy.X1, params.sigma, params.confidence,
                                  params.aggregate);
    b.E2_norm = lifted_noise_norm(basis, noisy.X2, params.sigma, params.confidence,
                                  params.aggregate);

    // sigma_min(S) >= sigma_min(T) - ||E1|| (Weyl). When the confidence
    // radius swamps the spectrum the gap degenerates; the estimate is then
    // capped at twice the observed pseudo-inverse norm, consistent with the
    // first-order regime the displayed bound lives in.
    const double s_gap = std::max(smin - b.E1_norm, 0.5 * smin);
    const double S_pinv_norm = 1.0 / s_gap;
    const double o_e1 = pinv_perturbation_bound(S_pinv_norm, b.T_pinv_norm, b.E1_norm);

    const double z2_norm = spectral_norm(Z2);
    b.U = b.E2_norm * b.T_pinv_norm + (z2_norm + b.E2_norm) * o_e1;
    b.second_order_correction = b.E2_norm * o_e1;
    return b;
}

MismatchBounds output_mismatch_bound(const SnapshotData& noisy, const BasisLibrary& basis,
                                     const NoiseParams& params, double pinv_tol) {
    MismatchBounds b;
    b.mu = kGoldenRatio;
    b.sigma = params.sigma;
    b.confidence = params.confidence;

    const Eigen::Index N = noisy.X1.cols();
    Mat Z1 = basis.lift_columns(noisy.X1);
    auto [smin, smax] = singular_range(Z1);
    if (smin <= pinv_tol * smax)
        throw NumericError("output_mismatch_bound: lifted data matrix is rank deficient");
    b.X1_pinv_norm = 1.0 / smin;

    b.E1_norm = lifted_noise_norm(basis, noisy.X1, params.sigma, params.confidence,
                                  params.aggregate);
    const double r_y =
        gaussian_confidence_radius(params.sigma_y, static_cast<int>(noisy.Y.rows()),
                                   params.confidence);
    b.M_norm = params.sigma_y == 0.0 ? 0.0 : std::sqrt(static_cast<double>(N)) * r_y;

    const double s_gap = std::max(smin - b.E1_norm, 0.5 * smin);
    const double S_pinv_norm = 1.0 / s_gap;
    const double o_e1 = pinv_perturbation_bound(S_pinv_norm, b.X1_pinv_norm, b.E1_norm);

    const double y_norm = spectral_norm(noisy.Y);
    b.V = b.M_norm * b.X1_pinv_norm + (y_norm + b.M_norm) * o_e1;
    b.second_order_correction_output = b.M_norm * o_e1;
    return b;
}

SectorMatrices sector_matrices(double U, double V, int lifted_dim, int input_dim) {
    if (U < 0.0 || V < 0.0) throw std::invalid_argument("sector_matrices: U, V must be >= 0");
    const int M = lifted_dim;
    const int m = input_dim;
    SectorMatrices s;
    s.U1 = Mat::Zero(M + m, M);
    s.U1.topRows(M) = U * Mat::Identity(M, M);
    s.U2 = Mat::Zero(M + m, m);
    s.U2.bottomRows(m) = U * Mat::Identity(m, m);
    s.V1 = V * Mat::Identity(M, M);
    return s;
}

MismatchBounds compute_mismatch_bounds(const SnapshotData& noisy, const BasisLibrary& basis,
                                       int input_dim, const NoiseParams& params,
                                       double pinv_tol) {
    MismatchBounds b = model_mismatch_bound(noisy, basis, params, pinv_tol);
    MismatchBounds v = output_mismatch_bound(noisy, basis, params, pinv_tol);
    b.V = v.V;
    b.M_norm = v.M_norm;
    b.X1_pinv_norm = v.X1_pinv_norm;
    b.second_order_correction_output = v.second_order_correction_output;
    SectorMatrices s = sector_matrices(b.U, b.V, basis.lifted_dim(), input_dim);
    b.U1 = std::move(s.U1);
    b.U2 = std::move(s.U2);
    b.V1 = std::move(s.V1);
    return b;
}

json bounds_to_json(const MismatchBounds& b) {
    json j;
    j["sigma"] = b.sigma;
    j["confidence"] = b.confidence;
    j["E1_norm"] = b.E1_norm;
    j["E2_norm"] = b.E2_norm;
    j["M_norm"] = b.M_norm;
    j["T_pinv_norm"] = b.T_pinv_norm;
    j["U"] = b.U;
    j["V"] = b.V;
    j["second_order_correction"] = b.second_order_correction;
    return j;
}

}  // namespace koopctl
