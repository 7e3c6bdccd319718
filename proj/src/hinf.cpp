#include "koopctl/hinf.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <Eigen/Dense>

#include "koopctl/errors.hpp"
#include "koopctl/riccati.hpp"

namespace koopctl {

namespace {

using CMat = Eigen::MatrixXcd;

double gain_at(const Mat& A, const Mat& B, const Mat& C, const Mat& D, double theta) {
    const std::complex<double> z(std::cos(theta), std::sin(theta));
    CMat M = z * CMat::Identity(A.rows(), A.cols()) - A.cast<std::complex<double>>();
    CMat X = M.partialPivLu().solve(B.cast<std::complex<double>>());
    CMat T = C.cast<std::complex<double>>() * X + D.cast<std::complex<double>>();
    Eigen::JacobiSVD<CMat> svd(T);
    return svd.singularValues()(0);
}

}  // namespace

double hinf_norm(const Mat& A, const Mat& B, const Mat& C, const Mat& D, int grid_points) {
    if (B.size() == 0 || C.size() == 0) return 0.0;
    if (spectral_radius(A) >= 1.0)
        throw NumericError("hinf_norm: system is not Schur stable");

    const double pi = std::numbers::pi;
    std::vector<double> theta(static_cast<size_t>(grid_points));
    std::vector<double> gain(static_cast<size_t>(grid_points));
    for (int i = 0; i < grid_points; ++i) {
        theta[static_cast<size_t>(i)] = pi * static_cast<double>(i) / (grid_points - 1);
        gain[static_cast<size_t>(i)] = gain_at(A, B, C, D, theta[static_cast<size_t>(i)]);
    }

    // refine around the top few local maxima
    std::vector<int> peaks;
    for (int i = 0; i < grid_points; ++i) {
        const double g = gain[static_cast<size_t>(i)];
        const bool up = i == 0 || g >= gain[static_cast<size_t>(i - 1)];
        const bool down = i == grid_points - 1 || g >= gain[static_cast<size_t>(i + 1)];
        if (up && down) peaks.push_back(i);
    }
    std::sort(peaks.begin(), peaks.end(),
              [&](int a, int b) { return gain[static_cast<size_t>(a)] > gain[static_cast<size_t>(b)]; });
    if (peaks.size() > 3) peaks.resize(3);

    double best = *std::max_element(gain.begin(), gain.end());
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int p : peaks) {
        double lo = theta[static_cast<size_t>(std::max(0, p - 1))];
        double hi = theta[static_cast<size_t>(std::min(grid_points - 1, p + 1))];
        double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
        double f1 = gain_at(A, B, C, D, x1), f2 = gain_at(A, B, C, D, x2);
        for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
            if (f1 < f2) {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + gr * (hi - lo);
                f2 = gain_at(A, B, C, D, x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - gr * (hi - lo);
                f1 = gain_at(A, B, C, D, x1);
            }
        }
        best = std::max(best, std::max(f1, f2));
    }
    return best;
}

}  // namespace koopctl
