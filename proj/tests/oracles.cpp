#include "oracles.hpp"

#include <complex>

#include <Eigen/Dense>

namespace koopctl::oracles {

Mat finite_difference_jacobian(const BasisLibrary& basis, const Vec& x, double h) {
    Mat J(basis.lifted_dim(), basis.state_dim());
    for (int j = 0; j < basis.state_dim(); ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        J.col(j) = (basis.lift(xp) - basis.lift(xm)) / (2.0 * h);
    }
    return J;
}

double penrose_residual(const Mat& M, const Mat& P) {
    double r = (M * P * M - M).cwiseAbs().maxCoeff();
    r = std::max(r, (P * M * P - P).cwiseAbs().maxCoeff());
    r = std::max(r, ((M * P).transpose() - M * P).cwiseAbs().maxCoeff());
    r = std::max(r, ((P * M).transpose() - P * M).cwiseAbs().maxCoeff());
    return r;
}

namespace {
double gain(const Mat& A, const Mat& B, const Mat& C, double theta) {
    using CM = Eigen::MatrixXcd;
    const std::complex<double> z(std::cos(theta), std::sin(theta));
    CM R = z * CM::Identity(A.rows(), A.cols()) - A.cast<std::complex<double>>();
    CM T = C.cast<std::complex<double>>() * R.lu().solve(B.cast<std::complex<double>>());
    Eigen::JacobiSVD<CM> svd(T);
    return svd.singularValues()(0);
}
}  // namespace

double hinf_grid(const Mat& A, const Mat& B, const Mat& C, int points) {
    double best = 0.0;
    double best_theta = 0.0;
    for (int i = 0; i < points; ++i) {
        const double theta = M_PI * static_cast<double>(i) / (points - 1);
        const double g = gain(A, B, C, theta);
        if (g > best) {
            best = g;
            best_theta = theta;
        }
    }
    // local refinement by interval thirds
    double lo = std::max(0.0, best_theta - M_PI / (points - 1));
    double hi = std::min(M_PI, best_theta + M_PI / (points - 1));
    for (int it = 0; it < 80; ++it) {
        const double m1 = lo + (hi - lo) / 3.0;
        const double m2 = hi - (hi - lo) / 3.0;
        if (gain(A, B, C, m1) < gain(A, B, C, m2))
            lo = m1;
        else
            hi = m2;
    }
    best = std::max(best, gain(A, B, C, 0.5 * (lo + hi)));
    return best;
}

Mat dlyap_kron(const Mat& A, const Mat& Q) {
    const Eigen::Index n = A.rows();
    // vec(A' P A) = (A' (x) A') vec(P)
    Mat K(n * n, n * n);
    const Mat At = A.transpose();
    for (Eigen::Index bc = 0; bc < n; ++bc)
        for (Eigen::Index br = 0; br < n; ++br)
            K.block(br * n, bc * n, n, n) = At(br, bc) * At;
    Mat lhs = Mat::Identity(n * n, n * n) - K;
    Vec q(n * n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) q(r + c * n) = Q(r, c);
    Vec p = lhs.partialPivLu().solve(q);
    Mat P(n, n);
    for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index r = 0; r < n; ++r) P(r, c) = p(r + c * n);
    return 0.5 * (P + P.transpose());
}

double scalar_dare_fixed_point(double a, double b, double q, double r) {
    double p = q;
    for (int i = 0; i < 10000; ++i) {
        const double next = a * p * a - a * p * b * (1.0 / (r + b * p * b)) * b * p * a + q;
        if (std::abs(next - p) < 1e-15 * std::max(1.0, std::abs(next))) return next;
        p = next;
    }
    return p;
}

Mat random_matrix(int rows, int cols, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat M(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) M(r, c) = gauss(rng);
    return M;
}

Mat random_stable(int n, double rho, std::mt19937_64& rng) {
    Mat A = random_matrix(n, n, rng);
    const double sr = A.eigenvalues().cwiseAbs().maxCoeff();
    return A * (rho / std::max(sr, 1e-12));
}

SnapshotData linear_snapshots(const Mat& A, const Mat& B, int n_pairs, std::mt19937_64& rng) {
    const int n = static_cast<int>(A.rows());
    const int m = static_cast<int>(B.cols());
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    SnapshotData d;
    d.X1.resize(n, n_pairs);
    d.X2.resize(n, n_pairs);
    d.U.resize(m, n_pairs);
    d.Y.resize(n, n_pairs);
    d.dt = 1.0;
    Vec x(n);
    for (int i = 0; i < n; ++i) x(i) = uni(rng);
    for (int k = 0; k < n_pairs; ++k) {
        if (k % 50 == 0)
            for (int i = 0; i < n; ++i) x(i) = uni(rng);
        Vec u(m);
        for (int i = 0; i < m; ++i) u(i) = uni(rng);
        Vec xn = A * x + B * u;
        d.X1.col(k) = x;
        d.X2.col(k) = xn;
        d.U.col(k) = u;
        d.Y.col(k) = xn;
        x = xn;
    }
    return d;
}

double scalar_sector_threshold_by_simulation(double g, double u_lo, double u_hi, int bisections) {
    auto grows = [&](double u) {
        double x = 1.0;
        for (int k = 0; k < 200; ++k) {
            // adversarial sign: the worst sector member pushes away from zero
            x = std::abs(g * x) + u * std::abs(x);
            if (x > 1e6) return true;
            if (x < 1e-9) return false;
        }
        return x > 1.0;
    };
    for (int i = 0; i < bisections; ++i) {
        const double mid = 0.5 * (u_lo + u_hi);
        if (grows(mid))
            u_hi = mid;
        else
            u_lo = mid;
    }
    return 0.5 * (u_lo + u_hi);
}

}  // namespace koopctl::oracles
