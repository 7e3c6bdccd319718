#include "koopctl/riccati.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "koopctl/errors.hpp"

namespace koopctl {

double spectral_radius(const Mat& A) {
    if (A.size() == 0) return 0.0;
    return A.eigenvalues().cwiseAbs().maxCoeff();
}

double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P) {
    Mat BtPB = R + B.transpose() * P * B;
    Mat rhs = A.transpose() * P * A -
              A.transpose() * P * B * BtPB.ldlt().solve(B.transpose() * P * A) + Q;
    double denom = std::max(P.norm(), 1e-300);
    return (P - rhs).norm() / denom;
}

Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != B.cols() || R.cols() != B.cols())
        throw std::invalid_argument("solve_dare: dimension mismatch");

    Eigen::LDLT<Mat> Rf(R);
    if (Rf.info() != Eigen::Success || !Rf.isPositive())
        throw NumericError("solve_dare: R must be positive definite");

    // Doubling iteration on (Ak, Gk, Hk); Hk converges to the stabilizing P.
    Mat Ak = A;
    Mat Gk = B * Rf.solve(B.transpose());
    Mat Hk = Q;
    const Mat I = Mat::Identity(n, n);

    for (int it = 0; it < 200; ++it) {
        Mat W = I + Gk * Hk;
        Eigen::PartialPivLU<Mat> lu(W);
        Mat WinvA = lu.solve(Ak);
        Mat WinvG = lu.solve(Gk);
        Mat H_next = Hk + Ak.transpose() * Hk * WinvA;
        Mat G_next = Gk + Ak * WinvG * Ak.transpose();
        Mat A_next = Ak * WinvA;
        double delta = (H_next - Hk).norm() / std::max(1.0, H_next.norm());
        Ak = std::move(A_next);
        Gk = std::move(G_next);
        Hk = std::move(H_next);
        if (!Hk.allFinite())
            throw NumericError("solve_dare: doubling iteration diverged (pair not stabilizable?)");
        if (delta < 1e-15) break;
    }

    Mat P = 0.5 * (Hk + Hk.transpose());
    const double res = dare_residual(A, B, Q, R, P);
    if (!(res < 1e-9))
        throw NumericError("solve_dare: residual " + std::to_string(res) +
                           " exceeds tolerance (pair not stabilizable/detectable?)");
    return P;
}

}  // namespace koopctl
