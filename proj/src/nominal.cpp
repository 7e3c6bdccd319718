#include "koopctl/nominal.hpp"

#include <Eigen/LU>

#include "koopctl/errors.hpp"
#include "koopctl/riccati.hpp"

namespace koopctl {

NominalGains lqg_design(const KoopmanModel& model, const Mat& C2, const LqgWeights& weights) {
    const Mat& A = model.A;
    const Mat& B2 = model.B2;
    const int M = static_cast<int>(A.rows());
    const int n = model.basis.state_dim();
    if (C2.cols() != M) throw std::invalid_argument("lqg_design: C2 column count mismatch");

    Vec qdiag = Vec::Constant(M, weights.q_lifted);
    qdiag.head(n).setConstant(weights.q_physical);
    Mat Q = qdiag.asDiagonal();
    Mat R = weights.r * Mat::Identity(B2.cols(), B2.cols());

    Mat P = solve_dare(A, B2, Q, R);
    Mat K = -(R + B2.transpose() * P * B2).ldlt().solve(B2.transpose() * P * A);

    Mat Wn = weights.wn * Mat::Identity(M, M);
    Mat Vn = weights.vn * Mat::Identity(C2.rows(), C2.rows());
    Mat S = solve_dare(A.transpose(), C2.transpose(), Wn, Vn);
    // Kalman predictor gain; observer update is +L (yhat - y), so L = -Kf.
    Mat Kf = A * S * C2.transpose() *
             (C2 * S * C2.transpose() + Vn).ldlt().solve(Mat::Identity(C2.rows(), C2.rows()));
    Mat L = -Kf;

    NominalGains gains{std::move(K), std::move(L), weights};
    const double rho_k = spectral_radius(A + B2 * gains.K);
    const double rho_l = spectral_radius(A + gains.L * C2);
    if (rho_k >= 1.0 || rho_l >= 1.0)
        throw NumericError("lqg_design: closed-loop spectral radius not inside the unit circle (" +
                           std::to_string(rho_k) + ", " + std::to_string(rho_l) + ")");
    return gains;
}

PerformanceChannel default_performance_channel(int lifted_dim, int state_dim, int input_dim,
                                               double d12_weight) {
    PerformanceChannel ch;
    ch.B1 = Mat::Zero(lifted_dim, state_dim);
    ch.B1.topRows(state_dim) = Mat::Identity(state_dim, state_dim);
    const int q = state_dim + input_dim;
    ch.C1 = Mat::Zero(q, lifted_dim);
    ch.C1.topLeftCorner(state_dim, state_dim) = Mat::Identity(state_dim, state_dim);
    ch.D12 = Mat::Zero(q, input_dim);
    ch.D12.bottomRows(input_dim) = d12_weight * Mat::Identity(input_dim, input_dim);
    return ch;
}

AugmentedPlant build_augmented(const KoopmanModel& model, const Mat& C2,
                               const NominalGains& gains, const PerformanceChannel& channel,
                               const MismatchBounds& bounds) {
    const Mat& A = model.A;
    const Mat& B2 = model.B2;
    const int M = static_cast<int>(A.rows());
    const int m = static_cast<int>(B2.cols());
    const int p = static_cast<int>(C2.rows());
    const int d = static_cast<int>(channel.B1.cols());
    const int q = static_cast<int>(channel.C1.rows());

    if (gains.K.rows() != m || gains.K.cols() != M)
        throw std::invalid_argument("build_augmented: K dimension mismatch");
    if (gains.L.rows() != M || gains.L.cols() != p)
        throw std::invalid_argument("build_augmented: L dimension mismatch");
    if (channel.B1.rows() != M || channel.C1.cols() != M || channel.D12.rows() != q ||
        channel.D12.cols() != m)
        throw std::invalid_argument("build_augmented: performance channel dimension mismatch");
    if (bounds.U1.rows() != M + m || bounds.U1.cols() != M || bounds.U2.rows() != M + m ||
        bounds.U2.cols() != m || bounds.V1.rows() != M || bounds.V1.cols() != M)
        throw std::invalid_argument("build_augmented: sector block dimension mismatch");

    AugmentedPlant aug;
    aug.M = M;
    aug.m = m;
    aug.p = p;
    aug.d = d;
    aug.q = q;

    aug.Abar = Mat::Zero(2 * M, 2 * M);
    aug.Abar.topLeftCorner(M, M) = A + B2 * gains.K;
    aug.Abar.topRightCorner(M, M) = -B2 * gains.K;
    aug.Abar.bottomRightCorner(M, M) = A + gains.L * C2;

    aug.Fbar = Mat::Zero(2 * M, M + p);
    aug.Fbar.topLeftCorner(M, M) = -Mat::Identity(M, M);
    aug.Fbar.bottomLeftCorner(M, M) = -Mat::Identity(M, M);
    aug.Fbar.bottomRightCorner(M, p) = -gains.L;

    aug.B1bar.resize(2 * M, d);
    aug.B1bar.topRows(M) = channel.B1;
    aug.B1bar.bottomRows(M) = channel.B1;

    aug.B2bar = Mat::Zero(2 * M, m);
    aug.B2bar.topRows(M) = B2;

    aug.C1bar.resize(q, 2 * M);
    aug.C1bar.leftCols(M) = channel.C1 + channel.D12 * gains.K;
    aug.C1bar.rightCols(M) = -channel.D12 * gains.K;

    aug.C2bar = Mat::Zero(p, 2 * M);
    aug.C2bar.rightCols(M) = -C2;

    aug.D12bar = channel.D12;

    aug.D21bar = Mat::Zero(p, M + p);
    aug.D21bar.rightCols(p) = Mat::Identity(p, p);

    aug.Uprime.resize(M + m, 2 * M);
    aug.Uprime.leftCols(M) = bounds.U1 + bounds.U2 * gains.K;
    aug.Uprime.rightCols(M) = -bounds.U2 * gains.K;
    aug.U2 = bounds.U2;

    aug.Vprime = Mat::Zero(M, 2 * M);
    aug.Vprime.leftCols(M) = bounds.V1;

    return aug;
}

json gains_to_json(const NominalGains& gains) {
    json j;
    j["K"] = mat_to_json(gains.K);
    j["L"] = mat_to_json(gains.L);
    j["weights"] = {{"q_physical", gains.weights.q_physical},
                    {"q_lifted", gains.weights.q_lifted},
                    {"r", gains.weights.r},
                    {"wn", gains.weights.wn},
                    {"vn", gains.weights.vn}};
    return j;
}

json augmented_to_json(const AugmentedPlant& aug) {
    json j;
    j["Abar"] = mat_to_json(aug.Abar);
    j["Fbar"] = mat_to_json(aug.Fbar);
    j["B1bar"] = mat_to_json(aug.B1bar);
    j["B2bar"] = mat_to_json(aug.B2bar);
    j["C1bar"] = mat_to_json(aug.C1bar);
    j["C2bar"] = mat_to_json(aug.C2bar);
    j["D12bar"] = mat_to_json(aug.D12bar);
    j["D21bar"] = mat_to_json(aug.D21bar);
    j["Uprime"] = mat_to_json(aug.Uprime);
    j["U2"] = mat_to_json(aug.U2);
    j["Vprime"] = mat_to_json(aug.Vprime);
    return j;
}

}  // namespace koopctl
