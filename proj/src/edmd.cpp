#include "koopctl/edmd.hpp"

#include <Eigen/SVD>

#include "koopctl/errors.hpp"

namespace koopctl {

Mat pseudo_inverse(const Mat& m, double tol) {
    if (m.size() == 0) return Mat(m.cols(), m.rows());
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cutoff = tol * (s.size() > 0 ? s(0) : 0.0);
    Vec sinv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i)
        if (s(i) > cutoff && s(i) > 0.0) sinv(i) = 1.0 / s(i);
    return svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();
}

EdmdFit edmd_fit(const SnapshotData& data, const BasisLibrary& basis, double pinv_tol) {
    const int M = basis.lifted_dim();
    const Eigen::Index N = data.X1.cols();
    const Eigen::Index m = data.U.rows();
    if (N < M + m)
        throw std::invalid_argument("edmd_fit: need at least lifted_dim + input_dim snapshots");

    Mat Z1 = basis.lift_columns(data.X1);
    Mat Z2 = basis.lift_columns(data.X2);

    Mat G(M + m, N);  // stacked regressor [Z1; U]
    G.topRows(M) = Z1;
    G.bottomRows(m) = data.U;

    Eigen::JacobiSVD<Mat> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& s = svd.singularValues();
    const double cutoff = pinv_tol * (s.size() > 0 ? s(0) : 0.0);
    int rank = 0;
    Vec sinv = Vec::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            sinv(i) = 1.0 / s(i);
            ++rank;
        }
    }
    Mat Gpinv = svd.matrixV() * sinv.asDiagonal() * svd.matrixU().transpose();

    Mat AB = Z2 * Gpinv;  // M x (M+m)

    EdmdFit fit;
    fit.model.A = AB.leftCols(M);
    fit.model.B2 = AB.rightCols(m);
    fit.model.C2 = data.Y * pseudo_inverse(Z1, pinv_tol);
    fit.model.basis = basis;
    fit.model.dt = data.dt;
    fit.state_residual = (Z2 - fit.model.A * Z1 - fit.model.B2 * data.U).norm();
    fit.output_residual = (data.Y - fit.model.C2 * Z1).norm();
    fit.regressor_rank = rank;
    fit.rank_deficient = rank < M + m;
    if (!fit.model.A.allFinite() || !fit.model.B2.allFinite() || !fit.model.C2.allFinite())
        throw NumericError("edmd_fit: non-finite model matrices");
    return fit;
}

Prediction koopman_predict(const KoopmanModel& model, const Vec& x0,
                           const std::vector<Vec>& u_seq) {
    const int M = model.basis.lifted_dim();
    const int n = model.basis.state_dim();
    const Eigen::Index T = static_cast<Eigen::Index>(u_seq.size());
    Prediction pred;
    pred.lifted.resize(M, T + 1);
    pred.states.resize(n, T + 1);
    pred.outputs.resize(model.C2.rows(), T + 1);

    Vec z = model.basis.lift(x0);
    pred.lifted.col(0) = z;
    for (Eigen::Index k = 0; k < T; ++k) {
        const Vec& u = u_seq[static_cast<size_t>(k)];
        if (u.size() != model.B2.cols())
            throw std::invalid_argument("koopman_predict: input dimension mismatch");
        z = model.A * z + model.B2 * u;
        pred.lifted.col(k + 1) = z;
    }
    pred.states = pred.lifted.topRows(n);
    pred.outputs = model.C2 * pred.lifted;
    return pred;
}

json model_to_json(const KoopmanModel& model) {
    json j;
    j["basis"] = json::object();
    j["basis"]["kind"] = to_string(model.basis.kind());
    j["basis"]["state_dim"] = model.basis.state_dim();
    if (model.basis.kind() == BasisKind::Monomial) {
        j["basis"]["degree"] = model.basis.degree();
    } else {
        j["basis"]["centers"] = mat_to_json(model.basis.centers());
        j["basis"]["width"] = model.basis.width();
    }
    j["dt"] = model.dt;
    j["A"] = mat_to_json(model.A);
    j["B2"] = mat_to_json(model.B2);
    j["C2"] = mat_to_json(model.C2);
    return j;
}

KoopmanModel model_from_json(const json& j) {
    KoopmanModel model;
    const auto& jb = j.at("basis");
    const auto kind = basis_kind_from_string(jb.at("kind").get<std::string>());
    const int n = jb.at("state_dim").get<int>();
    if (kind == BasisKind::Monomial) {
        model.basis = BasisLibrary::monomial(n, jb.at("degree").get<int>());
    } else {
        model.basis =
            BasisLibrary::radial(n, json_to_mat(jb.at("centers")), jb.at("width").get<double>());
    }
    model.dt = j.at("dt").get<double>();
    model.A = json_to_mat(j.at("A"));
    model.B2 = json_to_mat(j.at("B2"));
    model.C2 = json_to_mat(j.at("C2"));
    const int M = model.basis.lifted_dim();
    if (model.A.rows() != M || model.A.cols() != M || model.B2.rows() != M ||
        model.C2.cols() != M)
        throw IoError("model JSON: matrix dimensions inconsistent with basis");
    return model;
}

}  // namespace koopctl
