#pragma once

#include <string>
#include <vector>

#include "koopctl/basis.hpp"
#include "koopctl/json_io.hpp"
#include "koopctl/plant.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

// Moore-Penrose pseudo-inverse via SVD; singular values below
// tol * sigma_max are treated as zero.
Mat pseudo_inverse(const Mat& m, double tol = 1e-10);

// Identified lifted-space model z+ = A z + B2 u, y = C2 z.
struct KoopmanModel {
    Mat A;
    Mat B2;
    Mat C2;
    BasisLibrary basis;
    double dt = 0.0;
};

struct EdmdFit {
    KoopmanModel model;
    double state_residual = 0.0;   // ||Z2 - A Z1 - B2 U||_F
    double output_residual = 0.0;  // ||Y - C2 Z1||_F
    int regressor_rank = 0;
    bool rank_deficient = false;  // carried as a warning, not a failure
};

// Least-squares fit of (A, B2) from stacked lifted snapshots and of C2 from
// the output regression, both through the truncated pseudo-inverse.
EdmdFit edmd_fit(const SnapshotData& data, const BasisLibrary& basis, double pinv_tol = 1e-10);

struct Prediction {
    Mat states;   // state_dim x (T+1), identity-block read-back
    Mat lifted;   // M x (T+1)
    Mat outputs;  // p x (T+1), C2 * z
};

// Lifts x0 once and iterates the linear model over the input sequence.
Prediction koopman_predict(const KoopmanModel& model, const Vec& x0,
                           const std::vector<Vec>& u_seq);

json model_to_json(const KoopmanModel& model);
KoopmanModel model_from_json(const json& j);

}  // namespace koopctl
