#pragma once

#include "koopctl/basis.hpp"
#include "koopctl/json_io.hpp"
#include "koopctl/plant.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

// How per-column noise bounds are aggregated into a spectral-norm bound.
enum class NormAggregate {
    SqrtNMaxCol,  // ||E|| <= sqrt(N) * max_k ||col_k||
    Frobenius,    // ||E|| <= sqrt(sum_k ||col_k||^2), tighter
};

struct NoiseParams {
    double sigma = 0.0;    // state measurement noise std
    double sigma_y = 0.0;  // output measurement noise std
    double confidence = 0.997;
    NormAggregate aggregate = NormAggregate::SqrtNMaxCol;
};

// Noise-induced perturbation bounds on the identified matrices, plus the
// sector factor blocks used by the robust synthesis.
struct MismatchBounds {
    double U = 0.0;  // spectral bound on [dA, dB]
    double V = 0.0;  // spectral bound on dC
    Mat U1, U2, V1;  // sector factors, ||[U1 U2]|| = U, ||[V1 0]|| = V
    double E1_norm = 0.0;
    double E2_norm = 0.0;
    double M_norm = 0.0;
    double T_pinv_norm = 0.0;
    double X1_pinv_norm = 0.0;
    double second_order_correction = 0.0;         // ||E2|| * O(E1), reported separately
    double second_order_correction_output = 0.0;  // ||M|| * O(E1)
    double mu = 0.0;                               // golden-ratio constant
    double sigma = 0.0;
    double confidence = 0.0;
};

double spectral_norm(const Mat& m);
double smallest_singular_value(const Mat& m);

// Radius containing a zero-mean Gaussian n-vector with the given probability.
double gaussian_confidence_radius(double sigma, int dim, double confidence);

// Bound on the spectral norm of the lifted-noise matrix whose columns are
// first-order terms J(x_k) n_k.
double lifted_noise_norm(const BasisLibrary& basis, const Mat& X, double sigma,
                         double confidence = 0.997,
                         NormAggregate aggregate = NormAggregate::SqrtNMaxCol);

// mu * max(s^2, t^2) * e with mu = (1+sqrt(5))/2.
double pinv_perturbation_bound(double pinv_s_norm, double pinv_t_norm, double e_norm);

// U part: bound on ||[dA, dB]|| from the noisy snapshot data actually used in
// the fit. Throws NumericError if the stacked regressor is degenerate.
MismatchBounds model_mismatch_bound(const SnapshotData& noisy, const BasisLibrary& basis,
                                    const NoiseParams& params, double pinv_tol = 1e-10);

// V part: bound on ||dC||.
MismatchBounds output_mismatch_bound(const SnapshotData& noisy, const BasisLibrary& basis,
                                     const NoiseParams& params, double pinv_tol = 1e-10);

struct SectorMatrices {
    Mat U1;  // (M+m) x M
    Mat U2;  // (M+m) x m
    Mat V1;  // M x M
};

// Scaled-identity factorization: [U1 U2] = U * I_{M+m}, V1 = V * I_M.
SectorMatrices sector_matrices(double U, double V, int lifted_dim, int input_dim);

// Runs both bound computations and attaches the sector factorization.
MismatchBounds compute_mismatch_bounds(const SnapshotData& noisy, const BasisLibrary& basis,
                                       int input_dim, const NoiseParams& params,
                                       double pinv_tol = 1e-10);

json bounds_to_json(const MismatchBounds& b);

}  // namespace koopctl
