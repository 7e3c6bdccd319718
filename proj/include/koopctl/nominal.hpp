#pragma once

#include "koopctl/bounds.hpp"
#include "koopctl/edmd.hpp"
#include "koopctl/json_io.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

struct LqgWeights {
    double q_physical = 1.0;   // LQR weight on the identity-block coordinates
    double q_lifted = 1e-4;    // LQR weight on the remaining lifted coordinates
    double r = 1.0;            // input weight
    double wn = 1.0;           // process-noise weight for the observer design
    double vn = 1e-4;          // measurement-noise weight (sigma^2, floored)
};

// Control-design view of an identified model. Monomial dictionaries carry
// the constant function, whose data row is identically one: the fit pins an
// uncontrollable eigenvalue exactly on the unit circle. Feedback design
// therefore acts on the remaining coordinates, with the constant column
// compensated through a feedforward term.
struct DesignModel {
    Mat A;        // reduced state matrix (Mr x Mr)
    Mat B2;       // Mr x m
    Mat C2;       // pr x Mr
    Vec offset;   // bias column feeding the reduced block (zero if none)
    int full_dim = 0;
    bool has_constant = false;  // last coordinate of the full model is constant
};

DesignModel make_design_model(const KoopmanModel& model, const Mat& C2);

// Observer-based state feedback: u = K xhat, xhat+ = A xhat + B2 u + L (yhat - y).
// K and L act on the full lifted state; K_design / L_design are the reduced
// blocks the robust synthesis runs on.
struct NominalGains {
    Mat K;  // m x M; Schur stable on the non-constant block
    Mat L;  // M x p, A + L C2 Schur stable
    Mat K_design;  // m x Mr
    Mat L_design;  // Mr x pr
    LqgWeights weights;
};

// LQG design on the identified model; C2 is the feedback output map actually
// used by the loop (identity on the lifted state in lifted-feedback mode).
NominalGains lqg_design(const KoopmanModel& model, const Mat& C2, const LqgWeights& weights);

// Disturbance and performance channels. The defaults inject disturbance on
// the physical coordinates and penalize [physical state; 0.1 u].
struct PerformanceChannel {
    Mat B1;   // M x d
    Mat C1;   // q x M
    Mat D12;  // q x m
};

PerformanceChannel default_performance_channel(int lifted_dim, int state_dim, int input_dim,
                                               double d12_weight = 0.1);

// Stacked (state, estimation-error) system driven by the mismatch vector
// [f_s; v_s], the disturbance w and the compensation input u_f.
struct AugmentedPlant {
    Mat Abar;    // 2M x 2M, block upper-triangular
    Mat Fbar;    // 2M x (M+p)
    Mat B1bar;   // 2M x d
    Mat B2bar;   // 2M x m
    Mat C1bar;   // q x 2M
    Mat C2bar;   // p x 2M
    Mat D12bar;  // q x m
    Mat D21bar;  // p x (M+p)
    Mat Uprime;  // (M+m) x 2M, sector rows for f_s
    Mat U2;      // (M+m) x m
    Mat Vprime;  // M x 2M, sector rows for v_s
    int M = 0;
    int m = 0;
    int p = 0;
    int d = 0;
    int q = 0;
};

// Assembled from the design-model matrices and the reduced gain blocks.
AugmentedPlant build_augmented(const DesignModel& dm, const NominalGains& gains,
                               const PerformanceChannel& channel,
                               const MismatchBounds& bounds);

json gains_to_json(const NominalGains& gains);
json augmented_to_json(const AugmentedPlant& aug);

}  // namespace koopctl
