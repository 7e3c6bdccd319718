#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "koopctl/edmd.hpp"
#include "koopctl/nominal.hpp"
#include "koopctl/plant.hpp"
#include "koopctl/synthesis.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

// With the robust loop disabled the controller is exactly the LQG baseline.
struct DualLoopController {
    KoopmanModel model;
    Mat C2;  // feedback output map used by the loop (identity in lifted mode)
    NominalGains gains;
    QFilter qfilter;
    bool enabled_robust_loop = true;
    bool lifted_feedback = true;  // y_t = lift(noisy physical measurement)
};

struct ControllerState {
    Vec xhat;  // lifted observer state (M)
    Vec xQ;    // robust-loop state (2M)
};

struct StepResult {
    Vec u;       // total input, u = uk + uf
    Vec uk;      // nominal part K xhat
    Vec uf;      // compensation CQ xQ
    Vec f;       // residual yhat - y
    ControllerState next;
};

// Strict ordering: outputs and inputs are computed from the current states,
// then both observer and Q-filter advance. No algebraic loop since the
// Q-filter has zero feedthrough.
StepResult controller_step(const DualLoopController& ctrl, const ControllerState& state,
                           const Vec& y);

// Lifted-feedback measurement: lift(x + n) with per-step Gaussian noise; in
// physical mode the noisy state itself. The draw depends only on (seed, step).
Vec measure_output(const Vec& plant_state, const BasisLibrary& basis, double sigma,
                   std::uint64_t seed, std::int64_t step, bool lifted);

struct Trajectory {
    Vec t;
    Mat X;       // plant physical state (n x T+1)
    Mat Xhat;    // observer identity-block read-back (n x T)
    Mat U;       // total input (m x T)
    Mat Uk;      // nominal component
    Mat Uf;      // compensation component
    Vec f_norm;  // ||f_t|| per step
    Mat Z;       // performance output C1 lift(x) + D12 u (q x T)
};

struct SimulationOptions {
    double horizon = 20.0;  // seconds
    double sigma = 0.0;     // online measurement noise std
    std::uint64_t seed = 0;
    bool observer_from_first_measurement = true;  // otherwise zero init
    double divergence_guard = 1e6;
    std::optional<Mat> C1;   // performance channel for the z record
    std::optional<Mat> D12;
};

// Runs the dual loop against the true nonlinear plant (RK4 with zero-order
// hold). Throws NumericError with the step index if a state norm exceeds the
// divergence guard.
Trajectory simulate_closed_loop(const NonlinearPlant& plant, const DualLoopController& ctrl,
                                const Vec& x0, const SimulationOptions& opts);

// Runs the loop with the identified model itself as the plant (the
// zero-mismatch configuration). x0 is the physical state lifted internally.
Trajectory simulate_model_loop(const DualLoopController& ctrl, const Vec& x0,
                               const SimulationOptions& opts);

struct ResidualMetrics {
    double rms_f = 0.0;
    double final_f_norm = 0.0;
    double peak_f_norm = 0.0;
    double settling_time = -1.0;  // first time ||x|| stays below the threshold
    double final_state_norm = 0.0;
};

ResidualMetrics residual_metrics(const Trajectory& traj, double settle_threshold = 0.05);

// CSV per run: t,x1,..,u,uk,uf,fnorm,xhat1,.. (input columns unindexed for
// single-input plants).
void write_run_csv(const std::string& path, const Trajectory& traj);

}  // namespace koopctl
