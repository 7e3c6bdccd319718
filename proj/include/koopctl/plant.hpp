#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "koopctl/types.hpp"

namespace koopctl {

// Continuous-time dynamics x' = f(x, u) with a memoryless output map.
struct NonlinearPlant {
    int state_dim = 0;
    int input_dim = 0;
    std::function<Vec(const Vec&, const Vec&)> vector_field;
    std::function<Vec(const Vec&)> output_map;  // defaults to identity
};

// Van der Pol field: x1' = x2, x2' = mu (1 - x1^2) x2 - x1 + u.
Vec vdp_vector_field(const Vec& x, double u, double mu);

// Van der Pol plant with y = x.
NonlinearPlant make_vdp_plant(double mu = 1.0);

// Classical 4-stage Runge-Kutta step with zero-order hold on u.
// Throws NumericError if a stage evaluates to a non-finite value.
Vec rk4_step(const NonlinearPlant& plant, const Vec& x, const Vec& u, double dt);

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

// Snapshot pairs: column k of X2 is the one-step image of column k of X1
// under input column k of U (before any measurement noise).
struct SnapshotData {
    Mat X1;  // state_dim x N
    Mat X2;  // state_dim x N
    Mat U;   // input_dim x N
    Mat Y;   // output_dim x N, outputs at the X2 sample times
    double dt = 0.0;
    std::uint64_t seed = 0;
};

struct SnapshotOptions {
    int n_pairs = 2000;
    double dt = 0.01;
    Interval x0_range{-1.0, 1.0};
    Interval u_range{-10.0, 10.0};
    int segment_length = 200;  // steps per restart; fresh uniform x0 each segment
    std::uint64_t seed = 0;
};

SnapshotData generate_snapshots(const NonlinearPlant& plant, const SnapshotOptions& opts);

// Adds i.i.d. zero-mean Gaussian noise with standard deviation sigma to every
// entry of X1, X2 and Y (inputs are measured exactly).
SnapshotData add_measurement_noise(const SnapshotData& data, double sigma, std::uint64_t seed);

// CSV export: header "t,x1,..,u1,..,y1,..", one row per step, round-trip decimals.
void write_trajectory_csv(const std::string& path, const Vec& t, const Mat& X, const Mat& U,
                          const Mat& Y);

}  // namespace koopctl
