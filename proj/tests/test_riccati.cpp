#include <random>

#include <doctest.h>

#include "koopctl/errors.hpp"
#include "koopctl/riccati.hpp"
#include "oracles.hpp"

using namespace koopctl;

TEST_CASE("scalar Riccati equation against fixed-point iteration") {
    Mat A = Mat::Constant(1, 1, 0.5), B = Mat::Ones(1, 1);
    Mat Q = Mat::Ones(1, 1), R = Mat::Ones(1, 1);
    Mat P = solve_dare(A, B, Q, R);
    CHECK(std::abs(P(0, 0) - oracles::scalar_dare_fixed_point(0.5, 1.0, 1.0, 1.0)) < 1e-12);
    CHECK(dare_residual(A, B, Q, R, P) < 1e-10);
}

TEST_CASE("deadbeat limit: A = 0 gives P = Q") {
    Mat A = Mat::Zero(3, 3);
    std::mt19937_64 rng(1);
    Mat B = oracles::random_matrix(3, 2, rng);
    Mat Q = Mat::Identity(3, 3);
    Mat R = Mat::Identity(2, 2);
    CHECK((solve_dare(A, B, Q, R) - Q).norm() < 1e-12);
}

TEST_CASE("random systems: stabilizing solution with tight residual") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 8; ++t) {
        Mat A = oracles::random_stable(4, 1.1, rng);  // mildly unstable is fine
        Mat B = oracles::random_matrix(4, 2, rng);
        Mat Q = Mat::Identity(4, 4);
        Mat R = Mat::Identity(2, 2);
        Mat P = solve_dare(A, B, Q, R);
        CHECK(dare_residual(A, B, Q, R, P) < 1e-9);
        Mat K = -(R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
        CHECK(spectral_radius(A + B * K) < 1.0);
    }
}

TEST_CASE("non-stabilizable pair is diagnosed") {
    Mat A = Mat::Constant(1, 1, 2.0);
    Mat B = Mat::Zero(1, 1);
    CHECK_THROWS_AS(solve_dare(A, B, Mat::Ones(1, 1), Mat::Ones(1, 1)), NumericError);
}

TEST_CASE("argument validation") {
    CHECK_THROWS_AS(solve_dare(Mat::Zero(2, 3), Mat::Zero(2, 1), Mat::Identity(2, 2),
                               Mat::Identity(1, 1)),
                    std::invalid_argument);
    // R must be positive definite
    CHECK_THROWS_AS(solve_dare(Mat::Identity(2, 2) * 0.5, Mat::Identity(2, 2),
                               Mat::Identity(2, 2), -Mat::Identity(2, 2)),
                    NumericError);
}
