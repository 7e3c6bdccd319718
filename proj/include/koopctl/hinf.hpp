#pragma once

#include "koopctl/types.hpp"

namespace koopctl {

// H-infinity norm of the discrete system C (zI - A)^-1 B + D over the unit
// circle: dense frequency grid plus local golden-section refinement of the
// best peaks. Requires A Schur stable.
double hinf_norm(const Mat& A, const Mat& B, const Mat& C, const Mat& D,
                 int grid_points = 2048);

}  // namespace koopctl
