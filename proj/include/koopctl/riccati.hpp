#pragma once

#include "koopctl/types.hpp"

namespace koopctl {

// Stabilizing solution of the discrete algebraic Riccati equation
//   P = A'PA - A'PB (R + B'PB)^-1 B'PA + Q
// via the structure-preserving doubling iteration. Requires (A,B)
// stabilizable, Q >= 0, R > 0. Throws NumericError with a diagnostic when
// the iteration fails or the residual check does not meet 1e-9 relative.
Mat solve_dare(const Mat& A, const Mat& B, const Mat& Q, const Mat& R);

// Relative DARE residual ||P - (A'PA - A'PB(R+B'PB)^-1 B'PA + Q)||_F / ||P||_F.
double dare_residual(const Mat& A, const Mat& B, const Mat& Q, const Mat& R, const Mat& P);

double spectral_radius(const Mat& A);

}  // namespace koopctl
