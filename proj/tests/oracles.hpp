#pragma once

#include <random>

#include "koopctl/basis.hpp"
#include "koopctl/plant.hpp"
#include "koopctl/types.hpp"

// Test-side oracles, independent of the implementation paths they check.

namespace koopctl::oracles {

// Central finite differences of the lifting map.
Mat finite_difference_jacobian(const BasisLibrary& basis, const Vec& x, double h = 1e-6);

// Max residual over the four Moore-Penrose conditions.
double penrose_residual(const Mat& M, const Mat& P);

// H-infinity norm by dense frequency sweep with local bisection refinement;
// written independently of the library's norm routine.
double hinf_grid(const Mat& A, const Mat& B, const Mat& C, int points = 2048);

// Discrete Lyapunov solve A' P A - P + Q = 0 via Kronecker vectorization.
Mat dlyap_kron(const Mat& A, const Mat& Q);

// Scalar DARE by direct fixed-point iteration.
double scalar_dare_fixed_point(double a, double b, double q, double r);

// Random matrix with spectral radius scaled to rho.
Mat random_stable(int n, double rho, std::mt19937_64& rng);

Mat random_matrix(int rows, int cols, std::mt19937_64& rng);

// Snapshot data from an exact discrete-time linear system x+ = A x + B u.
SnapshotData linear_snapshots(const Mat& A, const Mat& B, int n_pairs, std::mt19937_64& rng);

// Worst-case destabilization threshold for x+ = g x + f(x), |f| <= u |x|:
// adversarial sign simulation, growth iff |g| + u >= 1.
double scalar_sector_threshold_by_simulation(double g, double u_lo, double u_hi, int bisections);

}  // namespace koopctl::oracles
