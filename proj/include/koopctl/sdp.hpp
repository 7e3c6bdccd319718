#pragma once

#include <memory>

#include "koopctl/lmi.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

struct InteriorPointOptions {
    int max_iterations = 150;
    double gap_tol = 1e-9;
    double feas_tol = 1e-7;
    double step_fraction = 0.98;
    // Small penalty on the traces of symmetric variables; steers feasibility
    // searches toward well-conditioned certificates.
    double trace_penalty = 0.0;
    bool verbose = false;
};

// Bundled dense primal-dual interior-point method (NT scaling) for the LMI
// feasibility problems produced in this project. Feasibility is decided by a
// phase-I objective; dual feasibility is maintained exactly, so a negative
// phase-I value certifies strict feasibility of the margined LMI.
std::unique_ptr<LMISolverBackend> make_interior_point_backend(const InteriorPointOptions& opts);

// Scalar parameterization shared between the solver and its tests:
// symmetric variables use the upper triangle in column-major order.
int variable_scalar_dim(const LMIVariable& v);
std::vector<Mat> unpack_variables(const LMIProblem& problem, const Vec& y);
Vec pack_variables(const LMIProblem& problem, const std::vector<Mat>& values);

// Margin actually imposed for constraint k: eps_rel * scale, capped by any
// constant-only diagonal block (which bounds the achievable margin).
double effective_margin(const LMIProblem& problem, int k);

// Cross-checks the solver's structured linear algebra (apply / adjoint /
// Schur complement assembly) against brute-force dense computations on the
// given problem. Returns the maximum absolute discrepancy.
double sdp_structured_algebra_selftest(const LMIProblem& problem, unsigned seed);

}  // namespace koopctl
