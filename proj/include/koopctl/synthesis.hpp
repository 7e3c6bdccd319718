#pragma once

#include <string>
#include <vector>

#include "koopctl/json_io.hpp"
#include "koopctl/lmi.hpp"
#include "koopctl/nominal.hpp"
#include "koopctl/sdp.hpp"
#include "koopctl/types.hpp"

namespace koopctl {

// Robust-loop compensator x_Q+ = AQ x_Q + BQ f, u_f = CQ x_Q. The direct
// feedthrough is identically zero, which keeps the loop free of algebraic
// feedback.
struct QFilter {
    Mat AQ;  // 2M x 2M
    Mat BQ;  // 2M x p
    Mat CQ;  // m x 2M
};

struct AnalysisResult {
    LMIStatus status = LMIStatus::Unknown;
    Mat P;
    double margin = 0.0;
    std::string diagnostics;
};

// Robust stability / performance analysis for
//   x+ = G x + F f(x) + H w,  z = C x,  ||f(x)|| <= ||Ustar x||.
// Assembles the 4x4 block analysis LMI and solves for P > 0. Feasibility
// certifies asymptotic stability under the sector bound and ||z|| < gamma ||w||.
AnalysisResult analysis_lmi(const Mat& G, const Mat& F, const Mat& H, const Mat& C,
                            const Mat& Ustar, double lambda, double gamma,
                            const InteriorPointOptions& ipo = {});

struct SynthesisVars {
    LMIStatus status = LMIStatus::Unknown;
    Mat X1, Y1;         // certificate matrices
    Mat AQh, BQh, CQh;  // transformed controller variables
    std::string diagnostics;
};

// Output-feedback synthesis LMI (9x9 block form plus the coupling condition)
// in the transformed variables (X1, Y1, AQh, BQh, CQh).
SynthesisVars synthesis_lmi(const AugmentedPlant& aug, double lambda, double gamma,
                            const InteriorPointOptions& ipo = {});

// The underlying problem templates, exposed so tests can assemble them at
// externally constructed points. Variable order of the synthesis problem:
// X1, Y1, AQh, BQh, CQh; the analysis problem holds the single variable P.
LMIProblem build_analysis_problem(const Mat& G, const Mat& F, const Mat& H, const Mat& C,
                                  const Mat& Ustar, double lambda, double gamma);
LMIProblem build_synthesis_problem(const AugmentedPlant& aug, double lambda, double gamma);

// Forward change of variables mapping a controller to (AQh, BQh, CQh) for the
// factorization X2 = I, Y2 = I - Y1 X1.
void transform_qfilter(const QFilter& qf, const Mat& X1, const Mat& Y1,
                       const AugmentedPlant& aug, Mat& AQh, Mat& BQh, Mat& CQh);

// Inverse of the change of variables. Throws NumericError when I - Y1 X1 is
// singular within tolerance (a perturbed re-solve X1 <- X1 + delta I helps).
QFilter recover_controller(const Mat& X1, const Mat& Y1, const Mat& AQh, const Mat& BQh,
                           const Mat& CQh, const AugmentedPlant& aug);

struct ClosedLoop {
    Mat Acl;    // 4M x 4M
    Mat Fcl;    // 4M x (M+p)
    Mat Bcl;    // 4M x d
    Mat Ccl;    // q x 4M
    Mat Ustar;  // (2M+... sector rows) x 4M
};

ClosedLoop build_closed_loop(const AugmentedPlant& aug, const QFilter& qf);

// Feeds the closed loop back into the analysis LMI at the synthesis (lambda,
// gamma). A failed verification is a result, not an error.
AnalysisResult verify_closed_loop(const AugmentedPlant& aug, const QFilter& qf, double lambda,
                                  double gamma, const InteriorPointOptions& ipo = {});

struct GammaSearchOptions {
    std::vector<double> lambda_grid;  // empty -> log grid, 10 points in [1e-2, 1e2]
    double gamma_min = 1e-3;
    double gamma_max = 1e6;
    double gamma_rel_tol = 1e-2;
    InteriorPointOptions ipo;
};

std::vector<double> default_lambda_grid(int points = 10, double lo = 1e-2, double hi = 1e2);

struct GridPoint {
    double lambda = 0.0;
    double gamma = 0.0;
    bool feasible = false;
};

struct SynthesisResult {
    bool feasible = false;
    double gamma = 0.0;
    double lambda = 0.0;
    QFilter qfilter;
    Mat X1, Y1;
    Mat AQh, BQh, CQh;
    std::vector<GridPoint> grid;  // every probe, for the report
    std::string diagnostics;
};

// For each lambda on the grid, brackets and bisects gamma over feasibility of
// the synthesis LMI; returns the best (smallest gamma) feasible design with
// the controller recovered. Throws on an empty grid.
SynthesisResult search_gamma_lambda(const AugmentedPlant& aug, const GammaSearchOptions& opts);

json qfilter_to_json(const QFilter& qf);
QFilter qfilter_from_json(const json& j);
json synthesis_report_to_json(const SynthesisResult& r, const AnalysisResult& verification);

}  // namespace koopctl
