#include "koopctl/lmi.hpp"

#include <Eigen/Eigenvalues>

#include "koopctl/errors.hpp"
#include "koopctl/sdp.hpp"

namespace koopctl {

LMIEntry& LMIConstraint::entry(int r, int c) {
    if (r > c) std::swap(r, c);
    for (auto& e : entries)
        if (e.row == r && e.col == c) return e;
    entries.push_back(LMIEntry{r, c, {}, Mat()});
    return entries.back();
}

int LMIConstraint::dim() const {
    int d = 0;
    for (int s : part) d += s;
    return d;
}

int LMIConstraint::offset(int block) const {
    int off = 0;
    for (int i = 0; i < block; ++i) off += part[static_cast<size_t>(i)];
    return off;
}

int LMIProblem::add_symmetric(const std::string& name, int n) {
    vars.push_back(LMIVariable{name, n, n, true});
    return static_cast<int>(vars.size()) - 1;
}

int LMIProblem::add_rect(const std::string& name, int rows, int cols) {
    vars.push_back(LMIVariable{name, rows, cols, false});
    return static_cast<int>(vars.size()) - 1;
}

LMIConstraint& LMIProblem::add_constraint(std::vector<int> part) {
    constraints.push_back(LMIConstraint{std::move(part), {}});
    return constraints.back();
}

namespace {

Mat term_value(const LMITerm& term, const std::vector<Mat>& values) {
    Mat v = term.transposed ? Mat(values[static_cast<size_t>(term.var)].transpose())
                            : values[static_cast<size_t>(term.var)];
    Mat out = std::move(v);
    if (term.left.size() > 0) out = term.left * out;
    if (term.right.size() > 0) out = out * term.right;
    return term.coeff * out;
}

}  // namespace

Mat LMIProblem::assemble(int k, const std::vector<Mat>& values) const {
    const LMIConstraint& con = constraints[static_cast<size_t>(k)];
    const int n = con.dim();
    Mat G = Mat::Zero(n, n);
    for (const auto& e : con.entries) {
        const int r0 = con.offset(e.row);
        const int c0 = con.offset(e.col);
        const int nr = con.part[static_cast<size_t>(e.row)];
        const int nc = con.part[static_cast<size_t>(e.col)];
        Mat block = Mat::Zero(nr, nc);
        if (e.constant.size() > 0) block += e.constant;
        for (const auto& t : e.terms) block += term_value(t, values);
        G.block(r0, c0, nr, nc) += block;
        if (e.row != e.col) G.block(c0, r0, nc, nr) += block.transpose();
    }
    return 0.5 * (G + G.transpose());
}

double LMIProblem::scale(int k) const {
    // Magnitude of the constant data only; variable magnitudes are unknown
    // until solved, so coefficient products would wildly overestimate.
    const LMIConstraint& con = constraints[static_cast<size_t>(k)];
    double s = 1.0;
    for (const auto& e : con.entries)
        if (e.constant.size() > 0) s = std::max(s, e.constant.cwiseAbs().maxCoeff());
    return s;
}

int LMIProblem::total_scalar_dim() const {
    int m = 0;
    for (const auto& v : vars) m += v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
    return m;
}

LMISolution solve_lmi(const LMIProblem& problem) {
    auto backend = make_interior_point_backend();
    return solve_lmi(problem, *backend);
}

LMISolution solve_lmi(const LMIProblem& problem, LMISolverBackend& backend) {
    LMISolution sol = backend.solve(problem);
    if (sol.status != LMIStatus::Feasible) return sol;

    // Post-hoc audit: the assembled blocks must clear half the margin.
    sol.margins.clear();
    for (int k = 0; k < static_cast<int>(problem.constraints.size()); ++k) {
        Mat G = problem.assemble(k, sol.values);
        double lam_max = 0.0;
        if (G.size() > 0) {
            Eigen::SelfAdjointEigenSolver<Mat> eig(G, Eigen::EigenvaluesOnly);
            lam_max = eig.eigenvalues().maxCoeff();
        }
        sol.margins.push_back(-lam_max);
        const double eps = effective_margin(problem, k);
        if (!(lam_max <= -0.5 * eps)) {
            sol.status = LMIStatus::Unknown;
            sol.diagnostics += " audit failed on constraint " + std::to_string(k) +
                               " (lambda_max=" + std::to_string(lam_max) + ")";
        }
    }
    return sol;
}

}  // namespace koopctl
