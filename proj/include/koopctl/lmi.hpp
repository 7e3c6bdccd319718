#pragma once

#include <memory>
#include <string>
#include <vector>

#include "koopctl/types.hpp"

namespace koopctl {

struct LMIVariable {
    std::string name;
    int rows = 0;
    int cols = 0;
    bool symmetric = false;
};

// One affine term inside a block entry: coeff * L * op(V) * R, where op is
// the transpose when `transposed` is set. Empty L/R stand for identities.
struct LMITerm {
    int var = -1;
    bool transposed = false;
    double coeff = 1.0;
    Mat left;
    Mat right;
};

struct LMIEntry {
    int row = 0;
    int col = 0;  // block coordinates, row <= col
    std::vector<LMITerm> terms;
    Mat constant;  // empty means zero
};

// Symmetric block-matrix template. Entries are given for the upper triangle;
// the lower blocks are mirrored. The assembled matrix must satisfy
// G(y) <= -eps I, with eps scaled to the constraint's magnitude.
struct LMIConstraint {
    std::vector<int> part;
    std::vector<LMIEntry> entries;

    LMIEntry& entry(int r, int c);
    int dim() const;
    int offset(int block) const;
};

struct LMIProblem {
    std::vector<LMIVariable> vars;
    std::vector<LMIConstraint> constraints;
    double eps_rel = 1e-7;

    int add_symmetric(const std::string& name, int n);
    int add_rect(const std::string& name, int rows, int cols);
    LMIConstraint& add_constraint(std::vector<int> part);

    // Dense assembly of constraint k at the given variable values.
    Mat assemble(int k, const std::vector<Mat>& values) const;

    // Magnitude estimate of constraint k, used to scale the eps margin.
    double scale(int k) const;

    int total_scalar_dim() const;
};

enum class LMIStatus { Feasible, Infeasible, Unknown };

struct LMISolution {
    LMIStatus status = LMIStatus::Unknown;
    std::vector<Mat> values;      // valid when status == Feasible
    std::vector<double> margins;  // per constraint, -lambda_max of the assembly
    std::string diagnostics;
    int iterations = 0;
};

// Seam for plugging an external conic solver; the bundled backend is a dense
// interior-point method suited to the moderate cone sizes used here.
class LMISolverBackend {
  public:
    virtual ~LMISolverBackend() = default;
    virtual LMISolution solve(const LMIProblem& problem) = 0;
};

std::unique_ptr<LMISolverBackend> make_interior_point_backend();

// Solves the feasibility problem and, on a feasible answer, audits every
// constraint by an eigenvalue check (max eigenvalue <= -eps/2). The backend
// is never trusted blind.
LMISolution solve_lmi(const LMIProblem& problem);
LMISolution solve_lmi(const LMIProblem& problem, LMISolverBackend& backend);

}  // namespace koopctl
