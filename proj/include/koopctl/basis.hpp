#pragma once

#include <string>
#include <vector>

#include "koopctl/types.hpp"

namespace koopctl {

enum class BasisKind { Monomial, RadialBasis };

// Observable dictionary. The first state_dim functions are always the
// coordinate functions, so lifted vectors carry the physical state in
// their leading block and states can be read back exactly.
//
// Monomial ordering: coordinates first, then all monomials of total degree
// 2..d in graded lexicographic order (degree-major, exponents of x1
// descending within a degree), constant term last.
class BasisLibrary {
  public:
    BasisLibrary() = default;  // empty; produced by the named factories below

    static BasisLibrary monomial(int state_dim, int max_degree);
    static BasisLibrary radial(int state_dim, const Mat& centers, double width);

    BasisKind kind() const { return kind_; }
    int state_dim() const { return n_; }
    int lifted_dim() const { return lifted_dim_; }
    int degree() const { return degree_; }
    const Mat& centers() const { return centers_; }
    double width() const { return width_; }

    // Evaluates all basis functions at x. Throws on dimension mismatch.
    Vec lift(const Vec& x) const;

    // Columns of the result are lifted states.
    Mat lift_columns(const Mat& X) const;

    // Exact analytic Jacobian d(lift)/dx, lifted_dim x state_dim.
    Mat jacobian(const Vec& x) const;

    // e.g. {2,1} for x1^2 x2; exposed for serialization and tests.
    const std::vector<std::vector<int>>& exponents() const { return exponents_; }

  private:
    BasisKind kind_ = BasisKind::Monomial;
    int n_ = 0;
    int lifted_dim_ = 0;
    int degree_ = 0;                          // monomial only
    std::vector<std::vector<int>> exponents_;  // monomial only
    Mat centers_;                              // rbf only, state_dim x n_centers
    double width_ = 1.0;                       // rbf only
};

std::string to_string(BasisKind kind);
BasisKind basis_kind_from_string(const std::string& s);

}  // namespace koopctl
