#include "koopctl/basis.hpp"

#include <cmath>
#include <stdexcept>

namespace koopctl {

namespace {

// All exponent tuples of the given total degree, x1-exponent descending.
void append_degree(std::vector<std::vector<int>>& out, std::vector<int>& scratch, int var,
                   int remaining, int n) {
    if (var == n - 1) {
        scratch[var] = remaining;
        out.push_back(scratch);
        return;
    }
    for (int e = remaining; e >= 0; --e) {
        scratch[var] = e;
        append_degree(out, scratch, var + 1, remaining - e, n);
    }
}

}  // namespace

BasisLibrary BasisLibrary::monomial(int state_dim, int max_degree) {
    if (state_dim <= 0) throw std::invalid_argument("basis: state_dim must be positive");
    if (max_degree < 1) throw std::invalid_argument("basis: monomial degree must be >= 1");
    BasisLibrary b;
    b.kind_ = BasisKind::Monomial;
    b.n_ = state_dim;
    b.degree_ = max_degree;

    std::vector<int> scratch(state_dim, 0);
    // coordinates first
    for (int i = 0; i < state_dim; ++i) {
        std::vector<int> e(state_dim, 0);
        e[i] = 1;
        b.exponents_.push_back(std::move(e));
    }
    for (int g = 2; g <= max_degree; ++g) append_degree(b.exponents_, scratch, 0, g, state_dim);
    b.exponents_.push_back(std::vector<int>(state_dim, 0));  // constant last
    b.lifted_dim_ = static_cast<int>(b.exponents_.size());
    return b;
}

BasisLibrary BasisLibrary::radial(int state_dim, const Mat& centers, double width) {
    if (state_dim <= 0) throw std::invalid_argument("basis: state_dim must be positive");
    if (centers.rows() != state_dim)
        throw std::invalid_argument("basis: centers must have state_dim rows");
    if (width <= 0.0) throw std::invalid_argument("basis: rbf width must be positive");
    BasisLibrary b;
    b.kind_ = BasisKind::RadialBasis;
    b.n_ = state_dim;
    b.centers_ = centers;
    b.width_ = width;
    b.lifted_dim_ = state_dim + static_cast<int>(centers.cols());
    return b;
}

Vec BasisLibrary::lift(const Vec& x) const {
    if (x.size() != n_) throw std::invalid_argument("lift: state dimension mismatch");
    Vec z(lifted_dim_);
    if (kind_ == BasisKind::Monomial) {
        for (int k = 0; k < lifted_dim_; ++k) {
            double v = 1.0;
            for (int i = 0; i < n_; ++i) {
                const int e = exponents_[static_cast<size_t>(k)][static_cast<size_t>(i)];
                for (int r = 0; r < e; ++r) v *= x(i);
            }
            z(k) = v;
        }
    } else {
        z.head(n_) = x;
        const double inv2w2 = 1.0 / (2.0 * width_ * width_);
        for (int c = 0; c < centers_.cols(); ++c)
            z(n_ + c) = std::exp(-(x - centers_.col(c)).squaredNorm() * inv2w2);
    }
    return z;
}

Mat BasisLibrary::lift_columns(const Mat& X) const {
    Mat Z(lifted_dim_, X.cols());
    for (Eigen::Index c = 0; c < X.cols(); ++c) Z.col(c) = lift(X.col(c));
    return Z;
}

Mat BasisLibrary::jacobian(const Vec& x) const {
    if (x.size() != n_) throw std::invalid_argument("jacobian: state dimension mismatch");
    Mat J = Mat::Zero(lifted_dim_, n_);
    if (kind_ == BasisKind::Monomial) {
        for (int k = 0; k < lifted_dim_; ++k) {
            const auto& e = exponents_[static_cast<size_t>(k)];
            for (int j = 0; j < n_; ++j) {
                if (e[static_cast<size_t>(j)] == 0) continue;
                double v = static_cast<double>(e[static_cast<size_t>(j)]);
                for (int i = 0; i < n_; ++i) {
                    int p = e[static_cast<size_t>(i)] - (i == j ? 1 : 0);
                    for (int r = 0; r < p; ++r) v *= x(i);
                }
                J(k, j) = v;
            }
        }
    } else {
        J.topRows(n_) = Mat::Identity(n_, n_);
        const double inv2w2 = 1.0 / (2.0 * width_ * width_);
        for (int c = 0; c < centers_.cols(); ++c) {
            const Vec diff = x - centers_.col(c);
            const double phi = std::exp(-diff.squaredNorm() * inv2w2);
            J.row(n_ + c) = (-phi / (width_ * width_)) * diff.transpose();
        }
    }
    return J;
}

std::string to_string(BasisKind kind) {
    return kind == BasisKind::Monomial ? "monomial" : "radial-basis";
}

BasisKind basis_kind_from_string(const std::string& s) {
    if (s == "monomial") return BasisKind::Monomial;
    if (s == "radial-basis" || s == "rbf") return BasisKind::RadialBasis;
    throw std::invalid_argument("unknown basis kind: " + s);
}

}  // namespace koopctl
