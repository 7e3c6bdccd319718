#include "koopctl/sdp.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "koopctl/errors.hpp"

namespace koopctl {

double effective_margin(const LMIProblem& problem, int k) {
    const auto& con = problem.constraints[static_cast<size_t>(k)];
    // Constant-only diagonal blocks cap the achievable margin (e.g. a
    // -I/lambda^2 tail); the eps margin must stay below that cap.
    double cap = std::numeric_limits<double>::infinity();
    for (const auto& e : con.entries) {
        if (e.row != e.col || !e.terms.empty() || e.constant.size() == 0) continue;
        Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (e.constant + e.constant.transpose()),
                                               Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().size() > 0)
            cap = std::min(cap, -eig.eigenvalues().maxCoeff());
    }
    double eps = problem.eps_rel * problem.scale(k);
    if (std::isfinite(cap) && cap > 0.0) eps = std::min(eps, 0.5 * cap);
    return std::max(eps, 0.0);
}

int variable_scalar_dim(const LMIVariable& v) {
    return v.symmetric ? v.rows * (v.rows + 1) / 2 : v.rows * v.cols;
}

std::vector<Mat> unpack_variables(const LMIProblem& problem, const Vec& y) {
    std::vector<Mat> values;
    int off = 0;
    for (const auto& v : problem.vars) {
        Mat m(v.rows, v.cols);
        if (v.symmetric) {
            int k = 0;
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i <= j; ++i, ++k) {
                    m(i, j) = y(off + k);
                    m(j, i) = y(off + k);
                }
        } else {
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) m(i, j) = y(off + j * v.rows + i);
        }
        off += variable_scalar_dim(v);
        values.push_back(std::move(m));
    }
    return values;
}

Vec pack_variables(const LMIProblem& problem, const std::vector<Mat>& values) {
    int m = problem.total_scalar_dim();
    Vec y(m);
    int off = 0;
    for (size_t vi = 0; vi < problem.vars.size(); ++vi) {
        const auto& v = problem.vars[vi];
        const Mat& val = values[vi];
        if (v.symmetric) {
            int k = 0;
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i <= j; ++i, ++k) y(off + k) = val(i, j);
        } else {
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) y(off + j * v.rows + i) = val(i, j);
        }
        off += variable_scalar_dim(v);
    }
    return y;
}

namespace {

// ---------------------------------------------------------------------------
// Translated problem: the phase-I SDP
//   maximize -t  s.t.  -G_k(x) - eps_k I + t I >= 0  for each constraint k,
//                      t_cap + t >= 0,
// where G_k is the assembled LMI block matrix. t < 0 at a dual-feasible
// iterate proves G_k(x) <= -eps_k I strictly.
// ---------------------------------------------------------------------------

struct VarLayout {
    int rows = 0, cols = 0;
    bool sym = false;
    int yoff = 0;   // offset into the solver's y vector
    int fdim = 0;   // rows * cols, full grid
    std::vector<int> fold;  // full-grid index -> folded local index
};

struct Occ {
    int var = -1;
    int block = -1;
    int r0 = 0, c0 = 0;  // placement of L*op(V)*R inside the block
    int nr = 0, nc = 0;  // extent of the placed product
    int ra = 0, rb = 0;  // rows/cols of op(V)
    bool trans = false;
    bool mirrored = false;
    double coeff = 0.0;
    Mat L, R;  // empty = identity
};

struct Translated {
    std::vector<VarLayout> vars;
    std::vector<int> block_dim;   // last block is the 1x1 t-cap
    std::vector<Mat> F0;          // constant parts
    std::vector<Occ> occs;
    int mdim = 0;    // scalar dims of the matrix variables
    int tindex = 0;  // == mdim
    double t_cap = 0.0;
    std::vector<double> eps;
    double scale = 1.0;
};

Mat left_apply(const Mat& L, const Eigen::Ref<const Mat>& M) {
    if (L.size() == 0) return M;
    return L * M;
}

Mat right_apply(const Eigen::Ref<const Mat>& M, const Mat& R) {
    if (R.size() == 0) return M;
    return M * R;
}

Translated translate(const LMIProblem& problem) {
    Translated tp;
    int yoff = 0;
    for (const auto& v : problem.vars) {
        VarLayout lay;
        lay.rows = v.rows;
        lay.cols = v.cols;
        lay.sym = v.symmetric;
        lay.yoff = yoff;
        lay.fdim = v.rows * v.cols;
        lay.fold.resize(static_cast<size_t>(lay.fdim));
        if (v.symmetric) {
            for (int j = 0; j < v.cols; ++j)
                for (int i = 0; i < v.rows; ++i) {
                    int lo = std::min(i, j), hi = std::max(i, j);
                    lay.fold[static_cast<size_t>(i + j * v.rows)] = hi * (hi + 1) / 2 + lo;
                }
        } else {
            for (int k = 0; k < lay.fdim; ++k) lay.fold[static_cast<size_t>(k)] = k;
        }
        yoff += variable_scalar_dim(v);
        tp.vars.push_back(std::move(lay));
    }
    tp.mdim = yoff;
    tp.tindex = yoff;

    const int ncon = static_cast<int>(problem.constraints.size());
    for (int k = 0; k < ncon; ++k) {
        const auto& con = problem.constraints[static_cast<size_t>(k)];
        const int n = con.dim();
        tp.block_dim.push_back(n);
        const double sc = problem.scale(k);
        tp.scale = std::max(tp.scale, sc);
        tp.eps.push_back(effective_margin(problem, k));

        Mat F0 = Mat::Zero(n, n);
        for (const auto& e : con.entries) {
            const int r0 = con.offset(e.row);
            const int c0 = con.offset(e.col);
            const int nr = con.part[static_cast<size_t>(e.row)];
            const int nc = con.part[static_cast<size_t>(e.col)];
            if (nr == 0 || nc == 0) continue;
            if (e.constant.size() > 0) {
                if (e.constant.rows() != nr || e.constant.cols() != nc)
                    throw std::invalid_argument("LMI entry constant has wrong shape");
                // SDP block carries the negated LMI
                F0.block(r0, c0, nr, nc) -= e.constant;
                if (e.row != e.col) F0.block(c0, r0, nc, nr) -= e.constant.transpose();
            }
            for (const auto& t : e.terms) {
                const auto& v = problem.vars[static_cast<size_t>(t.var)];
                Occ o;
                o.var = t.var;
                o.block = k;
                o.r0 = r0;
                o.c0 = c0;
                o.nr = nr;
                o.nc = nc;
                o.trans = t.transposed;
                o.ra = t.transposed ? v.cols : v.rows;
                o.rb = t.transposed ? v.rows : v.cols;
                o.mirrored = (e.row != e.col);
                o.coeff = -t.coeff;  // negation of the LMI
                o.L = t.left;
                o.R = t.right;
                const int lrows = o.L.size() > 0 ? static_cast<int>(o.L.rows()) : o.ra;
                const int lcols = o.L.size() > 0 ? static_cast<int>(o.L.cols()) : o.ra;
                const int rrows = o.R.size() > 0 ? static_cast<int>(o.R.rows()) : o.rb;
                const int rcols = o.R.size() > 0 ? static_cast<int>(o.R.cols()) : o.rb;
                if (lcols != o.ra || rrows != o.rb || lrows != nr || rcols != nc)
                    throw std::invalid_argument("LMI term dimensions inconsistent in entry (" +
                                                std::to_string(e.row) + "," +
                                                std::to_string(e.col) + ")");
                if (e.row == e.col) {
                    // Diagonal contributions must be symmetric: L op(V) R with
                    // R = L^T on a symmetric variable (or a 1x1 block).
                    bool ok = false;
                    if (v.symmetric) {
                        if (o.L.size() == 0 && o.R.size() == 0)
                            ok = true;
                        else if (o.L.size() > 0 && o.R.size() > 0 &&
                                 o.L.rows() == o.R.cols() && o.L.cols() == o.R.rows())
                            ok = (o.L.transpose() - o.R).cwiseAbs().maxCoeff() <
                                 1e-12 * (1.0 + o.R.cwiseAbs().maxCoeff());
                    } else {
                        ok = (nr == 1 && nc == 1);
                    }
                    if (!ok)
                        throw std::invalid_argument(
                            "LMI diagonal entry term is not symmetric by construction");
                }
                tp.occs.push_back(std::move(o));
            }
        }
        F0 = 0.5 * (F0 + F0.transpose());
        F0.diagonal().array() -= tp.eps.back();
        tp.F0.push_back(std::move(F0));
    }
    // t-cap block, sized after everything else is known
    tp.block_dim.push_back(1);
    tp.F0.push_back(Mat::Zero(1, 1));
    return tp;
}

// G_k(y) = F0_k + sum_i y_i F_i applied structurally.
std::vector<Mat> apply_map(const Translated& tp, const std::vector<Mat>& values, double t,
                           bool include_const) {
    const int nb = static_cast<int>(tp.block_dim.size());
    std::vector<Mat> G(static_cast<size_t>(nb));
    for (int k = 0; k < nb; ++k) {
        const int n = tp.block_dim[static_cast<size_t>(k)];
        G[static_cast<size_t>(k)] =
            include_const ? tp.F0[static_cast<size_t>(k)] : Mat::Zero(n, n);
    }
    for (const auto& o : tp.occs) {
        const Mat& V = values[static_cast<size_t>(o.var)];
        Mat prod = o.trans ? right_apply(left_apply(o.L, V.transpose()), o.R)
                           : right_apply(left_apply(o.L, V), o.R);
        prod *= o.coeff;
        Mat& Gk = G[static_cast<size_t>(o.block)];
        Gk.block(o.r0, o.c0, o.nr, o.nc) += prod;
        if (o.mirrored) Gk.block(o.c0, o.r0, o.nc, o.nr) += prod.transpose();
    }
    // phase-I variable: +t on every main block diagonal, t_cap + t on the cap
    for (int k = 0; k + 1 < nb; ++k)
        G[static_cast<size_t>(k)].diagonal().array() += t;
    G.back()(0, 0) += t + (include_const ? tp.t_cap : 0.0);
    for (auto& Gk : G) Gk = 0.5 * (Gk + Gk.transpose());
    return G;
}

// g_i = tr(F_i M) for all scalar variables including t.
Vec adjoint_map(const Translated& tp, const std::vector<Mat>& M) {
    Vec g = Vec::Zero(tp.mdim + 1);
    for (const auto& o : tp.occs) {
        const Mat& Mk = M[static_cast<size_t>(o.block)];
        // gradient w.r.t. op(V): coeff * mult * (R * M[c0,r0] * L)^T
        Mat core = Mk.block(o.c0, o.r0, o.nc, o.nr);
        Mat QMP = left_apply(o.R, core);
        QMP = right_apply(QMP, o.L);
        const double mult = o.mirrored ? 2.0 : 1.0;
        Mat grad_op = (o.coeff * mult) * QMP.transpose();  // ra x rb
        Mat grad_v = o.trans ? Mat(grad_op.transpose()) : std::move(grad_op);
        const VarLayout& lay = tp.vars[static_cast<size_t>(o.var)];
        for (int c = 0; c < lay.cols; ++c)
            for (int r = 0; r < lay.rows; ++r)
                g(lay.yoff + lay.fold[static_cast<size_t>(r + c * lay.rows)]) += grad_v(r, c);
    }
    double gt = 0.0;
    for (const auto& Mk : M) gt += Mk.trace();
    g(tp.tindex) = gt;
    return g;
}

// Scatter helper: pair_buf[(p,q),(p',q')] += S(q-dependent) * V(p-dependent),
// with the four index patterns produced by mirrored occurrences.
enum class Pattern { T1, T2, T3, T4 };

void scatter_term(Mat& pair_buf, const Occ& o, const Occ& op, const Mat& A, const Mat& B,
                  double factor, Pattern pat) {
    // A, B are the two small factor matrices for the pattern:
    //  T1: A = Q W P' (rb x ra'),  B = Q' W P (rb' x ra)
    //  T2: A = Q W Q'^T (rb x rb'), B = P'^T W P (ra' x ra)
    //  T3: A = P^T W P' (ra x ra'), B = Q' W Q^T (rb' x rb)
    //  T4: A = P^T W Q'^T (ra x rb'), B = P'^T W Q^T (ra' x rb)
    const int ra = o.ra, rb = o.rb;
    const int rap = op.ra, rbp = op.rb;
    const int rv = o.trans ? o.rb : o.ra;              // rows of V
    const int rvp = op.trans ? op.rb : op.ra;          // rows of V'
    auto col_index = [&](int pp, int qp) {
        return op.trans ? (qp + pp * rvp) : (pp + qp * rvp);
    };
    // Vector-over-p factor transposed so p is the fast dimension.
    Mat Bt;
    switch (pat) {
        case Pattern::T1: Bt = B.transpose(); break;  // (ra x rb'), V(p) = Bt(p, q')
        case Pattern::T2: Bt = B.transpose(); break;  // (ra x ra'), V(p) = Bt(p, p')
        case Pattern::T3: Bt = A; break;              // (ra x ra'), V(p) = A(p, p')
        case Pattern::T4: Bt = A; break;              // (ra x rb'), V(p) = A(p, q')
    }
    for (int qp = 0; qp < rbp; ++qp) {
        for (int pp = 0; pp < rap; ++pp) {
            const int col = col_index(pp, qp);
            double* colptr = pair_buf.data() + static_cast<std::ptrdiff_t>(col) * pair_buf.rows();
            for (int q = 0; q < rb; ++q) {
                double s = 0.0;
                switch (pat) {
                    case Pattern::T1: s = A(q, pp); break;
                    case Pattern::T2: s = A(q, qp); break;
                    case Pattern::T3: s = B(qp, q); break;
                    case Pattern::T4: s = B(pp, q); break;
                }
                s *= factor;
                if (s == 0.0) continue;
                const int vcol = (pat == Pattern::T1 || pat == Pattern::T4) ? qp : pp;
                if (!o.trans) {
                    // full-grid rows q*rv .. q*rv+ra-1, contiguous in p
                    double* dst = colptr + static_cast<std::ptrdiff_t>(q) * rv;
                    const double* src = Bt.data() + static_cast<std::ptrdiff_t>(vcol) * Bt.rows();
                    for (int p = 0; p < ra; ++p) dst[p] += s * src[p];
                } else {
                    for (int p = 0; p < ra; ++p) colptr[q + p * rv] += s * Bt(p, vcol);
                }
            }
        }
    }
}

// Schur complement H_ij = sum_blocks tr(F_i W F_j W), including the t row/col.
Mat schur_matrix(const Translated& tp, const std::vector<Mat>& W,
                 const std::vector<std::vector<int>>& occ_by_var) {
    const int m = tp.mdim + 1;
    Mat H = Mat::Zero(m, m);
    const int nvars = static_cast<int>(tp.vars.size());

    for (int v = 0; v < nvars; ++v) {
        const VarLayout& lv = tp.vars[static_cast<size_t>(v)];
        for (int vp = v; vp < nvars; ++vp) {
            const VarLayout& lvp = tp.vars[static_cast<size_t>(vp)];
            Mat pair_buf = Mat::Zero(lv.fdim, lvp.fdim);
            bool touched = false;
            for (int io : occ_by_var[static_cast<size_t>(v)]) {
                const Occ& o = tp.occs[static_cast<size_t>(io)];
                for (int iop : occ_by_var[static_cast<size_t>(vp)]) {
                    const Occ& op = tp.occs[static_cast<size_t>(iop)];
                    if (o.block != op.block) continue;
                    touched = true;
                    const Mat& Wk = W[static_cast<size_t>(o.block)];
                    const double f = o.coeff * op.coeff;
                    {  // T1
                        Mat A = right_apply(
                            left_apply(o.R, Wk.block(o.c0, op.r0, o.nc, op.nr)), op.L);
                        Mat B = right_apply(
                            left_apply(op.R, Wk.block(op.c0, o.r0, op.nc, o.nr)), o.L);
                        scatter_term(pair_buf, o, op, A, B, f, Pattern::T1);
                    }
                    if (op.mirrored) {  // T2
                        Mat A = right_apply(left_apply(o.R, Wk.block(o.c0, op.c0, o.nc, op.nc)),
                                            Mat(op.R.size() > 0 ? Mat(op.R.transpose()) : Mat()));
                        Mat B = right_apply(
                            left_apply(op.L.size() > 0 ? Mat(op.L.transpose()) : Mat(),
                                       Wk.block(op.r0, o.r0, op.nr, o.nr)),
                            o.L);
                        scatter_term(pair_buf, o, op, A, B, f, Pattern::T2);
                    }
                    if (o.mirrored) {  // T3
                        Mat A = right_apply(
                            left_apply(o.L.size() > 0 ? Mat(o.L.transpose()) : Mat(),
                                       Wk.block(o.r0, op.r0, o.nr, op.nr)),
                            op.L);
                        Mat B = right_apply(left_apply(op.R, Wk.block(op.c0, o.c0, op.nc, o.nc)),
                                            Mat(o.R.size() > 0 ? Mat(o.R.transpose()) : Mat()));
                        scatter_term(pair_buf, o, op, A, B, f, Pattern::T3);
                    }
                    if (o.mirrored && op.mirrored) {  // T4
                        Mat A = right_apply(
                            left_apply(o.L.size() > 0 ? Mat(o.L.transpose()) : Mat(),
                                       Wk.block(o.r0, op.c0, o.nr, op.nc)),
                            Mat(op.R.size() > 0 ? Mat(op.R.transpose()) : Mat()));
                        Mat B = right_apply(
                            left_apply(op.L.size() > 0 ? Mat(op.L.transpose()) : Mat(),
                                       Wk.block(op.r0, o.c0, op.nr, o.nc)),
                            Mat(o.R.size() > 0 ? Mat(o.R.transpose()) : Mat()));
                        scatter_term(pair_buf, o, op, A, B, f, Pattern::T4);
                    }
                }
            }
            if (!touched) continue;
            // fold the full grid into the scalar parameterization
            for (int fc = 0; fc < lvp.fdim; ++fc) {
                const int col = lvp.yoff + lvp.fold[static_cast<size_t>(fc)];
                for (int fr = 0; fr < lv.fdim; ++fr) {
                    const int row = lv.yoff + lv.fold[static_cast<size_t>(fr)];
                    H(row, col) += pair_buf(fr, fc);
                }
            }
        }
    }
    // t row/column (and diagonal) via the adjoint at W^2
    std::vector<Mat> W2(W.size());
    for (size_t k = 0; k < W.size(); ++k) W2[k] = W[k] * W[k];
    Vec tcol = adjoint_map(tp, W2);
    H.col(tp.tindex) = tcol;
    H.row(tp.tindex) = tcol.transpose();
    // mirror the lower triangle of the variable-variable part
    for (int c = 0; c < tp.mdim; ++c)
        for (int r = c + 1; r < tp.mdim; ++r) H(r, c) = H(c, r);
    Mat Hs = 0.5 * (H + H.transpose());
    return Hs;
}

// Largest alpha <= 1 such that X + alpha dX stays positive semidefinite.
double max_step(const std::vector<Mat>& X, const std::vector<Mat>& dX, double fraction) {
    double alpha = 1.0;
    for (size_t k = 0; k < X.size(); ++k) {
        if (X[k].size() == 0) continue;
        Eigen::LLT<Mat> llt(X[k]);
        if (llt.info() != Eigen::Success) return 0.0;
        Mat Linv_dX = llt.matrixL().solve(dX[k]);
        Mat M = llt.matrixL().solve(Linv_dX.transpose());
        Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (M + M.transpose()),
                                               Eigen::EigenvaluesOnly);
        const double lam_min = eig.eigenvalues().minCoeff();
        if (lam_min < 0.0) alpha = std::min(alpha, -fraction / lam_min);
    }
    return alpha;
}

class InteriorPointBackend final : public LMISolverBackend {
  public:
    explicit InteriorPointBackend(InteriorPointOptions opts) : opts_(opts) {}

    LMISolution solve(const LMIProblem& problem) override;

  private:
    InteriorPointOptions opts_;
};

LMISolution InteriorPointBackend::solve(const LMIProblem& problem) {
    LMISolution sol;
    Translated tp = translate(problem);
    const int m = tp.mdim + 1;
    const int nb = static_cast<int>(tp.block_dim.size());
    int ntot = 0;
    for (int d : tp.block_dim) ntot += d;

    std::vector<std::vector<int>> occ_by_var(tp.vars.size());
    for (int i = 0; i < static_cast<int>(tp.occs.size()); ++i)
        occ_by_var[static_cast<size_t>(tp.occs[static_cast<size_t>(i)].var)].push_back(i);

    // Strictly dual-feasible start: variables at zero, t large enough.
    double t0 = 1.0;
    for (int k = 0; k + 1 < nb; ++k) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(tp.F0[static_cast<size_t>(k)],
                                               Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().size() > 0)
            t0 = std::max(t0, -eig.eigenvalues().minCoeff() + 1.0 + 0.1 * tp.scale);
    }
    tp.t_cap = 10.0 * (std::abs(t0) + 1.0);

    Vec y = Vec::Zero(m);
    y(tp.tindex) = t0;
    Vec b = Vec::Zero(m);
    b(tp.tindex) = -1.0;  // maximize -t
    if (opts_.trace_penalty > 0.0) {
        for (size_t vi = 0; vi < problem.vars.size(); ++vi) {
            const auto& v = problem.vars[vi];
            if (!v.symmetric) continue;
            const int yoff = tp.vars[vi].yoff;
            for (int d = 0; d < v.rows; ++d)
                b(yoff + d * (d + 3) / 2) = -opts_.trace_penalty;
        }
    }

    std::vector<Mat> values = unpack_variables(problem, y.head(tp.mdim));
    std::vector<Mat> Z = apply_map(tp, values, y(tp.tindex), true);
    std::vector<Mat> X(Z.size());
    for (size_t k = 0; k < Z.size(); ++k)
        X[k] = Mat::Identity(Z[k].rows(), Z[k].cols());

    const double delta_exit = 1e-9 * std::max(1.0, std::abs(t0));
    double best_t = t0;
    double mu_prev = std::numeric_limits<double>::infinity();
    int stall = 0;

    auto finish_feasible = [&](int iters) {
        sol.status = LMIStatus::Feasible;
        sol.values = unpack_variables(problem, y.head(tp.mdim));
        sol.iterations = iters;
        std::ostringstream os;
        os << "phase-I t=" << y(tp.tindex) << " after " << iters << " iterations";
        sol.diagnostics = os.str();
        return sol;
    };

    for (int iter = 0; iter < opts_.max_iterations; ++iter) {
        // NT scaling per block: W Z W = X.
        std::vector<Mat> W(Z.size()), Zinv(Z.size());
        bool chol_ok = true;
        for (size_t k = 0; k < Z.size(); ++k) {
            Eigen::LLT<Mat> lltZ(Z[k]);
            if (lltZ.info() != Eigen::Success) {
                chol_ok = false;
                break;
            }
            Mat L = lltZ.matrixL();
            Mat S = L.transpose() * X[k] * L;
            Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (S + S.transpose()));
            Vec d = eig.eigenvalues().cwiseMax(1e-300).cwiseSqrt();
            Mat Shalf = eig.eigenvectors() * d.asDiagonal() * eig.eigenvectors().transpose();
            // W = L^-T Shalf L^-1
            Mat tmp = L.transpose().triangularView<Eigen::Upper>().solve(Shalf);
            W[k] = L.transpose()
                       .triangularView<Eigen::Upper>()
                       .solve(tmp.transpose())
                       .transpose();
            W[k] = 0.5 * (W[k] + W[k].transpose());
            Mat I = Mat::Identity(Z[k].rows(), Z[k].cols());
            Zinv[k] = lltZ.solve(I);
        }
        if (!chol_ok) {
            sol.status = LMIStatus::Unknown;
            sol.diagnostics = "interior point: dual slack lost definiteness";
            sol.iterations = iter;
            return sol;
        }

        double mu = 0.0;
        for (size_t k = 0; k < Z.size(); ++k) mu += (X[k].cwiseProduct(Z[k])).sum();
        mu /= std::max(1, ntot);

        Vec gX = adjoint_map(tp, X);
        Vec rp = -b - gX;

        Mat H = schur_matrix(tp, W, occ_by_var);
        Eigen::LLT<Mat> Hf(H);
        if (Hf.info() != Eigen::Success) {
            H.diagonal().array() += 1e-12 * std::max(1.0, H.trace() / m);
            Hf.compute(H);
            if (Hf.info() != Eigen::Success) {
                sol.status = LMIStatus::Unknown;
                sol.diagnostics = "interior point: Schur complement not positive definite";
                sol.iterations = iter;
                return sol;
            }
        }
        Vec gZinv = adjoint_map(tp, Zinv);

        // predictor (sigma = 0)
        Vec dy_aff = Hf.solve(b);
        std::vector<Mat> vals_aff = unpack_variables(problem, dy_aff.head(tp.mdim));
        std::vector<Mat> dZ_aff = apply_map(tp, vals_aff, dy_aff(tp.tindex), false);
        std::vector<Mat> dX_aff(Z.size());
        for (size_t k = 0; k < Z.size(); ++k)
            dX_aff[k] = -X[k] - W[k] * dZ_aff[k] * W[k];
        const double ap_aff = max_step(X, dX_aff, opts_.step_fraction);
        const double ad_aff = max_step(Z, dZ_aff, opts_.step_fraction);
        double mu_aff = 0.0;
        for (size_t k = 0; k < Z.size(); ++k)
            mu_aff += ((X[k] + ap_aff * dX_aff[k]).cwiseProduct(Z[k] + ad_aff * dZ_aff[k])).sum();
        mu_aff /= std::max(1, ntot);
        double sigma = std::pow(std::max(0.0, mu_aff / std::max(mu, 1e-300)), 3.0);
        sigma = std::min(0.9, std::max(1e-6, sigma));

        // corrector (same factorization)
        Vec dy = Hf.solve(b + sigma * mu * gZinv);
        std::vector<Mat> vals_d = unpack_variables(problem, dy.head(tp.mdim));
        std::vector<Mat> dZ = apply_map(tp, vals_d, dy(tp.tindex), false);
        std::vector<Mat> dX(Z.size());
        for (size_t k = 0; k < Z.size(); ++k) {
            dX[k] = sigma * mu * Zinv[k] - X[k] - W[k] * dZ[k] * W[k];
            dX[k] = 0.5 * (dX[k] + dX[k].transpose());
        }
        const double ap = std::min(1.0, max_step(X, dX, opts_.step_fraction));
        const double ad = std::min(1.0, max_step(Z, dZ, opts_.step_fraction));

        y += ad * dy;
        values = unpack_variables(problem, y.head(tp.mdim));
        Z = apply_map(tp, values, y(tp.tindex), true);  // keeps dual residual at zero
        for (size_t k = 0; k < Z.size(); ++k) X[k] += ap * dX[k];

        const double t = y(tp.tindex);
        best_t = std::min(best_t, t);
        if (opts_.verbose) {
            std::ostringstream os;
            os << "iter " << iter << " t=" << t << " mu=" << mu << " sigma=" << sigma
               << " ap=" << ap << " ad=" << ad << " rp=" << rp.lpNorm<Eigen::Infinity>() << "\n";
            std::cerr << os.str();
        }

        if (t < -delta_exit) return finish_feasible(iter + 1);

        const double rp_norm = rp.lpNorm<Eigen::Infinity>();
        if (mu < opts_.gap_tol * std::max(1.0, std::abs(t)) &&
            rp_norm < opts_.feas_tol * std::max(1.0, gX.lpNorm<Eigen::Infinity>())) {
            sol.status = LMIStatus::Infeasible;
            std::ostringstream os;
            os << "phase-I optimum t=" << t << " > 0 (mu=" << mu << ", rp=" << rp_norm << ")";
            sol.diagnostics = os.str();
            sol.iterations = iter + 1;
            return sol;
        }
        if (mu > 0.999 * mu_prev) {
            if (++stall > 12) {
                sol.status = t < 0.0 ? LMIStatus::Feasible : LMIStatus::Unknown;
                if (sol.status == LMIStatus::Feasible) return finish_feasible(iter + 1);
                sol.diagnostics = "interior point: stalled (t=" + std::to_string(t) + ")";
                sol.iterations = iter + 1;
                return sol;
            }
        } else {
            stall = 0;
        }
        mu_prev = mu;
    }

    sol.status = y(tp.tindex) < -delta_exit ? LMIStatus::Feasible : LMIStatus::Unknown;
    if (sol.status == LMIStatus::Feasible) return finish_feasible(opts_.max_iterations);
    sol.diagnostics = "interior point: iteration limit (t=" + std::to_string(y(tp.tindex)) + ")";
    sol.iterations = opts_.max_iterations;
    return sol;
}

}  // namespace

std::unique_ptr<LMISolverBackend> make_interior_point_backend(const InteriorPointOptions& opts) {
    return std::make_unique<InteriorPointBackend>(opts);
}

std::unique_ptr<LMISolverBackend> make_interior_point_backend() {
    return make_interior_point_backend(InteriorPointOptions{});
}

double sdp_structured_algebra_selftest(const LMIProblem& problem, unsigned seed) {
    Translated tp = translate(problem);
    std::vector<std::vector<int>> occ_by_var(tp.vars.size());
    for (int i = 0; i < static_cast<int>(tp.occs.size()); ++i)
        occ_by_var[static_cast<size_t>(tp.occs[static_cast<size_t>(i)].var)].push_back(i);
    tp.t_cap = 3.0;

    const int m = tp.mdim + 1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // Dense basis matrices F_i by applying unit vectors.
    std::vector<std::vector<Mat>> F(static_cast<size_t>(m));
    for (int i = 0; i < m; ++i) {
        Vec e = Vec::Zero(m);
        e(i) = 1.0;
        F[static_cast<size_t>(i)] =
            apply_map(tp, unpack_variables(problem, e.head(tp.mdim)), e(tp.tindex), false);
    }

    double err = 0.0;

    // apply: structural vs constant + sum of dense bases
    Vec yr(m);
    for (int i = 0; i < m; ++i) yr(i) = gauss(rng);
    auto Gs = apply_map(tp, unpack_variables(problem, yr.head(tp.mdim)), yr(tp.tindex), true);
    for (size_t k = 0; k < Gs.size(); ++k) {
        Mat ref = tp.F0[k];
        if (k + 1 == Gs.size()) ref(0, 0) += tp.t_cap;
        for (int i = 0; i < m; ++i) ref += yr(i) * F[static_cast<size_t>(i)][k];
        err = std::max(err, (Gs[k] - ref).cwiseAbs().maxCoeff());
    }

    // random symmetric matrices for adjoint / Schur checks
    std::vector<Mat> Msym(Gs.size()), Wr(Gs.size());
    for (size_t k = 0; k < Gs.size(); ++k) {
        const int n = static_cast<int>(Gs[k].rows());
        Mat R(n, n);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) R(r, c) = gauss(rng);
        Msym[k] = 0.5 * (R + R.transpose());
        Mat R2(n, n);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) R2(r, c) = gauss(rng);
        Wr[k] = R2 * R2.transpose() + Mat::Identity(n, n);
    }

    Vec g = adjoint_map(tp, Msym);
    for (int i = 0; i < m; ++i) {
        double ref = 0.0;
        for (size_t k = 0; k < Msym.size(); ++k)
            ref += (F[static_cast<size_t>(i)][k].cwiseProduct(Msym[k])).sum();
        err = std::max(err, std::abs(g(i) - ref));
    }

    Mat H = schur_matrix(tp, Wr, occ_by_var);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            double ref = 0.0;
            for (size_t k = 0; k < Wr.size(); ++k)
                ref += (F[static_cast<size_t>(i)][k] * Wr[k] * F[static_cast<size_t>(j)][k] *
                        Wr[k])
                           .trace();
            err = std::max(err, std::abs(H(i, j) - ref));
        }
    return err;
}

}  // namespace koopctl
