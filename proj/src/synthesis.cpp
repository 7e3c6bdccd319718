#include "koopctl/synthesis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "koopctl/errors.hpp"
#include "koopctl/hinf.hpp"
#include "koopctl/riccati.hpp"

namespace koopctl {

LMIProblem build_analysis_problem(const Mat& G, const Mat& F, const Mat& H, const Mat& C,
                                  const Mat& Ustar, double lambda, double gamma) {
    if (lambda <= 0.0 || gamma <= 0.0)
        throw std::invalid_argument("analysis_lmi: lambda and gamma must be positive");
    const int n = static_cast<int>(G.rows());
    if (G.cols() != n) throw std::invalid_argument("analysis_lmi: G must be square");
    const int nf = static_cast<int>(F.cols());
    const int nw = static_cast<int>(H.cols());
    const int nz = static_cast<int>(C.rows());
    if ((F.size() > 0 && F.rows() != n) || (H.size() > 0 && H.rows() != n) ||
        (C.size() > 0 && C.cols() != n) || (Ustar.size() > 0 && Ustar.cols() != n))
        throw std::invalid_argument("analysis_lmi: channel dimension mismatch");

    LMIProblem prob;
    const int P = prob.add_symmetric("P", n);
    auto& con = prob.add_constraint({n, nf, nw, nz});

    {
        auto& e = con.entry(0, 0);
        e.terms.push_back(LMITerm{P, false, 1.0, G.transpose(), G});
        e.terms.push_back(LMITerm{P, false, -1.0, Mat(), Mat()});
        if (Ustar.size() > 0)
            e.constant = lambda * lambda * Ustar.transpose() * Ustar;
    }
    if (nf > 0) {
        con.entry(0, 1).terms.push_back(LMITerm{P, false, 1.0, G.transpose(), F});
        auto& e = con.entry(1, 1);
        e.terms.push_back(LMITerm{P, false, 1.0, F.transpose(), F});
        e.constant = -lambda * lambda * Mat::Identity(nf, nf);
    }
    if (nw > 0) {
        con.entry(0, 2).terms.push_back(LMITerm{P, false, 1.0, G.transpose(), H});
        if (nf > 0) con.entry(1, 2).terms.push_back(LMITerm{P, false, 1.0, F.transpose(), H});
        auto& e = con.entry(2, 2);
        e.terms.push_back(LMITerm{P, false, 1.0, H.transpose(), H});
        e.constant = -gamma * gamma * Mat::Identity(nw, nw);
    }
    if (nz > 0) {
        con.entry(0, 3).constant = C.transpose();
        con.entry(3, 3).constant = -Mat::Identity(nz, nz);
    }
    // P > 0 as a second constraint: -P <= -eps I
    auto& pos = prob.add_constraint({n});
    pos.entry(0, 0).terms.push_back(LMITerm{P, false, -1.0, Mat(), Mat()});
    return prob;
}

AnalysisResult analysis_lmi(const Mat& G, const Mat& F, const Mat& H, const Mat& C,
                            const Mat& Ustar, double lambda, double gamma,
                            const InteriorPointOptions& ipo) {
    LMIProblem prob = build_analysis_problem(G, F, H, C, Ustar, lambda, gamma);
    auto backend = make_interior_point_backend(ipo);
    LMISolution sol = solve_lmi(prob, *backend);

    AnalysisResult res;
    res.status = sol.status;
    res.diagnostics = sol.diagnostics;
    if (sol.status == LMIStatus::Feasible) {
        res.P = sol.values[0];
        res.margin = sol.margins.empty() ? 0.0 : sol.margins[0];
    }
    return res;
}

LMIProblem build_synthesis_problem(const AugmentedPlant& aug, double lambda, double gamma) {
    if (lambda <= 0.0 || gamma <= 0.0)
        throw std::invalid_argument("synthesis_lmi: lambda and gamma must be positive");
    const int n2 = static_cast<int>(aug.Abar.rows());  // 2M
    const int M = aug.M, m = aug.m, p = aug.p, d = aug.d, q = aug.q;

    LMIProblem prob;
    const int X1 = prob.add_symmetric("X1", n2);
    const int Y1 = prob.add_symmetric("Y1", n2);
    const int AQh = prob.add_rect("AQh", n2, n2);
    const int BQh = prob.add_rect("BQh", n2, p);
    const int CQh = prob.add_rect("CQh", m, n2);

    const Mat I2M = Mat::Identity(n2, n2);
    auto& con = prob.add_constraint({n2, n2, n2, n2, M + p, d, q, M + m, M});

    // identity couplings carry a minus sign: the (1,1) super-block is the
    // negated coupling matrix -[[X1, I],[I, Y1]]
    con.entry(0, 0).terms.push_back(LMITerm{X1, false, -1.0, Mat(), Mat()});
    con.entry(0, 1).constant = -I2M;
    {
        auto& e = con.entry(0, 2);
        e.terms.push_back(LMITerm{X1, false, 1.0, aug.Abar, Mat()});
        e.terms.push_back(LMITerm{CQh, false, 1.0, aug.B2bar, Mat()});
    }
    con.entry(0, 3).constant = aug.Abar;
    con.entry(0, 4).constant = aug.Fbar;
    con.entry(0, 5).constant = aug.B1bar;

    con.entry(1, 1).terms.push_back(LMITerm{Y1, false, -1.0, Mat(), Mat()});
    con.entry(1, 2).terms.push_back(LMITerm{AQh, false, 1.0, Mat(), Mat()});
    {
        auto& e = con.entry(1, 3);
        e.terms.push_back(LMITerm{Y1, false, 1.0, Mat(), aug.Abar});
        e.terms.push_back(LMITerm{BQh, false, 1.0, Mat(), aug.C2bar});
    }
    {
        auto& e = con.entry(1, 4);
        e.terms.push_back(LMITerm{Y1, false, 1.0, Mat(), aug.Fbar});
        e.terms.push_back(LMITerm{BQh, false, 1.0, Mat(), aug.D21bar});
    }
    con.entry(1, 5).terms.push_back(LMITerm{Y1, false, 1.0, Mat(), aug.B1bar});

    con.entry(2, 2).terms.push_back(LMITerm{X1, false, -1.0, Mat(), Mat()});
    con.entry(2, 3).constant = -I2M;
    {
        auto& e = con.entry(2, 6);
        e.terms.push_back(LMITerm{X1, false, 1.0, Mat(), aug.C1bar.transpose()});
        e.terms.push_back(LMITerm{CQh, true, 1.0, Mat(), aug.D12bar.transpose()});
    }
    {
        auto& e = con.entry(2, 7);
        e.terms.push_back(LMITerm{X1, false, 1.0, Mat(), aug.Uprime.transpose()});
        e.terms.push_back(LMITerm{CQh, true, 1.0, Mat(), aug.U2.transpose()});
    }
    con.entry(2, 8).terms.push_back(LMITerm{X1, false, 1.0, Mat(), aug.Vprime.transpose()});

    con.entry(3, 3).terms.push_back(LMITerm{Y1, false, -1.0, Mat(), Mat()});
    con.entry(3, 6).constant = aug.C1bar.transpose();
    con.entry(3, 7).constant = aug.Uprime.transpose();
    con.entry(3, 8).constant = aug.Vprime.transpose();

    con.entry(4, 4).constant = -lambda * lambda * Mat::Identity(M + p, M + p);
    con.entry(5, 5).constant = -gamma * gamma * Mat::Identity(d, d);
    con.entry(6, 6).constant = -Mat::Identity(q, q);
    con.entry(7, 7).constant = -(1.0 / (lambda * lambda)) * Mat::Identity(M + m, M + m);
    con.entry(8, 8).constant = -(1.0 / (lambda * lambda)) * Mat::Identity(M, M);

    // coupling [[X1, I],[I, Y1]] > 0, fed in negated form
    auto& coup = prob.add_constraint({n2, n2});
    coup.entry(0, 0).terms.push_back(LMITerm{X1, false, -1.0, Mat(), Mat()});
    coup.entry(0, 1).constant = -I2M;
    coup.entry(1, 1).terms.push_back(LMITerm{Y1, false, -1.0, Mat(), Mat()});
    return prob;
}

SynthesisVars synthesis_lmi(const AugmentedPlant& aug, double lambda, double gamma,
                            const InteriorPointOptions& ipo) {
    LMIProblem prob = build_synthesis_problem(aug, lambda, gamma);
    InteriorPointOptions opts = ipo;
    // nudge the certificate toward moderate norms so the recovered controller
    // and its closed-loop re-verification stay well conditioned
    if (opts.trace_penalty == 0.0) opts.trace_penalty = 1e-6;
    auto backend = make_interior_point_backend(opts);
    LMISolution sol = solve_lmi(prob, *backend);

    SynthesisVars out;
    out.status = sol.status;
    out.diagnostics = sol.diagnostics;
    if (sol.status == LMIStatus::Feasible) {
        out.X1 = sol.values[0];
        out.Y1 = sol.values[1];
        out.AQh = sol.values[2];
        out.BQh = sol.values[3];
        out.CQh = sol.values[4];
    }
    return out;
}

void transform_qfilter(const QFilter& qf, const Mat& X1, const Mat& Y1,
                       const AugmentedPlant& aug, Mat& AQh, Mat& BQh, Mat& CQh) {
    const int n2 = static_cast<int>(X1.rows());
    const Mat Y2 = Mat::Identity(n2, n2) - Y1 * X1;
    // [[AQh, BQh],[CQh, 0]] = [[Y2, Y1 B2bar],[0, I]] [[AQ, BQ],[CQ, 0]]
    //                         [[I, 0],[C2bar X1, I]] + [[Y1 Abar X1, 0],[0, 0]]
    AQh = Y2 * qf.AQ + Y1 * aug.B2bar * qf.CQ;
    BQh = Y2 * qf.BQ;
    AQh = AQh + BQh * aug.C2bar * X1 + Y1 * aug.Abar * X1;
    CQh = qf.CQ;
}

QFilter recover_controller(const Mat& X1, const Mat& Y1, const Mat& AQh, const Mat& BQh,
                           const Mat& CQh, const AugmentedPlant& aug) {
    const int n2 = static_cast<int>(X1.rows());
    const Mat Y2 = Mat::Identity(n2, n2) - Y1 * X1;
    Eigen::JacobiSVD<Mat> svd(Y2);
    const double smin = svd.singularValues()(svd.singularValues().size() - 1);
    const double smax = svd.singularValues()(0);
    if (smin <= 1e-12 * std::max(1.0, smax))
        throw NumericError(
            "recover_controller: I - Y1 X1 is singular within tolerance; re-solve with a "
            "perturbed certificate (X1 <- X1 + delta I)");

    Eigen::PartialPivLU<Mat> Y2lu(Y2);
    QFilter qf;
    qf.CQ = CQh;  // X2 = I
    qf.BQ = Y2lu.solve(BQh);
    qf.AQ = Y2lu.solve(AQh - Y1 * aug.Abar * X1 - Y1 * aug.B2bar * CQh) -
            qf.BQ * aug.C2bar * X1;
    return qf;
}

ClosedLoop build_closed_loop(const AugmentedPlant& aug, const QFilter& qf) {
    const int n2 = static_cast<int>(aug.Abar.rows());
    const int r = static_cast<int>(qf.AQ.rows());
    ClosedLoop cl;
    cl.Acl = Mat::Zero(n2 + r, n2 + r);
    cl.Acl.topLeftCorner(n2, n2) = aug.Abar;
    cl.Acl.topRightCorner(n2, r) = aug.B2bar * qf.CQ;
    cl.Acl.bottomLeftCorner(r, n2) = qf.BQ * aug.C2bar;
    cl.Acl.bottomRightCorner(r, r) = qf.AQ;

    cl.Fcl.resize(n2 + r, aug.Fbar.cols());
    cl.Fcl.topRows(n2) = aug.Fbar;
    cl.Fcl.bottomRows(r) = qf.BQ * aug.D21bar;

    cl.Bcl = Mat::Zero(n2 + r, aug.B1bar.cols());
    cl.Bcl.topRows(n2) = aug.B1bar;

    cl.Ccl.resize(aug.C1bar.rows(), n2 + r);
    cl.Ccl.leftCols(n2) = aug.C1bar;
    cl.Ccl.rightCols(r) = aug.D12bar * qf.CQ;

    const int su = static_cast<int>(aug.Uprime.rows());
    const int sv = static_cast<int>(aug.Vprime.rows());
    cl.Ustar = Mat::Zero(su + sv, n2 + r);
    cl.Ustar.topLeftCorner(su, n2) = aug.Uprime;
    cl.Ustar.topRightCorner(su, r) = aug.U2 * qf.CQ;
    cl.Ustar.bottomLeftCorner(sv, n2) = aug.Vprime;
    return cl;
}

AnalysisResult verify_closed_loop(const AugmentedPlant& aug, const QFilter& qf, double lambda,
                                  double gamma, const InteriorPointOptions& ipo) {
    ClosedLoop cl = build_closed_loop(aug, qf);
    return analysis_lmi(cl.Acl, cl.Fcl, cl.Bcl, cl.Ccl, cl.Ustar, lambda, gamma, ipo);
}

std::vector<double> default_lambda_grid(int points, double lo, double hi) {
    std::vector<double> grid;
    if (points == 1) return {std::sqrt(lo * hi)};
    for (int i = 0; i < points; ++i)
        grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / (points - 1)));
    return grid;
}

SynthesisResult search_gamma_lambda(const AugmentedPlant& aug, const GammaSearchOptions& opts) {
    std::vector<double> lambdas = opts.lambda_grid;
    if (lambdas.empty()) throw std::invalid_argument("search_gamma_lambda: empty lambda grid");
    if (opts.gamma_min <= 0.0 || opts.gamma_max <= opts.gamma_min)
        throw std::invalid_argument("search_gamma_lambda: bad gamma range");

    SynthesisResult best;
    best.gamma = std::numeric_limits<double>::infinity();
    std::ostringstream log;

    // stable nominal loop gives a cheap starting guess for the bracket
    double gamma_seed = opts.gamma_min;
    try {
        const double floor_est =
            hinf_norm(aug.Abar, aug.B1bar, aug.C1bar, Mat::Zero(aug.C1bar.rows(), aug.B1bar.cols()));
        gamma_seed = std::min(opts.gamma_max, std::max(opts.gamma_min, 1.1 * floor_est));
        log << "nominal-loop Hinf estimate " << floor_est << "\n";
    } catch (const NumericError&) {
        gamma_seed = std::sqrt(opts.gamma_min * opts.gamma_max);
    }

    for (double lambda : lambdas) {
        auto probe = [&](double gamma) -> SynthesisVars {
            SynthesisVars v = synthesis_lmi(aug, lambda, gamma, opts.ipo);
            best.grid.push_back(GridPoint{lambda, gamma, v.status == LMIStatus::Feasible});
            log << "lambda=" << lambda << " gamma=" << gamma << " -> "
                << (v.status == LMIStatus::Feasible
                        ? "feasible"
                        : (v.status == LMIStatus::Infeasible ? "infeasible" : "unknown"))
                << "\n";
            return v;
        };

        // expand upward until feasible
        double hi = gamma_seed;
        SynthesisVars hi_vars = probe(hi);
        int expansions = 0;
        while (hi_vars.status != LMIStatus::Feasible && hi < opts.gamma_max && expansions < 40) {
            hi = std::min(opts.gamma_max, hi * 4.0);
            hi_vars = probe(hi);
            ++expansions;
        }
        if (hi_vars.status != LMIStatus::Feasible) {
            log << "lambda=" << lambda << ": no feasible gamma up to " << opts.gamma_max << "\n";
            continue;
        }
        double lo = opts.gamma_min;
        // bisect; keep the variables of the best feasible probe
        SynthesisVars best_vars = hi_vars;
        double best_gamma = hi;
        while ((hi - lo) / hi > opts.gamma_rel_tol) {
            const double mid = 0.5 * (hi + lo);
            SynthesisVars v = probe(mid);
            if (v.status == LMIStatus::Feasible) {
                hi = mid;
                best_vars = std::move(v);
                best_gamma = mid;
            } else {
                lo = mid;
            }
        }
        if (best_gamma < best.gamma) {
            best.feasible = true;
            best.gamma = best_gamma;
            best.lambda = lambda;
            best.X1 = best_vars.X1;
            best.Y1 = best_vars.Y1;
            best.AQh = best_vars.AQh;
            best.BQh = best_vars.BQh;
            best.CQh = best_vars.CQh;
        }
    }

    if (best.feasible) {
        best.qfilter = recover_controller(best.X1, best.Y1, best.AQh, best.BQh, best.CQh, aug);
    } else {
        best.gamma = 0.0;
    }
    best.diagnostics = log.str();
    return best;
}

json qfilter_to_json(const QFilter& qf) {
    json j;
    j["AQ"] = mat_to_json(qf.AQ);
    j["BQ"] = mat_to_json(qf.BQ);
    j["CQ"] = mat_to_json(qf.CQ);
    return j;
}

QFilter qfilter_from_json(const json& j) {
    QFilter qf;
    qf.AQ = json_to_mat(j.at("AQ"));
    qf.BQ = json_to_mat(j.at("BQ"));
    qf.CQ = json_to_mat(j.at("CQ"));
    return qf;
}

json synthesis_report_to_json(const SynthesisResult& r, const AnalysisResult& verification) {
    json j;
    j["feasible"] = r.feasible;
    j["gamma"] = r.gamma;
    j["lambda"] = r.lambda;
    json grid = json::array();
    for (const auto& g : r.grid)
        grid.push_back({{"lambda", g.lambda}, {"gamma", g.gamma}, {"feasible", g.feasible}});
    j["grid"] = std::move(grid);
    j["verification"] = {{"pass", verification.status == LMIStatus::Feasible},
                         {"margin", verification.margin}};
    if (r.feasible) j["qfilter"] = qfilter_to_json(r.qfilter);
    j["diagnostics"] = r.diagnostics;
    return j;
}

}  // namespace koopctl
