#include <random>

#include <doctest.h>

#include "koopctl/bounds.hpp"
#include "koopctl/hinf.hpp"
#include "koopctl/riccati.hpp"
#include "koopctl/synthesis.hpp"
#include "oracles.hpp"

using namespace koopctl;

namespace {

// Bisect the minimal feasible gamma of the bounded-real analysis LMI.
double bisect_bounded_real(const Mat& G, const Mat& H, const Mat& C, double rel_tol) {
    Mat F(G.rows(), 0), U(0, G.cols());
    double lo = 1e-6, hi = 1.0;
    while (analysis_lmi(G, F, H, C, U, 1.0, hi).status != LMIStatus::Feasible) hi *= 2.0;
    while ((hi - lo) / hi > rel_tol) {
        const double mid = 0.5 * (hi + lo);
        if (analysis_lmi(G, F, H, C, U, 1.0, mid).status == LMIStatus::Feasible)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

// Small augmented plant built from a stable lifted model with n=2 physical
// states, monomial degree-1 dictionary (M=3) and one input.
struct TinyPlant {
    KoopmanModel model;
    Mat C2;
    NominalGains gains;
    AugmentedPlant aug;
};

TinyPlant make_tiny_plant(unsigned seed, double sector_U) {
    std::mt19937_64 rng(seed);
    TinyPlant t;
    t.model.basis = BasisLibrary::monomial(2, 1);
    const int M = t.model.basis.lifted_dim();
    t.model.A = oracles::random_stable(M, 0.8, rng);
    t.model.B2 = oracles::random_matrix(M, 1, rng);
    t.model.C2 = Mat::Identity(M, M);
    t.model.dt = 0.01;
    t.C2 = Mat::Identity(M, M);
    t.gains = lqg_design(t.model, t.C2, LqgWeights{});
    PerformanceChannel ch = default_performance_channel(M, 2, 1);
    MismatchBounds b;
    SectorMatrices s = sector_matrices(sector_U, 0.0, M, 1);
    b.U = sector_U;
    b.U1 = s.U1;
    b.U2 = s.U2;
    b.V1 = s.V1;
    t.aug = build_augmented(t.model, t.C2, t.gains, ch, b);
    return t;
}

}  // namespace

TEST_CASE("analysis LMI: pure Lyapunov case is feasible for any gamma") {
    std::mt19937_64 rng(3);
    Mat G = oracles::random_stable(4, 0.9, rng);
    Mat F(4, 0), H(4, 0), C(0, 4), U(0, 4);
    CHECK(analysis_lmi(G, F, H, C, U, 1.0, 1e-6).status == LMIStatus::Feasible);
}

TEST_CASE("analysis LMI reduces to the bounded-real condition") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 2 + trial;
        Mat G = oracles::random_stable(n, 0.7, rng);
        Mat H = oracles::random_matrix(n, 1, rng);
        Mat C = oracles::random_matrix(1, n, rng);
        const double lmi_gamma = bisect_bounded_real(G, H, C, 1e-3);
        const double grid_gamma = oracles::hinf_grid(G, H, C);
        CHECK(std::abs(lmi_gamma - grid_gamma) / grid_gamma < 0.01);
    }
}

TEST_CASE("scalar sector feasibility threshold matches adversarial simulation") {
    // x+ = 0.5 x + f, |f| <= u |x|; the LMI threshold in u should sit near the
    // worst-case growth boundary u* = 0.5 (within 10%).
    const double g = 0.5;
    Mat G = Mat::Constant(1, 1, g);
    Mat F = Mat::Constant(1, 1, 1.0);
    Mat H(1, 0), C(0, 1);
    auto feasible_for = [&](double u) {
        Mat U = Mat::Constant(1, 1, u);
        for (double lam : default_lambda_grid(7, 1e-1, 1e1))
            if (analysis_lmi(G, F, H, C, U, lam, 1.0).status == LMIStatus::Feasible) return true;
        return false;
    };
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 20; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (feasible_for(mid))
            lo = mid;
        else
            hi = mid;
    }
    const double lmi_threshold = 0.5 * (lo + hi);
    const double sim_threshold = oracles::scalar_sector_threshold_by_simulation(g, 0.0, 1.0, 40);
    CHECK(std::abs(lmi_threshold - sim_threshold) / sim_threshold < 0.10);
}

TEST_CASE("synthesis: zero-mismatch plant is feasible at a generous gamma") {
    TinyPlant t = make_tiny_plant(5, 0.0);
    const double floor_est = hinf_norm(t.aug.Abar, t.aug.B1bar, t.aug.C1bar,
                                       Mat::Zero(t.aug.C1bar.rows(), t.aug.B1bar.cols()));
    // a large multiplier neutralizes the (empty) sector channel
    SynthesisVars v = synthesis_lmi(t.aug, 100.0, 4.0 * floor_est);
    CHECK(v.status == LMIStatus::Feasible);
}

TEST_CASE("synthesis: gamma far below the achievable floor is infeasible") {
    TinyPlant t = make_tiny_plant(5, 0.0);
    SynthesisVars v = synthesis_lmi(t.aug, 100.0, 1e-4);
    CHECK(v.status == LMIStatus::Infeasible);
}

TEST_CASE("controller recovery round-trips the change of variables") {
    std::mt19937_64 rng(23);
    TinyPlant t = make_tiny_plant(9, 0.0);
    const int n2 = static_cast<int>(t.aug.Abar.rows());
    for (int trial = 0; trial < 10; ++trial) {
        Mat S1 = oracles::random_matrix(n2, n2, rng);
        Mat S2 = oracles::random_matrix(n2, n2, rng);
        Mat X1 = 0.5 * Mat::Identity(n2, n2) + 0.05 * (S1 + S1.transpose());
        Mat Y1 = 0.5 * Mat::Identity(n2, n2) + 0.05 * (S2 + S2.transpose());
        QFilter qf;
        qf.AQ = oracles::random_matrix(n2, n2, rng);
        qf.BQ = oracles::random_matrix(n2, t.aug.p, rng);
        qf.CQ = oracles::random_matrix(t.aug.m, n2, rng);
        Mat AQh, BQh, CQh;
        transform_qfilter(qf, X1, Y1, t.aug, AQh, BQh, CQh);
        QFilter rec = recover_controller(X1, Y1, AQh, BQh, CQh, t.aug);
        CHECK((rec.AQ - qf.AQ).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((rec.BQ - qf.BQ).cwiseAbs().maxCoeff() < 1e-8);
        CHECK((rec.CQ - qf.CQ).cwiseAbs().maxCoeff() < 1e-8);
    }
}

TEST_CASE("recovery on an all-zero transformed controller") {
    TinyPlant t = make_tiny_plant(31, 0.0);
    const int n2 = static_cast<int>(t.aug.Abar.rows());
    Mat X1 = 0.5 * Mat::Identity(n2, n2);
    Mat Y1 = 0.5 * Mat::Identity(n2, n2);
    Mat Z = Mat::Zero(n2, n2);
    QFilter qf = recover_controller(X1, Y1, Z, Mat::Zero(n2, t.aug.p),
                                    Mat::Zero(t.aug.m, n2), t.aug);
    Mat Y2 = Mat::Identity(n2, n2) - Y1 * X1;
    Mat expected = -Y2.partialPivLu().solve(Y1 * t.aug.Abar * X1);
    CHECK((qf.AQ - expected).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(qf.BQ.cwiseAbs().maxCoeff() == 0.0);
    CHECK(qf.CQ.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("search, recovery and closed-loop verification are congruent") {
    TinyPlant t = make_tiny_plant(7, 0.05);
    GammaSearchOptions opts;
    opts.lambda_grid = {2.0, 10.0, 50.0};
    opts.gamma_rel_tol = 0.05;
    SynthesisResult r = search_gamma_lambda(t.aug, opts);
    REQUIRE(r.feasible);

    // recovered loop is Schur stable
    ClosedLoop cl = build_closed_loop(t.aug, r.qfilter);
    CHECK(spectral_radius(cl.Acl) < 1.0);

    // analysis at the synthesis point passes
    AnalysisResult ver = verify_closed_loop(t.aug, r.qfilter, r.lambda, r.gamma);
    CHECK(ver.status == LMIStatus::Feasible);

    // negative control: corrupting the Q filter breaks the certificate
    QFilter bad = r.qfilter;
    bad.AQ = Mat::Identity(bad.AQ.rows(), bad.AQ.cols()) * 1.05;
    AnalysisResult bad_ver = verify_closed_loop(t.aug, bad, r.lambda, r.gamma);
    CHECK(bad_ver.status != LMIStatus::Feasible);
}

TEST_CASE("search: returned gamma tracks the nominal-loop floor at zero mismatch") {
    TinyPlant t = make_tiny_plant(5, 0.0);
    const double floor_est = oracles::hinf_grid(t.aug.Abar, t.aug.B1bar, t.aug.C1bar);
    GammaSearchOptions opts;
    opts.lambda_grid = {100.0};
    opts.gamma_rel_tol = 0.01;
    SynthesisResult r = search_gamma_lambda(t.aug, opts);
    REQUIRE(r.feasible);
    // the Q loop cannot do worse than the nominal loop it contains
    CHECK(r.gamma <= 1.05 * floor_est);
}

TEST_CASE("search: doubling the mismatch never improves gamma") {
    TinyPlant t1 = make_tiny_plant(13, 0.02);
    TinyPlant t2 = make_tiny_plant(13, 0.04);
    GammaSearchOptions opts;
    opts.lambda_grid = {5.0, 20.0, 80.0};
    opts.gamma_rel_tol = 0.02;
    SynthesisResult r1 = search_gamma_lambda(t1.aug, opts);
    SynthesisResult r2 = search_gamma_lambda(t2.aug, opts);
    REQUIRE(r1.feasible);
    REQUIRE(r2.feasible);
    CHECK(r2.gamma >= r1.gamma * (1.0 - 2.0 * opts.gamma_rel_tol));
}

TEST_CASE("search rejects an empty lambda grid") {
    TinyPlant t = make_tiny_plant(5, 0.0);
    GammaSearchOptions opts;
    opts.lambda_grid.clear();
    CHECK_THROWS_AS(search_gamma_lambda(t.aug, opts), std::invalid_argument);
}
