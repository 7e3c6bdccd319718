#include <algorithm>
#include <numeric>
#include <random>

#include <doctest.h>

#include "koopctl/edmd.hpp"
#include "koopctl/errors.hpp"
#include "oracles.hpp"

using namespace koopctl;

TEST_CASE("pseudo inverse") {
    SUBCASE("identity") {
        CHECK((pseudo_inverse(Mat::Identity(4, 4)) - Mat::Identity(4, 4)).norm() < 1e-14);
    }
    SUBCASE("zero matrix maps to its transposed shape") {
        Mat P = pseudo_inverse(Mat::Zero(3, 5));
        CHECK(P.rows() == 5);
        CHECK(P.cols() == 3);
        CHECK(P.norm() == 0.0);
    }
    SUBCASE("Penrose conditions on a random full-rank 5x8 matrix") {
        std::mt19937_64 rng(2);
        Mat M = oracles::random_matrix(5, 8, rng);
        CHECK(oracles::penrose_residual(M, pseudo_inverse(M)) < 1e-10);
    }
    SUBCASE("rank-deficient truncation") {
        std::mt19937_64 rng(3);
        Mat U = oracles::random_matrix(6, 2, rng);
        Mat M = U * U.transpose();  // rank 2
        CHECK(oracles::penrose_residual(M, pseudo_inverse(M)) < 1e-9);
    }
}

TEST_CASE("edmd recovers an exact linear system through the coordinate dictionary") {
    std::mt19937_64 rng(11);
    Mat A = oracles::random_stable(2, 0.9, rng);
    Mat B = oracles::random_matrix(2, 1, rng);
    SnapshotData d = oracles::linear_snapshots(A, B, 400, rng);
    BasisLibrary basis = BasisLibrary::monomial(2, 1);  // [x1, x2, 1]
    EdmdFit fit = edmd_fit(d, basis);
    CHECK((fit.model.A.topLeftCorner(2, 2) - A).norm() < 1e-8);
    CHECK((fit.model.B2.topRows(2) - B).norm() < 1e-8);
    CHECK(fit.state_residual < 1e-8);
    CHECK_FALSE(fit.rank_deficient);
}

TEST_CASE("edmd on van der Pol data") {
    NonlinearPlant p = make_vdp_plant(1.0);
    SnapshotOptions opts;
    opts.n_pairs = 2000;
    opts.seed = 5;
    SnapshotData clean = generate_snapshots(p, opts);
    BasisLibrary basis = BasisLibrary::monomial(2, 5);
    EdmdFit fit = edmd_fit(clean, basis);

    SUBCASE("held-out one-step prediction is accurate") {
        SnapshotOptions hopts = opts;
        hopts.seed = 6;
        SnapshotData held = generate_snapshots(p, hopts);
        double se = 0.0;
        for (int k = 0; k < held.X1.cols(); ++k) {
            Vec z = fit.model.A * basis.lift(held.X1.col(k)) + fit.model.B2 * held.U.col(k);
            se += (z.head(2) - held.X2.col(k)).squaredNorm();
        }
        const double rms = std::sqrt(se / (2.0 * held.X1.cols()));
        CHECK(rms < 1e-3);
    }
    SUBCASE("noise biases the identified matrices") {
        SnapshotData noisy = add_measurement_noise(clean, 0.01, 17);
        EdmdFit nfit = edmd_fit(noisy, basis);
        CHECK((nfit.model.A - fit.model.A).norm() > 1e-6);
    }
    SUBCASE("first-order optimality of the least-squares fit") {
        Mat Z1 = basis.lift_columns(clean.X1);
        Mat Z2 = basis.lift_columns(clean.X2);
        const double res0 = (Z2 - fit.model.A * Z1 - fit.model.B2 * clean.U).norm();
        std::mt19937_64 rng(23);
        for (int trial = 0; trial < 10; ++trial) {
            Mat dA = 1e-6 * oracles::random_matrix(21, 21, rng);
            Mat dB = 1e-6 * oracles::random_matrix(21, 1, rng);
            const double res =
                (Z2 - (fit.model.A + dA) * Z1 - (fit.model.B2 + dB) * clean.U).norm();
            CHECK(res >= res0 - 1e-12);
        }
    }
    SUBCASE("fit is invariant under snapshot permutation") {
        std::vector<int> perm(static_cast<size_t>(clean.X1.cols()));
        std::iota(perm.begin(), perm.end(), 0);
        std::mt19937_64 rng(31);
        std::shuffle(perm.begin(), perm.end(), rng);
        SnapshotData shuffled = clean;
        for (int k = 0; k < clean.X1.cols(); ++k) {
            shuffled.X1.col(k) = clean.X1.col(perm[static_cast<size_t>(k)]);
            shuffled.X2.col(k) = clean.X2.col(perm[static_cast<size_t>(k)]);
            shuffled.U.col(k) = clean.U.col(perm[static_cast<size_t>(k)]);
            shuffled.Y.col(k) = clean.Y.col(perm[static_cast<size_t>(k)]);
        }
        EdmdFit sfit = edmd_fit(shuffled, basis);
        CHECK((sfit.model.A - fit.model.A).cwiseAbs().maxCoeff() < 1e-9);
        CHECK((sfit.model.B2 - fit.model.B2).cwiseAbs().maxCoeff() < 1e-9);
    }
    SUBCASE("too few snapshots are rejected") {
        SnapshotData tiny = clean;
        tiny.X1 = clean.X1.leftCols(10);
        tiny.X2 = clean.X2.leftCols(10);
        tiny.U = clean.U.leftCols(10);
        tiny.Y = clean.Y.leftCols(10);
        CHECK_THROWS_AS(edmd_fit(tiny, basis), std::invalid_argument);
    }
}

TEST_CASE("koopman prediction") {
    SUBCASE("identity dynamics give a constant lifted trajectory") {
        KoopmanModel m;
        m.basis = BasisLibrary::monomial(2, 2);
        const int M = m.basis.lifted_dim();
        m.A = Mat::Identity(M, M);
        m.B2 = Mat::Zero(M, 1);
        m.C2 = Mat::Identity(M, M);
        m.dt = 0.01;
        Vec x0(2);
        x0 << 0.3, -0.2;
        std::vector<Vec> u(5, Vec::Zero(1));
        Prediction pred = koopman_predict(m, x0, u);
        for (int k = 0; k <= 5; ++k)
            CHECK((pred.lifted.col(k) - m.basis.lift(x0)).norm() == 0.0);
    }
    SUBCASE("noise-free model shadows the true flow over one second") {
        NonlinearPlant p = make_vdp_plant(1.0);
        SnapshotOptions opts;
        opts.n_pairs = 2000;
        opts.seed = 5;
        EdmdFit fit = edmd_fit(generate_snapshots(p, opts), BasisLibrary::monomial(2, 5));
        Vec x0(2);
        x0 << 0.5, 0.5;
        std::vector<Vec> u(100, Vec::Zero(1));
        Prediction pred = koopman_predict(fit.model, x0, u);
        Vec x = x0;
        double se = 0.0;
        for (int k = 1; k <= 100; ++k) {
            x = rk4_step(p, x, Vec::Zero(1), 0.01);
            se += (pred.states.col(k) - x).squaredNorm();
        }
        CHECK(std::sqrt(se / 100.0) < 5e-2);
    }
    SUBCASE("stronger noise makes the identified flow decay faster") {
        NonlinearPlant p = make_vdp_plant(1.0);
        SnapshotOptions opts;
        opts.n_pairs = 2000;
        opts.seed = 5;
        SnapshotData clean = generate_snapshots(p, opts);
        BasisLibrary basis = BasisLibrary::monomial(2, 5);
        auto decay = [&](double sigma) {
            EdmdFit fit = edmd_fit(add_measurement_noise(clean, sigma, 41), basis);
            Vec x0(2);
            x0 << 0.5, 0.5;
            std::vector<Vec> u(500, Vec::Zero(1));
            Prediction pred = koopman_predict(fit.model, x0, u);
            const double n0 = pred.states.col(0).norm();
            const double nT = std::max(pred.states.col(500).norm(), 1e-12);
            return std::log(n0 / nT) / 5.0;
        };
        CHECK(decay(0.05) > decay(0.01));
    }
}

TEST_CASE("model serialization round-trips losslessly") {
    std::mt19937_64 rng(19);
    KoopmanModel m;
    m.basis = BasisLibrary::monomial(2, 3);
    const int M = m.basis.lifted_dim();
    m.A = oracles::random_matrix(M, M, rng);
    m.B2 = oracles::random_matrix(M, 1, rng);
    m.C2 = oracles::random_matrix(2, M, rng);
    m.dt = 0.01;
    json j = model_to_json(m);
    // through text, as the CLI would do
    KoopmanModel back = model_from_json(json::parse(j.dump()));
    CHECK((back.A - m.A).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.B2 - m.B2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.C2 - m.C2).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.basis.lifted_dim() == M);

    json corrupt = json::parse(j.dump());
    corrupt["A"]["rows"] = 7;
    CHECK_THROWS_AS(model_from_json(corrupt), IoError);
}
