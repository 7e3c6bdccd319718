#include <cmath>
#include <filesystem>
#include <fstream>

#include <doctest.h>

#include "koopctl/errors.hpp"
#include "koopctl/plant.hpp"

using namespace koopctl;

TEST_CASE("van der Pol field values") {
    Vec x(2);
    x << 0.0, 0.0;
    CHECK(vdp_vector_field(x, 0.0, 1.0).norm() == 0.0);  // equilibrium
    x << 1.0, 0.0;
    Vec dx = vdp_vector_field(x, 0.0, 1.0);
    CHECK(dx(0) == 0.0);
    CHECK(dx(1) == -1.0);
    x << 0.0, 1.0;
    dx = vdp_vector_field(x, 2.0, 1.0);
    CHECK(dx(0) == 1.0);
    CHECK(dx(1) == 3.0);
}

TEST_CASE("rk4 step") {
    SUBCASE("zero dynamics keeps the state") {
        NonlinearPlant p;
        p.state_dim = 3;
        p.input_dim = 1;
        p.vector_field = [](const Vec& x, const Vec&) { return Vec(Vec::Zero(x.size())); };
        Vec x(3);
        x << 1.0, -2.0, 0.5;
        CHECK((rk4_step(p, x, Vec::Zero(1), 0.1) - x).norm() == 0.0);
    }
    SUBCASE("matches the exponential for xdot = -x") {
        NonlinearPlant p;
        p.state_dim = 1;
        p.input_dim = 1;
        p.vector_field = [](const Vec& x, const Vec&) { return Vec(-x); };
        Vec x = Vec::Ones(1);
        Vec next = rk4_step(p, x, Vec::Zero(1), 0.01);
        CHECK(std::abs(next(0) - std::exp(-0.01)) < 1e-10);
    }
    SUBCASE("van der Pol origin is a fixed point") {
        NonlinearPlant p = make_vdp_plant(1.0);
        CHECK(rk4_step(p, Vec::Zero(2), Vec::Zero(1), 0.01).norm() == 0.0);
    }
    SUBCASE("fourth-order convergence on the van der Pol field") {
        NonlinearPlant p = make_vdp_plant(1.0);
        Vec x0(2);
        x0 << 0.5, -0.3;
        Vec u = Vec::Constant(1, 0.7);
        // dense-output oracle: many tiny steps
        auto truth = [&](double T) {
            Vec x = x0;
            const int nsub = 4000;
            for (int i = 0; i < nsub; ++i) x = rk4_step(p, x, u, T / nsub);
            return x;
        };
        const double dt = 0.05;
        Vec ref = truth(dt);
        double err_h = (rk4_step(p, x0, u, dt) - ref).norm();
        Vec half = rk4_step(p, rk4_step(p, x0, u, dt / 2), u, dt / 2);
        double err_h2 = (half - ref).norm();
        // one-step error should drop by about 2^4 when halving dt (2^5 local,
        // two steps taken); accept anything at or beyond 16x within 20%
        CHECK(err_h / err_h2 > 16.0 * 0.8);
    }
    SUBCASE("non-finite evaluation raises") {
        NonlinearPlant p;
        p.state_dim = 1;
        p.input_dim = 1;
        p.vector_field = [](const Vec& x, const Vec&) {
            return Vec(Vec::Constant(1, x(0) > 0.5 ? 1e308 * 1e10 : 0.0));
        };
        CHECK_THROWS_AS(rk4_step(p, Vec::Ones(1), Vec::Zero(1), 0.01), NumericError);
        NonlinearPlant vdp = make_vdp_plant(1.0);
        CHECK_THROWS_AS(rk4_step(vdp, Vec::Ones(2), Vec::Zero(1), -0.1), std::invalid_argument);
    }
}

TEST_CASE("snapshot generation") {
    NonlinearPlant p = make_vdp_plant(1.0);
    SnapshotOptions opts;
    opts.n_pairs = 2000;
    opts.seed = 42;

    SnapshotData d = generate_snapshots(p, opts);
    CHECK(d.X1.cols() == 2000);

    SUBCASE("X2 columns are exact one-step images") {
        for (int k : {0, 17, 555, 1999}) {
            Vec img = rk4_step(p, d.X1.col(k), d.U.col(k), opts.dt);
            CHECK((img - d.X2.col(k)).norm() == 0.0);
        }
    }
    SUBCASE("deterministic for a fixed seed") {
        SnapshotData d2 = generate_snapshots(p, opts);
        CHECK((d.X1 - d2.X1).cwiseAbs().maxCoeff() == 0.0);
        CHECK((d.U - d2.U).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("ranges are respected") {
        CHECK(d.U.maxCoeff() <= 10.0);
        CHECK(d.U.minCoeff() >= -10.0);
    }
    SUBCASE("argument validation") {
        SnapshotOptions bad = opts;
        bad.n_pairs = 0;
        CHECK_THROWS_AS(generate_snapshots(p, bad), std::invalid_argument);
        bad = opts;
        bad.x0_range = {1.0, -1.0};
        CHECK_THROWS_AS(generate_snapshots(p, bad), std::invalid_argument);
    }
}

TEST_CASE("measurement noise") {
    NonlinearPlant p = make_vdp_plant(1.0);
    SnapshotOptions opts;
    opts.n_pairs = 2000;
    opts.seed = 3;
    SnapshotData d = generate_snapshots(p, opts);

    SUBCASE("sigma zero leaves the data untouched") {
        SnapshotData n0 = add_measurement_noise(d, 0.0, 99);
        CHECK((n0.X1 - d.X1).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("sample standard deviation is close to sigma") {
        SnapshotData n = add_measurement_noise(d, 0.01, 99);
        Mat delta = n.X1 - d.X1;
        const double mean = delta.mean();
        const double var = (delta.array() - mean).square().sum() / (delta.size() - 1);
        CHECK(std::abs(std::sqrt(var) - 0.01) / 0.01 < 0.05);
    }
    SUBCASE("noise draws do not depend on the data values") {
        SnapshotData other = generate_snapshots(p, SnapshotOptions{2000, 0.01, {-2.0, 2.0},
                                                                   {-5.0, 5.0}, 200, 77});
        Mat d1 = add_measurement_noise(d, 0.05, 123).X1 - d.X1;
        Mat d2 = add_measurement_noise(other, 0.05, 123).X1 - other.X1;
        // identical draws up to the rounding of (x + n) - x
        CHECK((d1 - d2).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("negative sigma is rejected") {
        CHECK_THROWS_AS(add_measurement_noise(d, -0.1, 0), std::invalid_argument);
    }
}

TEST_CASE("trajectory CSV export") {
    const std::string path = "test_traj.csv";
    Vec t(2);
    t << 0.0, 0.01;
    Mat X(2, 2), U(1, 2), Y(2, 2);
    X << 0.1234567890123456, 1.0, -2.0, 0.5;
    U << 3.0, -4.0;
    Y = X;
    write_trajectory_csv(path, t, X, U, Y);
    std::ifstream in(path);
    std::string header, row;
    std::getline(in, header);
    CHECK(header == "t,x1,x2,u1,y1,y2");
    std::getline(in, row);
    // round-trip: the printed first state entry parses back exactly
    const size_t c1 = row.find(',');
    const size_t c2 = row.find(',', c1 + 1);
    CHECK(std::stod(row.substr(c1 + 1, c2 - c1 - 1)) == 0.1234567890123456);
    in.close();
    std::filesystem::remove(path);
}
