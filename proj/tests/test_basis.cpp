#include <random>

#include <doctest.h>

#include "koopctl/basis.hpp"
#include "oracles.hpp"

using namespace koopctl;

TEST_CASE("monomial dictionary of degree 5 over two states") {
    BasisLibrary b = BasisLibrary::monomial(2, 5);
    CHECK(b.lifted_dim() == 21);

    SUBCASE("ordering: coordinates first, constant last") {
        Vec x(2);
        x << 0.0, 0.0;
        Vec z = b.lift(x);
        CHECK(z.head(2).norm() == 0.0);
        CHECK(z(20) == 1.0);                      // constant term
        CHECK(z.segment(2, 18).norm() == 0.0);    // all higher monomials vanish
    }
    SUBCASE("all-ones point") {
        Vec x(2);
        x << 1.0, 1.0;
        CHECK((b.lift(x) - Vec::Ones(21)).norm() == 0.0);
    }
    SUBCASE("identity block reads the state back exactly") {
        std::mt19937_64 rng(1);
        std::uniform_real_distribution<double> uni(-2.0, 2.0);
        for (int i = 0; i < 100; ++i) {
            Vec x(2);
            x << uni(rng), uni(rng);
            Vec z = b.lift(x);
            CHECK((z.head(2) - x).norm() == 0.0);
        }
    }
    SUBCASE("dimension mismatch raises") {
        CHECK_THROWS_AS(b.lift(Vec::Zero(3)), std::invalid_argument);
    }
}

TEST_CASE("monomial jacobian") {
    BasisLibrary b = BasisLibrary::monomial(2, 5);
    SUBCASE("identity block rows") {
        Vec x(2);
        x << 0.3, -0.7;
        Mat J = b.jacobian(x);
        CHECK((J.topRows(2) - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("x1^2 x2 row at (2,3)") {
        Vec x(2);
        x << 2.0, 3.0;
        Mat J = b.jacobian(x);
        int row = -1;
        const auto& exps = b.exponents();
        for (size_t k = 0; k < exps.size(); ++k)
            if (exps[k][0] == 2 && exps[k][1] == 1) row = static_cast<int>(k);
        REQUIRE(row >= 0);
        CHECK(J(row, 0) == 12.0);
        CHECK(J(row, 1) == 4.0);
    }
}

TEST_CASE("jacobians match central finite differences") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uni(-1.5, 1.5);
    BasisLibrary mono = BasisLibrary::monomial(2, 5);
    Mat centers(2, 4);
    centers << -1.0, 1.0, 0.0, 0.5, 0.0, -1.0, 1.0, 0.5;
    BasisLibrary rbf = BasisLibrary::radial(2, centers, 0.8);
    for (const BasisLibrary* b : {&mono, &rbf}) {
        for (int i = 0; i < 100; ++i) {
            Vec x(2);
            x << uni(rng), uni(rng);
            Mat J = b->jacobian(x);
            Mat Jfd = oracles::finite_difference_jacobian(*b, x);
            const double scale = std::max(1.0, Jfd.cwiseAbs().maxCoeff());
            CHECK((J - Jfd).cwiseAbs().maxCoeff() / scale < 1e-6);
        }
    }
}

TEST_CASE("radial dictionary keeps the coordinate block") {
    Mat centers(2, 3);
    centers << 0.0, 1.0, -1.0, 0.0, 1.0, 1.0;
    BasisLibrary b = BasisLibrary::radial(2, centers, 0.5);
    CHECK(b.lifted_dim() == 5);
    Vec x(2);
    x << 0.2, -0.4;
    Vec z = b.lift(x);
    CHECK((z.head(2) - x).norm() == 0.0);
    CHECK(z(2) > 0.0);
    CHECK(z(2) <= 1.0);
    CHECK_THROWS_AS(BasisLibrary::radial(2, centers, 0.0), std::invalid_argument);
}
