#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "support/oracles.hpp"
#include "u1e/grid.hpp"

using namespace u1e;

TEST_CASE("grid spec validation") {
    GridSpec g{16.0, 257};
    g.validate();
    CHECK(g.h() == doctest::Approx(0.125));
    CHECK(g.x(0) == -16.0);
    CHECK(g.x(128) == 0.0);

    CHECK_THROWS_AS((GridSpec{16.0, 128}).validate(), ValidationError);
    CHECK_THROWS_AS((GridSpec{16.0, 31}).validate(), ValidationError);
    CHECK_THROWS_AS((GridSpec{-1.0, 129}).validate(), ValidationError);
}

TEST_CASE("gradient exact on low-degree polynomials") {
    GridSpec g{4.0, 65};
    ScalarField lin = ScalarField::sample(g, [](double x, double) { return x; });
    VectorField gl = gradient(lin);
    CHECK(norm_sup(gl.x - ScalarField(g, 1.0)) < 1e-13);
    CHECK(norm_sup(gl.y) < 1e-13);

    ScalarField quad = ScalarField::sample(g, [](double x, double y) { return x * x + y * y; });
    VectorField gq = gradient(quad);
    ScalarField ex = ScalarField::sample(g, [](double x, double) { return 2.0 * x; });
    ScalarField ey = ScalarField::sample(g, [](double, double y) { return 2.0 * y; });
    CHECK(norm_sup(gq.x - ex) < 1e-12);
    CHECK(norm_sup(gq.y - ey) < 1e-12);
}

TEST_CASE("gradient converges at 4th order on sin*cos") {
    auto err_at = [](int n) {
        GridSpec g{4.0, n};
        ScalarField f = ScalarField::sample(g, [](double x, double y) { return std::sin(x) * std::cos(y); });
        VectorField gf = gradient(f);
        ScalarField ex = ScalarField::sample(g, [](double x, double y) { return std::cos(x) * std::cos(y); });
        ScalarField ey = ScalarField::sample(g, [](double x, double y) { return -std::sin(x) * std::sin(y); });
        return std::max(norm_sup(gf.x - ex), norm_sup(gf.y - ey));
    };
    const double e1 = err_at(65), e2 = err_at(129);
    const double order = std::log2(e1 / e2);
    CHECK(order > 3.5);
    CHECK(order < 4.6);
}

TEST_CASE("laplacian exact on quadratics, 2nd order on gaussian") {
    GridSpec g{4.0, 65};
    ScalarField r2 = ScalarField::sample(g, [](double x, double y) { return x * x + y * y; });
    CHECK(norm_sup(laplacian(r2) - ScalarField(g, 4.0)) < 1e-11);

    ScalarField xy = ScalarField::sample(g, [](double x, double y) { return x * y; });
    CHECK(norm_sup(laplacian(xy)) < 1e-11);

    auto err_at = [](int n) {
        GridSpec g2{4.0, n};
        ScalarField f = ScalarField::sample(g2, [](double x, double y) { return std::exp(-(x * x + y * y)); });
        ScalarField ex = ScalarField::sample(g2, [](double x, double y) {
            const double r2v = x * x + y * y;
            return 4.0 * (r2v - 1.0) * std::exp(-r2v);
        });
        return norm_sup(laplacian(f) - ex);
    };
    const double order = std::log2(err_at(65) / err_at(129));
    CHECK(order > 1.7);
    CHECK(order < 2.3);
}

TEST_CASE("integrate: gaussian and bump masses") {
    GridSpec g{6.0, 257};
    CHECK(integrate(ScalarField(g)) == 0.0);

    ScalarField gauss = ScalarField::sample(g, [](double x, double y) { return std::exp(-(x * x + y * y)); });
    CHECK(std::fabs(integrate(gauss) - M_PI) < 1e-6);

    // compact bump with mass from a fine radial quadrature
    const double R = 1.0;
    const double mass = 2.0 * M_PI * oracle::simpson([&](double r) { return r * oracle::bump(r, R); }, 0.0, R, 4000);
    ScalarField b = oracle::bump_field(g, 1.0, R);
    const double coarse = std::fabs(integrate(b) - mass);
    GridSpec g2{6.0, 513};
    ScalarField b2 = oracle::bump_field(g2, 1.0, R);
    const double fine = std::fabs(integrate(b2) - mass);
    CHECK(coarse < 1e-6);
    CHECK(fine <= coarse);
}

TEST_CASE("discrete divergence theorem for compact fields") {
    GridSpec g{6.0, 129};
    ScalarField b = oracle::bump_field(g, 1.0, 2.0);
    CHECK(std::fabs(integrate(gradient(b).x)) < 1e-12);
    CHECK(std::fabs(integrate(gradient(b).y)) < 1e-12);
}

TEST_CASE("product rule residual decays at stencil order") {
    auto res_at = [](int n) {
        GridSpec g{4.0, n};
        ScalarField f = ScalarField::sample(g, [](double x, double y) { return std::sin(x + 0.3 * y); });
        ScalarField q = ScalarField::sample(g, [](double x, double y) { return std::cos(0.5 * x - y); });
        VectorField lhs = gradient(f * q);
        VectorField gf = gradient(f), gq = gradient(q);
        ScalarField rx = lhs.x - f * gq.x - q * gf.x;
        ScalarField ry = lhs.y - f * gq.y - q * gf.y;
        return std::max(norm_sup(rx), norm_sup(ry));
    };
    const double e1 = res_at(65), e2 = res_at(129);
    CHECK(e2 < e1);
    CHECK(std::log2(e1 / e2) > 3.0); // 4th-order stencils dominate
}

TEST_CASE("weighted norm: trivial, oracle values, homogeneity") {
    GridSpec g{6.0, 257};
    WeightSpec w0{0, 2.0, 0.0};
    CHECK(weighted_norm(ScalarField(g), w0) == 0.0);

    CHECK_THROWS_AS(weighted_norm(ScalarField(g), WeightSpec{0, 1.0, 0.0}), ValidationError);
    CHECK_THROWS_AS(weighted_norm(ScalarField(g), WeightSpec{4, 2.0, 0.0}), ValidationError);

    // f = <x>^-4, m=0, p=2, delta=0: ||f||_L2^2 = 2pi int r (1+r^2)^-4 dr = pi/3
    ScalarField f = japanese_bracket(g, -4.0);
    const double tail = M_PI / (3.0 * std::pow(1.0 + g.L * g.L, 3.0)); // beyond the inscribed disk
    const double got = weighted_norm(f, w0);
    CHECK(std::fabs(got - std::sqrt(M_PI / 3.0)) < 5.0 * tail + 1e-6);

    // f = exp(-|x|^2), m=1, p=2, delta=1 against a radial quadrature oracle
    ScalarField gauss = ScalarField::sample(g, [](double x, double y) { return std::exp(-(x * x + y * y)); });
    const double t0 = std::sqrt(2.0 * M_PI *
        oracle::simpson([](double r) { return r * (1.0 + r * r) * std::exp(-2.0 * r * r); }, 0.0, 6.0, 8000));
    // each gradient component: |d_x f|^2 weight <x>^4 integrates r^3 cos^2 -> pi * int
    const double t1 = std::sqrt(M_PI *
        oracle::simpson([](double r) { return 4.0 * r * r * r * std::pow(1.0 + r * r, 2.0) * std::exp(-2.0 * r * r); },
                        0.0, 6.0, 8000));
    const double expect = t0 + 2.0 * t1;
    CHECK(std::fabs(weighted_norm(gauss, WeightSpec{1, 2.0, 1.0}) - expect) < 1e-4);

    // absolute homogeneity
    const double a = weighted_norm(gauss, WeightSpec{2, 2.0, 0.5});
    const double b = weighted_norm(-3.0 * gauss, WeightSpec{2, 2.0, 0.5});
    CHECK(b == doctest::Approx(3.0 * a).epsilon(1e-14));
}

TEST_CASE("weighted norm refinement differences shrink") {
    auto norm_at = [](int n) {
        GridSpec g{8.0, n};
        ScalarField f = ScalarField::sample(g, [](double x, double y) {
            return std::exp(-0.5 * (x * x + y * y)) * (1.0 + 0.3 * x);
        });
        return weighted_norm(f, WeightSpec{2, 2.0, -0.5});
    };
    const double n129 = norm_at(129), n257 = norm_at(257), n513 = norm_at(513);
    CHECK(std::fabs(n257 - n513) < std::fabs(n129 - n257));
}
