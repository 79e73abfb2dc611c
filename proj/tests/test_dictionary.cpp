#include <doctest.h>

#include <cmath>

#include "koopcert/dictionary.hpp"
#include "koopcert/dynamics.hpp"
#include "koopcert/errors.hpp"
#include "koopcert/quadrature.hpp"
#include "koopcert/random.hpp"

using namespace koopcert;

namespace {

Vec v1(double a) { return Vec::Constant(1, a); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

}  // namespace

TEST_CASE("gauss-legendre integrates polynomials up to degree 2q-1") {
    for (int q : {1, 2, 5, 10, 40}) {
        const auto [x, w] = gauss_legendre(q);
        CHECK(w.sum() == doctest::Approx(2.0).epsilon(1e-14));
        for (int p = 0; p <= 2 * q - 1; ++p) {
            const double exact = p % 2 ? 0.0 : 2.0 / (p + 1);
            CHECK(w.dot(x.array().pow(p).matrix()) == doctest::Approx(exact).epsilon(1e-12));
        }
        for (int i = 1; i < q; ++i) CHECK(x[i] > x[i - 1]);
    }
    CHECK_THROWS_AS(gauss_legendre(0), UsageError);
}

TEST_CASE("tensor and triangulated rules integrate over the box") {
    const Box box(v2(-1, 0), v2(2, 1));
    auto integrate = [](const QuadratureRule& r, auto f) {
        double s = 0.0;
        for (Eigen::Index k = 0; k < r.size(); ++k) s += r.weights[k] * f(r.points.col(k));
        return s;
    };
    // int x^2 y^3 over [-1,2] x [0,1] = (9/3) * (1/4)
    auto f = [](const Vec& x) { return x[0] * x[0] * std::pow(x[1], 3); };
    CHECK(integrate(tensor_gauss_legendre(box, 4), f) == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(integrate(tensor_gauss_legendre(box, 3, {3, 2}), f) == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(integrate(triangulated_gauss(box, 3, 2, 4), f) == doctest::Approx(0.75).epsilon(1e-13));
    CHECK(triangulated_gauss(box, 3, 2, 4).weights.sum() == doctest::Approx(3.0).epsilon(1e-13));
}

TEST_CASE("monomial dictionaries") {
    CHECK(monomial_dictionary(2, 5).size() == 21);
    const auto d0 = monomial_dictionary(1, 0);
    REQUIRE(d0.size() == 1);
    CHECK(d0.labels()[0] == "1");
    CHECK(d0.eval(v1(3.0))[0] == 1.0);
    CHECK(d0.eval_grad(v1(3.0))(0, 0) == 0.0);

    const auto d = monomial_dictionary(2, 2);
    CHECK(d.labels() == std::vector<std::string>{"1", "x1", "x2", "x1^2", "x1*x2", "x2^2"});
    const Vec values = d.eval(v2(2, 3));
    CHECK(values == (Vec(6) << 1, 2, 3, 4, 6, 9).finished());
    const Mat g = d.eval_grad(v2(2, 3));
    CHECK(g.rows() == 6);
    CHECK(g.cols() == 2);
    CHECK(g.row(4) == v2(3, 2).transpose());
    CHECK(d.kind() == Dictionary::Kind::monomial);

    CHECK(monomial_dictionary(3, 3).size() == 20);
    CHECK_THROWS_AS(monomial_dictionary(10, 10, 1000), SizeError);
    CHECK_THROWS_AS(monomial_dictionary(0, 2), UsageError);
    CHECK_THROWS_AS(monomial_dictionary(2, -1), UsageError);
    CHECK_NOTHROW(check_gradients(monomial_dictionary(2, 5), symmetric_box(2, 2.0), 20, 1));
}

TEST_CASE("non-finite dictionary values name the observable") {
    const auto d = monomial_dictionary(1, 3);
    try {
        d.eval(v1(std::numeric_limits<double>::infinity()));
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("x1") != std::string::npos);
    }
}

TEST_CASE("finite-element meshes and hat functions") {
    SUBCASE("1D") {
        const FemMesh mesh(Box(v1(0), v1(1)), 0.5);
        CHECK(mesh.node_count() == 3);
        const auto d = fem_dictionary(mesh);
        CHECK(d.size() == 3);
        CHECK(d.kind() == Dictionary::Kind::fem);
        CHECK(mesh.node(1)[0] == 0.5);
        CHECK(d.eval(v1(0.25))[1] == doctest::Approx(0.5));
        for (int j = 0; j < 3; ++j) CHECK(d.eval(mesh.node(j)) == Vec::Unit(3, j));
        // slope on the boundary between elements comes from the lower element
        CHECK(d.eval_grad(v1(0.5))(1, 0) == doctest::Approx(2.0));
    }
    SUBCASE("2D") {
        const FemMesh mesh(symmetric_box(2, 1.0) , 1.0);
        CHECK(mesh.node_count() == 9);
        const FemMesh unit(Box(v2(0, 0), v2(1, 1)), 0.5);
        CHECK(unit.node_count() == 9);
        const auto d = fem_dictionary(unit);
        for (int j = 0; j < 9; ++j) CHECK((d.eval(unit.node(j)) - Vec::Unit(9, j)).norm() < 1e-14);
        CHECK_NOTHROW(check_gradients(d, unit.box(), 20, 5));
    }
    SUBCASE("partition of unity") {
        for (const FemMesh& mesh : {FemMesh(Box(v1(-1), v1(2)), 0.07), FemMesh(symmetric_box(2, 1.0), 0.3)}) {
            const auto d = fem_dictionary(mesh);
            Rng rng(11);
            for (int k = 0; k < 100; ++k) {
                const Vec x = uniform_in(rng, mesh.box());
                CHECK(std::abs(d.eval(x).sum() - 1.0) < 1e-12);
                CHECK(d.eval_grad(x).colwise().sum().norm() < 1e-9);
            }
        }
    }
    SUBCASE("mesh errors") {
        CHECK_THROWS_AS(FemMesh(Box(v1(0), v1(1)), 2.0), MeshError);
        CHECK_THROWS_AS(FemMesh(Box(v1(0), v1(1)), 0.0), MeshError);
        CHECK_THROWS_AS(FemMesh(Box(Vec::Zero(3), Vec::Ones(3)), 0.5), MeshError);
    }
}

TEST_CASE("nodal interpolation error is second order") {
    auto h = [](double x) { return std::sin(3 * x) + x * x; };
    auto err = [&](double dx) {
        const FemMesh mesh(Box(v1(-1), v1(1)), dx);
        const auto d = fem_dictionary(mesh);
        Vec nodal(d.size());
        for (int j = 0; j < d.size(); ++j) nodal[j] = h(mesh.node(j)[0]);
        double e = 0.0;
        for (int k = 0; k <= 4000; ++k) {
            const double x = -1.0 + 2.0 * k / 4000.0;
            e = std::max(e, std::abs(d.eval(v1(x)).dot(nodal) - h(x)));
        }
        return e;
    };
    for (double dx : {0.2, 0.1, 0.05}) CHECK(err(dx) / err(dx / 2) >= 3.5);
}

TEST_CASE("composite dictionaries") {
    const ScalarObservable h{"h", [](const Vec& x) { return x[0] - 0.5; },
                             [](const Vec&) { return v2(1, 0); }};
    const auto base = monomial_dictionary(2, 5);
    const auto c = composite_dictionary({h}, base);
    CHECK(c.size() == 22);
    CHECK(c.labels()[0] == "h");
    CHECK(c.index_of("h") == 0);
    CHECK(c.kind() == Dictionary::Kind::composite);
    CHECK(c.eval(v2(2, 1))[0] == 1.5);
    CHECK(composite_dictionary({}, base).labels() == base.labels());

    const FemMesh mesh(symmetric_box(2, 1.0), 0.25);
    const auto fem = composite_dictionary({h}, fem_dictionary(mesh));
    CHECK(fem.size() == mesh.node_count() + 1);

    const ScalarObservable wrong{"wrong", [](const Vec& x) { return x[0] * x[0]; },
                                 [](const Vec&) { return v2(1, 0); }};
    CHECK_THROWS_AS(check_gradients(composite_dictionary({wrong}, base), symmetric_box(2, 1.0)), NumericalError);
}

TEST_CASE("projection") {
    const Box box = symmetric_box(2, 2.0);
    const auto d = monomial_dictionary(2, 5);
    SUBCASE("elements of V are reproduced") {
        const auto p = project(d, [](const Vec& x) { return x[0] * x[0]; }, box);
        const int j = *d.index_of("x1^2");
        CHECK((p.coeffs - Vec::Unit(d.size(), j)).norm() < 1e-10);
        CHECK(p.residual <= 1e-10);
        const auto one = project(d, [](const Vec&) { return 1.0; }, box);
        CHECK((one.coeffs - Vec::Unit(d.size(), 0)).norm() < 1e-10);
    }
    SUBCASE("idempotence") {
        auto h = [](const Vec& x) { return std::exp(0.3 * x[0]) * std::cos(x[1]); };
        const auto p = project(d, h, box);
        const auto pp = project(d, [&](const Vec& x) { return d.eval(x).dot(p.coeffs); }, box);
        CHECK((p.coeffs - pp.coeffs).norm() < 1e-10);
        CHECK(p.residual > 0.0);
    }
    SUBCASE("sin on [-1, 1] matches a dense least-squares fit") {
        const Box line(v1(-1), v1(1));
        const auto d5 = monomial_dictionary(1, 5);
        const auto p = project(d5, [](const Vec& x) { return std::sin(x[0]); }, line);
        const int n = 100000;
        Mat V(n, 6);
        Vec y(n);
        for (int k = 0; k < n; ++k) {
            const double x = -1.0 + (k + 0.5) * 2.0 / n;
            for (int j = 0; j < 6; ++j) V(k, j) = std::pow(x, j);
            y[k] = std::sin(x);
        }
        const Vec ls = V.colPivHouseholderQr().solve(y);
        CHECK((p.coeffs - ls).norm() < 1e-6);
        const auto p3 = project(monomial_dictionary(1, 3), [](const Vec& x) { return std::sin(x[0]); }, line);
        CHECK(p.residual < p3.residual);
    }
    SUBCASE("quadrature order below one") {
        CHECK_THROWS_AS(project(d, [](const Vec&) { return 1.0; }, box, 0), UsageError);
    }
}

TEST_CASE("monomials are closed under the linear duffing field") {
    const Box box = symmetric_box(2, 2.0);
    const auto d = monomial_dictionary(2, 5);
    const auto sys = duffing();
    for (int j = 0; j < d.size(); ++j) {
        auto lpsi = [&](const Vec& x) { return d.eval_grad(x).row(j).dot(sys.drift(x)); };
        CHECK(project(d, lpsi, box).residual <= 1e-8);
    }
}
