#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gridcascade/netmodel.hpp"
#include "gridcascade/qp.hpp"

using namespace gridcascade;
using doctest::Approx;

namespace {

SparseRow unit(std::size_t i) {
    SparseRow r;
    r.add(i, 1.0);
    return r;
}

QpProblem diagonal(std::span<const double> h, std::span<const double> q) {
    QpProblem p;
    p.n = h.size();
    p.h = DenseMatrix(p.n, p.n);
    for (std::size_t i = 0; i < p.n; ++i) p.h(i, i) = h[i];
    p.q.assign(q.begin(), q.end());
    return p;
}

}  // namespace

TEST_CASE("unconstrained minimum") {
    const std::vector<double> h = {2.0, 4.0};
    const std::vector<double> q = {-2.0, 8.0};
    const QpResult r = solve_qp(diagonal(h, q));
    REQUIRE(r.converged);
    CHECK(r.x[0] == Approx(1.0).epsilon(1e-9));
    CHECK(r.x[1] == Approx(-2.0).epsilon(1e-9));
    CHECK(r.objective == Approx(-9.0).epsilon(1e-9));
}

TEST_CASE("box constrained diagonal problems clamp the free minimum") {
    SeededUniform rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(8);
        std::vector<double> h(n);
        std::vector<double> q(n);
        for (std::size_t i = 0; i < n; ++i) {
            h[i] = rng.next(0.1, 5.0);
            q[i] = rng.next(-3.0, 3.0);
        }
        QpProblem p = diagonal(h, q);
        std::vector<double> lo(n);
        std::vector<double> hi(n);
        for (std::size_t i = 0; i < n; ++i) {
            lo[i] = rng.next(-1.0, 0.0);
            hi[i] = rng.next(0.0, 1.0);
            p.add_row(unit(i), lo[i], hi[i]);
        }
        const QpResult r = solve_qp(p);
        REQUIRE(r.converged);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(r.x[i] - std::clamp(-q[i] / h[i], lo[i], hi[i])) <= 1e-7);
            // Multiplier is positive on the upper bound.
            const double expected = -(h[i] * std::clamp(-q[i] / h[i], lo[i], hi[i]) + q[i]);
            CHECK(std::abs(r.multipliers[i] - expected) <= 1e-6);
        }
        CHECK(kkt_residual(p, r.x, r.multipliers) <= 1e-7);
    }
}

TEST_CASE("equality row") {
    // min x^2/2 + y^2/2 with x + y = 2
    const std::vector<double> h = {1.0, 1.0};
    const std::vector<double> q = {0.0, 0.0};
    QpProblem p = diagonal(h, q);
    SparseRow s;
    s.add(0, 1.0);
    s.add(1, 1.0);
    p.add_row(s, 2.0, 2.0);
    const QpResult r = solve_qp(p);
    REQUIRE(r.converged);
    CHECK(r.x[0] == Approx(1.0).epsilon(1e-9));
    CHECK(r.x[1] == Approx(1.0).epsilon(1e-9));
    CHECK(std::abs(r.multipliers[0]) == Approx(1.0).epsilon(1e-7));
}

TEST_CASE("linear objective with one sided rows") {
    // min -x - y with x + 2y <= 4, 3x + y <= 6, x, y >= 0
    QpProblem p;
    p.n = 2;
    p.q = {-1.0, -1.0};
    SparseRow a;
    a.add(0, 1.0);
    a.add(1, 2.0);
    SparseRow b;
    b.add(0, 3.0);
    b.add(1, 1.0);
    p.add_row(a, -kInf, 4.0);
    p.add_row(b, -kInf, 6.0);
    p.add_row(unit(0), 0.0, kInf);
    p.add_row(unit(1), 0.0, kInf);
    const QpResult r = solve_qp(p);
    REQUIRE(r.converged);
    CHECK(r.x[0] == Approx(1.6).epsilon(1e-7));
    CHECK(r.x[1] == Approx(1.2).epsilon(1e-7));
}

TEST_CASE("phase one feasibility") {
    QpProblem p;
    p.n = 1;
    p.add_row(unit(0), 0.0, 1.0);
    p.add_row(unit(0), 0.5, 2.0);
    const FeasibilityResult ok = check_feasibility(p);
    CHECK(ok.feasible);
    CHECK(ok.min_relaxation <= 1e-8);

    QpProblem bad;
    bad.n = 1;
    bad.add_row(unit(0), 0.0, 1.0);
    bad.add_row(unit(0), 2.0, 3.0);
    const FeasibilityResult no = check_feasibility(bad);
    CHECK_FALSE(no.feasible);
    CHECK(no.min_relaxation == Approx(0.5).epsilon(1e-6));
}

TEST_CASE("kkt residual flags a wrong point") {
    const std::vector<double> h = {1.0};
    const std::vector<double> q = {-1.0};
    QpProblem p = diagonal(h, q);
    p.add_row(unit(0), -kInf, 0.5);
    const std::vector<double> good_x = {0.5};
    const std::vector<double> good_m = {0.5};
    CHECK(kkt_residual(p, good_x, good_m) <= 1e-12);
    const std::vector<double> bad_x = {0.8};
    CHECK(kkt_residual(p, bad_x, good_m) > 0.1);
}
