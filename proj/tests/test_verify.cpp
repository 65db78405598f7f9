#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/graph.hpp"
#include "gridcascade/verify.hpp"

using namespace gridcascade;
using doctest::Approx;

TEST_CASE("lu oracles") {
    DenseMatrix a(3, 3);
    const double v[3][3] = {{0.0, 2.0, 1.0}, {1.0, 1.0, 0.0}, {3.0, 0.0, 1.0}};
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) a(i, j) = v[i][j];
    }
    CHECK(verify::lu_determinant(a) == Approx(-5.0));
    const std::vector<double> x = verify::lu_solve(a, {3.0, 2.0, 4.0});
    CHECK(x[0] == Approx(1.0));
    CHECK(x[1] == Approx(1.0));
    CHECK(x[2] == Approx(1.0));
    DenseMatrix s(2, 2);
    s(0, 0) = s(0, 1) = s(1, 0) = s(1, 1) = 1.0;
    CHECK(verify::lu_determinant(s) == 0.0);
    CHECK_THROWS_AS((void)verify::lu_solve(s, {1.0, 1.0}), SolverError);
}

TEST_CASE("brute-force bridges on the bowtie") {
    Topology t;
    t.vertex_count = 6;
    t.edges = {{0, 1}, {1, 2}, {0, 2}, {2, 3}, {3, 4}, {4, 5}, {3, 5}};
    CHECK(verify::brute_force_bridges(t) == std::vector<std::size_t>{3});
    CHECK(verify::brute_force_regions(t) == std::vector<std::size_t>{0, 0, 0, 3, 3, 3});
    // A doubled edge is never a bridge.
    t.edges.push_back({2, 3});
    CHECK(verify::brute_force_bridges(t).empty());
}

TEST_CASE("droop reference on a two-bus island") {
    Network net = fixtures::make_network(2, {{1, 2}});
    fixtures::make_generator(net, 1, 1.0, -5.0, 5.0, 1.0);
    fixtures::make_generator(net, 2, 1.0, -5.0, 5.0, 1.0);
    const std::vector<double> r = {2.0, 0.0};
    const std::vector<double> lo(2, -5.0);
    const std::vector<double> hi(2, 5.0);
    const verify::DroopReference ref = verify::droop_reference(net, r, {}, lo, hi);
    CHECK(ref.d[0] == Approx(0.5).epsilon(1e-7));
    CHECK(ref.d[1] == Approx(0.5).epsilon(1e-7));
    CHECK(ref.omega[0] == Approx(0.5).epsilon(1e-7));
}

TEST_CASE("generated instances respect their plan") {
    SeededUniform rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const verify::PartitionedInstance inst = verify::random_tree_partitioned(rng);
        const TreePartition tp = tree_partition(inst.network);
        CHECK(tp.regions.size() == inst.regions.size());
        CHECK(tp.bridges.size() + 1 == inst.regions.size());
        double sum = 0.0;
        for (double p : inst.injections) sum += p;
        CHECK(std::abs(sum) <= 1e-9);
    }
    for (int trial = 0; trial < 20; ++trial) {
        const Scenario sc = verify::random_scenario(rng, 8, 0.3, 1.2, 2.0);
        CHECK(sc.network.bus_count() == 8);
        CHECK(sc.network.line_count() >= 7);
        CHECK_NOTHROW((void)tree_partition(sc.network));
    }
}

TEST_CASE("property suites in miniature") {
    CHECK(verify::bridge_nulling_suite(20, 1).ok());
    CHECK(verify::localization_suite(20, 2).ok());
    CHECK(verify::closure_potential_suite(20, 3).ok());
    verify::DetectorCounts counts;
    const verify::SuiteResult det = verify::detector_suite(5, 4, &counts);
    CHECK(det.ok());
    CHECK(counts.false_negatives == 0);
    CHECK(counts.false_positives == 0);
    CHECK(counts.infeasible == 5);
    CHECK(counts.feasible == 5);
    CHECK_FALSE(verify::describe(det).empty());
}
