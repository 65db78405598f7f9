#include <doctest.h>

#include <cmath>

#include "fixtures.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/powerflow.hpp"
#include "gridcascade/verify.hpp"

using namespace gridcascade;
using doctest::Approx;

TEST_CASE("triangle flows") {
    const Network net = fixtures::tri();
    const std::vector<double> p = {1.0, -1.0, 0.0};
    const FlowSolution s = dc_power_flow(net, p);
    CHECK(s.theta[0] == 0.0);
    CHECK(s.flows[0] == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.flows[1] == Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(s.flows[2] == Approx(1.0 / 3.0).epsilon(1e-12));

    const std::vector<int> slack = {3};
    const FlowSolution pinned = dc_power_flow(net, p, {}, slack);
    CHECK(pinned.theta[0] == Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(pinned.theta[1] == Approx(-1.0 / 3.0).epsilon(1e-12));
    CHECK(pinned.theta[2] == 0.0);
    for (std::size_t e = 0; e < 3; ++e) CHECK(std::abs(pinned.flows[e] - s.flows[e]) <= 1e-12);
}

TEST_CASE("vee flows and overloads") {
    const Network net = fixtures::vee();
    const std::vector<double> p = {2.0, 0.0, -2.0};
    const FlowSolution s = dc_power_flow(net, p);
    CHECK(s.flows[0] == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.flows[1] == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(s.flows[2] == Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(overloaded_lines(net, s.flows).empty());

    const std::vector<double> stage1 = {0.0, 0.0, 2.0};
    CHECK(overloaded_lines(net, stage1) == std::vector<int>{3});
    const std::vector<double> at_limit = {2.0, 2.0, 1.5};
    CHECK(overloaded_lines(net, at_limit).empty());
}

TEST_CASE("zero injections give zero flows") {
    const Network net = fixtures::bowtie();
    const FlowSolution s = dc_power_flow(net, std::vector<double>(6, 0.0));
    for (double f : s.flows) CHECK(f == 0.0);
}

TEST_CASE("islands are solved separately") {
    const Network net = fixtures::bowtie();
    const LineMask removed = line_mask(net, std::vector<int>{4});
    const std::vector<double> p = {1.0, -1.0, 0.0, 0.5, 0.0, -0.5};
    const FlowSolution s = dc_power_flow(net, p, removed);
    CHECK(s.flows[3] == 0.0);
    CHECK(s.theta[3] == 0.0);
    const std::vector<double> oracle = verify::absolute_flows(net, p, removed);
    for (std::size_t e = 0; e < net.line_count(); ++e) CHECK(std::abs(s.flows[e] - oracle[e]) <= 1e-12);

    const std::vector<double> unbalanced = {1.0, 0.0, 0.0, 0.0, 0.0, -1.0};
    CHECK_THROWS_AS((void)dc_power_flow(net, unbalanced, removed), ImbalanceError);
}

TEST_CASE("flow conservation and slack invariance on random networks") {
    SeededUniform rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        const Scenario sc = verify::random_scenario(rng, 4 + rng.index(12), 0.2, 1.5, 2.0);
        const Network& net = sc.network;
        const FlowSolution s = dc_power_flow(net, sc.injections);
        std::vector<double> net_out(net.bus_count(), 0.0);
        for (std::size_t e = 0; e < net.line_count(); ++e) {
            net_out[net.from_index(e)] += s.flows[e];
            net_out[net.to_index(e)] -= s.flows[e];
        }
        for (std::size_t j = 0; j < net.bus_count(); ++j) CHECK(std::abs(net_out[j] - sc.injections[j]) <= 1e-9);

        const std::vector<int> slack = {net.buses.back().id};
        const FlowSolution other = dc_power_flow(net, sc.injections, {}, slack);
        const std::vector<double> oracle = verify::absolute_flows(net, sc.injections, {});
        for (std::size_t e = 0; e < net.line_count(); ++e) {
            CHECK(std::abs(other.flows[e] - s.flows[e]) <= 1e-9);
            CHECK(std::abs(oracle[e] - s.flows[e]) <= 1e-9);
        }
    }
}

TEST_CASE("laplacian matches the incidence product") {
    const Network net = fixtures::bowtie();
    const DenseMatrix l = laplacian(net);
    for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < 6; ++j) row += l(i, j);
        CHECK(std::abs(row) <= 1e-15);
    }
    CHECK(l(2, 2) == 3.0);
    CHECK(l(2, 3) == -1.0);
}

TEST_CASE("two-tree forest weights") {
    const Network t = fixtures::tri();
    CHECK(forest_weight(t, std::vector<int>{1}, std::vector<int>{3}) == Approx(2.0));
    CHECK(forest_weight(t, std::vector<int>{1, 3}, std::vector<int>{2}) == Approx(1.0));
    const Network p = fixtures::path3();
    CHECK(forest_weight(p, std::vector<int>{1}, std::vector<int>{3}) == Approx(2.0));
    Network w = fixtures::make_network(3, {{1, 2, 2.0}, {2, 3, 3.0}, {1, 3, 5.0}});
    CHECK(forest_weight(w, std::vector<int>{1}, std::vector<int>{3}) == Approx(5.0));
    CHECK_THROWS((void)forest_weight(t, std::vector<int>{1, 2}, std::vector<int>{2}));
}

TEST_CASE("matrix-forest identity on small graphs") {
    const verify::SuiteResult r = verify::matrix_forest_suite(4, 9);
    CHECK(r.ok());
    CHECK(r.worst <= 1e-9);
}
