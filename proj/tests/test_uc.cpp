#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fixtures.hpp"
#include "gridcascade/errors.hpp"
#include "gridcascade/powerflow.hpp"
#include "gridcascade/uc.hpp"

using namespace gridcascade;
using doctest::Approx;

namespace {

using Areas = std::vector<std::vector<int>>;

void all_generators(Network& net, double lo, double hi) {
    for (const Bus& b : std::vector<Bus>(net.buses)) fixtures::make_generator(net, b.id, 1.0, lo, hi);
}

// Two buses joined by one line; bus 2 is a load with a fixed box.
Network islanded_load() {
    Network net = fixtures::make_network(2, {{1, 2}});
    fixtures::make_generator(net, 1, 1.0, -2.0, 2.0);
    Bus& load = net.buses[1];
    load.demand = -1.0;
    load.d_min = 0.0;
    load.d_max = 0.0;
    return net;
}

// Bowtie plus a second tie (2,5), so losing (3,4) keeps the areas connected.
Network bowtie_with_tie() {
    Network net = fixtures::make_network(6, {{1, 2}, {2, 3}, {1, 3}, {3, 4}, {4, 5}, {5, 6}, {4, 6}, {2, 5}});
    all_generators(net, -0.1, 0.1);
    return net;
}

}  // namespace

TEST_CASE("zero imbalance has the zero optimum") {
    Network net = fixtures::tri();
    all_generators(net, -1.0, 1.0);
    const std::vector<double> r(3, 0.0);
    const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}}, r, {});
    CHECK(p.ace_groups.size() == 1);
    CHECK(check_feasible(p).feasible);
    const UcSolution s = solve_uc(p);
    REQUIRE(s.converged);
    for (double d : s.d) CHECK(std::abs(d) <= 1e-9);
    for (double f : s.flows) CHECK(std::abs(f) <= 1e-9);
}

TEST_CASE("bowtie has one ace row per area") {
    Network net = fixtures::bowtie();
    all_generators(net, -1.0, 1.0);
    const std::vector<double> r(6, 0.0);
    const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}, {4, 5, 6}}, r, {});
    CHECK(p.ace_groups.size() == 2);
    const UcCanonical c = p.canonical();
    // ACE rows follow the balance rows; the bridge is the fourth line.
    REQUIRE(c.ceq.rows() >= 2);
    const std::size_t first = c.ceq.rows() - 2;
    CHECK(c.ceq(first, 3) != 0.0);
    CHECK(c.ceq(first, 3) == -c.ceq(first + 1, 3));
    for (std::size_t e = 0; e < 7; ++e) {
        if (e != 3) CHECK(c.ceq(first, e) * c.ceq(first + 1, e) == 0.0);
    }
}

TEST_CASE("feasibility archetypes") {
    SUBCASE("islanded load") {
        const Network net = islanded_load();
        const std::vector<double> r = {1.0, -1.0};
        const LineMask removed = line_mask(net, std::vector<int>{1});
        const UcProblem p = build_uc_problem(net, {}, r, removed);
        const FeasibilityReport f = check_feasible(p);
        CHECK_FALSE(f.feasible);
        CHECK(f.min_relaxation > 1e-3);
        CHECK_THROWS_AS((void)solve_uc(p), SolverError);
    }
    SUBCASE("line too weak for a fixed transfer") {
        Network net = fixtures::make_network(2, {{1, 2, 1.0, 0.5}});
        for (Bus& b : net.buses) b.d_min = b.d_max = 0.0;
        const std::vector<double> r = {1.0, -1.0};
        const UcProblem p = build_uc_problem(net, Areas{{1, 2}}, r, {});
        CHECK_FALSE(check_feasible(p).feasible);
    }
}

TEST_CASE("bowtie failure stays in its region") {
    Network net = fixtures::bowtie();
    all_generators(net, -1.0, 1.0);
    const std::vector<double> r = {0.5, -0.5, 0.0, 0.0, 0.0, 0.0};
    const LineMask removed = line_mask(net, std::vector<int>{1});
    // Tight deviation limits on the detour force real adjustments in region A.
    std::vector<std::pair<double, double>> headroom(7, {-10.0, 10.0});
    headroom[1] = {-0.1, 0.1};
    headroom[2] = {-0.1, 0.1};
    const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}, {4, 5, 6}}, r, removed, headroom);
    const UcSolution s = solve_uc(p);
    REQUIRE(s.converged);
    CHECK(s.d[0] == Approx(0.4).epsilon(1e-7));
    CHECK(s.d[1] == Approx(-0.4).epsilon(1e-7));
    for (std::size_t j = 3; j < 6; ++j) CHECK(std::abs(s.d[j]) <= 1e-9);
    const std::size_t bridge = std::find(p.line.begin(), p.line.end(), 3) - p.line.begin();
    REQUIRE(bridge < p.line_count());
    CHECK(std::abs(s.flows[bridge]) <= 1e-9);

    const std::vector<double> lo(6, -1.0);
    const std::vector<double> hi(6, 1.0);
    const EquilibriumPoint eq = to_equilibrium(net, p, s, lo, hi);
    CHECK(eq.flows.size() == 7);
    CHECK(eq.flows[0] == 0.0);
    CHECK(eq.total_shed() == 0.0);
}

TEST_CASE("solver agrees with its kkt conditions on random imbalances") {
    SeededUniform rng(23);
    Network net = fixtures::bowtie();
    all_generators(net, -1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> r(6);
        double sum = 0.0;
        for (double& x : r) sum += (x = rng.next(-0.5, 0.5));
        for (double& x : r) x -= sum / 6.0;
        const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}, {4, 5, 6}}, r, {});
        const UcSolution s = solve_uc(p);
        REQUIRE(s.converged);
        CHECK(s.kkt_residual <= 1e-8);
        // Balance at every bus.
        std::vector<double> out(6, 0.0);
        for (std::size_t e = 0; e < p.line_count(); ++e) {
            out[p.ends[e].first] += s.flows[e];
            out[p.ends[e].second] -= s.flows[e];
        }
        for (std::size_t j = 0; j < 6; ++j) CHECK(std::abs(r[j] - s.d[j] - out[j]) <= 1e-8);
    }
}

TEST_CASE("primal-dual integrator") {
    SUBCASE("feasible problem converges to the QP optimum") {
        Network net = fixtures::tri();
        all_generators(net, -1.0, 1.0);
        const std::vector<double> r = {0.3, 0.0, -0.3};
        const LineMask removed = line_mask(net, std::vector<int>{3});
        const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}}, r, removed);
        IntegratorSettings set;
        set.horizon = 200.0;
        const Trajectory t = integrate_primal_dual(p, set);
        CHECK(t.verdict.status == DivergenceStatus::converged);
        const UcSolution s = solve_uc(p);
        const UcCanonical c = p.canonical();
        const std::vector<double>& x = t.primal.back();
        for (std::size_t e = 0; e < c.nf; ++e) CHECK(std::abs(x[e] - s.flows[e]) <= 1e-4);
        for (std::size_t j = 0; j < c.nd; ++j) CHECK(std::abs(x[c.nf + j] - s.d[j]) <= 1e-4);
    }
    SUBCASE("islanded load diverges") {
        const Network net = islanded_load();
        const std::vector<double> r = {1.0, -1.0};
        const LineMask removed = line_mask(net, std::vector<int>{1});
        const UcProblem p = build_uc_problem(net, {}, r, removed);
        const Trajectory t = integrate_primal_dual(p);
        CHECK(t.verdict.status == DivergenceStatus::diverged);
        CHECK(t.verdict.peak_dual > 1.0);
    }
}

TEST_CASE("constraint lifting") {
    SUBCASE("feasible problems take no action") {
        Network net = fixtures::tri();
        all_generators(net, -1.0, 1.0);
        const std::vector<double> r(3, 0.0);
        const UcProblem p = build_uc_problem(net, {}, r, {});
        LiftingLadder ladder;
        ladder.actions.push_back({LiftAction::Kind::allow_shed, 0, 0, {0}, 1.0});
        const LiftResult l = lift_constraints(p, ladder);
        CHECK(l.applied.empty());
        CHECK_FALSE(l.terminal);
    }
    SUBCASE("merging the areas restores feasibility") {
        const Network net = bowtie_with_tie();
        const std::vector<double> r = {0.0, 0.0, 0.4, -0.4, 0.0, 0.0};
        const LineMask removed = line_mask(net, std::vector<int>{4});
        const UcProblem p = build_uc_problem(net, Areas{{1, 2, 3}, {4, 5, 6}}, r, removed);
        CHECK_FALSE(check_feasible(p).feasible);
        const std::vector<std::size_t> assoc = {0, 1};
        const LiftingLadder ladder = default_ladder(net, p, assoc, {});
        REQUIRE_FALSE(ladder.actions.empty());
        CHECK(ladder.actions.front().kind == LiftAction::Kind::lift_ace);
        const LiftResult l = lift_constraints(p, ladder);
        REQUIRE(l.applied.size() == 1);
        CHECK(l.applied[0].kind == LiftAction::Kind::lift_ace);
        CHECK(l.problem.ace_groups.size() == 1);
        CHECK(check_feasible(l.problem).feasible);
    }
    SUBCASE("shedding an islanded load in two steps") {
        const Network net = islanded_load();
        const std::vector<double> r = {1.0, -1.0};
        const LineMask removed = line_mask(net, std::vector<int>{1});
        const UcProblem p = build_uc_problem(net, {}, r, removed);
        const LiftingLadder ladder = parse_ladder(
            R"([{"allow_shed": [2], "increment": 0.5}, {"allow_shed": [2], "increment": 0.5}])", net);
        const LiftResult l = lift_constraints(p, ladder);
        CHECK(l.applied.size() == 2);
        CHECK(l.problem.allowance[1] == Approx(1.0));
        const UcSolution s = solve_uc(l.problem);
        CHECK(s.d[1] == Approx(-1.0).epsilon(1e-7));
        const std::vector<double> lo = {-2.0, 0.0};
        const std::vector<double> hi = {2.0, 0.0};
        CHECK(to_equilibrium(net, l.problem, s, lo, hi).shed[1] == Approx(1.0).epsilon(1e-7));
    }
    SUBCASE("ladder parse errors") {
        const Network net = islanded_load();
        CHECK_THROWS((void)parse_ladder(R"([{"allow_shed": [9], "increment": 0.5}])", net));
        CHECK_THROWS((void)parse_ladder("[{", net));
    }
}
