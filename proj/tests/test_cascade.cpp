#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fixtures.hpp"
#include "gridcascade/cascade.hpp"
#include "gridcascade/verify.hpp"

using namespace gridcascade;
using doctest::Approx;

namespace {

Scenario vee_scenario() {
    Scenario sc;
    sc.network = fixtures::vee();
    fixtures::make_generator(sc.network, 1, 1.0, -3.0, 3.0, 1.0);
    fixtures::make_generator(sc.network, 2, 1.0, -3.0, 3.0, 1.0);
    sc.injections = {2.0, 0.0, -2.0};
    return sc;
}

Scenario bowtie_scenario() {
    Scenario sc;
    sc.network = fixtures::bowtie();
    for (int id = 1; id <= 6; ++id) fixtures::make_generator(sc.network, id, 1.0, -1.0, 1.0);
    sc.network.areas = {{1, 2, 3}, {4, 5, 6}};
    sc.injections = {0.6, -0.6, 0.0, 0.0, 0.0, 0.0};
    return sc;
}

CascadeConfig with(ControllerKind kind) {
    CascadeConfig c;
    c.controller = kind;
    return c;
}

}  // namespace

TEST_CASE("vee cascade under droop") {
    const Scenario sc = vee_scenario();
    const std::vector<int> first = {1};
    const CascadeTrace t = run_cascade(sc, first, with(ControllerKind::droop));
    REQUIRE(t.stages.size() >= 2);
    CHECK(t.stages.size() <= 3);
    CHECK(t.stages[0].tripped == std::vector<int>{1});
    CHECK(t.stages[0].flows[2] == Approx(2.0).epsilon(1e-12));
    CHECK(t.stages[0].new_failures == std::vector<int>{3});
    CHECK(t.stages[1].tripped == std::vector<int>{1, 3});
    CHECK(t.stages.back().new_failures.empty());
    CHECK(t.successive_failures() == 1);
    // Each island has a generator with room, so nothing is lost.
    CHECK(t.total_shed == 0.0);
    const std::vector<double>& flows = t.stages.back().flows;
    for (std::size_t e = 0; e < flows.size(); ++e) CHECK(std::abs(flows[e]) <= sc.network.lines[e].capacity + 1e-9);
}

TEST_CASE("a line with no flow changes nothing") {
    const Scenario sc = bowtie_scenario();
    const std::vector<int> first = {4};
    const CascadeTrace t = run_cascade(sc, first, with(ControllerKind::uc));
    CHECK(t.stages.size() == 1);
    CHECK(t.status == CascadeStatus::contained);
    for (double d : t.cumulative_d) CHECK(std::abs(d) <= 1e-9);
}

TEST_CASE("bowtie failure under uc stays in its region") {
    const Scenario sc = bowtie_scenario();
    const std::vector<int> first = {1};
    const CascadeTrace t = run_cascade(sc, first, with(ControllerKind::uc));
    REQUIRE(t.stages.size() == 1);
    CHECK_FALSE(t.critical());
    CHECK(t.successive_failures() == 0);
    CHECK(std::abs(t.stages[0].flows[3]) <= 1e-9);
    for (std::size_t j = 3; j < 6; ++j) CHECK(std::abs(t.cumulative_d[j]) <= 1e-9);
}

TEST_CASE("controllers agree when nothing binds") {
    const Scenario sc = bowtie_scenario();
    const std::vector<int> first = {1};
    for (ControllerKind k : {ControllerKind::droop, ControllerKind::agc, ControllerKind::uc}) {
        const CascadeTrace t = run_cascade(sc, first, with(k));
        CHECK(t.stages.size() == 1);
        CHECK(t.total_shed == 0.0);
    }
}

TEST_CASE("traces are deterministic") {
    const Scenario sc = vee_scenario();
    const std::vector<int> first = {1};
    const CascadeConfig c = with(ControllerKind::droop);
    CHECK(trace_to_json(sc.network, run_cascade(sc, first, c)) ==
          trace_to_json(sc.network, run_cascade(sc, first, c)));
}

TEST_CASE("bad initial failures") {
    const Scenario sc = vee_scenario();
    CHECK_THROWS_AS((void)run_cascade(sc, std::vector<int>{}, CascadeConfig{}), std::invalid_argument);
    CHECK_THROWS_AS((void)run_cascade(sc, std::vector<int>{42}, CascadeConfig{}), std::invalid_argument);
}

TEST_CASE("controller names") {
    CHECK(parse_controller("agc") == ControllerKind::agc);
    CHECK(controller_name(ControllerKind::uc) == "uc");
    CHECK(parse_detect("dynamic") == DetectMode::dynamic);
    CHECK_THROWS((void)parse_controller("pid"));
}

TEST_CASE("deviation staging matches absolute power flow") {
    const verify::SuiteResult r = verify::cascade_oracle_suite(10, 71);
    CHECK(r.ok());
    CHECK(r.worst <= 1e-8);
}
