#include <doctest.h>

#include <filesystem>

#include "fixtures.hpp"
#include "gridcascade/controllers.hpp"
#include "gridcascade/harness.hpp"

using namespace gridcascade;
using doctest::Approx;

namespace {

// Triangle with generators at 1 and 2, load at 3.
Network tri_case(double capacity) {
    Network net = fixtures::tri();
    for (Line& l : net.lines) l.capacity = capacity;
    for (int id : {1, 2}) {
        Bus& b = net.buses[net.bus_index(id)];
        b.kind = BusKind::generator;
        b.gen_max = 2.0;
        b.droop_gain = 1.0;
    }
    net.buses[2].demand = -1.0;
    return net;
}

}  // namespace

TEST_CASE("ccdf") {
    const std::vector<double> a = {0.0, 0.0, 1.0};
    const CcdfSeries ca = emit_ccdf(a);
    REQUIRE(ca.size() == 2);
    CHECK(ca[0].first == 0.0);
    CHECK(ca[0].second == Approx(1.0 / 3.0));
    CHECK(ca[1].second == 0.0);

    const std::vector<double> zeros(4, 0.0);
    const CcdfSeries cz = emit_ccdf(zeros);
    REQUIRE(cz.size() == 1);
    CHECK(cz[0].second == 0.0);

    const std::vector<double> b = {0.01, 0.02, 0.14};
    const CcdfSeries cb = emit_ccdf(b);
    double above = -1.0;
    for (const auto& [x, frac] : cb) {
        if (x <= 0.1) above = frac;
    }
    CHECK(above == Approx(1.0 / 3.0));
    CHECK(cb.front().first == 0.0);

    CHECK(emit_ccdf(std::vector<double>{}).empty());
}

TEST_CASE("spread") {
    const std::vector<double> v = {1.0, 2.0, 3.0, 4.0};
    const SpreadStats s = spread_of(v);
    CHECK(s.mean == 2.5);
    CHECK(s.min == 1.0);
    CHECK(s.max == 4.0);
    CHECK(s.stddev == Approx(1.2909944487));
}

TEST_CASE("digest is fnv-1a") {
    CHECK(config_digest("") == "cbf29ce484222325");
    CHECK(config_digest("a") == "af63dc4c8601ec8c");
}

TEST_CASE("profiles are reproducible") {
    const Network net = tri_case(10.0);
    const ProfileSet a = generate_profiles(net, 3, 0.1, 9);
    const ProfileSet b = generate_profiles(net, 3, 0.1, 9);
    REQUIRE(a.scenarios.size() == 3);
    for (std::size_t k = 0; k < 3; ++k) CHECK(a.scenarios[k].injections == b.scenarios[k].injections);
    CHECK(a.scenarios[0].injections != a.scenarios[1].injections);
}

TEST_CASE("one profile on the triangle gives one cell per line") {
    const Network net = tri_case(10.0);
    const ProfileSet ps = generate_profiles(net, 1, 0.05, 3);
    ScanConfig cfg;
    cfg.threads = 1;
    cfg.cascade.controller = ControllerKind::uc;
    const ScanReport r = n_minus_1_scan(ps.scenarios, cfg);
    CHECK(r.cells.size() == 3);
    CHECK(r.failures == 0);
    // Ten times the largest possible flow: nothing can overload.
    CHECK(r.vulnerable.max == 0.0);
    CHECK(r.max_loss_rate == 0.0);

    const std::filesystem::path dir = std::filesystem::temp_directory_path() / "gridcascade_harness_test";
    std::filesystem::remove_all(dir);
    write_report(r, dir);
    for (const char* f : {"cells.csv", "summary.json", "ccdf_loss.csv", "ccdf_generators.csv"}) {
        CHECK(std::filesystem::exists(dir / f));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("thread count is honoured") {
    CHECK(worker_count(3) == 3);
    CHECK(worker_count(0) >= 1);
}
